import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from threshreg import _core, _pycore
from threshreg.wavelets import FAMILIES, get_basis

ccore = pytest.importorskip("threshreg._ccore")


def test_compiled_backend_selected():
    assert _core.BACKEND == "cython"


@given(st.sampled_from(FAMILIES), st.integers(1, 11), st.integers(0, 2 ** 32 - 1))
def test_backends_agree(family, R, seed):
    b = get_basis(family)
    x = np.random.default_rng(seed).standard_normal(2 ** R)
    f_c = ccore.forward(x, b.dec_lo, b.dec_hi, 0)
    f_p = _pycore.forward(x, b.dec_lo, b.dec_hi, 0)
    np.testing.assert_allclose(f_c, f_p, rtol=0, atol=1e-12)
    np.testing.assert_allclose(ccore.inverse(f_c, b.dec_lo, b.dec_hi, 0),
                               _pycore.inverse(f_c, b.dec_lo, b.dec_hi, 0), rtol=0, atol=1e-12)


def test_pure_python_switch():
    env = {**os.environ, "THRESHREG_PURE_PYTHON": "1"}
    code = "import threshreg._core as c; print(c.BACKEND)"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
