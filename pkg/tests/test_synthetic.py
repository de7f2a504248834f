import math
import pickle

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from threshreg.errors import InvalidArgument, InvalidScenario
from threshreg.kernels import gaussian, indicator_partition
from threshreg.rkhs import grid_anchors
from threshreg.synthetic import (
    analytic_warp,
    draw_sample,
    holder_tail_l2,
    make_holder_scenario,
    make_null_scenario,
    make_rkhs_sparse_scenario,
    power_law_coefficients,
    small_coefficient_energy,
    warp_from_config,
    weak_count,
)
from threshreg.wavelets import FAMILIES, besov_sup_norm, grid_point_values

DKW_BAND_1E4 = 0.016276236307187292551  # sqrt(ln(2 / 0.01) / (2 * 10**4))

WARPS = [
    analytic_warp("uniform"),
    analytic_warp("uniform", a=-2.0, b=3.0),
    analytic_warp("triangular"),
    analytic_warp("triangular", a=0.0, b=2.0, mode=0.3),
    analytic_warp("kumaraswamy", alpha=2.0, beta=3.0),
    analytic_warp("kumaraswamy", alpha=1.0, beta=2.5),
]


def test_uniform_warps():
    t = np.linspace(0, 1, 11)
    np.testing.assert_allclose(analytic_warp("uniform").G(t), t, atol=0)
    w = analytic_warp("uniform", a=2.0, b=6.0)
    assert w.G(3.0) == pytest.approx(0.25)
    assert w.G(1.0) == 0.0 and w.G(7.0) == 1.0


def test_triangular_quarter():
    assert analytic_warp("triangular").G(0.25) == pytest.approx(0.125, rel=1e-15)


@pytest.mark.parametrize("warp", WARPS, ids=lambda w: f"{w.name}-{sorted(w.params.values())}")
def test_inverse_and_density(warp):
    u = np.linspace(0, 1, 1002)[1:-1]
    assert np.max(np.abs(warp.G(warp.G_inverse(u)) - u)) <= 1e-10
    lo, hi = warp.support
    t = np.linspace(lo, hi, 2001)
    assert np.all(np.diff(warp.G(t)) > 0)
    # density is the derivative of G
    mid = 0.5 * (t[1:] + t[:-1])
    deriv = np.diff(warp.G(t)) / np.diff(t)
    np.testing.assert_allclose(deriv, warp.density(mid), rtol=1e-3, atol=1e-3)
    assert warp_from_config(warp.to_config()) == warp


def test_unsupported_design():
    with pytest.raises(InvalidArgument):
        analytic_warp("cauchy")
    with pytest.raises(InvalidArgument):
        analytic_warp("uniform", a=1.0, b=0.0)
    with pytest.raises(InvalidArgument):
        analytic_warp("kumaraswamy", alpha=0.5, beta=2.0)


def test_dkw_band_uniform_design():
    assert math.sqrt(math.log(200) / 2e4) == pytest.approx(DKW_BAND_1E4, rel=1e-14)
    scen = make_null_scenario(seed=99)
    x = np.sort(draw_sample(scen, 10 ** 4, 0).x)
    i = np.arange(1, x.size + 1) / x.size
    dist = max(np.max(i - x), np.max(x - (i - 1 / x.size)))
    assert dist <= DKW_BAND_1E4


def test_noiseless_draw_is_exact():
    scen = make_holder_scenario(1.0, "daubechies-4", noise_amplitude=0.0, seed=4)
    s = draw_sample(scen, 500, 3)
    np.testing.assert_array_equal(s.y, scen.f_rho(s.x))


def test_draws_are_deterministic():
    scen = make_holder_scenario(1.0, "haar", analytic_warp("triangular"), seed=7)
    a, b = draw_sample(scen, 300, 5), draw_sample(scen, 300, 5)
    np.testing.assert_array_equal(a.x, b.x)
    np.testing.assert_array_equal(a.y, b.y)
    c = draw_sample(scen, 300, 6)
    assert not np.array_equal(a.x, c.x)
    d = draw_sample(scen.with_seed(8), 300, 5)
    assert not np.array_equal(a.x, d.x)


def test_scenario_pickles():
    scen = make_rkhs_sparse_scenario(gaussian(0.1), grid_anchors(8), 1.0, seed=1)
    back = pickle.loads(pickle.dumps(scen))
    s1, s2 = draw_sample(scen, 64, 2), draw_sample(back, 64, 2)
    np.testing.assert_array_equal(s1.y, s2.y)


def test_noise_symmetry():
    a = 0.5
    scen = make_null_scenario(noise_amplitude=a, seed=31)
    eps = draw_sample(scen, 10 ** 5, 0).y
    sigma = a / math.sqrt(3)
    assert abs(eps.mean()) <= 4 * sigma / math.sqrt(10 ** 5)
    assert np.max(np.abs(eps)) <= a


@pytest.mark.parametrize("family", FAMILIES)
@pytest.mark.parametrize("design", ["uniform", "kumaraswamy"])
def test_holder_bound_and_besov(family, design):
    scen = make_holder_scenario(1.5, family, analytic_warp(design), M=2.0, noise_amplitude=0.25, j_max=10, seed=2)
    c = scen.config["c"]
    assert besov_sup_norm(scen.coefficients, 1.5) == pytest.approx(c, rel=1e-14)
    assert scen.sup_f + scen.noise_amplitude == pytest.approx(1.0, rel=1e-12)
    for r in range(5):
        assert np.max(np.abs(draw_sample(scen, 2000, r).y)) <= 1.0
    # s' > s grows like 2**(j_max (s' - s))
    assert besov_sup_norm(scen.coefficients, 2.0) == pytest.approx(c * 2 ** (10 * 0.5), rel=1e-14)


@pytest.mark.parametrize("family", FAMILIES)
def test_holder_function_matches_coefficients(family):
    scen = make_holder_scenario(1.0, family, j_max=8, seed=0)
    R = scen.f_rho.R
    u = np.arange(2 ** R + 1) / 2 ** R
    direct = grid_point_values(scen.coefficients, scen.basis, R)
    np.testing.assert_allclose(scen.f_on_unit(u), direct, atol=1e-12)


@given(st.floats(0.2, 3.0), st.integers(2, 16), st.floats(0.1, 10.0))
def test_holder_tail_bound(s, j_max, c):
    exact = c * math.sqrt(sum(2.0 ** (-j * (2 * s + 1)) for j in range(j_max + 1, j_max + 400)))
    assert holder_tail_l2(c, s, j_max) == pytest.approx(exact, rel=1e-10)
    assert holder_tail_l2(c, s, j_max) <= c * 2.0 ** (-j_max * s) / math.sqrt(1 - 4.0 ** (-s))


def test_budget_violation_raises():
    with pytest.raises(InvalidScenario):
        make_holder_scenario(1.0, "haar", M=2.0, noise_amplitude=0.25, c=5.0)
    with pytest.raises(InvalidScenario):
        make_null_scenario(M=1.0, noise_amplitude=0.6)
    with pytest.raises(InvalidScenario):
        make_rkhs_sparse_scenario(gaussian(0.2), grid_anchors(4), 1.0, M=2.0, noise_amplitude=0.5, c=10.0)


def test_rkhs_sparse_in_span():
    anchors = grid_anchors(16)
    k = indicator_partition(1 / 16, 4.0)
    scen = make_rkhs_sparse_scenario(k, anchors, 1.0, M=4.0, noise_amplitude=0.5, seed=3)
    # each cell holds one anchor, so f at a point equals alpha times the kernel scale
    np.testing.assert_allclose(scen.f_rho(anchors), 4.0 * scen.alpha, rtol=1e-15)
    np.testing.assert_allclose(scen.alpha, scen.config["c"] * np.arange(1, 17) ** -1.5)
    assert scen.sup_f + 0.5 == pytest.approx(2.0)
    s = draw_sample(scen, 1000, 0)
    assert np.max(np.abs(s.y)) <= 2.0


def _weak_count_oracle(lam, s):
    mpmath.mp.dps = 40
    return int(mpmath.floor(mpmath.mpf(lam) ** (-1 / (mpmath.mpf(s) + 0.5))))


@pytest.mark.parametrize("s", [0.75, 1.0, 2.0])
def test_weak_count_and_energy(s):
    p = 200000
    alpha = power_law_coefficients(p, s)
    c_prime = 1 / (2 * s) + 1
    # the grid is offset so that no count sits on an exact integer boundary
    for e in np.linspace(0, 10, 41) + 0.0123:
        lam = 2.0 ** -e
        got = weak_count(alpha, lam)
        assert got == min(p, _weak_count_oracle(lam, s))
        assert got <= lam ** (-2 / (1 + 2 * s)) * (1 + 1e-12)
        assert small_coefficient_energy(alpha, lam) <= c_prime * lam ** (4 * s / (1 + 2 * s))
