import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from threshreg.errors import AssumptionViolated, InvalidArgument, SingularSystem
from threshreg.kernels import Kernel, custom, gaussian, indicator_partition, kernel_from_config, laplacian
from threshreg.rkhs import (
    RkhsFit,
    build_design,
    certify_delta,
    empirical_norm,
    fit_rkhs,
    grid_anchors,
    quantile_anchors,
    recommended_T,
    select_anchor_count,
    solve_coefficients,
)
from threshreg.sample import Sample
from threshreg.thresholding import hard_threshold

# (1 + e**-2) / 2 and sqrt(14/3) at 20 digits (mpmath)
GAUSS_M = 0.56766764161830634595
SQRT_14_3 = 2.1602468994692867437


def verify_certificate(M, delta, directions=1000, seed=0):
    """Count violations of the eigenvalue and sup-norm bounds over random unit vectors."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((directions, M.shape[0]))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    quad = np.einsum("ij,jk,ik->i", x, M, x)
    slack = 1e-12
    low = quad < (1 - delta) ** 2 * (1 - slack)
    high = quad > (1 + delta) ** 2 * (1 + slack)
    sup = np.max(np.abs(x @ M), axis=1) < (1 - delta) * np.max(np.abs(x), axis=1) * (1 - slack)
    return int(np.sum(low | high | sup))


def random_gram(rng, p):
    a = rng.standard_normal((p, p))
    E = 0.3 * (a + a.T) / (2 * math.sqrt(p))
    M = np.eye(p) + E / max(1.0, np.linalg.norm(E, 2) / 0.4)
    return 0.5 * (M + M.T)


@pytest.mark.parametrize("n,p", [(100, 4), (3, 1), (2, 1), (256, 6), (1024, 12), (8192, 30)])
def test_anchor_count_matches_extended_precision(n, p):
    assert select_anchor_count(n) == p


@pytest.mark.parametrize("n", [0, 1, 2.5])
def test_anchor_count_rejects_small_n(n):
    with pytest.raises(InvalidArgument):
        select_anchor_count(n)


@given(st.integers(2, 10**6))
def test_anchor_count_is_floor(n):
    p = select_anchor_count(n)
    assert p >= 1 and p * p <= n / math.log(n) < (p + 1) ** 2 or p == 1


def test_design_examples():
    one = custom(lambda x, y: 1.0, kappa=1.0)
    d = build_design(one, [0.0], [0.2, 0.7])
    np.testing.assert_array_equal(d.K_design, [[1.0, 1.0]])
    np.testing.assert_array_equal(d.M_np, [[1.0]])

    X = np.array([0.1, 0.4, 0.9])
    delta_kernel = custom(lambda x, y: float(np.all(x == y)), kappa=1.0)
    d = build_design(delta_kernel, X, X)
    np.testing.assert_array_equal(d.K_design, np.eye(3))
    np.testing.assert_allclose(d.M_np, np.eye(3) / 3)

    d = build_design(gaussian(1.0), [0.0], [0.0, 1.0])
    assert d.M_np[0, 0] == pytest.approx(GAUSS_M, rel=1e-14)


@given(st.integers(1, 8), st.integers(1, 40), st.integers(0, 2**32 - 1))
def test_design_gram_symmetric_and_bounded(p, n, seed):
    rng = np.random.default_rng(seed)
    k = gaussian(0.3, scale=1.7)
    d = build_design(k, grid_anchors(p), rng.random(n))
    assert np.array_equal(d.M_np, d.M_np.T)
    assert np.all(np.abs(d.M_np) <= k.kappa ** 2 * (1 + 1e-12))


def test_kernels_symmetric_and_bounded(rng):
    a, b = rng.uniform(-2, 2, 50), rng.uniform(-2, 2, 50)
    for k in (gaussian(0.4, 2.0), laplacian(0.3), indicator_partition(0.25, 3.0)):
        Kab, Kba = k.matrix(a, b), k.matrix(b, a)
        np.testing.assert_array_equal(Kab, Kba.T)
        assert np.all(np.abs(Kab) <= k.kappa)


def test_kernel_config_round_trip():
    k = kernel_from_config({"name": "laplacian", "bandwidth": 0.2})
    assert kernel_from_config(k.to_config()) == k
    with pytest.raises(InvalidArgument):
        kernel_from_config({"name": "cosine"})
    with pytest.raises(InvalidArgument):
        kernel_from_config({"name": "gaussian", "bandwidth": -1})


def test_certificate_examples():
    assert certify_delta(np.eye(3)).delta == 0.0
    assert certify_delta(np.diag([0.81, 1.21])).delta == pytest.approx(0.19, abs=1e-15)
    with pytest.raises(AssumptionViolated) as info:
        certify_delta(np.diag([1.0, 0.0]))
    assert "lambda_min" in info.value.quantities


def test_certificate_refuses_far_from_diagonal():
    with pytest.raises(AssumptionViolated):
        certify_delta(np.diag([0.5, 4.5]))
    with pytest.raises(InvalidArgument):
        certify_delta(np.array([[1.0, 0.1], [0.2, 1.0]]))


@given(st.integers(1, 32), st.integers(0, 2**32 - 1))
def test_certificate_sound_on_random_directions(p, seed):
    rng = np.random.default_rng(seed)
    M = random_gram(rng, p)
    try:
        cert = certify_delta(M)
    except AssumptionViolated:
        return
    assert 0 <= cert.delta < 1
    assert (1 - cert.delta) ** 2 <= cert.lambda_min * (1 + 1e-12)
    assert cert.lambda_max <= (1 + cert.delta) ** 2 * (1 + 1e-12)
    assert cert.inf_norm_inverse <= 1 / (1 - cert.delta) * (1 + 1e-12)
    assert verify_certificate(M, cert.delta, seed=seed) == 0


@given(st.integers(1, 10), st.integers(0, 2**32 - 1))
def test_certificate_is_smallest(p, seed):
    M = random_gram(np.random.default_rng(seed), p)
    cert = certify_delta(M)
    d = cert.delta - 1e-9
    if d > 0:
        fails = ((1 - d) ** 2 > cert.lambda_min or cert.lambda_max > (1 + d) ** 2
                 or cert.inf_norm_inverse > 1 / (1 - d))
        assert fails


def test_solve_examples():
    one = custom(lambda x, y: 1.0, kappa=1.0)
    d = build_design(one, [0.5], [0.1, 0.9])
    np.testing.assert_allclose(solve_coefficients(d, [2.0, 4.0]), [3.0])
    d = build_design(gaussian(0.1), grid_anchors(5), np.linspace(0, 1, 50))
    np.testing.assert_array_equal(solve_coefficients(d, np.zeros(50)), np.zeros(5))


@given(st.integers(1, 12), st.integers(0, 2**32 - 1))
def test_solve_recovers_in_span_coefficients(p, seed):
    rng = np.random.default_rng(seed)
    d = build_design(gaussian(0.5 / p), grid_anchors(p), rng.random(20 * p))
    alpha = rng.uniform(-3, 3, p)
    z = solve_coefficients(d, d.K_design.T @ alpha)
    np.testing.assert_allclose(z, alpha, rtol=1e-8, atol=1e-8 * np.abs(alpha).max())
    G, rhs = d.K_design @ d.K_design.T, d.K_design @ (d.K_design.T @ alpha)
    assert np.linalg.norm(G @ z - rhs) <= 1e-8 * np.linalg.norm(rhs)


@given(st.floats(-50, 50).filter(lambda c: abs(c) > 1e-3), st.integers(0, 2**32 - 1))
def test_raw_solve_scale_equivariant(c, seed):
    rng = np.random.default_rng(seed)
    d = build_design(gaussian(0.1), grid_anchors(6), rng.random(60))
    y = rng.standard_normal(60)
    np.testing.assert_allclose(solve_coefficients(d, c * y), c * solve_coefficients(d, y),
                               rtol=1e-9, atol=1e-12)


def test_singular_system_reported():
    one = custom(lambda x, y: 1.0, kappa=1.0)
    d = build_design(one, [0.2, 0.8], np.linspace(0, 1, 10))
    with pytest.raises(SingularSystem) as info:
        solve_coefficients(d, np.ones(10))
    assert info.value.condition > 1e12


def _cell_kernel(P):
    return indicator_partition(1 / P, scale=math.sqrt(P))


def test_noiseless_fit_recovers_coefficients(rng):
    P, n = 8, 1024
    k, anchors = _cell_kernel(P), grid_anchors(P)
    x = rng.random(n)
    alpha = rng.choice([-1, 1], P) * rng.uniform(1.0, 2.0, P)
    fit = fit_rkhs(Sample(x, alpha @ k.matrix(anchors, x)), k, anchors)
    assert np.all(np.abs(alpha) >= 2 * fit.lambda_n)
    np.testing.assert_allclose(fit.z_thresholded, alpha, rtol=1e-6)
    assert empirical_norm(lambda t: fit.raw(t) - alpha @ k.matrix(anchors, t), x) <= 1e-6


def test_zero_response_gives_zero_fit(rng):
    x = rng.random(200)
    fit = fit_rkhs(Sample(x, np.zeros(200)), gaussian(0.05, 2.0), grid_anchors(5))
    assert fit.is_zero()
    np.testing.assert_array_equal(fit(np.linspace(0, 1, 7)), 0.0)


def test_fit_invariants(rng):
    x = rng.random(300)
    y = np.sin(6 * x) + rng.uniform(-0.2, 0.2, 300)
    k = indicator_partition(0.2, scale=math.sqrt(5))
    fit = fit_rkhs(Sample(x, y), k, grid_anchors(5), T=1.0)
    np.testing.assert_array_equal(fit.z_thresholded, hard_threshold(fit.z_raw, fit.lambda_n))
    t = np.linspace(0, 1, 11)
    np.testing.assert_allclose(fit(t), fit.z_thresholded @ k.matrix(fit.anchors, t))


def test_default_anchors_are_quantiles(rng):
    x = rng.random(1024)
    fit = fit_rkhs(Sample(x, np.zeros(1024)), gaussian(0.04, 2.5))
    np.testing.assert_allclose(fit.anchors[:, 0], quantile_anchors(x, 12))


def test_fit_propagates_assumption_failure(rng):
    x = rng.random(100)
    with pytest.raises(AssumptionViolated):
        fit_rkhs(Sample(x, x), gaussian(1.0, scale=3.0), grid_anchors(4))


def test_low_T_only_warns(rng, caplog):
    import logging

    from threshreg import rkhs

    rkhs._warned_T.clear()
    caplog.set_level(logging.WARNING, logger="threshreg.rkhs")
    x = rng.random(256)
    fit_rkhs(Sample(x, np.zeros(256)), _cell_kernel(4), grid_anchors(4), T=4.0, M=10.0)
    assert "admissible" in caplog.text
    assert recommended_T(10.0) == pytest.approx(math.sqrt(100.5))
    assert recommended_T(1.0) == 4.0


def test_fit_document_round_trip(rng):
    x = rng.random(400)
    y = np.cos(5 * x)
    k = _cell_kernel(4)
    fit = fit_rkhs(Sample(x, y), k, grid_anchors(4), T=1.0)
    doc = json.loads(json.dumps(fit.to_dict()))
    assert {"kernel", "anchors", "z_raw", "z_thresholded", "lambda_n", "delta"} <= set(doc)
    back = RkhsFit.from_dict(doc)
    t = rng.random(100)
    np.testing.assert_allclose(back(t), fit(t), atol=1e-12)


def test_empirical_norm_examples():
    assert empirical_norm(lambda t: np.full(len(t), -2.5), np.arange(4.0)) == 2.5
    assert empirical_norm(lambda t: np.zeros(len(t)), np.arange(4.0)) == 0.0
    assert empirical_norm(lambda t: t, np.array([1.0, 2.0, 3.0])) == pytest.approx(SQRT_14_3, rel=1e-15)


def test_anchor_validation():
    with pytest.raises(InvalidArgument):
        build_design(gaussian(1.0), [0.5, 0.5], [0.1])
    with pytest.raises(InvalidArgument):
        quantile_anchors(np.zeros(10), 3)
    assert isinstance(gaussian(1.0), Kernel)
