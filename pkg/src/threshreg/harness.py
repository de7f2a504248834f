"""Monte Carlo estimation of exceedance curves, loss moments and rate exponents.

Every replication draws its own sample from the scenario's
``(master_seed, n, replication)`` stream, fits the configured estimator and
records one loss.  Replications run in any order (optionally in worker
processes) and are reduced by replication index, so results do not depend
on the schedule.  A replication whose estimator raises one of the package's
errors is scored as an infinite loss.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from threshreg.errors import InvalidArgument, ThreshRegError
from threshreg.kernels import kernel_from_config
from threshreg.rkhs import empirical_norm, fit_rkhs, grid_anchors, quantile_anchors, select_anchor_count
from threshreg.synthetic import Scenario, draw_sample
from threshreg.wavelet_estimator import NODE_RULES, fit_wavelet, select_max_level
from threshreg.wavelets import get_basis

WILSON_Z = 1.959963984540054
MIN_REPLICATIONS = 30
MAX_FAILURE_FRACTION = 0.10
NORMS = ("population", "empirical")
ANCHOR_POLICIES = ("quantile", "grid", "scenario")


class StudyRefused(ThreshRegError):
    """Too many replications failed for a rate fit to be meaningful."""


def population_loss(f_hat, scenario: Scenario, quadrature_points: int = 4096) -> float:
    """``sqrt(int_0^1 (f_hat - f_rho)**2 (G^{-1}(u)) du)`` by the composite midpoint rule.

    Nodes sit at ``(q + 1/2) / Q``; with ``Q`` a power of two every dyadic
    breakpoint coarser than ``1/Q`` lies on a cell boundary, so step
    functions in ``u`` are integrated exactly.  For piecewise-smooth
    integrands the error is ``O(Q**-2)``.
    """
    if int(quadrature_points) != quadrature_points or quadrature_points < 16:
        raise InvalidArgument(f"quadrature_points must be an integer >= 16, got {quadrature_points!r}")
    Q = int(quadrature_points)
    u = (np.arange(Q) + 0.5) / Q
    x = scenario.design.G_inverse(u)
    diff = np.asarray(f_hat(x), dtype=np.float64) - scenario.f_on_unit(u)
    return float(math.sqrt(np.mean(diff * diff)))


def empirical_loss(f_hat, scenario: Scenario, x) -> float:
    """Root mean square of ``f_hat - f_rho`` over the design points ``x``."""
    return empirical_norm(lambda t: np.asarray(f_hat(t)) - scenario.f_rho(t), x)


@dataclass(frozen=True)
class EstimatorConfig:
    """Which estimator to run and how its tuning parameters are chosen.

    ``kind="wavelet"`` uses ``basis``, ``rule`` and either a fixed ``J``, the
    smoothness-aware level (``s``) or the universal level.  ``kind="rkhs"``
    uses ``kernel`` (a kernel config; ``"auto"`` parameters are resolved
    from the anchor count and the sample) with anchors chosen by
    ``anchors``: empirical quantiles, a regular grid on the design support,
    or the scenario's own anchors.
    """

    kind: str = "wavelet"
    T: float = 4.0
    basis: str = "haar"
    J: int | None = None
    s: float | None = None
    rule: str = "point"
    kernel: dict | None = None
    anchors: str = "quantile"

    def __post_init__(self):
        if self.kind not in ("wavelet", "rkhs"):
            raise InvalidArgument(f"estimator kind must be 'wavelet' or 'rkhs', got {self.kind!r}")
        if not (self.T > 0 and math.isfinite(self.T)):
            raise InvalidArgument(f"T must be positive, got {self.T!r}")
        if self.kind == "wavelet":
            get_basis(self.basis)
            if self.rule not in NODE_RULES:
                raise InvalidArgument(f"rule must be one of {NODE_RULES}")
        if self.anchors not in ANCHOR_POLICIES:
            raise InvalidArgument(f"anchors must be one of {ANCHOR_POLICIES}")
        if self.kind == "rkhs" and self.anchors != "scenario" and self.kernel is None:
            raise InvalidArgument("rkhs estimator needs a kernel unless anchors='scenario'")

    @property
    def name(self) -> str:
        if self.kind == "wavelet":
            return f"wavelet-{get_basis(self.basis).family}"
        kname = self.kernel["name"] if self.kernel else "scenario"
        return f"rkhs-{kname}"

    def to_dict(self) -> dict:
        return asdict(self)

    def fit(self, sample, scenario: Scenario | None = None):
        if self.kind == "wavelet":
            J = self.J
            if J is None:
                J = select_max_level(sample.n, self.s)
            return fit_wavelet(sample, self.basis, self.T, J, rule=self.rule)
        anchors, kernel = self._rkhs_setup(sample, scenario)
        return fit_rkhs(sample, kernel, anchors, self.T, M=scenario.M if scenario else None)

    def _rkhs_setup(self, sample, scenario):
        if self.anchors == "scenario":
            if scenario is None or scenario.anchors is None:
                raise InvalidArgument("anchors='scenario' needs a scenario with anchors")
            anchors = scenario.anchors
            kernel = scenario.kernel if self.kernel is None else None
        else:
            p = select_anchor_count(sample.n)
            if self.anchors == "quantile":
                anchors = quantile_anchors(sample.x, p)
            else:
                lo, hi = scenario.design.support if scenario else (float(np.min(sample.x)), float(np.max(sample.x)))
                anchors = grid_anchors(p, lo, hi)
            kernel = None
        if kernel is None:
            kernel = resolve_kernel(self.kernel, anchors, sample.x)
        return anchors, kernel


def resolve_kernel(cfg: dict, anchors, x):
    """Fill ``"auto"`` kernel parameters.

    ``bandwidth``/``width`` become the mean anchor spacing (half of it for
    smooth kernels), ``origin`` the left cell edge, and ``scale`` the factor
    giving the kernel sections unit mean empirical norm on ``x``.
    """
    cfg = dict(cfg)
    a = np.sort(np.asarray(anchors, dtype=np.float64).ravel())
    spacing = float((a[-1] - a[0]) / (a.size - 1)) if a.size > 1 else float(np.ptp(x) or 1.0)
    if cfg.get("bandwidth") == "auto":
        cfg["bandwidth"] = 0.5 * spacing
    if cfg.get("width") == "auto":
        cfg["width"] = spacing
    if cfg.get("origin") == "auto":
        cfg["origin"] = float(a[0] - 0.5 * cfg.get("width", spacing))
    if cfg.get("scale") == "auto":
        unit = kernel_from_config({**cfg, "scale": 1.0})
        Kd = unit.matrix(anchors, x)
        cfg["scale"] = float(1.0 / math.sqrt(np.mean(Kd * Kd)))
    return kernel_from_config(cfg)


@dataclass(frozen=True)
class _Task:
    config: EstimatorConfig
    scenario: Scenario
    n: int
    norm: str
    quadrature_points: int


def _one_replication(task: _Task, replication: int) -> tuple[float, str | None]:
    sample = draw_sample(task.scenario, task.n, replication)
    try:
        fit = task.config.fit(sample, task.scenario)
    except ThreshRegError as exc:
        return math.inf, type(exc).__name__
    if task.norm == "empirical":
        return empirical_loss(fit, task.scenario, sample.x), None
    return population_loss(fit, task.scenario, task.quadrature_points), None


def _run_chunk(task: _Task, reps: list[int]) -> list[tuple[float, str | None]]:
    return [_one_replication(task, r) for r in reps]


def _resolve_workers(workers: int | None) -> int:
    if workers is None or workers == 1:
        return 1
    if workers == 0:
        return os.cpu_count() or 1
    if workers < 0:
        raise InvalidArgument("workers must be >= 0")
    return int(workers)


def replication_losses(
    config: EstimatorConfig,
    scenario: Scenario,
    n: int,
    R: int,
    *,
    norm: str = "population",
    quadrature_points: int = 4096,
    workers: int | None = 1,
) -> tuple[np.ndarray, dict[str, int]]:
    """Losses of replications ``0..R-1`` in index order, plus a failure tally by error type."""
    if norm not in NORMS:
        raise InvalidArgument(f"norm must be one of {NORMS}")
    if int(R) != R or R < 1:
        raise InvalidArgument("R must be a positive integer")
    task = _Task(config, scenario, int(n), norm, int(quadrature_points))
    nw = min(_resolve_workers(workers), int(R))
    if nw == 1:
        results = _run_chunk(task, list(range(R)))
    else:
        chunks = [list(range(i, R, nw)) for i in range(nw)]
        results = [None] * R
        with ProcessPoolExecutor(max_workers=nw) as pool:
            for reps, out in zip(chunks, pool.map(_run_chunk, [task] * nw, chunks)):
                for r, res in zip(reps, out):
                    results[r] = res
    losses = np.array([r[0] for r in results], dtype=np.float64)
    tally: dict[str, int] = {}
    for _, err in results:
        if err is not None:
            tally[err] = tally.get(err, 0) + 1
    return losses, dict(sorted(tally.items()))


def wilson_interval(k, R: int, z: float = WILSON_Z) -> tuple[np.ndarray, np.ndarray]:
    k = np.asarray(k, dtype=np.float64)
    p = k / R
    denom = 1.0 + z * z / R
    center = (p + z * z / (2 * R)) / denom
    half = z * np.sqrt(p * (1 - p) / R + z * z / (4.0 * R * R)) / denom
    return np.clip(center - half, 0.0, 1.0), np.clip(center + half, 0.0, 1.0)


@dataclass(frozen=True, eq=False)
class ACEstimate:
    eta_grid: np.ndarray
    exceed_prob: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    R: int
    norm_kind: str
    losses: np.ndarray
    failures: int = 0
    failure_kinds: dict = field(default_factory=dict)
    n: int | None = None
    scenario_id: str = ""
    estimator: str = ""

    @property
    def exceed_counts(self) -> np.ndarray:
        return np.rint(self.exceed_prob * self.R).astype(np.int64)

    def rows(self) -> list[dict]:
        return [
            {"scenario_id": self.scenario_id, "estimator": self.estimator, "n": self.n, "eta": float(e),
             "exceed_prob": float(p), "ci_low": float(lo), "ci_high": float(hi), "R": self.R,
             "failures": self.failures}
            for e, p, lo, hi in zip(self.eta_grid, self.exceed_prob, self.ci_low, self.ci_high)
        ]


def _check_eta_grid(eta_grid) -> np.ndarray:
    eta = np.asarray(eta_grid, dtype=np.float64).ravel()
    if eta.size == 0 or not np.all(np.isfinite(eta)) or np.any(eta < 0):
        raise InvalidArgument("eta grid must be non-empty, finite and non-negative")
    if np.any(np.diff(eta) <= 0):
        raise InvalidArgument("eta grid must be strictly ascending")
    return eta


def ac_from_losses(losses, eta_grid, *, norm_kind: str = "population", failures: int | None = None,
                   **meta) -> ACEstimate:
    """Exceedance frequencies ``#{loss > eta} / R`` with 95% Wilson intervals."""
    losses = np.asarray(losses, dtype=np.float64).ravel()
    if losses.size == 0 or np.any(np.isnan(losses)) or np.any(losses < 0):
        raise InvalidArgument("losses must be non-negative (inf marks a failed replication)")
    eta = _check_eta_grid(eta_grid)
    R = losses.size
    counts = np.sum(losses[None, :] > eta[:, None], axis=1)
    lo, hi = wilson_interval(counts, R)
    if failures is None:
        failures = int(np.sum(np.isinf(losses)))
    return ACEstimate(eta_grid=eta, exceed_prob=counts / R, ci_low=lo, ci_high=hi, R=R,
                      norm_kind=norm_kind, losses=losses, failures=failures, **meta)


def estimate_ac(
    config: EstimatorConfig,
    scenario: Scenario,
    n: int,
    eta_grid,
    R: int = 100,
    *,
    norm: str = "population",
    quadrature_points: int = 4096,
    workers: int | None = 1,
) -> ACEstimate:
    """Empirical accuracy-confidence curve ``eta -> P(loss > eta)`` at one ``n``."""
    if R < MIN_REPLICATIONS:
        raise InvalidArgument(f"R must be >= {MIN_REPLICATIONS}, got {R}")
    eta = _check_eta_grid(eta_grid)
    losses, tally = replication_losses(config, scenario, n, R, norm=norm,
                                       quadrature_points=quadrature_points, workers=workers)
    return ac_from_losses(losses, eta, norm_kind=norm, failures=sum(tally.values()),
                          failure_kinds=tally, n=int(n), scenario_id=scenario.scenario_id,
                          estimator=config.name)


def loss_moment(losses, q: float) -> float:
    losses = np.asarray(losses, dtype=np.float64)
    if not q >= 1:
        raise InvalidArgument("q must be >= 1")
    return float(np.mean(losses ** q))


def moment_loss(config: EstimatorConfig, scenario: Scenario, n: int, q: float, R: int = 100,
                **kwargs) -> float:
    """``(1/R) sum_r loss_r**q`` (infinite when any replication failed)."""
    if R < MIN_REPLICATIONS:
        raise InvalidArgument(f"R must be >= {MIN_REPLICATIONS}, got {R}")
    if not q >= 1:
        raise InvalidArgument("q must be >= 1")
    losses, _ = replication_losses(config, scenario, n, R, **kwargs)
    return loss_moment(losses, q)


def target_slope(s: float) -> float:
    """Exponent ``-s / (1 + 2s)`` of the critical value in ``n / log n``."""
    return -s / (1.0 + 2.0 * s)


def fit_power_law(n_values, losses) -> tuple[float, float, float]:
    """Least squares of ``log loss`` on ``log(n / log n)``: ``(slope, intercept, max |residual|)``."""
    n = np.asarray(n_values, dtype=np.float64)
    y = np.log(np.asarray(losses, dtype=np.float64))
    if not np.all(np.isfinite(y)):
        raise InvalidArgument("losses must be positive and finite for a log-log fit")
    x = np.log(n / np.log(n))
    A = np.column_stack([x, np.ones_like(x)])
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (slope * x + intercept)
    return float(slope), float(intercept), float(np.max(np.abs(resid)))


@dataclass(frozen=True, eq=False)
class RateFit:
    n_values: np.ndarray
    median_losses: np.ndarray
    slope: float
    intercept: float
    residual: float
    target: float
    s: float
    failures: np.ndarray
    R: int
    scenario_id: str = ""
    estimator: str = ""

    @property
    def gap(self) -> float:
        return self.slope - self.target

    def rows(self) -> list[dict]:
        return [
            {"scenario_id": self.scenario_id, "estimator": self.estimator, "s": self.s, "n": int(n),
             "median_loss": float(m), "slope": self.slope, "target_slope": self.target,
             "residual": self.residual}
            for n, m in zip(self.n_values, self.median_losses)
        ]


def _check_n_values(n_values) -> np.ndarray:
    n = np.asarray(n_values)
    if n.ndim != 1 or not np.all(n == np.round(n)) or np.any(n < 4):
        raise InvalidArgument("n values must be integers >= 4")
    n = n.astype(np.int64)
    if np.unique(n).size != n.size or np.unique(n).size < 4:
        raise InvalidArgument("rate study needs at least 4 distinct n values")
    if n.max() < 4 * n.min():
        raise InvalidArgument("n values must span at least two octaves")
    return n


def rate_study(
    config: EstimatorConfig,
    scenario: Scenario,
    n_values,
    R: int = 100,
    *,
    norm: str = "population",
    quadrature_points: int = 4096,
    workers: int | None = 1,
) -> RateFit:
    """Median loss per ``n`` and its log-log slope against ``n / log n``."""
    if R < MIN_REPLICATIONS:
        raise InvalidArgument(f"R must be >= {MIN_REPLICATIONS}, got {R}")
    if scenario.smoothness is None:
        raise InvalidArgument("rate study needs a scenario with declared smoothness")
    n = _check_n_values(n_values)
    medians, fails = [], []
    for ni in n:
        losses, tally = replication_losses(config, scenario, int(ni), R, norm=norm,
                                           quadrature_points=quadrature_points, workers=workers)
        nfail = sum(tally.values())
        if nfail > MAX_FAILURE_FRACTION * R:
            raise StudyRefused(f"{nfail} of {R} replications failed at n={ni} ({tally})")
        medians.append(float(np.median(losses)))
        fails.append(nfail)
    slope, intercept, resid = fit_power_law(n, medians)
    return RateFit(n_values=n, median_losses=np.array(medians), slope=slope, intercept=intercept,
                   residual=resid, target=target_slope(scenario.smoothness), s=scenario.smoothness,
                   failures=np.array(fails), R=int(R), scenario_id=scenario.scenario_id,
                   estimator=config.name)


def shape_sign_test(ac: ACEstimate, low: float, high: float, min_count: int = 5) -> dict:
    """Check that ``log P(loss > eta)`` decreases in ``eta**2`` over ``[low, high]``.

    Only grid points with at least ``min_count`` exceedances enter.  Returns
    the tested points, the consecutive finite differences
    ``d log p / d eta**2`` and whether all are strictly negative.  A window
    with fewer than two usable points is reported as ``tested=False``.
    """
    counts = ac.exceed_counts
    sel = (ac.eta_grid >= low) & (ac.eta_grid <= high) & (counts >= min_count)
    eta, p = ac.eta_grid[sel], ac.exceed_prob[sel]
    if eta.size < 2:
        return {"tested": False, "passed": False, "eta": eta, "slopes": np.empty(0)}
    slopes = np.diff(np.log(p)) / np.diff(eta ** 2)
    return {"tested": True, "passed": bool(np.all(slopes < 0)), "eta": eta, "slopes": slopes}
