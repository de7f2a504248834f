"""Hard-thresholded wavelet estimator on the empirical-CDF warped design.

The design only enters through ranks: responses are reordered by ``X``,
placed on the grid ``i / n``, transformed with the pyramid, thresholded, and
the reconstruction is read back at ``G_n(x)``, the empirical CDF of the
design.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from threshreg.errors import InvalidArgument
from threshreg.sample import Sample
from threshreg.thresholding import ThresholdSchedule, critical_threshold, hard_threshold
from threshreg.wavelets import (
    CoefficientGrid,
    WaveletBasis,
    forward_pyramid,
    get_basis,
    grid_point_values,
    inverse_pyramid,
    node_values_adjoint,
)

NODE_RULES = ("point", "sample")


@dataclass(frozen=True, eq=False)
class EmpiricalCDF:
    sorted_x: np.ndarray

    @property
    def n(self) -> int:
        return self.sorted_x.size

    def counts(self, x) -> np.ndarray:
        """Number of design points ``<= x`` (vectorized)."""
        return np.searchsorted(self.sorted_x, np.asarray(x, dtype=np.float64), side="right")

    def __call__(self, x):
        c = self.counts(x)
        return c / self.n


def empirical_cdf(x) -> EmpiricalCDF:
    x = np.sort(np.asarray(x, dtype=np.float64).ravel(), kind="stable")
    if x.size == 0:
        raise InvalidArgument("empirical CDF needs at least one point")
    x.setflags(write=False)
    return EmpiricalCDF(x)


def rank_pairs(sample: Sample) -> tuple[np.ndarray, np.ndarray]:
    """Sort the pairs by ``x``; ties keep their original order."""
    if sample.n == 0:
        raise InvalidArgument("empty sample")
    if sample.x.ndim != 1:
        raise InvalidArgument("the wavelet estimator is one-dimensional")
    order = np.argsort(sample.x, kind="stable")
    return sample.x[order], sample.y[order]


def select_max_level(n: int, s: float | None = None) -> int:
    """Finest detail level ``J``.

    Without ``s`` (universal choice) this is the largest ``J`` with
    ``2**J <= sqrt(n / log n)``; with ``s`` it is the smallest ``J`` with
    ``2**J >= (n / log n)**(1 / (1 + 2s))``.
    """
    if int(n) != n or n < 4:
        raise InvalidArgument(f"n must be an integer >= 4, got {n!r}")
    ratio = n / math.log(n)
    if s is None:
        J = int(math.floor(0.5 * math.log2(ratio)))
        while 2 ** (J + 1) <= math.sqrt(ratio):
            J += 1
        while J > 0 and 2 ** J > math.sqrt(ratio):
            J -= 1
        return J
    if not s > 0:
        raise InvalidArgument("s must be positive")
    target = ratio ** (1.0 / (1.0 + 2.0 * s))
    J = max(int(math.ceil(math.log2(target))), 0)
    while J > 0 and 2 ** (J - 1) >= target:
        J -= 1
    while 2 ** J < target:
        J += 1
    return J


def _grid_size(n: int) -> int:
    return 1 << max(n - 1, 1).bit_length()


def fine_scale_coefficients(y_ranked: np.ndarray, basis: WaveletBasis, rule: str = "point") -> np.ndarray:
    """Finest-level scaling coefficients from responses in rank order.

    ``rule="point"`` evaluates ``(1/n) sum_i Y_(i) phi_{J',k}(i / 2**J')``
    exactly; ``rule="sample"`` uses ``Y_(i) / sqrt(n)`` directly as the
    coefficient of cell ``i - 1``.  When ``n`` is not a power of two the
    ranks are zero-padded to ``2**J'`` and the ``1/n`` scaling is kept.
    """
    n = y_ranked.size
    size = _grid_size(n)
    if rule == "sample":
        fine = np.zeros(size)
        fine[:n] = y_ranked
        return fine * math.sqrt(size) / n
    if rule != "point":
        raise InvalidArgument(f"unknown node rule {rule!r}; expected one of {NODE_RULES}")
    weights = np.zeros(size + 1)
    weights[1:n + 1] = y_ranked
    return node_values_adjoint(weights, basis) / n


def estimate_coefficients(sample: Sample, basis: WaveletBasis, J: int, rule: str = "point") -> CoefficientGrid:
    """Empirical coefficients ``beta_jk = (1/n) sum_i Y_(i) psi_jk(i/n)`` for levels ``<= J``."""
    n = sample.n
    if n < 4:
        raise InvalidArgument(f"need at least 4 observations, got {n}")
    _, y = rank_pairs(sample)
    size = _grid_size(n)
    if J < basis.j_min or 2 ** (J + 1) > size:
        raise InvalidArgument(f"J={J} outside [{basis.j_min}, {size.bit_length() - 2}] for n={n}")
    if n < 2 ** (J + 1):
        warnings.warn(f"n={n} is below 2**(J+1)={2 ** (J + 1)}; finest coefficients are poorly estimated",
                      RuntimeWarning, stacklevel=2)
    fine = fine_scale_coefficients(y, basis, rule)
    return forward_pyramid(fine, basis).truncate(J)


@dataclass(frozen=True, eq=False)
class WaveletFit:
    basis: WaveletBasis
    grid: CoefficientGrid
    schedule: ThresholdSchedule
    cdf: EmpiricalCDF
    J: int
    rule: str = "point"
    raw_grid: CoefficientGrid | None = None

    def __post_init__(self):
        n = self.cdf.n
        size = _grid_size(n)
        if self.rule == "sample":
            # cell i - 1 carries rank i; rank 0 (below the sample) reads cell 0
            cells = inverse_pyramid(self.grid, self.basis, size) * n / math.sqrt(size)
            table = np.concatenate((cells[:1], cells[:n]))
        else:
            # node i sits at u = i / size; nodes beyond n are never reached
            vals = grid_point_values(self.grid, self.basis, size.bit_length() - 1)
            table = vals[: n + 1].copy()
        table.setflags(write=False)
        object.__setattr__(self, "_table", table)

    @property
    def lambda_n(self) -> float:
        return self.schedule.lambda_n

    @property
    def node_values(self) -> np.ndarray:
        """Fitted values indexed by the rank count ``n * G_n(x)`` (0..n)."""
        return self._table

    def __call__(self, x) -> np.ndarray:
        return self._table[self.cdf.counts(x)]

    def is_zero(self) -> bool:
        return self.grid.count_nonzero() == 0

    def to_dict(self) -> dict:
        return {
            "estimator": "wavelet",
            "family": self.basis.family,
            "J": self.J,
            "lambda_n": self.lambda_n,
            "T": self.schedule.T,
            "n": self.cdf.n,
            "rule": self.rule,
            "scaling": self.grid.scaling.tolist(),
            "levels": [{"j": j, "coefficients": d.tolist()}
                       for j, d in zip(range(self.grid.j_min, self.grid.J + 1), self.grid.details)],
            "sorted_x": self.cdf.sorted_x.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "WaveletFit":
        basis = get_basis(doc["family"])
        grid = CoefficientGrid.from_dict({"scaling": doc["scaling"], "levels": doc["levels"],
                                          "j_min": basis.j_min})
        n = int(doc.get("n", len(doc["sorted_x"])))
        sched = ThresholdSchedule(n=n, T=float(doc.get("T", float("nan"))),
                                  t_n=math.log(n) / n, lambda_n=float(doc["lambda_n"]))
        return cls(basis=basis, grid=grid, schedule=sched,
                   cdf=empirical_cdf(doc["sorted_x"]), J=int(doc["J"]), rule=doc.get("rule", "point"))


def fit_wavelet(
    sample: Sample,
    basis: WaveletBasis | str = "haar",
    T: float = 4.0,
    J: int | None = None,
    *,
    threshold: float | None = None,
    rule: str = "point",
) -> WaveletFit:
    """Estimate, hard-threshold at ``T sqrt(log n / n)`` and reconstruct.

    ``J`` defaults to the universal level from :func:`select_max_level`.
    ``threshold`` overrides the universal level (``0`` gives the plain
    projection estimate).
    """
    if isinstance(basis, str):
        basis = get_basis(basis)
    n = sample.n
    if J is None:
        J = select_max_level(n)
    schedule = critical_threshold(n, T)
    lam = schedule.lambda_n if threshold is None else float(threshold)
    raw = estimate_coefficients(sample, basis, J, rule)
    kept = raw.map(lambda c: hard_threshold(c, lam))
    if threshold is not None:
        schedule = ThresholdSchedule(n=schedule.n, T=schedule.T, t_n=schedule.t_n, lambda_n=lam)
    return WaveletFit(basis=basis, grid=kept, schedule=schedule,
                      cdf=empirical_cdf(sample.x), J=J, rule=rule, raw_grid=raw)


def discrete_moment(basis: WaveletBasis, j: int, k: int, r: float, n: int) -> float:
    """``(1/n) sum_{i=1..n} |psi_jk(i/n)|**r`` for dyadic ``n``."""
    from threshreg.wavelets import basis_function_values

    R = max(int(n).bit_length() - 1, j + 1)
    if 2 ** (int(n).bit_length() - 1) != n:
        raise InvalidArgument("n must be a power of two")
    vals = basis_function_values(basis, j, k, R)
    stride = 2 ** R // n
    at_nodes = vals[stride::stride]  # i = 1..n
    return float(np.mean(np.abs(at_nodes) ** r))


def discrete_moment_bound(basis: WaveletBasis, j: int, r: float, n: int,
                          sup_norm: float, slope: float) -> float:
    """``tau_r 2**(j(r/2-1)) + tau'_r 2**(j(1+r/2)) / n`` with
    ``tau_r = N ||psi||**r`` and ``tau'_r = N r ||psi'|| ||psi||**(r-1)``."""
    N = basis.support_factor
    tau = N * sup_norm ** r
    tau_p = N * r * slope * sup_norm ** (r - 1)
    return tau * 2.0 ** (j * (r / 2 - 1)) + tau_p * 2.0 ** (j * (1 + r / 2)) / n


__all__ = [
    "EmpiricalCDF",
    "WaveletFit",
    "empirical_cdf",
    "estimate_coefficients",
    "fit_wavelet",
    "fine_scale_coefficients",
    "rank_pairs",
    "select_max_level",
    "inverse_pyramid",
    "discrete_moment",
    "discrete_moment_bound",
]
