"""Kernel hard-thresholding estimator.

With ``p`` anchor points ``x_l`` and the ``p x n`` design ``K[l, i] = K(x_l, X_i)``
the raw coefficients solve ``(K K^t) z = K Y``; coefficients below
``T sqrt(log n / n)`` are zeroed and the estimate is
``f(x) = sum_l z_l K(x_l, x)``.  Before solving, the empirical Gram matrix
``M = K K^t / n`` is certified to be almost diagonal.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from threshreg.errors import AssumptionViolated, InvalidArgument, SingularSystem
from threshreg.kernels import Kernel, as_points, kernel_from_config
from threshreg.sample import Sample
from threshreg.thresholding import ThresholdSchedule, critical_threshold, hard_threshold

log = logging.getLogger(__name__)

MAX_CONDITION = 1e12
_warned_T: set = set()


def select_anchor_count(n: int) -> int:
    """``p = floor(sqrt(n / log n))``."""
    if int(n) != n or n < 2:
        raise InvalidArgument(f"n must be an integer >= 2, got {n!r}")
    p = math.floor(math.sqrt(n / math.log(n)))
    return max(p, 1)


def quantile_anchors(x, p: int) -> np.ndarray:
    """Empirical ``(2l - 1) / (2p)`` quantiles of a one-dimensional sample."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise InvalidArgument("quantile anchors need one-dimensional design points")
    if p < 1:
        raise InvalidArgument("p must be >= 1")
    probs = (2 * np.arange(1, p + 1) - 1) / (2 * p)
    anchors = np.quantile(x, probs)
    if np.unique(anchors).size != p:
        raise InvalidArgument("quantile anchors are not distinct (too many tied design points)")
    return anchors


def grid_anchors(p: int, low: float = 0.0, high: float = 1.0) -> np.ndarray:
    """Cell midpoints of ``p`` equal cells of ``[low, high]``."""
    if p < 1 or not high > low:
        raise InvalidArgument("need p >= 1 and high > low")
    return low + (high - low) * (2 * np.arange(1, p + 1) - 1) / (2 * p)


def _check_anchors(anchors) -> np.ndarray:
    pts = as_points(anchors)
    if pts.shape[0] < 1:
        raise InvalidArgument("need at least one anchor")
    if np.unique(pts, axis=0).shape[0] != pts.shape[0]:
        raise InvalidArgument("anchors must be pairwise distinct")
    return pts


@dataclass(frozen=True, eq=False)
class DesignMatrices:
    K_design: np.ndarray
    M_np: np.ndarray

    @property
    def p(self) -> int:
        return self.K_design.shape[0]

    @property
    def n(self) -> int:
        return self.K_design.shape[1]


def build_design(kernel: Kernel, anchors, X) -> DesignMatrices:
    pts = _check_anchors(anchors)
    X = as_points(X)
    if X.shape[0] < 1:
        raise InvalidArgument("need at least one design point")
    Kd = kernel.matrix(pts, X)
    M = Kd @ Kd.T / X.shape[0]
    M = 0.5 * (M + M.T)
    return DesignMatrices(K_design=Kd, M_np=M)


@dataclass(frozen=True)
class DeltaCertificate:
    delta: float
    lambda_min: float
    lambda_max: float
    inf_norm_inverse: float

    def to_dict(self) -> dict:
        return {
            "delta": self.delta,
            "lambda_min": self.lambda_min,
            "lambda_max": self.lambda_max,
            "inf_norm_inverse": self.inf_norm_inverse,
        }


def certify_delta(M) -> DeltaCertificate:
    """Smallest ``delta`` such that ``(1-delta)**2 <= eig(M) <= (1+delta)**2``
    and ``||M^{-1}||_inf <= 1 / (1 - delta)``.

    The infinity-norm test is sufficient for ``(1-delta)||x||_inf <= ||M x||_inf``
    but may be conservative.  Raises :class:`AssumptionViolated` when no
    ``delta < 1`` works.
    """
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.size == 0:
        raise InvalidArgument("M must be a non-empty square matrix")
    scale = max(float(np.max(np.abs(M))), 1.0)
    if not np.allclose(M, M.T, rtol=0, atol=1e-12 * scale):
        raise InvalidArgument("M must be symmetric")
    eig = scipy.linalg.eigvalsh(M)
    lam_min, lam_max = float(eig[0]), float(eig[-1])
    if lam_min <= 0:
        raise AssumptionViolated(
            f"Gram matrix is not positive definite (lambda_min={lam_min:.3g})",
            lambda_min=lam_min,
            lambda_max=lam_max,
        )
    inv_norm = float(np.max(np.sum(np.abs(np.linalg.inv(M)), axis=1)))
    delta = max(0.0, 1.0 - math.sqrt(lam_min), math.sqrt(lam_max) - 1.0, 1.0 - 1.0 / inv_norm)
    if delta >= 1.0:
        raise AssumptionViolated(
            f"Gram matrix is not almost diagonal (delta={delta:.3g} >= 1)",
            delta=delta,
            lambda_min=lam_min,
            lambda_max=lam_max,
            inf_norm_inverse=inv_norm,
        )
    return DeltaCertificate(delta=delta, lambda_min=lam_min, lambda_max=lam_max, inf_norm_inverse=inv_norm)


def solve_coefficients(design: DesignMatrices, Y) -> np.ndarray:
    """Solve ``(K K^t) z = K Y`` by Cholesky."""
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim != 1 or Y.size != design.n:
        raise InvalidArgument(f"design has {design.n} columns but Y has {Y.size} entries")
    G = design.K_design @ design.K_design.T
    G = 0.5 * (G + G.T)
    rhs = design.K_design @ Y
    eig = scipy.linalg.eigvalsh(G)
    cond = float(eig[-1] / eig[0]) if eig[0] > 0 else math.inf
    if not cond <= MAX_CONDITION:
        raise SingularSystem(f"K K^t is numerically singular (condition {cond:.3g})", condition=cond)
    z = scipy.linalg.cho_solve(scipy.linalg.cho_factor(G), rhs)
    return z


@dataclass(frozen=True, eq=False)
class RkhsFit:
    anchors: np.ndarray
    z_raw: np.ndarray
    z_thresholded: np.ndarray
    schedule: ThresholdSchedule
    certificate: DeltaCertificate
    kernel: Kernel

    @property
    def lambda_n(self) -> float:
        return self.schedule.lambda_n

    def __call__(self, x) -> np.ndarray:
        return self.z_thresholded @ self.kernel.matrix(self.anchors, x)

    def raw(self, x) -> np.ndarray:
        """The un-thresholded expansion ``sum_l z_raw[l] K(x_l, x)``."""
        return self.z_raw @ self.kernel.matrix(self.anchors, x)

    def is_zero(self) -> bool:
        return not np.any(self.z_thresholded)

    def to_dict(self) -> dict:
        anchors = self.anchors[:, 0] if self.anchors.shape[1] == 1 else self.anchors
        return {
            "estimator": "rkhs",
            "kernel": self.kernel.to_config(),
            "anchors": anchors.tolist(),
            "z_raw": self.z_raw.tolist(),
            "z_thresholded": self.z_thresholded.tolist(),
            "lambda_n": self.lambda_n,
            "T": self.schedule.T,
            "n": self.schedule.n,
            "delta": self.certificate.delta,
            "certificate": self.certificate.to_dict(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "RkhsFit":
        n = int(doc["n"])
        sched = ThresholdSchedule(n=n, T=float(doc["T"]), t_n=math.log(n) / n, lambda_n=float(doc["lambda_n"]))
        cert = doc.get("certificate") or {"delta": doc["delta"], "lambda_min": math.nan,
                                          "lambda_max": math.nan, "inf_norm_inverse": math.nan}
        return cls(
            anchors=as_points(doc["anchors"]),
            z_raw=np.asarray(doc["z_raw"], dtype=np.float64),
            z_thresholded=np.asarray(doc["z_thresholded"], dtype=np.float64),
            schedule=sched,
            certificate=DeltaCertificate(**cert),
            kernel=kernel_from_config(doc["kernel"]),
        )


def recommended_T(M: float | None) -> float:
    """Smallest admissible threshold constant ``sqrt(M**2 + 1/2) v 4``."""
    if M is None:
        return 4.0
    return max(math.sqrt(M * M + 0.5), 4.0)


def fit_rkhs(sample: Sample, kernel: Kernel, anchors=None, T: float = 4.0, *, M: float | None = None) -> RkhsFit:
    """Certify, solve, threshold.

    ``anchors`` defaults to the ``p = floor(sqrt(n / log n))`` empirical
    quantile anchors of a one-dimensional design.  A threshold constant below
    ``sqrt(M**2 + 1/2) v 4`` only logs a warning.
    """
    if sample.n == 0:
        raise InvalidArgument("empty sample")
    if anchors is None:
        anchors = quantile_anchors(sample.x, select_anchor_count(sample.n))
    schedule = critical_threshold(sample.n, T)
    if T < recommended_T(M):
        if (T, M) not in _warned_T:  # once per setting, not once per replication
            _warned_T.add((T, M))
            log.warning("T=%g is below the admissible bound %g; guarantees do not apply", T, recommended_T(M))
    design = build_design(kernel, anchors, sample.x)
    cert = certify_delta(design.M_np)
    z = solve_coefficients(design, sample.y)
    return RkhsFit(
        anchors=_check_anchors(anchors),
        z_raw=z,
        z_thresholded=hard_threshold(z, schedule.lambda_n),
        schedule=schedule,
        certificate=cert,
        kernel=kernel,
    )


def empirical_norm(f, X) -> float:
    """``sqrt((1/n) sum_i f(X_i)**2)``."""
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] == 0:
        raise InvalidArgument("need at least one point")
    vals = np.asarray(f(X), dtype=np.float64)
    return float(math.sqrt(np.mean(vals ** 2)))
