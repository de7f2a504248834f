"""Coefficient estimation and shrinkage rules shared by both estimators.

Given functions ``e_k`` that are orthonormal for the empirical measure of the
design, the empirical coefficients are ``(1/n) sum_i e_k(X_i) Y_i`` and the
linear, soft and hard estimates keep, shrink or gate them against a level
``lambda``.  The universal level is ``T * sqrt(log(n) / n)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from threshreg.errors import InvalidArgument


@dataclass(frozen=True)
class ThresholdSchedule:
    n: int
    T: float
    t_n: float
    lambda_n: float

    def to_dict(self) -> dict:
        return {"n": self.n, "T": self.T, "t_n": self.t_n, "lambda_n": self.lambda_n}


def critical_threshold(n: int, T: float) -> ThresholdSchedule:
    """Universal threshold ``lambda_n = T * sqrt(log(n) / n)`` (natural log)."""
    if int(n) != n or n < 1:
        raise InvalidArgument(f"n must be a positive integer, got {n!r}")
    if not T > 0 or not math.isfinite(T):
        raise InvalidArgument(f"T must be a positive finite number, got {T!r}")
    n = int(n)
    t_n = math.log(n) / n
    return ThresholdSchedule(n=n, T=float(T), t_n=t_n, lambda_n=float(T) * math.sqrt(t_n))


def as_coefficients(z) -> np.ndarray:
    z = np.array(z, dtype=np.float64, ndmin=1)
    if z.ndim != 1:
        raise InvalidArgument("coefficient vector must be one-dimensional")
    if not np.all(np.isfinite(z)):
        raise InvalidArgument("coefficient vector contains NaN or infinite entries")
    return z


def _check_level(lam: float) -> float:
    if not lam >= 0 or not math.isfinite(lam):
        raise InvalidArgument(f"threshold must be a finite non-negative number, got {lam!r}")
    return float(lam)


def hard_threshold(z, lam: float) -> np.ndarray:
    """Keep ``z[l]`` when ``|z[l]| >= lam``, zero it otherwise (ties survive)."""
    lam = _check_level(lam)
    z = as_coefficients(z)
    return np.where(np.abs(z) >= lam, z, 0.0)


def soft_threshold(z, lam: float) -> np.ndarray:
    lam = _check_level(lam)
    z = as_coefficients(z)
    return np.sign(z) * np.maximum(np.abs(z) - lam, 0.0)


def _basis_matrix(basis_values) -> np.ndarray:
    e = np.array(basis_values, dtype=np.float64)
    if e.ndim == 1:
        e = e[None, :]
    if e.ndim != 2 or e.size == 0:
        raise InvalidArgument("basis values must be a non-empty (N, n) matrix")
    return e


def empirical_coefficients(basis_values, y) -> np.ndarray:
    """Return ``alpha_k = (1/n) sum_i e_k(X_i) y_i``.

    ``basis_values`` has one row per function ``e_k`` and one column per
    design point.
    """
    e = _basis_matrix(basis_values)
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 1 or y.size != e.shape[1]:
        raise InvalidArgument(
            f"basis matrix has {e.shape[1]} columns but the response has {y.size} entries"
        )
    return e @ y / y.size


def check_property_P(basis_values) -> float:
    """Max deviation of the empirical Gram matrix ``(1/n) E E^t`` from identity.

    Zero means the rows are exactly orthonormal for the empirical measure.
    """
    e = _basis_matrix(basis_values)
    gram = e @ e.T / e.shape[1]
    return float(np.max(np.abs(gram - np.eye(e.shape[0]))))
