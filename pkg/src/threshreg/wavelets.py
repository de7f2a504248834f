"""Periodized orthonormal wavelets on [0, 1] and the pyramid transforms.

Conventions
-----------
* ``phi_{j,k}(x) = 2**(j/2) phi(2**j x - k)`` and likewise for ``psi``, both
  periodized with period 1.
* Two-scale relations ``phi = sqrt(2) sum_m h[m] phi(2x - m)`` and
  ``psi = sqrt(2) sum_m g[m] phi(2x - m)`` with ``g[m] = (-1)**m h[L-1-m]``.
  For Haar this gives ``psi = 1`` on ``[0, 1/2)`` and ``-1`` on ``[1/2, 1)``.
* Point values are right-continuous on ``[0, 1)``; at ``x = 1`` the left limit
  is used.
* A flat coefficient vector of length ``2**R`` stores the ``2**j_min`` scaling
  coefficients first and the level-``j`` details at ``[2**j, 2**(j+1))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from math import comb

import numpy as np

from threshreg import _core
from threshreg.errors import InvalidArgument

FAMILIES = ("haar", "daubechies-4", "daubechies-6")


def daubechies_filter(vanishing_moments: int) -> np.ndarray:
    """Minimum-phase Daubechies low-pass filter with ``2 * vanishing_moments`` taps.

    Obtained by spectral factorization of the Daubechies polynomial; the taps
    sum to ``sqrt(2)``.
    """
    N = int(vanishing_moments)
    if N < 1:
        raise InvalidArgument("vanishing_moments must be >= 1")
    if N == 1:
        return np.array([1.0, 1.0]) / math.sqrt(2.0)
    # z**(N-1) * sum_k C(N-1+k, k) ((2 - z - 1/z) / 4)**k, highest degree first
    poly = np.zeros(2 * N - 1)
    for k in range(N):
        p = np.array([1.0])
        for _ in range(k):
            p = np.convolve(p, [-0.25, 0.5, -0.25])
        start = N - 1 - k
        poly[start:start + 2 * k + 1] += comb(N - 1 + k, k) * p
    roots = np.roots(poly)
    roots = roots[np.abs(roots) < 1.0]
    h = np.array([1.0])
    for _ in range(N):
        h = np.convolve(h, [1.0, 1.0])
    for r in roots:
        h = np.convolve(h, [1.0, -r])
    h = np.real(h)
    return h * math.sqrt(2.0) / h.sum()


def _integer_values(h: np.ndarray) -> np.ndarray:
    """Values of the scaling function at the integers ``0..L-1``.

    Fixed point of ``phi(k) = sqrt(2) sum_m h[m] phi(2k - m)`` normalized to
    unit sum.
    """
    L = h.size
    A = np.zeros((L, L))
    for k in range(L):
        for j in range(L):
            m = 2 * k - j
            if 0 <= m < L:
                A[k, j] = math.sqrt(2.0) * h[m]
    w, v = np.linalg.eig(A)
    i = int(np.argmin(np.abs(w - 1.0)))
    vec = np.real(v[:, i])
    return vec / vec.sum()


@dataclass(frozen=True, eq=False)
class WaveletBasis:
    family: str
    dec_lo: np.ndarray
    dec_hi: np.ndarray
    support_factor: int
    j_min: int = 0
    boundary_rule: str = "periodization"
    # scaling function at the integers, and its left limits there
    phi_int: np.ndarray = field(repr=False, default=None)
    phi_int_left: np.ndarray = field(repr=False, default=None)
    continuous: bool = True

    @property
    def filter_length(self) -> int:
        return self.dec_lo.size

    def __eq__(self, other):
        return isinstance(other, WaveletBasis) and (self.family, self.j_min) == (
            other.family,
            other.j_min,
        )

    def __hash__(self):
        return hash((self.family, self.j_min))


@lru_cache(maxsize=None)
def get_basis(family: str, j_min: int = 0) -> WaveletBasis:
    """Look up a supported family by name (``haar``, ``daubechies-4``, ``daubechies-6``)."""
    name = family.lower().replace("_", "-")
    aliases = {"db1": "haar", "db2": "daubechies-4", "db3": "daubechies-6",
               "d4": "daubechies-4", "d6": "daubechies-6"}
    name = aliases.get(name, name)
    if name not in FAMILIES:
        raise InvalidArgument(f"unknown wavelet family {family!r}; expected one of {FAMILIES}")
    if j_min < 0:
        raise InvalidArgument("j_min must be >= 0")
    vm = {"haar": 1, "daubechies-4": 2, "daubechies-6": 3}[name]
    h = daubechies_filter(vm)
    L = h.size
    g = np.array([(-1) ** m * h[L - 1 - m] for m in range(L)])
    if name == "haar":
        phi_int = np.array([1.0, 0.0])
        phi_left = np.array([0.0, 1.0])
        continuous = False
    else:
        phi_int = _integer_values(h)
        phi_left = phi_int.copy()
        continuous = True
    for arr in (h, g, phi_int, phi_left):
        arr.setflags(write=False)
    return WaveletBasis(
        family=name,
        dec_lo=h,
        dec_hi=g,
        support_factor=L - 1,
        j_min=j_min,
        phi_int=phi_int,
        phi_int_left=phi_left,
        continuous=continuous,
    )


def qmf_error(basis: WaveletBasis) -> float:
    """Largest violation of the orthonormal quadrature-mirror conditions."""
    h, g = basis.dec_lo, basis.dec_hi
    L = h.size
    err = abs(h.sum() - math.sqrt(2.0)) + abs(g.sum())
    for shift in range(0, L, 2):
        target = 1.0 if shift == 0 else 0.0
        err = max(err, abs(np.dot(h[: L - shift], h[shift:]) - target))
        err = max(err, abs(np.dot(g[: L - shift], g[shift:]) - target))
        err = max(err, abs(np.dot(h[: L - shift], g[shift:])))
        err = max(err, abs(np.dot(g[: L - shift], h[shift:])))
    return float(err)


def _log2_exact(length: int) -> int:
    if length < 1 or length & (length - 1):
        raise InvalidArgument(f"length {length} is not a power of two")
    return length.bit_length() - 1


@dataclass(frozen=True, eq=False)
class CoefficientGrid:
    """Scaling coefficients at ``j_min`` plus detail vectors for ``j_min..J``."""

    scaling: np.ndarray
    details: tuple
    j_min: int = 0

    def __post_init__(self):
        scaling = np.array(self.scaling, dtype=np.float64, ndmin=1)
        details = tuple(np.array(d, dtype=np.float64, ndmin=1) for d in self.details)
        if scaling.size != 2 ** self.j_min:
            raise InvalidArgument(f"scaling level must hold {2 ** self.j_min} entries")
        for offset, d in enumerate(details):
            if d.size != 2 ** (self.j_min + offset):
                raise InvalidArgument(
                    f"level {self.j_min + offset} must hold {2 ** (self.j_min + offset)} entries"
                )
        if not all(np.all(np.isfinite(a)) for a in (scaling, *details)):
            raise InvalidArgument("coefficient grid contains non-finite values")
        for a in (scaling, *details):
            a.setflags(write=False)
        object.__setattr__(self, "scaling", scaling)
        object.__setattr__(self, "details", details)

    @property
    def J(self) -> int:
        """Finest stored detail level (``j_min - 1`` when no details are stored)."""
        return self.j_min + len(self.details) - 1

    def level(self, j: int) -> np.ndarray:
        return self.details[j - self.j_min]

    def levels(self):
        """Yield ``(j, coefficients)`` for every stored block, scaling block first."""
        yield self.j_min, self.scaling
        for offset, d in enumerate(self.details):
            yield self.j_min + offset, d

    def to_flat(self, length: int | None = None) -> np.ndarray:
        need = 2 ** (self.J + 1)
        length = need if length is None else length
        if length < need:
            raise InvalidArgument(f"flat length {length} too short for J={self.J}")
        _log2_exact(length)
        flat = np.zeros(length)
        flat[: self.scaling.size] = self.scaling
        for j, d in zip(range(self.j_min, self.J + 1), self.details):
            flat[2 ** j: 2 ** (j + 1)] = d
        return flat

    @classmethod
    def from_flat(cls, flat: np.ndarray, j_min: int = 0, J: int | None = None) -> "CoefficientGrid":
        R = _log2_exact(flat.size)
        J = R - 1 if J is None else J
        if J > R - 1:
            raise InvalidArgument(f"level {J} not available in a length-{flat.size} vector")
        details = tuple(flat[2 ** j: 2 ** (j + 1)] for j in range(j_min, J + 1))
        return cls(scaling=flat[: 2 ** j_min], details=details, j_min=j_min)

    def map(self, fn) -> "CoefficientGrid":
        return CoefficientGrid(
            scaling=fn(self.scaling),
            details=tuple(fn(d) for d in self.details),
            j_min=self.j_min,
        )

    def truncate(self, J: int) -> "CoefficientGrid":
        if J > self.J:
            raise InvalidArgument(f"cannot truncate to level {J} > {self.J}")
        return CoefficientGrid(self.scaling, self.details[: J - self.j_min + 1], self.j_min)

    def count_nonzero(self) -> int:
        return int(sum(np.count_nonzero(a) for _, a in self.levels()))

    def energy(self) -> float:
        return float(sum(np.dot(a, a) for _, a in self.levels()))

    def to_dict(self) -> dict:
        return {
            "j_min": self.j_min,
            "scaling": self.scaling.tolist(),
            "levels": [{"j": j, "coefficients": d.tolist()}
                       for j, d in zip(range(self.j_min, self.J + 1), self.details)],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "CoefficientGrid":
        levels = sorted(doc["levels"], key=lambda lv: lv["j"])
        return cls(
            scaling=doc["scaling"],
            details=tuple(lv["coefficients"] for lv in levels),
            j_min=int(doc.get("j_min", 0)),
        )


def forward_pyramid(values, basis: WaveletBasis) -> CoefficientGrid:
    """Orthonormal periodized DWT of a length-``2**R`` vector of fine-scale coefficients."""
    values = np.ascontiguousarray(values, dtype=np.float64)
    if values.ndim != 1:
        raise InvalidArgument("forward_pyramid expects a 1-D signal")
    R = _log2_exact(values.size)
    if R < basis.j_min + 1:
        raise InvalidArgument(f"signal length must be at least {2 ** (basis.j_min + 1)}")
    flat = _core.forward(values, basis.dec_lo, basis.dec_hi, basis.j_min)
    return CoefficientGrid.from_flat(flat, basis.j_min)


def inverse_pyramid(grid: CoefficientGrid, basis: WaveletBasis, length: int | None = None) -> np.ndarray:
    """Adjoint (and inverse) of :func:`forward_pyramid`.

    Levels finer than ``grid.J`` are taken as zero when ``length`` asks for a
    finer output than the grid stores.
    """
    if grid.j_min != basis.j_min:
        raise InvalidArgument("grid and basis disagree on the coarsest level")
    flat = grid.to_flat(length)
    return _core.inverse(flat, basis.dec_lo, basis.dec_hi, basis.j_min)


def _periodic(values: np.ndarray, period: int) -> np.ndarray:
    out = np.zeros(period)
    np.add.at(out, np.arange(values.size) % period, values)
    return out


def node_values(fine: np.ndarray, basis: WaveletBasis) -> np.ndarray:
    """Point values of ``sum_m fine[m] phi_{R,m}`` at ``i / 2**R`` for ``i = 0..2**R``.

    The last entry is the left limit at 1.
    """
    size = fine.size
    scale = math.sqrt(size)
    phi = _periodic(basis.phi_int, size)
    phi_left = _periodic(basis.phi_int_left, size)
    out = np.empty(size + 1)
    acc = np.zeros(size)
    for t in np.flatnonzero(phi):
        acc += phi[t] * np.roll(fine, t)
    out[:size] = scale * acc
    # x = 1: node index size ~ 0 with left limits of phi
    out[size] = scale * sum(phi_left[t] * fine[(size - t) % size] for t in np.flatnonzero(phi_left))
    return out


def node_values_adjoint(weights: np.ndarray, basis: WaveletBasis) -> np.ndarray:
    """Adjoint of :func:`node_values`: maps ``2**R + 1`` node weights to ``2**R`` coefficients."""
    size = weights.size - 1
    scale = math.sqrt(size)
    phi = _periodic(basis.phi_int, size)
    phi_left = _periodic(basis.phi_int_left, size)
    body = weights[:size]
    acc = np.zeros(size)
    for t in np.flatnonzero(phi):
        acc += phi[t] * np.roll(body, -t)
    for t in np.flatnonzero(phi_left):
        acc[(size - t) % size] += phi_left[t] * weights[size]
    return scale * acc


def grid_point_values(grid: CoefficientGrid, basis: WaveletBasis, R: int) -> np.ndarray:
    """Values of the expansion ``sum beta_jk psi_jk`` at ``i / 2**R``, ``i = 0..2**R``."""
    if R < grid.J + 1:
        raise InvalidArgument(f"resolution 2**{R} is coarser than the grid (J={grid.J})")
    fine = inverse_pyramid(grid, basis, 2 ** R)
    return node_values(fine, basis)


def basis_function_values(basis: WaveletBasis, j: int, k: int, R: int, *, scaling: bool = False) -> np.ndarray:
    """Point values of ``psi_{j,k}`` (or ``phi_{j,k}``) at ``i / 2**R``, ``i = 0..2**R``."""
    if scaling and j != basis.j_min:
        raise InvalidArgument("scaling functions are only stored at the coarsest level")
    if not 0 <= k < 2 ** j or j < basis.j_min:
        raise InvalidArgument(f"no basis function at (j={j}, k={k})")
    R = max(R, j + 1)
    flat = np.zeros(2 ** R)
    flat[k if scaling else 2 ** j + k] = 1.0
    fine = _core.inverse(flat, basis.dec_lo, basis.dec_hi, basis.j_min)
    return node_values(fine, basis)


def mother_sup_norm(basis: WaveletBasis, R: int = 14) -> float:
    """``||psi||_inf`` on [0, N] estimated from dyadic point values at resolution ``2**-R``."""
    vals = _mother_values(basis, R)
    return float(np.max(np.abs(vals)))


def mother_lipschitz(basis: WaveletBasis, R: int = 12) -> float:
    """Largest slope of the dyadic piecewise-linear interpolant of ``psi``.

    Stands in for ``||psi'||_inf``.  For Haar the mother has no derivative and
    the size of its interior jump, ``2 ||psi||_inf``, is returned instead.
    """
    if not basis.continuous:
        return 2.0 * mother_sup_norm(basis, R)
    vals = _mother_values(basis, R)
    return float(np.max(np.abs(np.diff(vals))) * 2 ** R)


@lru_cache(maxsize=None)
def _mother_values_cached(family: str, R: int) -> np.ndarray:
    basis = get_basis(family)
    # psi_{j,0} with 2**j >= support length does not wrap: psi(t) = 2**(-j/2) psi_{j,0}(t / 2**j)
    j = max(basis.support_factor - 1, 1).bit_length()
    vals = basis_function_values(basis, j, 0, R + j)
    psi = vals[: basis.support_factor * 2 ** R + 1] * 2.0 ** (-j / 2)
    psi.setflags(write=False)
    return psi


def _mother_values(basis: WaveletBasis, R: int) -> np.ndarray:
    return _mother_values_cached(basis.family, R)


def besov_sup_norm(grid: CoefficientGrid, gamma: float) -> float:
    """``sup_j 2**(j (gamma + 1/2)) max_k |beta_jk|`` over the stored levels."""
    if not gamma >= 0:
        raise InvalidArgument("gamma must be non-negative")
    best = 0.0
    for j, coeffs in grid.levels():
        if coeffs.size:
            best = max(best, 2.0 ** (j * (gamma + 0.5)) * float(np.max(np.abs(coeffs))))
    return best
