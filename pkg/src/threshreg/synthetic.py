"""Scenarios with known regression function, bounded noise and analytic design.

Every scenario satisfies ``|f_rho| + a <= M/2`` by construction so generated
responses stay inside ``[-M/2, M/2]`` without clipping; this is re-checked on
every draw.  Replication streams are derived from ``(master_seed, n,
replication)`` through :class:`numpy.random.SeedSequence` spawn keys, so a
draw does not depend on which other draws were made or in which order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from threshreg.errors import InvalidArgument, InvalidScenario
from threshreg.kernels import Kernel, as_points, kernel_from_config
from threshreg.sample import Sample
from threshreg.wavelets import CoefficientGrid, WaveletBasis, get_basis, grid_point_values

DESIGNS = ("uniform", "triangular", "kumaraswamy")


@dataclass(frozen=True)
class DistributionWarp:
    """Design distribution with closed-form CDF ``G`` and quantile ``G_inverse``."""

    name: str
    params: dict = field(default_factory=dict)

    @property
    def support(self) -> tuple[float, float]:
        p = self.params
        if self.name in ("uniform", "triangular"):
            return p["a"], p["b"]
        return 0.0, 1.0

    def G(self, t):
        t = np.asarray(t, dtype=np.float64)
        p = self.params
        if self.name == "uniform":
            return np.clip((t - p["a"]) / (p["b"] - p["a"]), 0.0, 1.0)
        if self.name == "triangular":
            a, b, c = p["a"], p["b"], p["mode"]
            tc = np.clip(t, a, b)
            left = (tc - a) ** 2 / ((b - a) * (c - a)) if c > a else np.zeros_like(tc)
            right = 1.0 - (b - tc) ** 2 / ((b - a) * (b - c)) if b > c else np.ones_like(tc)
            return np.where(tc <= c, left, right)
        tc = np.clip(t, 0.0, 1.0)
        return 1.0 - (1.0 - tc ** p["alpha"]) ** p["beta"]

    def G_inverse(self, u):
        u = np.asarray(u, dtype=np.float64)
        p = self.params
        if self.name == "uniform":
            return p["a"] + u * (p["b"] - p["a"])
        if self.name == "triangular":
            a, b, c = p["a"], p["b"], p["mode"]
            fc = (c - a) / (b - a)
            low = a + np.sqrt(np.clip(u, 0, None) * (b - a) * (c - a))
            high = b - np.sqrt(np.clip(1.0 - u, 0, None) * (b - a) * (b - c))
            return np.where(u <= fc, low, high)
        return (1.0 - (1.0 - u) ** (1.0 / p["beta"])) ** (1.0 / p["alpha"])

    def density(self, t):
        t = np.asarray(t, dtype=np.float64)
        p = self.params
        if self.name == "uniform":
            inside = (t >= p["a"]) & (t <= p["b"])
            return np.where(inside, 1.0 / (p["b"] - p["a"]), 0.0)
        if self.name == "triangular":
            a, b, c = p["a"], p["b"], p["mode"]
            up = 2 * (t - a) / ((b - a) * (c - a)) if c > a else np.zeros_like(t)
            down = 2 * (b - t) / ((b - a) * (b - c)) if b > c else np.zeros_like(t)
            return np.where((t < a) | (t > b), 0.0, np.where(t <= c, up, down))
        al, be = p["alpha"], p["beta"]
        tc = np.clip(t, 0.0, 1.0)
        dens = al * be * tc ** (al - 1) * (1 - tc ** al) ** (be - 1)
        return np.where((t < 0) | (t > 1), 0.0, dens)

    def to_config(self) -> dict:
        return {"name": self.name, **self.params}


def analytic_warp(name: str, **params) -> DistributionWarp:
    """Build a design by name: ``uniform(a, b)``, ``triangular(a, b, mode)``,
    ``kumaraswamy(alpha, beta)`` on [0, 1] (a smooth beta-like law)."""
    if name == "uniform":
        a, b = float(params.pop("a", 0.0)), float(params.pop("b", 1.0))
        if not b > a:
            raise InvalidArgument("uniform design needs b > a")
        out = {"a": a, "b": b}
    elif name == "triangular":
        a, b = float(params.pop("a", 0.0)), float(params.pop("b", 1.0))
        mode = float(params.pop("mode", 0.5 * (a + b)))
        if not (b > a and a <= mode <= b):
            raise InvalidArgument("triangular design needs a < b and a <= mode <= b")
        out = {"a": a, "b": b, "mode": mode}
    elif name == "kumaraswamy":
        alpha, beta = float(params.pop("alpha", 2.0)), float(params.pop("beta", 2.0))
        if not (alpha >= 1 and beta >= 1):
            raise InvalidArgument("kumaraswamy design needs alpha, beta >= 1 (differentiable CDF)")
        out = {"alpha": alpha, "beta": beta}
    else:
        raise InvalidArgument(f"unsupported design {name!r}; expected one of {DESIGNS}")
    if params:
        raise InvalidArgument(f"unexpected design parameters {sorted(params)}")
    return DistributionWarp(name, out)


def warp_from_config(cfg: dict | str) -> DistributionWarp:
    if isinstance(cfg, str):
        return analytic_warp(cfg)
    cfg = dict(cfg)
    return analytic_warp(cfg.pop("name"), **cfg)


# Regression functions.  Plain classes (not closures) so scenarios pickle
# into worker processes.

@dataclass(frozen=True, eq=False)
class ZeroFunction:
    def __call__(self, x):
        return np.zeros(np.shape(np.asarray(x))[:1], dtype=np.float64)


@dataclass(frozen=True, eq=False)
class WarpedWaveletFunction:
    """``x -> h(G(x))`` where ``h`` is a finite wavelet expansion on [0, 1].

    ``h`` is tabulated at ``i / 2**R``; step bases are read exactly
    (right-continuous), continuous bases are linearly interpolated.
    """

    table: np.ndarray
    R: int
    continuous: bool
    design: DistributionWarp

    def on_unit(self, u):
        u = np.clip(np.asarray(u, dtype=np.float64), 0.0, 1.0)
        size = 2 ** self.R
        if self.continuous:
            return np.interp(u, np.linspace(0.0, 1.0, size + 1), self.table)
        idx = np.floor(u * size).astype(np.int64)
        idx = np.where(u >= 1.0, size, idx)
        return self.table[idx]

    def __call__(self, x):
        return self.on_unit(self.design.G(x))


@dataclass(frozen=True, eq=False)
class KernelExpansion:
    kernel: Kernel
    anchors: np.ndarray
    alpha: np.ndarray

    def __call__(self, x):
        return self.alpha @ self.kernel.matrix(self.anchors, x)


@dataclass(frozen=True, eq=False)
class Scenario:
    scenario_id: str
    kind: str
    design: DistributionWarp
    f_rho: object
    noise_amplitude: float
    M: float
    sup_f: float
    smoothness: float | None = None
    master_seed: int = 0
    coefficients: CoefficientGrid | None = None
    basis: WaveletBasis | None = None
    kernel: Kernel | None = None
    anchors: np.ndarray | None = None
    alpha: np.ndarray | None = None
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.noise_amplitude >= 0:
            raise InvalidScenario("noise amplitude must be non-negative")
        if not self.M > 0:
            raise InvalidScenario("M must be positive")
        if self.sup_f + self.noise_amplitude > self.M / 2 * (1 + 1e-12):
            raise InvalidScenario(
                f"amplitude budget exceeded: sup|f| + a = {self.sup_f + self.noise_amplitude:.6g} > M/2 = {self.M / 2:.6g}"
            )

    def f_on_unit(self, u):
        """``f_rho(G^{-1}(u))``."""
        if isinstance(self.f_rho, WarpedWaveletFunction):
            return self.f_rho.on_unit(u)
        return self.f_rho(self.design.G_inverse(u))

    def with_seed(self, master_seed: int) -> "Scenario":
        from dataclasses import replace

        return replace(self, master_seed=int(master_seed),
                       config={**self.config, "seed": int(master_seed)})

    def describe(self) -> dict:
        return {"scenario_id": self.scenario_id, "kind": self.kind, "design": self.design.to_config(),
                "noise_amplitude": self.noise_amplitude, "M": self.M, "s": self.smoothness,
                "seed": self.master_seed, **{k: v for k, v in self.config.items() if k not in ("seed",)}}


def replication_rng(master_seed: int, n: int, replication: int) -> np.random.Generator:
    seq = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(n), int(replication)))
    return np.random.default_rng(seq)


def draw_sample(scenario: Scenario, n: int, replication: int = 0) -> Sample:
    """``n`` i.i.d. pairs ``X = G^{-1}(U)``, ``Y = f_rho(X) + eps`` with ``eps ~ U[-a, a]``."""
    if int(n) != n or n < 1:
        raise InvalidArgument(f"n must be a positive integer, got {n!r}")
    rng = replication_rng(scenario.master_seed, n, replication)
    u = rng.random(int(n))
    x = scenario.design.G_inverse(u)
    a = scenario.noise_amplitude
    eps = rng.uniform(-a, a, int(n)) if a > 0 else np.zeros(int(n))
    if isinstance(scenario.f_rho, WarpedWaveletFunction):
        fx = scenario.f_rho.on_unit(u) if scenario.design.name == "uniform" else scenario.f_rho(x)
    else:
        fx = scenario.f_rho(x)
    y = fx + eps
    bound = scenario.M / 2
    if np.any(np.abs(y) > bound * (1 + 1e-12)):
        raise InvalidScenario(f"generated response outside [-M/2, M/2] = [{-bound}, {bound}]")
    return Sample(x, y)


def make_null_scenario(design: DistributionWarp | None = None, M: float = 2.0,
                       noise_amplitude: float = 0.5, seed: int = 0) -> Scenario:
    design = design or analytic_warp("uniform")
    return Scenario(
        scenario_id="null", kind="null", design=design, f_rho=ZeroFunction(),
        noise_amplitude=float(noise_amplitude), M=float(M), sup_f=0.0, master_seed=int(seed),
        config={"function": "zero"},
    )


def holder_positions(j_max: int) -> list[int]:
    """Active position ``k_j = j mod 2**j`` for each level."""
    return [j % 2 ** j for j in range(j_max + 1)]


def make_holder_scenario(
    s: float,
    basis: WaveletBasis | str = "haar",
    design: DistributionWarp | None = None,
    M: float = 2.0,
    noise_amplitude: float = 0.25,
    *,
    j_max: int = 12,
    c: float | None = None,
    seed: int = 0,
) -> Scenario:
    """``f_rho(G^{-1}(u)) = c sum_{j<=j_max} 2**(-j(s+1/2)) psi_{j,k_j}(u)``.

    Without ``c`` the amplitude saturates the budget ``sup|f| = M/2 - a``.
    The Besov sup-norm of the coefficients at smoothness ``s`` is exactly ``c``.
    """
    if isinstance(basis, str):
        basis = get_basis(basis)
    design = design or analytic_warp("uniform")
    if not s > 0:
        raise InvalidArgument("s must be positive")
    if j_max < basis.j_min:
        raise InvalidArgument("j_max below the coarsest level")
    details = []
    for j, k in zip(range(basis.j_min, j_max + 1), holder_positions(j_max)[basis.j_min:]):
        d = np.zeros(2 ** j)
        d[k] = 2.0 ** (-j * (s + 0.5))
        details.append(d)
    unit = CoefficientGrid(np.zeros(2 ** basis.j_min), tuple(details), basis.j_min)
    R = max(j_max + 1, 14)
    unit_table = grid_point_values(unit, basis, R)
    unit_sup = float(np.max(np.abs(unit_table)))
    budget = M / 2 - noise_amplitude
    if c is None:
        c = budget / unit_sup
    c = float(c)
    coeffs = unit.map(lambda a: c * a)
    table = c * unit_table
    table.setflags(write=False)
    f = WarpedWaveletFunction(table=table, R=R, continuous=basis.continuous, design=design)
    return Scenario(
        scenario_id=f"holder-{basis.family}-s{s:g}", kind="holder", design=design, f_rho=f,
        noise_amplitude=float(noise_amplitude), M=float(M), sup_f=abs(c) * unit_sup,
        smoothness=float(s), master_seed=int(seed), coefficients=coeffs, basis=basis,
        config={"function": "holder", "basis": basis.family, "j_max": j_max, "c": c},
    )


def holder_tail_l2(c: float, s: float, j_max: int) -> float:
    """L2 norm of the levels ``j > j_max`` of the (infinite) one-per-level construction."""
    return abs(c) * 2.0 ** (-(j_max + 1) * (s + 0.5)) / math.sqrt(1.0 - 2.0 ** (-(2 * s + 1)))


def power_law_coefficients(p: int, s: float, c: float = 1.0) -> np.ndarray:
    """``alpha_l = c l**(-(s + 1/2))``, ``l = 1..p``."""
    return c * np.arange(1, p + 1, dtype=np.float64) ** (-(s + 0.5))


def weak_count(alpha, lam: float) -> int:
    return int(np.count_nonzero(np.abs(np.asarray(alpha)) >= lam))


def small_coefficient_energy(alpha, lam: float) -> float:
    """``sum_l alpha_l**2 1{|alpha_l| < lam}``."""
    alpha = np.asarray(alpha, dtype=np.float64)
    return float(np.sum(alpha[np.abs(alpha) < lam] ** 2))


def _sup_on_support(f, design: DistributionWarp, anchors: np.ndarray, points: int = 1 << 14) -> float:
    lo, hi = design.support
    grid = np.concatenate([np.linspace(lo, hi, points + 1), anchors.ravel()])
    return float(np.max(np.abs(f(grid))))


def make_rkhs_sparse_scenario(
    kernel: Kernel | dict,
    anchors,
    s: float,
    M: float = 2.0,
    noise_amplitude: float = 0.25,
    *,
    design: DistributionWarp | None = None,
    c: float | None = None,
    seed: int = 0,
) -> Scenario:
    """``f_rho = sum_l alpha_l K(x_l, .)`` with ``alpha_l = c l**(-(s + 1/2))``.

    ``f_rho`` lies in the span of the kernel sections, so the approximation
    error is zero, and ``card{|alpha_l| >= lam} = floor((c/lam)**(2/(1+2s)))``.
    Without ``c`` the amplitude saturates the budget ``sup|f| = M/2 - a``
    (sup taken on a fine grid of the design support plus the anchors).
    """
    if isinstance(kernel, dict):
        kernel = kernel_from_config(kernel)
    design = design or analytic_warp("uniform")
    if not s > 0:
        raise InvalidArgument("s must be positive")
    pts = as_points(anchors)
    if pts.shape[1] != 1:
        raise InvalidArgument("synthetic RKHS scenarios are one-dimensional")
    p = pts.shape[0]
    unit = KernelExpansion(kernel, pts, power_law_coefficients(p, s))
    unit_sup = _sup_on_support(unit, design, pts)
    budget = M / 2 - noise_amplitude
    if c is None:
        c = budget / unit_sup
    alpha = power_law_coefficients(p, s, float(c))
    alpha.setflags(write=False)
    f = KernelExpansion(kernel, pts, alpha)
    return Scenario(
        scenario_id=f"rkhs-sparse-{kernel.name}-s{s:g}", kind="rkhs-sparse", design=design, f_rho=f,
        noise_amplitude=float(noise_amplitude), M=float(M), sup_f=abs(float(c)) * unit_sup,
        smoothness=float(s), master_seed=int(seed), kernel=kernel, anchors=pts, alpha=alpha,
        config={"function": "rkhs-sparse", "kernel": kernel.to_config(), "p": p, "c": float(c)},
    )
