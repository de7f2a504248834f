"""Bounded symmetric kernels selectable by name.

All kernels take points as arrays of shape ``(m,)`` (d = 1) or ``(m, d)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from threshreg.errors import InvalidArgument


def as_points(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 0:
        x = x[None]
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise InvalidArgument("points must be given as (m,) or (m, d) arrays")
    return x


def _sqdist(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = a[:, None, :] - b[None, :, :]
    return np.einsum("ijk,ijk->ij", d, d)


@dataclass(frozen=True)
class Kernel:
    """A symmetric kernel bounded by ``kappa``.

    ``matrix(a, b)`` returns the ``(len(a), len(b))`` array of kernel values.
    """

    name: str
    params: dict = field(default_factory=dict)
    kappa: float = 1.0
    func: Callable | None = field(default=None, compare=False, repr=False)

    def matrix(self, a, b) -> np.ndarray:
        a, b = as_points(a), as_points(b)
        if self.func is not None:
            return np.array([[self.func(p, q) for q in b] for p in a], dtype=np.float64).reshape(len(a), len(b))
        p = self.params
        if self.name == "gaussian":
            return p["scale"] * np.exp(-_sqdist(a, b) / p["bandwidth"] ** 2)
        if self.name == "laplacian":
            return p["scale"] * np.exp(-np.sqrt(_sqdist(a, b)) / p["bandwidth"])
        if self.name == "indicator-partition":
            ca = np.floor((a - p["origin"]) / p["width"])
            cb = np.floor((b - p["origin"]) / p["width"])
            same = np.all(ca[:, None, :] == cb[None, :, :], axis=2)
            return p["scale"] * same.astype(np.float64)
        raise InvalidArgument(f"kernel {self.name!r} has no closed form")

    def evaluate(self, x, y) -> float:
        return float(self.matrix(x, y)[0, 0])

    def to_config(self) -> dict:
        if self.func is not None:
            raise InvalidArgument("custom kernels cannot be serialized")
        return {"name": self.name, **self.params}


def gaussian(bandwidth: float, scale: float = 1.0) -> Kernel:
    """``scale * exp(-|x - y|**2 / bandwidth**2)``."""
    _positive(bandwidth=bandwidth, scale=scale)
    return Kernel("gaussian", {"bandwidth": float(bandwidth), "scale": float(scale)}, kappa=float(scale))


def laplacian(bandwidth: float, scale: float = 1.0) -> Kernel:
    """``scale * exp(-|x - y| / bandwidth)``."""
    _positive(bandwidth=bandwidth, scale=scale)
    return Kernel("laplacian", {"bandwidth": float(bandwidth), "scale": float(scale)}, kappa=float(scale))


def indicator_partition(width: float, scale: float = 1.0, origin: float = 0.0) -> Kernel:
    """``scale`` when ``x`` and ``y`` fall in the same cell of the grid of side ``width``."""
    _positive(width=width, scale=scale)
    return Kernel(
        "indicator-partition",
        {"width": float(width), "scale": float(scale), "origin": float(origin)},
        kappa=float(scale),
    )


def custom(func: Callable, kappa: float, name: str = "custom") -> Kernel:
    return Kernel(name, {}, kappa=float(kappa), func=func)


_BUILDERS = {
    "gaussian": gaussian,
    "laplacian": laplacian,
    "indicator-partition": indicator_partition,
}


def kernel_from_config(cfg: dict | str) -> Kernel:
    if isinstance(cfg, str):
        cfg = {"name": cfg}
    cfg = dict(cfg)
    name = cfg.pop("name", None)
    if name not in _BUILDERS:
        raise InvalidArgument(f"unknown kernel {name!r}; expected one of {sorted(_BUILDERS)}")
    try:
        return _BUILDERS[name](**cfg)
    except TypeError as exc:
        raise InvalidArgument(f"bad parameters for kernel {name!r}: {exc}") from None


def _positive(**values: float) -> None:
    for key, v in values.items():
        if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
            raise InvalidArgument(f"kernel parameter {key} must be positive, got {v!r}")
