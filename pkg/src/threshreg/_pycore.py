"""Pure numpy versions of the filter-bank kernels in ``_ccore.pyx``."""

from __future__ import annotations

import numpy as np


def _taps(length: int, nf: int) -> np.ndarray:
    half = length // 2
    return (2 * np.arange(half)[:, None] + np.arange(nf)[None, :]) % length


def forward(x: np.ndarray, h: np.ndarray, g: np.ndarray, j_min: int) -> np.ndarray:
    work = np.array(x, dtype=np.float64, copy=True)
    out = np.empty_like(work)
    length = work.size
    while length > (1 << j_min):
        idx = _taps(length, h.size)
        block = work[:length][idx]
        half = length // 2
        out[half:length] = block @ g
        work[:half] = block @ h
        length = half
    out[:length] = work[:length]
    return out


def inverse(c: np.ndarray, h: np.ndarray, g: np.ndarray, j_min: int) -> np.ndarray:
    c = np.asarray(c, dtype=np.float64)
    length = 1 << j_min
    work = c[:length].copy()
    while length < c.size:
        idx = _taps(2 * length, h.size)
        contrib = work[:, None] * h[None, :] + c[length:2 * length, None] * g[None, :]
        work = np.bincount(idx.ravel(), weights=contrib.ravel(), minlength=2 * length)
        length *= 2
    return work
