from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from threshreg.errors import InvalidArgument


@dataclass(frozen=True, eq=False)
class Sample:
    """Observed pairs ``(x_i, y_i)``; ``x`` is (n,) for d = 1 or (n, d)."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.array(self.x, dtype=np.float64)
        y = np.array(self.y, dtype=np.float64).ravel()
        if x.ndim not in (1, 2) or x.shape[0] != y.size:
            raise InvalidArgument(
                f"x has {x.shape[0] if x.ndim else 0} rows but y has {y.size} entries"
            )
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise InvalidArgument("sample contains NaN or infinite values")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.y.size

    def __len__(self) -> int:
        return self.n
