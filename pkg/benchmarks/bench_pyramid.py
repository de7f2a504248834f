"""Time the forward and inverse pyramid with the compiled and numpy backends.

Usage: python benchmarks/bench_pyramid.py [--repeat N] [--max-level R]
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from threshreg import _pycore
from threshreg.wavelets import FAMILIES, get_basis

try:
    from threshreg import _ccore
except ImportError:  # extension not built
    _ccore = None


def best_time(fn, repeat: int) -> float:
    number = 5
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--max-level", type=int, default=16)
    args = ap.parse_args(argv)
    backends = {"numpy": _pycore}
    if _ccore is not None:
        backends["cython"] = _ccore
    else:
        print("compiled extension not available; timing numpy only")
    rng = np.random.default_rng(0)
    print(f"{'family':<14}{'length':>8}  " + "  ".join(f"{b + ' fwd':>12}{b + ' inv':>12}" for b in backends)
          + ("   speedup" if len(backends) == 2 else ""))
    for family in FAMILIES:
        basis = get_basis(family)
        h, g = basis.dec_lo, basis.dec_hi
        for R in range(8, args.max_level + 1, 2):
            x = rng.standard_normal(2 ** R)
            times = []
            for mod in backends.values():
                c = mod.forward(x, h, g, 0)
                times.append(best_time(lambda: mod.forward(x, h, g, 0), args.repeat))
                times.append(best_time(lambda: mod.inverse(c, h, g, 0), args.repeat))
            cells = "  ".join(f"{times[i] * 1e6:10.1f}us{times[i + 1] * 1e6:10.1f}us" for i in range(0, len(times), 2))
            speed = f"   {(times[0] + times[1]) / (times[2] + times[3]):6.1f}x" if len(times) == 4 else ""
            print(f"{family:<14}{2 ** R:>8}  {cells}{speed}")


if __name__ == "__main__":
    main()
