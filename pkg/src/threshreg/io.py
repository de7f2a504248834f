"""Reading (x, y) data and writing fits, curves, plot data and manifests.

Floats are written with 17 significant digits so every binary64 value
round-trips exactly.  Everything except the manifest's ``run`` block is a
pure function of the configuration and seed.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import platform
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from threshreg.errors import DataError, InvalidArgument
from threshreg.harness import ACEstimate, RateFit
from threshreg.rkhs import RkhsFit
from threshreg.sample import Sample
from threshreg.wavelet_estimator import WaveletFit

log = logging.getLogger(__name__)

PLOT_POINTS = 1024
AC_COLUMNS = ("scenario_id", "estimator", "n", "eta", "exceed_prob", "ci_low", "ci_high", "R", "failures")
RATE_COLUMNS = ("scenario_id", "estimator", "s", "n", "median_loss", "slope", "target_slope", "residual")


def fmt_float(v: float) -> str:
    return format(float(v), ".17g")


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return fmt_float(v)
    return "" if v is None else str(v)


def dumps_json(obj, indent: int = 2) -> str:
    """JSON text with floats at 17 significant digits; non-finite floats are rejected."""

    def enc(o, level):
        pad, inner = " " * (indent * level), " " * (indent * (level + 1))
        if isinstance(o, dict):
            if not o:
                return "{}"
            items = [f"{inner}{_json_str(str(k))}: {enc(v, level + 1)}" for k, v in o.items()]
            return "{\n" + ",\n".join(items) + "\n" + pad + "}"
        if isinstance(o, (list, tuple, np.ndarray)):
            o = list(o)
            if not o:
                return "[]"
            if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in o):
                return "[" + ", ".join(enc(v, level + 1) for v in o) + "]"
            return "[\n" + ",\n".join(inner + enc(v, level + 1) for v in o) + "\n" + pad + "]"
        if o is None:
            return "null"
        if isinstance(o, (bool, np.bool_)):
            return "true" if o else "false"
        if isinstance(o, (int, np.integer)):
            return str(int(o))
        if isinstance(o, (float, np.floating)):
            if not math.isfinite(o):
                raise InvalidArgument(f"cannot serialize non-finite value {o!r}")
            return fmt_float(o)
        if isinstance(o, str):
            return _json_str(o)
        raise InvalidArgument(f"cannot serialize {type(o).__name__}")

    return enc(obj, 0) + "\n"


def _json_str(s: str) -> str:
    return json.dumps(s)


def write_text(path: Path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)
    return path


def write_csv(path, columns, rows) -> Path:
    lines = [",".join(columns)]
    for row in rows:
        values = [row[c] for c in columns] if isinstance(row, dict) else list(row)
        lines.append(",".join(_cell(v) for v in values))
    return write_text(Path(path), "\n".join(lines) + "\n")


def ingest_xy(path) -> Sample:
    """Read a CSV with header ``x,y``; rows are numbered from 1 after the header."""
    path = Path(path)
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc.strerror}") from None
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError("empty input: no header")
        if [h.strip() for h in header] != ["x", "y"]:
            raise DataError(f"header must be 'x,y', got {','.join(header)!r}", row=0)
        xs, ys = [], []
        for i, rec in enumerate(reader, start=1):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != 2:
                raise DataError(f"expected 2 fields, got {len(rec)}", row=i)
            vals = []
            for col, cell in zip(("x", "y"), rec):
                try:
                    v = float(cell)
                except ValueError:
                    raise DataError(f"not a number: {cell.strip()!r}", row=i, column=col) from None
                if not math.isfinite(v):
                    raise DataError(f"non-finite value {cell.strip()!r}", row=i, column=col)
                vals.append(v)
            xs.append(vals[0])
            ys.append(vals[1])
    if not xs:
        raise DataError("empty input: no data rows")
    return Sample(np.array(xs), np.array(ys))


def warn_range(sample: Sample, M: float | None) -> int:
    """Log (never reject) responses outside ``[-M/2, M/2]``; returns how many."""
    if M is None:
        return 0
    bad = int(np.sum(np.abs(sample.y) > M / 2))
    if bad:
        log.warning("%d responses fall outside [-M/2, M/2] with M=%g", bad, M)
    return bad


def emit_fit(fit, path) -> Path:
    return write_text(Path(path), dumps_json(fit.to_dict()))


def read_fit(path):
    doc = json.loads(Path(path).read_text())
    kind = doc.get("estimator")
    if kind == "wavelet":
        return WaveletFit.from_dict(doc)
    if kind == "rkhs":
        return RkhsFit.from_dict(doc)
    raise InvalidArgument(f"unknown fit document kind {kind!r}")


def plot_grid(low: float, high: float, points: int = PLOT_POINTS) -> np.ndarray:
    return np.linspace(low, high, points)


def emit_fit_plotdata(fit, low: float, high: float, path) -> Path:
    x = plot_grid(low, high)
    return write_csv(path, ("x", "f_hat"), zip(x, fit(x)))


def emit_curve(estimate: ACEstimate, path) -> Path:
    return write_csv(path, AC_COLUMNS, estimate.rows())


def emit_curves(estimates, path) -> Path:
    return write_csv(path, AC_COLUMNS, [r for e in estimates for r in e.rows()])


def emit_curve_plotdata(estimate: ACEstimate, path) -> Path:
    return write_csv(path, ("eta", "exceed_prob"), zip(estimate.eta_grid, estimate.exceed_prob))


def emit_rate(rate: RateFit, path) -> Path:
    return write_csv(path, RATE_COLUMNS, rate.rows())


def emit_rate_plotdata(rate: RateFit, path) -> Path:
    x = np.log(rate.n_values / np.log(rate.n_values))
    return write_csv(path, ("n", "log_n_over_log_n", "median_loss", "fitted"),
                     zip(rate.n_values, x, rate.median_losses, np.exp(rate.slope * x + rate.intercept)))


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(out_dir, config: dict, outputs: list[Path], extra: dict | None = None,
                   timestamp: str | None = None) -> Path:
    """``manifest.json``: configuration, seeds and output digests; wall-clock data only under ``run``."""
    from threshreg import __version__
    from threshreg._core import BACKEND

    out_dir = Path(out_dir)
    doc = {
        "config": config,
        "seed": config.get("seed"),
        "outputs": {Path(p).name: file_digest(p) for p in outputs},
        "software": {"threshreg": __version__, "numpy": np.__version__, "backend": BACKEND},
    }
    if extra:
        doc.update(extra)
    doc["run"] = {
        "timestamp": timestamp or datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "python": platform.python_version(),
        "host": platform.node(),
    }
    return write_text(out_dir / "manifest.json", dumps_json(doc))
