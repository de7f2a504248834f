"""``threshreg`` command line: fit estimators on CSV data, certify the Gram
matrix, and run Monte Carlo studies on synthetic scenarios.

Exit status: 0 success, 2 configuration error, 3 data error, 4 Gram matrix
not almost diagonal, 5 estimation failure (singular system or too many
failed replications), 6 I/O error, 1 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import traceback
from pathlib import Path

import numpy as np

from threshreg import io
from threshreg.config import COMMANDS, RunConfig, load_document, parse_config
from threshreg.errors import (
    AssumptionViolated,
    ConfigError,
    DataError,
    InvalidArgument,
    SingularSystem,
)
from threshreg.harness import StudyRefused, estimate_ac, rate_study, resolve_kernel
from threshreg.rkhs import build_design, certify_delta, fit_rkhs, grid_anchors, quantile_anchors, select_anchor_count
from threshreg.wavelet_estimator import fit_wavelet, select_max_level

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_ASSUMPTION = 4
EXIT_ESTIMATION = 5
EXIT_IO = 6

log = logging.getLogger("threshreg")


def _kernel_arg(text: str):
    text = text.strip()
    if text.startswith("{"):
        try:
            return json.loads(text)
        except json.JSONDecodeError as exc:
            raise argparse.ArgumentTypeError(f"bad kernel JSON: {exc}") from None
    return text


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="threshreg", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    helps = {
        "fit-rkhs": "fit the kernel hard-thresholding estimator to an x,y CSV",
        "fit-wavelet": "fit the warped wavelet hard-thresholding estimator to an x,y CSV",
        "check-assumption": "print the almost-diagonal certificate for (kernel, anchors, data)",
        "simulate-ac": "estimate the exceedance curve P(loss > eta) on a synthetic scenario",
        "rate-study": "fit the log-log decay of the median loss over a range of n",
    }
    for name in COMMANDS:
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--config", metavar="PATH", help="JSON or YAML configuration document")
        p.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
        p.add_argument("--out", metavar="DIR", help="output directory")
        p.add_argument("--threads", type=int, metavar="N", help="worker processes (0 = all cores)")
        p.add_argument("--T", type=float, help="threshold constant")
        p.add_argument("--kernel", type=_kernel_arg, help="kernel name or JSON mapping")
        p.add_argument("--basis", help="wavelet family: haar, daubechies-4, daubechies-6")
        p.add_argument("--s", type=float, help="smoothness")
        if name in ("fit-rkhs", "fit-wavelet", "check-assumption"):
            p.add_argument("--input", metavar="CSV", help="data file with header x,y")
            p.add_argument("--M", type=float, help="response range bound (only used for warnings)")
        else:
            p.add_argument("--n", type=int, nargs="+", help="sample size(s)")
            p.add_argument("--R", type=int, help="replications per sample size")
            p.add_argument("--norm", choices=("population", "empirical"), help="loss norm")
            if name == "simulate-ac":
                p.add_argument("--eta", type=float, nargs="+", help="ascending tolerance grid")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    doc = load_document(args.config) if args.config else {}
    if "command" in doc and doc["command"] != args.command:
        raise ConfigError("command", f"config is for {doc['command']!r}, invoked as {args.command!r}")
    doc["command"] = args.command
    overrides = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    for key in ("n", "eta"):
        if overrides.get(key) is not None:
            overrides[key] = list(overrides[key])
    return parse_config(doc, **overrides)


def _anchors_for(cfg: RunConfig, sample):
    if not isinstance(cfg.anchors, str):
        return np.array(cfg.anchors)
    p = select_anchor_count(sample.n)
    if cfg.anchors == "grid":
        return grid_anchors(p, float(sample.x.min()), float(sample.x.max()))
    return quantile_anchors(sample.x, p)


def _emit_fit(cfg: RunConfig, fit, sample, extra: dict) -> list[Path]:
    out = Path(cfg.out)
    paths = [io.emit_fit(fit, out / "fit.json"),
             io.emit_fit_plotdata(fit, float(sample.x.min()), float(sample.x.max()), out / "plotdata_fit.csv")]
    io.write_manifest(out, cfg.to_dict(), paths, extra)
    return paths


def run_fit_wavelet(cfg: RunConfig) -> dict:
    sample = io.ingest_xy(cfg.input)
    io.warn_range(sample, cfg.M)
    J = None
    if isinstance(cfg.J, int):
        J = cfg.J
    elif cfg.J == "oracle":
        J = select_max_level(sample.n, cfg.s)
    fit = fit_wavelet(sample, cfg.basis, cfg.T, J, rule=cfg.rule)
    summary = {"n": sample.n, "J": fit.J, "lambda_n": fit.lambda_n, "nonzero": fit.grid.count_nonzero()}
    _emit_fit(cfg, fit, sample, {"summary": summary})
    return summary


def run_fit_rkhs(cfg: RunConfig) -> dict:
    sample = io.ingest_xy(cfg.input)
    io.warn_range(sample, cfg.M)
    anchors = _anchors_for(cfg, sample)
    kernel = resolve_kernel(cfg.kernel, anchors, sample.x)
    fit = fit_rkhs(sample, kernel, anchors, cfg.T, M=cfg.M)
    summary = {"n": sample.n, "p": int(anchors.size), "delta": fit.certificate.delta,
               "lambda_n": fit.lambda_n, "nonzero": int(np.count_nonzero(fit.z_thresholded))}
    _emit_fit(cfg, fit, sample, {"summary": summary})
    return summary


def run_check_assumption(cfg: RunConfig) -> dict:
    sample = io.ingest_xy(cfg.input)
    anchors = _anchors_for(cfg, sample)
    kernel = resolve_kernel(cfg.kernel, anchors, sample.x)
    design = build_design(kernel, anchors, sample.x)
    out = Path(cfg.out)
    base = {"n": sample.n, "p": int(anchors.size), "kernel": kernel.to_config()}
    try:
        cert = certify_delta(design.M_np)
    except AssumptionViolated as exc:
        doc = {**base, "holds": False, "reason": str(exc), **exc.quantities}
        path = io.write_text(out / "certificate.json", io.dumps_json(doc))
        io.write_manifest(out, cfg.to_dict(), [path])
        raise
    doc = {**base, "holds": True, **cert.to_dict()}
    path = io.write_text(out / "certificate.json", io.dumps_json(doc))
    io.write_manifest(out, cfg.to_dict(), [path])
    return doc


def run_simulate_ac(cfg: RunConfig) -> dict:
    scenario = cfg.build_scenario()
    est = cfg.estimator_config()
    out = Path(cfg.out)
    curves, paths = [], []
    for n in cfg.n:
        ac = estimate_ac(est, scenario, n, cfg.eta, cfg.R, norm=cfg.norm,
                         quadrature_points=cfg.quadrature_points, workers=cfg.threads)
        curves.append(ac)
    paths.append(io.emit_curves(curves, out / "ac_curve.csv"))
    for ac in curves:
        paths.append(io.emit_curve_plotdata(ac, out / f"plotdata_ac_n{ac.n}.csv"))
    failures = {str(ac.n): ac.failure_kinds for ac in curves}
    io.write_manifest(out, cfg.to_dict(), paths, {"scenario": scenario.describe(),
                                                  "estimator": est.to_dict(), "failures": failures})
    return {"n": list(cfg.n), "failures": failures}


def run_rate_study(cfg: RunConfig) -> dict:
    scenario = cfg.build_scenario()
    est = cfg.estimator_config()
    out = Path(cfg.out)
    rate = rate_study(est, scenario, cfg.n, cfg.R, norm=cfg.norm,
                      quadrature_points=cfg.quadrature_points, workers=cfg.threads)
    paths = [io.emit_rate(rate, out / "rate_fit.csv"), io.emit_rate_plotdata(rate, out / "plotdata_rate.csv")]
    summary = {"slope": rate.slope, "target_slope": rate.target, "gap": rate.gap, "residual": rate.residual}
    io.write_manifest(out, cfg.to_dict(), paths, {"scenario": scenario.describe(), "estimator": est.to_dict(),
                                                  "summary": summary})
    return summary


RUNNERS = {
    "fit-wavelet": run_fit_wavelet,
    "fit-rkhs": run_fit_rkhs,
    "check-assumption": run_check_assumption,
    "simulate-ac": run_simulate_ac,
    "rate-study": run_rate_study,
}


def _report(code: int, kind: str, exc: BaseException, **extra) -> int:
    msg = {"error": kind, "message": str(exc), **extra}
    print(json.dumps(msg, default=float), file=sys.stderr)
    return code


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
    except ConfigError as exc:
        return _report(EXIT_CONFIG, "config", exc, field=exc.field)
    try:
        result = RUNNERS[cfg.command](cfg)
    except ConfigError as exc:
        return _report(EXIT_CONFIG, "config", exc, field=exc.field)
    except DataError as exc:
        return _report(EXIT_DATA, "data", exc, row=exc.row, column=exc.column)
    except AssumptionViolated as exc:
        return _report(EXIT_ASSUMPTION, "assumption-violated", exc, **exc.quantities)
    except SingularSystem as exc:
        return _report(EXIT_ESTIMATION, "singular-system", exc, condition=exc.condition)
    except StudyRefused as exc:
        return _report(EXIT_ESTIMATION, "study-refused", exc)
    except InvalidArgument as exc:
        return _report(EXIT_DATA, "data", exc)
    except OSError as exc:
        return _report(EXIT_IO, "io", exc)
    except Exception as exc:  # noqa: BLE001 - last-resort boundary
        traceback.print_exc()
        return _report(EXIT_INTERNAL, "internal", exc)
    print(io.dumps_json(result), end="")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
