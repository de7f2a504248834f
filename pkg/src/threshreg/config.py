"""Run configuration: strict parsing, defaults and canonical form.

A configuration is a flat mapping (JSON or YAML) plus an optional
``scenario`` block.  Unknown keys are rejected, every value is validated
before anything runs, and :meth:`RunConfig.to_dict` emits the canonical
document that parses back to an identical :class:`RunConfig`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, fields
from pathlib import Path

import yaml

from threshreg.errors import ConfigError, InvalidArgument
from threshreg.harness import ANCHOR_POLICIES, NORMS, EstimatorConfig
from threshreg.kernels import kernel_from_config
from threshreg.synthetic import (
    Scenario,
    make_holder_scenario,
    make_null_scenario,
    make_rkhs_sparse_scenario,
    warp_from_config,
)
from threshreg.wavelet_estimator import NODE_RULES
from threshreg.wavelets import get_basis

COMMANDS = ("fit-rkhs", "fit-wavelet", "check-assumption", "simulate-ac", "rate-study")
SCENARIO_KINDS = ("holder", "rkhs-sparse", "null")
DEFAULT_KERNEL = {"name": "gaussian", "bandwidth": "auto", "scale": "auto"}
_SCENARIO_KEYS = {
    "holder": {"kind", "design", "M", "noise_amplitude", "basis", "j_max", "c"},
    "rkhs-sparse": {"kind", "design", "M", "noise_amplitude", "kernel", "anchors", "c"},
    "null": {"kind", "design", "M", "noise_amplitude"},
}


@dataclass(frozen=True)
class RunConfig:
    command: str
    input: str | None = None
    seed: int = 0
    out: str = "."
    threads: int = 1
    T: float = 4.0
    R: int = 100
    n: tuple = ()
    eta: tuple = ()
    norm: str = "population"
    quadrature_points: int = 4096
    estimator: str = "wavelet"
    basis: str = "haar"
    J: object = "universal"
    rule: str = "point"
    kernel: dict | None = None
    anchors: object = "quantile"
    s: float | None = None
    M: float | None = None
    scenario: dict | None = None

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = list(v) if isinstance(v, tuple) else v
        return out

    def estimator_config(self) -> EstimatorConfig:
        J, s = None, None
        if isinstance(self.J, int):
            J = self.J
        elif self.J == "oracle":
            s = self.s
        anchors = self.anchors if isinstance(self.anchors, str) else "quantile"
        kernel = None if (self.estimator == "rkhs" and anchors == "scenario") else self.kernel
        return EstimatorConfig(kind=self.estimator, T=self.T, basis=self.basis, J=J, s=s, rule=self.rule,
                               kernel=kernel, anchors=anchors)

    def build_scenario(self) -> Scenario:
        return build_scenario(self.scenario, s=self.s, seed=self.seed, basis=self.basis)


def load_document(path: str | Path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
    try:
        doc = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError("config", f"malformed document {path}: {exc}") from None
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigError("config", "top level must be a mapping")
    return doc


def _num(field, v, *, integer=False, positive=False, nonneg=False, allow_none=False):
    if v is None and allow_none:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(field, f"expected a number, got {v!r}")
    if integer:
        if isinstance(v, float) and not v.is_integer():
            raise ConfigError(field, f"expected an integer, got {v!r}")
        v = int(v)
    else:
        v = float(v)
        if not math.isfinite(v):
            raise ConfigError(field, "must be finite")
    if positive and not v > 0:
        raise ConfigError(field, f"must be positive, got {v!r}")
    if nonneg and v < 0:
        raise ConfigError(field, f"must be non-negative, got {v!r}")
    return v


def _choice(field, v, options):
    if v not in options:
        raise ConfigError(field, f"expected one of {list(options)}, got {v!r}")
    return v


def _num_list(field, v, *, integer=False):
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        v = [v]
    if not isinstance(v, (list, tuple)):
        raise ConfigError(field, f"expected a list of numbers, got {v!r}")
    return tuple(_num(f"{field}[{i}]", x, integer=integer) for i, x in enumerate(v))


def _kernel(field, v, *, allow_auto: bool):
    if isinstance(v, str):
        v = {"name": v}
    if not isinstance(v, dict) or "name" not in v:
        raise ConfigError(field, "expected a kernel mapping with a 'name'")
    probe = {}
    for key, val in v.items():
        if key == "name":
            probe[key] = val
        elif val == "auto" and allow_auto:
            probe[key] = 1.0
        else:
            probe[key] = _num(f"{field}.{key}", val)
    if allow_auto:
        for key in _AUTO_DEFAULTS.get(v["name"], ()):
            probe.setdefault(key, 1.0)
    try:
        kernel_from_config(probe)
    except InvalidArgument as exc:
        raise ConfigError(field, str(exc)) from None
    return dict(v)


_AUTO_DEFAULTS = {
    "gaussian": ("bandwidth", "scale"),
    "laplacian": ("bandwidth", "scale"),
    "indicator-partition": ("width", "scale"),
}


def _with_auto_defaults(k: dict) -> dict:
    """Estimator kernels: missing size parameters default to ``"auto"``."""
    out = dict(k)
    for key in _AUTO_DEFAULTS.get(k["name"], ()):
        out.setdefault(key, "auto")
    if k["name"] == "indicator-partition":
        out.setdefault("origin", "auto")
    return out


def parse_config(doc: dict | None = None, **overrides) -> RunConfig:
    """Validate a configuration document; ``overrides`` (non-``None``) win over the document."""
    doc = dict(doc or {})
    for key, v in overrides.items():
        if v is not None:
            doc[key] = v
    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(doc) - known)
    if unknown:
        raise ConfigError(unknown[0], "unknown key")
    if "command" not in doc:
        raise ConfigError("command", "missing required field")
    cmd = _choice("command", doc["command"], COMMANDS)
    out = {"command": cmd}

    seed = _num("seed", doc.get("seed", 0), integer=True, nonneg=True)
    if seed >= 2 ** 64:
        raise ConfigError("seed", "must fit in 64 bits")
    out["seed"] = seed
    o = doc.get("out", ".")
    if not isinstance(o, str) or not o:
        raise ConfigError("out", "expected a directory path")
    out["out"] = o
    out["threads"] = _num("threads", doc.get("threads", 1), integer=True, nonneg=True)
    out["T"] = _num("T", doc.get("T", 4.0), positive=True)
    out["R"] = _num("R", doc.get("R", 100), integer=True, positive=True)
    out["quadrature_points"] = _num("quadrature_points", doc.get("quadrature_points", 4096), integer=True)
    if out["quadrature_points"] < 16:
        raise ConfigError("quadrature_points", "must be >= 16")
    out["norm"] = _choice("norm", doc.get("norm", "population"), NORMS)
    out["rule"] = _choice("rule", doc.get("rule", "point"), NODE_RULES)
    basis = doc.get("basis", "haar")
    try:
        out["basis"] = get_basis(basis).family
    except InvalidArgument as exc:
        raise ConfigError("basis", str(exc)) from None
    s = _num("s", doc.get("s"), positive=True, allow_none=True)
    out["s"] = s
    out["M"] = _num("M", doc.get("M"), positive=True, allow_none=True)

    J = doc.get("J", "universal")
    if J not in ("universal", "oracle"):
        J = _num("J", J, integer=True, nonneg=True)
    if J == "oracle" and s is None:
        raise ConfigError("J", "the smoothness-aware level needs 's'")
    out["J"] = J

    inp = doc.get("input")
    if inp is not None and not isinstance(inp, str):
        raise ConfigError("input", "expected a file path")
    out["input"] = inp

    scen = doc.get("scenario")
    if cmd in ("fit-rkhs", "fit-wavelet", "check-assumption"):
        if inp is None:
            raise ConfigError("input", "missing required field")
        estimator = "wavelet" if cmd == "fit-wavelet" else "rkhs"
        if "estimator" in doc and doc["estimator"] != estimator:
            raise ConfigError("estimator", f"{cmd} implies estimator {estimator!r}")
        if scen is not None:
            raise ConfigError("scenario", f"{cmd} reads data from 'input', not a scenario")
        out["scenario"] = None
    else:
        if scen is None:
            raise ConfigError("scenario", "missing required field")
        scen = _scenario_block(scen)
        if scen["kind"] != "null" and s is None:
            raise ConfigError("s", f"{scen['kind']} scenario needs a smoothness 's'")
        out["scenario"] = scen
        default_est = "rkhs" if scen["kind"] == "rkhs-sparse" else "wavelet"
        estimator = _choice("estimator", doc.get("estimator", default_est), ("wavelet", "rkhs"))
        n = _num_list("n", doc.get("n", ()), integer=True)
        if not n:
            raise ConfigError("n", "missing required field")
        if any(v < 4 for v in n):
            raise ConfigError("n", "sample sizes must be >= 4")
        out["n"] = n
        if cmd == "simulate-ac":
            eta = _num_list("eta", doc.get("eta", ()))
            if not eta:
                raise ConfigError("eta", "missing required field")
            if any(e < 0 for e in eta) or any(b <= a for a, b in zip(eta, eta[1:])):
                raise ConfigError("eta", "must be non-negative and strictly ascending")
            out["eta"] = eta
        if out["R"] < 30:
            raise ConfigError("R", "Monte Carlo studies need R >= 30")
        if cmd == "rate-study":
            if len(set(n)) < 4 or len(set(n)) != len(n):
                raise ConfigError("n", "rate study needs at least 4 distinct sizes")
            if max(n) < 4 * min(n):
                raise ConfigError("n", "sizes must span at least two octaves")
            if scen["kind"] == "null":
                raise ConfigError("scenario", "rate study needs a scenario with declared smoothness")
    out["estimator"] = estimator

    anchors = doc.get("anchors")
    if anchors is None:
        anchors = "scenario" if (estimator == "rkhs" and (out["scenario"] or {}).get("kind") == "rkhs-sparse") \
            else "quantile"
    if isinstance(anchors, str):
        anchors = _choice("anchors", anchors, ANCHOR_POLICIES)
        if anchors == "scenario" and (out["scenario"] or {}).get("kind") != "rkhs-sparse":
            raise ConfigError("anchors", "'scenario' anchors need an rkhs-sparse scenario")
    else:
        if cmd not in ("fit-rkhs", "check-assumption"):
            raise ConfigError("anchors", "explicit anchor lists are only accepted by fit-rkhs and check-assumption")
        anchors = _num_list("anchors", anchors)
        if len(set(anchors)) != len(anchors):
            raise ConfigError("anchors", "must be pairwise distinct")
    out["anchors"] = anchors

    kernel = doc.get("kernel", DEFAULT_KERNEL if estimator == "rkhs" and anchors != "scenario" else None)
    if kernel is not None:
        kernel = _kernel("kernel", kernel, allow_auto=True)
        kernel = _with_auto_defaults(kernel)
    out["kernel"] = kernel
    if estimator == "rkhs" and anchors != "scenario" and kernel is None:
        raise ConfigError("kernel", "missing required field")

    try:
        cfg = RunConfig(**out)
        if cmd in ("simulate-ac", "rate-study"):
            cfg.estimator_config()
            cfg.build_scenario()
    except ConfigError:
        raise
    except InvalidArgument as exc:
        raise ConfigError("scenario" if cmd in ("simulate-ac", "rate-study") else "config", str(exc)) from None
    return cfg


def _scenario_block(scen) -> dict:
    if not isinstance(scen, dict):
        raise ConfigError("scenario", "expected a mapping")
    kind = _choice("scenario.kind", scen.get("kind"), SCENARIO_KINDS)
    unknown = sorted(set(scen) - _SCENARIO_KEYS[kind])
    if unknown:
        raise ConfigError(f"scenario.{unknown[0]}", "unknown key")
    out = {"kind": kind}
    design = scen.get("design", {"name": "uniform"})
    try:
        out["design"] = warp_from_config(design).to_config()
    except (InvalidArgument, KeyError, TypeError) as exc:
        raise ConfigError("scenario.design", str(exc)) from None
    out["M"] = _num("scenario.M", scen.get("M", 2.0), positive=True)
    out["noise_amplitude"] = _num("scenario.noise_amplitude", scen.get("noise_amplitude", 0.25), nonneg=True)
    if kind == "holder":
        if "basis" in scen:
            try:
                out["basis"] = get_basis(scen["basis"]).family
            except InvalidArgument as exc:
                raise ConfigError("scenario.basis", str(exc)) from None
        out["j_max"] = _num("scenario.j_max", scen.get("j_max", 14), integer=True, nonneg=True)
        out["c"] = _num("scenario.c", scen.get("c"), allow_none=True)
    elif kind == "rkhs-sparse":
        if "kernel" not in scen:
            raise ConfigError("scenario.kernel", "missing required field")
        out["kernel"] = _kernel("scenario.kernel", scen["kernel"], allow_auto=False)
        anchors = scen.get("anchors", {"grid": 32})
        if isinstance(anchors, dict):
            if set(anchors) != {"grid"}:
                raise ConfigError("scenario.anchors", "expected {'grid': p} or a list of points")
            anchors = {"grid": _num("scenario.anchors.grid", anchors["grid"], integer=True, positive=True)}
        else:
            anchors = list(_num_list("scenario.anchors", anchors))
        out["anchors"] = anchors
        out["c"] = _num("scenario.c", scen.get("c"), allow_none=True)
    return out


def build_scenario(scen: dict, *, s: float | None, seed: int, basis: str = "haar") -> Scenario:
    """Instantiate a validated scenario block."""
    from threshreg.rkhs import grid_anchors

    design = warp_from_config(scen.get("design", {"name": "uniform"}))
    M, a = scen.get("M", 2.0), scen.get("noise_amplitude", 0.25)
    kind = scen["kind"]
    if kind == "null":
        return make_null_scenario(design, M, a, seed=seed)
    if kind == "holder":
        return make_holder_scenario(s, scen.get("basis", basis), design, M, a,
                                    j_max=scen.get("j_max", 14), c=scen.get("c"), seed=seed)
    anchors = scen.get("anchors", {"grid": 32})
    if isinstance(anchors, dict):
        lo, hi = design.support
        anchors = grid_anchors(anchors["grid"], lo, hi)
    return make_rkhs_sparse_scenario(scen["kernel"], anchors, s, M, a, design=design,
                                     c=scen.get("c"), seed=seed)
