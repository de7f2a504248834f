import json

import numpy as np
import pytest
import yaml

from threshreg import io
from threshreg.config import RunConfig, load_document, parse_config
from threshreg.errors import ConfigError, DataError
from threshreg.harness import EstimatorConfig, ac_from_losses, estimate_ac
from threshreg.kernels import gaussian
from threshreg.rkhs import fit_rkhs
from threshreg.sample import Sample
from threshreg.synthetic import make_null_scenario
from threshreg.wavelet_estimator import fit_wavelet

SIM = {"command": "simulate-ac", "scenario": {"kind": "holder"}, "s": 1.0, "n": [256], "eta": [0.1, 0.2], "R": 30}


def test_minimal_fit_wavelet_defaults():
    cfg = parse_config({"command": "fit-wavelet", "input": "data.csv"})
    assert cfg.T == 4.0 and cfg.J == "universal" and cfg.R == 100 and cfg.quadrature_points == 4096
    assert cfg.estimator == "wavelet" and cfg.basis == "haar" and cfg.rule == "point" and cfg.seed == 0


@pytest.mark.parametrize("field,value", [("T", -1), ("T", "four"), ("R", 0), ("seed", -3), ("threads", 1.5),
                                         ("basis", "coif"), ("norm", "sup"), ("quadrature_points", 8)])
def test_invalid_values_name_the_field(field, value):
    with pytest.raises(ConfigError) as exc:
        parse_config({"command": "fit-wavelet", "input": "a.csv", field: value})
    assert exc.value.field == field


def test_unknown_and_missing_keys():
    with pytest.raises(ConfigError) as exc:
        parse_config({"command": "fit-wavelet", "input": "a.csv", "lambda": 0.3})
    assert exc.value.field == "lambda"
    with pytest.raises(ConfigError) as exc:
        parse_config({"command": "fit-wavelet"})
    assert exc.value.field == "input"
    with pytest.raises(ConfigError) as exc:
        parse_config({"input": "a.csv"})
    assert exc.value.field == "command"
    with pytest.raises(ConfigError) as exc:
        parse_config({**SIM, "scenario": {"kind": "holder", "colour": 1}})
    assert exc.value.field == "scenario.colour"


def test_simulation_checks():
    for bad, field in [({"R": 10}, "R"), ({"eta": [0.2, 0.1]}, "eta"), ({"n": []}, "n"), ({"s": None}, "s"),
                       ({"J": "oracle", "s": None}, "J")]:
        doc = {**SIM, **bad}
        doc = {k: v for k, v in doc.items() if v is not None}
        with pytest.raises(ConfigError) as exc:
            parse_config(doc)
        assert exc.value.field == field
    rate = {**SIM, "command": "rate-study", "n": [256, 512, 1024]}
    del rate["eta"]
    with pytest.raises(ConfigError) as exc:
        parse_config(rate)
    assert exc.value.field == "n"
    with pytest.raises(ConfigError) as exc:
        parse_config({**SIM, "scenario": {"kind": "holder", "M": 0.4}})
    assert exc.value.field == "scenario"


@pytest.mark.parametrize("doc", [
    {"command": "fit-wavelet", "input": "a.csv", "basis": "db3", "J": 3, "T": 2.5, "rule": "sample"},
    {"command": "fit-rkhs", "input": "a.csv", "kernel": "laplacian", "anchors": [0.1, 0.5, 0.9]},
    {"command": "check-assumption", "input": "a.csv", "kernel": {"name": "gaussian", "bandwidth": 0.2}},
    {**SIM, "seed": 2 ** 63 + 5, "threads": 0, "norm": "empirical"},
    {"command": "rate-study", "n": [64, 128, 256, 512], "R": 30, "s": 1.0,
     "scenario": {"kind": "rkhs-sparse", "kernel": {"name": "indicator-partition", "width": 0.25, "scale": 2.0},
                  "anchors": {"grid": 4}, "M": 8, "noise_amplitude": 1}},
])
def test_canonical_round_trip(doc, tmp_path):
    cfg = parse_config(doc)
    again = parse_config(cfg.to_dict())
    assert again == cfg
    path = tmp_path / "cfg.json"
    path.write_text(io.dumps_json(cfg.to_dict()))
    assert parse_config(load_document(path)) == cfg
    ypath = tmp_path / "cfg.yaml"
    ypath.write_text(yaml.safe_dump(cfg.to_dict()))
    assert parse_config(load_document(ypath)) == cfg


def test_rkhs_sparse_defaults_to_scenario_anchors():
    cfg = parse_config({"command": "simulate-ac", "n": [64], "eta": [0.1], "R": 30, "s": 1.0,
                        "scenario": {"kind": "rkhs-sparse", "kernel": {"name": "gaussian", "bandwidth": 0.1}}})
    assert cfg.estimator == "rkhs" and cfg.anchors == "scenario" and cfg.kernel is None
    assert isinstance(cfg.estimator_config(), EstimatorConfig)


def test_overrides_win():
    cfg = parse_config({"command": "fit-wavelet", "input": "a.csv", "T": 3.0}, T=5.0, seed=None)
    assert cfg.T == 5.0 and cfg.seed == 0


def _write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_ingest_three_rows(tmp_path):
    s = io.ingest_xy(_write(tmp_path, "x,y\n0.1,2\n-3e-2,0.30000000000000004\n7,-1.5\n"))
    assert s.n == 3
    assert s.x.tolist() == [0.1, -0.03, 7.0]
    assert s.y.tolist() == [2.0, 0.30000000000000004, -1.5]


@pytest.mark.parametrize("text,row,column", [
    ("x,y\n", None, None),
    ("", None, None),
    ("x,y\n0.5,NaN\n", 1, "y"),
    ("x,y\n0.5,1\nabc,2\n", 2, "x"),
    ("x,y\n0.5,1,3\n", 1, None),
    ("a,b\n1,2\n", 0, None),
])
def test_ingest_errors(tmp_path, text, row, column):
    with pytest.raises(DataError) as exc:
        io.ingest_xy(_write(tmp_path, text))
    assert exc.value.row == row and exc.value.column == column


def test_out_of_range_only_warns(tmp_path, caplog):
    s = io.ingest_xy(_write(tmp_path, "x,y\n0.1,5\n0.2,0.1\n"))
    with caplog.at_level("WARNING"):
        assert io.warn_range(s, 2.0) == 1
    assert "outside" in caplog.text


def test_dumps_json_17_digits():
    text = io.dumps_json({"a": 0.1, "b": [1, 2.5, np.float64(1 / 3)], "c": None, "d": True})
    doc = json.loads(text)
    assert doc["b"][2] == 1 / 3 and "0.33333333333333331" in text
    with pytest.raises(Exception):
        io.dumps_json({"x": float("inf")})


@pytest.mark.parametrize("kind", ["wavelet", "rkhs"])
def test_fit_write_read_round_trip(kind, tmp_path, rng):
    x, y = rng.random(300), np.sin(5 * rng.random(300)) * 0.5
    if kind == "wavelet":
        fit = fit_wavelet(Sample(x, y), "daubechies-4", T=0.5)
    else:
        fit = fit_rkhs(Sample(x, y), gaussian(0.05, 3.0), np.linspace(0.05, 0.95, 8), T=0.5)
    path = io.emit_fit(fit, tmp_path / "fit.json")
    back = io.read_fit(path)
    q = rng.random(100)
    assert np.max(np.abs(back(q) - fit(q))) <= 1e-12


def test_fit_plotdata_endpoints(tmp_path, rng):
    fit = fit_wavelet(Sample(rng.uniform(-2, 3, 100), rng.random(100)), "haar")
    path = io.emit_fit_plotdata(fit, -2.0, 3.0, tmp_path / "p.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == "x,f_hat" and len(lines) == 1025
    assert float(lines[1].split(",")[0]) == -2.0 and float(lines[-1].split(",")[0]) == 3.0


def test_curve_csv_schema(tmp_path):
    ac = estimate_ac(EstimatorConfig(), make_null_scenario(seed=1), 64, [0.0, 0.05, 0.1, 0.5], R=30)
    path = io.emit_curve(ac, tmp_path / "ac_curve.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == ",".join(io.AC_COLUMNS)
    assert len(lines) - 1 == 4
    plot = io.emit_curve_plotdata(ac, tmp_path / "p.csv").read_text().splitlines()
    assert plot[0] == "eta,exceed_prob" and len(plot) == 5


def test_curve_rows_carry_metadata():
    ac = ac_from_losses([0.1, 0.2], [0.15], scenario_id="s", estimator="e", n=10)
    (row,) = ac.rows()
    assert row["scenario_id"] == "s" and row["n"] == 10 and row["exceed_prob"] == 0.5 and row["R"] == 2


def test_manifest_digests(tmp_path):
    p = io.write_text(tmp_path / "a.csv", "x\n1\n")
    m = io.write_manifest(tmp_path, {"seed": 3}, [p], timestamp="2000-01-01T00:00:00+00:00")
    doc = json.loads(m.read_text())
    assert doc["seed"] == 3 and doc["outputs"]["a.csv"] == io.file_digest(p)
    assert doc["run"]["timestamp"].startswith("2000")


def test_unwritable_path_raises_oserror(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(OSError):
        io.write_text(blocker / "sub" / "x.json", "{}")


def test_runconfig_is_frozen():
    cfg = parse_config({"command": "fit-wavelet", "input": "a.csv"})
    with pytest.raises(Exception):
        cfg.T = 3.0  # type: ignore[misc]
    assert isinstance(cfg, RunConfig)
