import csv
import json

import numpy as np
import pytest
import yaml

from gpcb.cli import main
from gpcb.exceptions import ConfigError
from gpcb.harness import RunConfig, load_config, parse_values, run, simulate, sweep
from gpcb.metrics import TRACE_COLUMNS, read_trace_csv


def small_config(tmp_path, **overrides):
    raw = {
        "env": {"kind": "gp_synthetic", "D": 2, "mean_arms": 8, "T": 12, "K": 2,
                "max_arms": 15, "grid_size": 100, "noise_std": 0.1},
        "kernel": {"family": "se", "lengthscale": 1.0},
        "seeds": [0, 1],
        "output_dir": str(tmp_path / "out"),
    }
    raw.update(overrides)
    return raw


def write_config(tmp_path, raw, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(raw))
    return path


def test_two_seeds_give_two_traces_and_a_manifest(tmp_path):
    result = run(RunConfig.from_dict(small_config(tmp_path)))
    files = sorted(p.name for p in result.output_dir.iterdir())
    assert files == ["manifest.json", "trace_seed0.csv", "trace_seed1.csv"]
    manifest = json.loads(result.manifest_path.read_text())
    assert manifest["absent_fields"] == ["wall_ms"]
    assert len(manifest["runs"]) == 2 and manifest["software"]["version"]
    assert all(len(r["sha256"]) == 64 and r["dataset_hash"] for r in manifest["runs"])


def test_rerun_is_byte_identical(tmp_path):
    cfg = RunConfig.from_dict(small_config(tmp_path))
    first = {s: p.read_bytes() for s, p in run(cfg).trace_files.items()}
    manifest = (tmp_path / "out" / "manifest.json").read_bytes()
    second = {s: p.read_bytes() for s, p in run(cfg, jobs=2).trace_files.items()}
    assert first == second
    assert manifest == (tmp_path / "out" / "manifest.json").read_bytes()


def test_invalid_delta_names_its_path(tmp_path):
    with pytest.raises(ConfigError) as err:
        RunConfig.from_dict(small_config(tmp_path, policy={"delta": 1.5}))
    assert err.value.path == "policy.delta" and "policy.delta" in str(err.value)


@pytest.mark.parametrize("overrides,path", [
    ({"policy": {"budget": 3}}, "policy.budget"),
    ({"policy": {"max_arms": 5}}, "policy.max_arms"),
    ({"policy": {"algorithm": "oclok"}, "gp": {"sparse": {"enabled": True}}}, "policy.algorithm"),
    ({"gp": {"noise_variance": 0}}, "gp.noise_variance"),
    ({"oracle": {"kind": "magic"}}, "oracle.kind"),
    ({"seeds": []}, "seeds"),
    ({"surprise": 1}, "config"),
])
def test_config_errors(tmp_path, overrides, path):
    with pytest.raises(ConfigError) as err:
        RunConfig.from_dict(small_config(tmp_path, **overrides))
    assert err.value.path == path


def test_config_hash_is_stable_and_ignores_output_dir(tmp_path):
    a = RunConfig.from_dict(small_config(tmp_path))
    b = RunConfig.from_dict(small_config(tmp_path, output_dir="elsewhere"))
    assert a.config_hash() == b.config_hash()
    assert RunConfig.from_dict(a.to_dict()).config_hash() == a.config_hash()
    assert a.replace_path("env.lengthscale", 0.5).config_hash() != a.config_hash()


def test_trace_schema_has_no_nans(tmp_path):
    result = run(RunConfig.from_dict(small_config(tmp_path)))
    with open(result.trace_files[0], newline="") as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == TRACE_COLUMNS
    assert len(rows) == 13 and all(len(r) == len(TRACE_COLUMNS) for r in rows)
    cols = read_trace_csv(result.trace_files[0])
    for name in TRACE_COLUMNS[3:-1]:
        assert not np.isnan(cols[name]).any()
    assert [len(s) for s in cols["selected_ids"]] == [2] * 12


def test_timing_fills_wall_ms(tmp_path):
    result = run(RunConfig.from_dict(small_config(tmp_path, timing=True, seeds=[0])))
    assert not np.isnan(read_trace_csv(result.trace_files[0])["wall_ms"]).any()


def test_seed_isolation(tmp_path):
    both = run(RunConfig.from_dict(small_config(tmp_path)))
    alone = run(RunConfig.from_dict(small_config(tmp_path, seeds=[1],
                                                 output_dir=str(tmp_path / "alone"))))
    assert both.trace_files[1].read_bytes() == alone.trace_files[1].read_bytes()


def test_seed_offset_shifts_seeds(tmp_path):
    cfg = RunConfig.from_dict(small_config(tmp_path))
    assert set(run(cfg, seed_offset=10).trace_files) == {10, 11}


def test_sparse_toggle_keeps_environment_stream(tmp_path):
    exact = RunConfig.from_dict(small_config(tmp_path))
    sparse = RunConfig.from_dict(small_config(tmp_path, gp={"sparse": {"enabled": True,
                                                                       "num_inducing": 5}}))
    _, a = simulate(exact, 3)
    _, b = simulate(sparse, 3)
    assert a["dataset_hash"] == b["dataset_hash"]


def test_sweep_lengthscale_bookkeeping(tmp_path):
    cfg = RunConfig.from_dict(small_config(tmp_path, seeds=[0, 1, 2, 3, 4]))
    root = sweep(cfg, "env.lengthscale", [0.01, 1.0])
    traces = sorted(root.rglob("trace_seed*.csv"))
    assert len(traces) == 10
    with open(root / "summary.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["value"] for r in rows] == ["0.01", "1.0"]
    assert all(r["n_seeds"] == "5" for r in rows)


def test_sweep_num_inducing(tmp_path):
    raw = small_config(tmp_path, gp={"sparse": {"enabled": True}}, seeds=[0])
    root = sweep(RunConfig.from_dict(raw), "gp.sparse.num_inducing", [10, 20, 50])
    with open(root / "summary.csv", newline="") as fh:
        assert [r["value"] for r in csv.DictReader(fh)] == ["10", "20", "50"]


def test_sweep_rejects_empty_and_unknown(tmp_path):
    cfg = RunConfig.from_dict(small_config(tmp_path))
    with pytest.raises(ConfigError):
        sweep(cfg, "env.lengthscale", [])
    with pytest.raises(ConfigError):
        parse_values(" , ")
    with pytest.raises(ConfigError) as err:
        sweep(cfg, "env.no_such_field", [1])
    assert err.value.path == "env.no_such_field"


def test_output_dir_env_override(tmp_path, monkeypatch):
    path = write_config(tmp_path, small_config(tmp_path))
    monkeypatch.setenv("GPCB_OUTPUT_DIR", str(tmp_path / "override"))
    assert load_config(path).output_dir == str(tmp_path / "override")


# --- CLI ---------------------------------------------------------------------


def test_cli_run_and_exit_codes(tmp_path, capsys):
    good = write_config(tmp_path, small_config(tmp_path))
    assert main(["run", "--config", str(good)]) == 0
    assert "manifest" in capsys.readouterr().out

    bad = write_config(tmp_path, small_config(tmp_path, policy={"delta": 1.5}), "bad.yaml")
    assert main(["run", "--config", str(bad)]) == 2
    assert "policy.delta" in capsys.readouterr().err

    assert main(["run", "--config", str(tmp_path / "missing.yaml")]) == 4
    broken = tmp_path / "broken.yaml"
    broken.write_text("env: [unclosed")
    assert main(["run", "--config", str(broken)]) == 2


def test_cli_numerical_error_exit_code(tmp_path, monkeypatch):
    from gpcb import harness
    from gpcb.exceptions import NumericalError

    def explode(*args, **kwargs):
        raise NumericalError("factorization failed")

    monkeypatch.setattr(harness, "simulate", explode)
    good = write_config(tmp_path, small_config(tmp_path))
    assert main(["run", "--config", str(good)]) == 3


def test_cli_sweep(tmp_path, capsys):
    good = write_config(tmp_path, small_config(tmp_path, seeds=[0]))
    assert main(["sweep", "--config", str(good), "--param", "env.lengthscale",
                 "--values", "0.01,1.0"]) == 0
    assert capsys.readouterr().out.startswith("value,n_seeds")
    assert main(["sweep", "--config", str(good), "--param", "nope.x", "--values", "1"]) == 2


def test_cli_gamma_diagnostics(tmp_path, capsys):
    raw = small_config(tmp_path, diagnostics={"n_contexts": 4, "K": 2, "T": 2, "seed": 1})
    path = write_config(tmp_path, raw)
    assert main(["diagnostics", "gamma", "--config", str(path)]) == 0
    doc = json.loads((tmp_path / "out" / "gamma_report.json").read_text())
    assert doc == json.loads(capsys.readouterr().out)
    rep = doc["report"]
    assert rep["upper_bound_holds"] and rep["lower_bound_holds"]
    assert doc["inputs"]["diagnostics"]["K"] == 2

    big = write_config(tmp_path, small_config(tmp_path, diagnostics={"n_contexts": 30, "K": 2,
                                                                      "T": 5}), "big.yaml")
    assert main(["diagnostics", "gamma", "--config", str(big)]) == 2
