import subprocess
import sys

import pytest
import yaml

from shellclear import cli, io as sio
from shellclear.cli import (
    EXIT_CONFIG_INVALID,
    EXIT_CONFIG_MISSING,
    EXIT_CONFIG_PARSE,
    EXIT_IO,
    EXIT_NUMERICAL,
    EXIT_OK,
    main,
)
from shellclear.campaign import TABLE1_ROWS
from shellclear.config import load_config
from shellclear.errors import NumericalInstabilityError

FAST = {
    "simulation": {"dt": 120.0, "controller_period": 120.0, "horizon_h": 4.0, "baseline_horizon_h": 4.0},
    "campaign": {"coarse_dt": 120.0},
}


def write_cfg(tmp_path, data=FAST, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(data))
    return path


def run(tmp_path, *args, cfg=None, out="out"):
    cfg = cfg or write_cfg(tmp_path)
    return main([*args, "--config", str(cfg), "--out", str(tmp_path / out), "--quiet"])


def test_usage_error_exit_code():
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == 2


def test_missing_config(tmp_path):
    assert main(["baseline", "--config", str(tmp_path / "none.yaml"), "--out", str(tmp_path)]) == EXIT_CONFIG_MISSING


def test_unparseable_config(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("plant: [oops\n")
    assert main(["baseline", "--config", str(bad), "--out", str(tmp_path)]) == EXIT_CONFIG_PARSE


def test_invalid_config(tmp_path, capsys):
    cfg = write_cfg(tmp_path, {"simulation": {"dt": -1}})
    assert main(["baseline", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_CONFIG_INVALID
    assert "simulation.dt" in capsys.readouterr().err


def test_output_io_error(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("not a directory")
    assert run(tmp_path, "baseline", out="file/sub") == EXIT_IO


def test_numerical_error(tmp_path, monkeypatch, capsys):
    # the implicit integrator stays finite for any valid config, so inject the failure
    def unstable(*args, **kwargs):
        raise NumericalInstabilityError("non-finite t_blanket[3] in scenario 0", component="t_blanket[3]", scenario=0)

    monkeypatch.setattr(cli, "run_batch", unstable)
    assert run(tmp_path, "simulate") == EXIT_NUMERICAL
    assert "t_blanket[3]" in capsys.readouterr().err


def test_baseline_outputs_and_echo(tmp_path, capsys):
    cfg = write_cfg(tmp_path)
    assert main(["baseline", "--config", str(cfg), "--out", str(tmp_path / "out"), "--seed", "17"]) == EXIT_OK
    err = capsys.readouterr().err
    assert "# resolved configuration" in err and "# seed 17" in err
    out = tmp_path / "out"
    assert (out / "baseline.csv").exists() and (out / "baseline_plot.csv").exists()
    assert list(out.glob("baseline_dt*.json"))
    resolved = load_config(out / "resolved_config.yaml")
    assert resolved.campaign["master_seed"] == 17


def test_simulate_without_heaters_equals_baseline(tmp_path):
    data = {**FAST, "controller": {"heaters_enabled": False}}
    cfg = write_cfg(tmp_path, data)
    assert run(tmp_path, "baseline", cfg=cfg) == EXIT_OK
    assert run(tmp_path, "simulate", cfg=cfg) == EXIT_OK
    _, hb, base_rows = sio.read_csv(tmp_path / "out" / "baseline.csv")
    _, hs, sim_rows = sio.read_csv(tmp_path / "out" / "heaters_off.csv")
    assert hb == hs
    assert sim_rows == base_rows[: len(sim_rows)]


def test_simulate_reuses_baseline_artifact(tmp_path, capsys):
    cfg = write_cfg(tmp_path)
    assert run(tmp_path, "baseline", cfg=cfg) == EXIT_OK
    capsys.readouterr()
    assert run(tmp_path, "simulate", cfg=cfg) == EXIT_OK
    assert "using baseline" in capsys.readouterr().err
    assert (tmp_path / "out" / "controlled.csv").exists()


def test_campaign_bytes_identical_across_workers(tmp_path):
    cfg = write_cfg(tmp_path)
    args = ["campaign", "--k-range", "1..2", "--seed", "5", "--horizon", "3"]
    assert run(tmp_path, *args, "--workers", "1", cfg=cfg, out="w1") == EXIT_OK
    assert run(tmp_path, *args, "--workers", "2", cfg=cfg, out="w2") == EXIT_OK
    for name in ("campaign.csv", "density.csv", "histogram.csv"):
        assert (tmp_path / "w1" / name).read_bytes() == (tmp_path / "w2" / name).read_bytes()
    _, _, rows = sio.read_csv(tmp_path / "w1" / "campaign.csv")
    assert len(rows) == 20 + 190


def test_table1_command(tmp_path, capsys):
    data = {**FAST, "campaign": {"coarse_dt": 120.0, "chunk_size": 512}}
    cfg = write_cfg(tmp_path, data)
    assert run(tmp_path, "table1", "--five-limit", "4", "--horizon", "1", cfg=cfg) == EXIT_OK
    text = (tmp_path / "out" / "table1.txt").read_text()
    assert all(name in text for name in TABLE1_ROWS)
    _, header, rows = sio.read_csv(tmp_path / "out" / "table1.csv")
    assert header == sio.TABLE1_HEADER and len(rows) == 9


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "shellclear.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for cmd in ("baseline", "simulate", "campaign", "table1"):
        assert cmd in res.stdout
