import json
import os

import numpy as np
import pytest
import yaml

from potkit.cli import main


def read(path):
    with open(path, "rb") as fh:
        return fh.read()


@pytest.fixture
def tiny_dirac_cfg(tmp_path):
    cfg = {
        "name": "tiny-dirac",
        "domain": {"kind": "ball", "center": [0.0, 0.0], "radius": 1.0, "dim": 2},
        "operator": {"kind": "laplacian"},
        "measure": {"atoms": [[[0.0, 0.0], 1.0]]},
        "grid": {"h": 2.0**-5},
        "rho": {"kind": "uniform"},
        "levels": [0.25, 0.5],
        "output": {"prefix": "tiny_dirac"},
    }
    path = tmp_path / "tiny.yaml"
    path.write_text(yaml.safe_dump(cfg))
    return str(path)


def test_solve_interval_csv(tmp_path):
    out = str(tmp_path / "out")
    rc = main(["solve", "--preset", "kernel-interval-order", "--out", out,
               "--quiet"])
    assert rc == 0
    lines = read(os.path.join(out, "kernel_interval_order.csv")).decode().splitlines()
    header = [l for l in lines if not l.startswith("#")][0]
    assert header == "x0,u"
    row = [l for l in lines if not l.startswith("#")][1].split(",")
    assert float(row[0]) == 0.25
    assert float(row[1]) == pytest.approx(0.125, abs=1e-14)


def test_tail_verdicts(tmp_path, tiny_dirac_cfg):
    out = str(tmp_path / "out")
    rc = main(["tail", "--config", tiny_dirac_cfg, "--out", out, "--quiet"])
    assert rc == 0
    rep = json.loads(read(os.path.join(out, "tiny_dirac.json")))
    assert rep["verdicts"]["verdict"] == "concentrated-like"
    assert rep["verdicts"]["limit_estimate"] == pytest.approx(
        1.0 / (4.0 * np.pi), rel=0.08)
    body = read(os.path.join(out, "tiny_dirac.csv")).decode().splitlines()
    assert [l for l in body if not l.startswith("#")][0] == "n,T_n,resolvable"
    # config echoed verbatim
    assert rep["config"]["grid"]["h"] == 2.0**-5


def test_idempotent_outputs(tmp_path, tiny_dirac_cfg):
    out = str(tmp_path / "out")
    main(["tail", "--config", tiny_dirac_cfg, "--out", out, "--quiet"])
    first_csv = read(os.path.join(out, "tiny_dirac.csv"))
    first_json = read(os.path.join(out, "tiny_dirac.json"))
    main(["tail", "--config", tiny_dirac_cfg, "--out", out, "--quiet"])
    assert read(os.path.join(out, "tiny_dirac.csv")) == first_csv
    assert read(os.path.join(out, "tiny_dirac.json")) == first_json


def test_reduite_subcommand(tmp_path, tiny_dirac_cfg):
    out = str(tmp_path / "out")
    rc = main(["reduite", "--config", tiny_dirac_cfg, "--out", out, "--quiet"])
    assert rc == 0
    rep = json.loads(read(os.path.join(out, "tiny_dirac_envelope.json")))
    assert rep["results"]["residual"] < 1e-9


def test_reconstruct_local_cli(tmp_path):
    out = str(tmp_path / "out")
    rc = main(["reconstruct", "local", "--preset", "reconstruct-local-disk-dirac",
               "--out", out, "--quiet"])
    assert rc == 0
    rep = json.loads(read(os.path.join(out, "reconstruct_local_disk_dirac.json")))
    assert rep["verdicts"]["fitted_prefactor"] == pytest.approx(1.0, abs=1e-3)
    assert not rep["verdicts"]["prefactor_flagged"]


def test_reconstruct_nonlocal_cli(tmp_path):
    cfg = {
        "name": "nl-quick",
        "domain": {"kind": "interval", "a": -1.0, "b": 1.0},
        "operator": {"kind": "fractional", "alpha": 0.5},
        "measure": {"atoms": [[[0.0], 1.0]]},
        "eta": {"kind": "smoothstep", "center": [0.0], "r_one": 0.25,
                "r_zero": 0.75},
        "levels": [1.0, 2.0],
        "output": {"prefix": "nl_quick"},
    }
    path = tmp_path / "nl.yaml"
    path.write_text(yaml.safe_dump(cfg))
    out = str(tmp_path / "out")
    rc = main(["reconstruct", "nonlocal", "--config", str(path), "--out", out,
               "--quiet"])
    assert rc == 0
    body = read(os.path.join(out, "nl_quick.csv")).decode().splitlines()
    header = [l for l in body if not l.startswith("#")][0]
    assert header == "n,value,target,rel_error"


def test_mc_subcommands(tmp_path):
    out = str(tmp_path / "out")
    rc = main(["mc", "classd", "--preset", "mc-classd-bounded", "--out", out,
               "--quiet"])
    assert rc == 0
    rep = json.loads(read(os.path.join(out, "mc_classd_bounded.json")))
    assert rep["verdicts"]["verdict"] == "class-D"
    body = read(os.path.join(out, "mc_classd_bounded.csv")).decode().splitlines()
    assert [l for l in body if not l.startswith("#")][0] == "level,estimate,stderr"


def test_seed_override_changes_output(tmp_path):
    out1 = str(tmp_path / "o1")
    out2 = str(tmp_path / "o2")
    main(["mc", "reducing", "--preset", "mc-reducing-disk", "--out", out1,
          "--seed", "1", "--quiet"])
    main(["mc", "reducing", "--preset", "mc-reducing-disk", "--out", out2,
          "--seed", "2", "--quiet"])
    assert read(os.path.join(out1, "mc_reducing_disk.csv")) != \
        read(os.path.join(out2, "mc_reducing_disk.csv"))


def test_malformed_config_exit_code(tmp_path, capsys):
    path = tmp_path / "bad.yaml"
    path.write_text(yaml.safe_dump({
        "domain": {"kind": "hexagon"},
        "operator": {"kind": "laplacian"},
    }))
    rc = main(["tail", "--config", str(path), "--out", str(tmp_path), "--quiet"])
    assert rc == 1
    err = capsys.readouterr().err
    assert "domain.kind" in err


def test_missing_required_field(tmp_path, capsys):
    path = tmp_path / "bad2.yaml"
    path.write_text(yaml.safe_dump({"domain": {"kind": "interval", "a": 0.0,
                                               "b": 1.0}}))
    rc = main(["tail", "--config", str(path), "--out", str(tmp_path), "--quiet"])
    assert rc == 1
    assert "operator" in capsys.readouterr().err


def test_unknown_preset(capsys):
    with pytest.raises(KeyError):
        main(["tail", "--preset", "nope", "--quiet"])


def test_constants_output(capsys):
    rc = main(["constants", "--alpha", "0.5", "--dim", "1"])
    assert rc == 0
    text = capsys.readouterr().out
    assert "frac_constant" in text
    assert "0.19947114020071638" in text


def test_verify_single_criterion(tmp_path, capsys):
    out = str(tmp_path / "out")
    rc = main(["verify", "--criteria", "8", "--out", out])
    assert rc == 0
    text = capsys.readouterr().out
    assert "criterion  8" in text
    rep = json.loads(read(os.path.join(out, "verify_report.json")))
    assert rep["all_passed"]


def test_env_var_out_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("POTKIT_OUT", str(tmp_path / "envout"))
    rc = main(["solve", "--preset", "kernel-interval-order", "--quiet"])
    assert rc == 0
    assert os.path.exists(str(tmp_path / "envout" / "kernel_interval_order.csv"))
