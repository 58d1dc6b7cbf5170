import hashlib
import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from freebnd import cli
from freebnd.grid import SolverError


def run(*args):
    return cli.main(list(args))


def test_list_domains(capsys):
    assert run("--list-domains") == 0
    out = capsys.readouterr().out
    assert "halfplane" in out and "lewy3" in out


def test_syscheck_system_weights(tmp_path):
    out = tmp_path / "sys"
    assert run("run", "syscheck", "--weights", "2,2,0,0,1,1,2,1,0,0,0", "--n-draws", "50",
               "--output-dir", str(out)) == 0
    rep = json.loads((out / "syscheck.json").read_text())
    assert rep["verdict"] == "valid"
    assert rep["ellipticity"]["seed"] == 0


def test_syscheck_rejects_bad_weights(tmp_path):
    out = tmp_path / "sys"
    assert run("run", "syscheck", "--weights", "1,2,3", "--output-dir", str(out)) == 2
    assert not out.exists()


def test_frequency_example(tmp_path):
    out = tmp_path / "freq"
    assert run("run", "frequency", "--domain", "halfplane", "--Q", "0,0", "--output-dir", str(out)) == 0
    lines = (out / "frequency.csv").read_text().splitlines()
    assert lines[0] == "kind,center,r,value,slack,flag"
    values = [float(row.split(",")[3]) for row in lines[1:]]
    assert all(abs(v - 1) <= 0.02 for v in values)


def test_manifest_checksums_and_determinism(tmp_path):
    outs = []
    for k in range(2):
        out = tmp_path / f"t{k}"
        assert run("run", "transmission", "--output-dir", str(out)) == 0
        man = json.loads((out / "manifest.json").read_text())
        for name, digest in man["files"].items():
            assert hashlib.sha256((out / name).read_bytes()).hexdigest() == digest
        outs.append(((out / "transmission.csv").read_bytes(), man["input_hash"]))
    assert outs[0] == outs[1]
    assert b"\r\n" not in outs[0][0]


def test_config_file_and_unknown_key(tmp_path, capsys):
    cfg = tmp_path / "run.ini"
    cfg.write_text("[harnack]\neps = 0.05\nbogus = 1\n")
    assert run("run", "--config", str(cfg), "--output-dir", str(tmp_path / "o")) == 2
    assert "run.ini:3" in capsys.readouterr().err
    cfg.write_text("[run]\nexperiment = harnack\neps = 0.05\n")
    assert run("run", "--config", str(cfg), "--output-dir", str(tmp_path / "o")) == 0
    assert (tmp_path / "o" / "harnack.json").exists()


@settings(max_examples=10, deadline=None)
@given(n=st.integers(-100, 7))
def test_small_grid_rejected_before_any_write(tmp_path_factory, n):
    out = tmp_path_factory.mktemp("bad") / "o"
    cfg = out.parent / "bad.ini"
    cfg.write_text(f"[solve]\ngrid_n = {n}\n")
    assert run("run", "--config", str(cfg), "--output-dir", str(out)) == 2
    assert not out.exists()


def test_radius_below_resolution_rejected(tmp_path):
    out = tmp_path / "o"
    assert run("run", "acf", "--domain", "disk", "--grid-n", "64", "--radii", "0.05",
               "--output-dir", str(out)) == 2
    assert not out.exists()


def test_point_off_boundary_rejected(tmp_path):
    assert run("run", "acf", "--domain", "halfplane", "--Q", "0,0.5",
               "--output-dir", str(tmp_path / "o")) == 2


def test_numerical_failure_exits_1(tmp_path, monkeypatch):
    def boom(cfg):
        raise SolverError("did not converge", 1e-2)
    monkeypatch.setattr(cli, "_pair", boom)
    out = tmp_path / "o"
    assert run("run", "solve", "--domain", "disk", "--grid-n", "64", "--output-dir", str(out)) == 1
    assert not out.exists()


def test_usage_errors():
    assert run("run", "nonsense") == 2
    assert run() == 2
    with pytest.raises(SystemExit):
        cli._parser().parse_args(["--version"])
