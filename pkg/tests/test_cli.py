import json
import subprocess
import sys

import numpy as np

from conftest import two_cliques
from sybilquorum.cli import main
from sybilquorum.fbas import dumps_fbas, fbas_from_matrix


def write_config(tmp_path, **kw):
    values = dict(synthetic_nodes=300, repeats=1, verifiers=4, seed=1,
                  output_dir="out", cache_dir="cache")
    values.update(kw)
    body = "[experiment]\nschema_version = 1\n" + "".join(f"{k} = {v}\n" for k, v in values.items())
    path = tmp_path / "exp.ini"
    path.write_text(body)
    return path


def test_preprocess_then_reuse(tmp_path, capsys):
    cfg = write_config(tmp_path)
    assert main(["preprocess", "-c", str(cfg)]) == 0
    assert capsys.readouterr().out.startswith("built")
    assert main(["preprocess", "-c", str(cfg)]) == 0
    assert capsys.readouterr().out.startswith("reused")


def test_run_and_recheck(tmp_path, capsys):
    cfg = write_config(tmp_path)
    assert main(["run", "-c", str(cfg), "--repeats", "2"]) == 0
    out = capsys.readouterr().out
    assert "liveness       True" in out
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert report["config"]["repeats"] == 2
    assert main(["recheck", str(tmp_path / "out")]) == 0
    assert "matches" in capsys.readouterr().out


def test_required_check_failure_sets_exit_code(tmp_path, capsys):
    # Sybils outnumber the honest nodes and every honest node is befouled
    cfg = write_config(tmp_path, condition="custom", n_sybils=300, sybil_links=2000,
                       attack_links=6000, snapshots="false")
    assert main(["run", "-c", str(cfg)]) == 1
    rec = json.loads((tmp_path / "out" / "report.json").read_text())["repeats"][0]
    assert not rec["live"] and rec["befouled"] == rec["honest_nodes"]
    assert "not live" in capsys.readouterr().err
    assert main(["run", "-c", str(cfg), "--no-require-safe", "--no-require-live"]) == 0


def test_check_fbas(tmp_path, capsys):
    safe = tmp_path / "safe.fbas"
    safe.write_text(dumps_fbas(fbas_from_matrix(np.ones((5, 5), dtype=bool))))
    assert main(["check-fbas", str(safe), "--bad", "0"]) == 0
    assert "safe           True" in capsys.readouterr().out
    split = tmp_path / "split.fbas"
    split.write_text(dumps_fbas(two_cliques(4)))
    assert main(["check-fbas", str(split)]) == 1
    assert main(["check-fbas", str(split), "--no-require-safe"]) == 0


def test_oracle_subcommand(tmp_path, capsys):
    assert main(["oracle", "--instances", "50", "--seed", "3"]) == 0
    assert "false safe     0" in capsys.readouterr().out
    big = tmp_path / "big.fbas"
    big.write_text(dumps_fbas(fbas_from_matrix(np.ones((20, 20), dtype=bool))))
    assert main(["oracle", str(big)]) == 2


def test_bad_input_reports_error(tmp_path, capsys):
    p = tmp_path / "x.fbas"
    p.write_text("no header\n")
    assert main(["check-fbas", str(p)]) == 2
    assert "error" in capsys.readouterr().err


def test_console_script_module_entry(tmp_path):
    r = subprocess.run([sys.executable, "-m", "sybilquorum.cli", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "check-fbas" in r.stdout
