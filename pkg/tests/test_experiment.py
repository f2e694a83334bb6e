import json
import time

import numpy as np
import pytest

from sybilquorum import experiment as ex
from sybilquorum.graph import load_graph


def small_config(tmp_path, **kw):
    base = dict(synthetic_nodes=400, synthetic_degree=5, repeats=2, verifiers=5, seed=3,
                output_dir=str(tmp_path / "out"), cache_dir=str(tmp_path / "cache"))
    base.update(kw)
    return ex.ExperimentConfig(**base)


def test_config_file_roundtrip_and_overrides(tmp_path):
    cfg = small_config(tmp_path, sweep_n_sybils=(1, 5), sweep_naive_fraction=(0.5, 1.0))
    path = tmp_path / "exp.ini"
    path.write_text(ex.dump_config(cfg))
    again = ex.load_config(path)
    assert again == cfg
    over = ex.load_config(path, {"repeats": 7, "condition": "byzantine"})
    assert over.repeats == 7 and over.condition == "byzantine"


def test_config_errors(tmp_path):
    p = tmp_path / "bad.ini"
    p.write_text("[experiment]\nschema_version = 2\n")
    with pytest.raises(ex.ConfigError):
        ex.load_config(p)
    p.write_text("[experiment]\nnot_a_key = 1\n")
    with pytest.raises(ex.ConfigError):
        ex.load_config(p)
    p.write_text("[experiment]\nrepeats = many\n")
    with pytest.raises(ex.ConfigError):
        ex.load_config(p)
    with pytest.raises(ex.ConfigError):
        ex.ExperimentConfig(repeats=0)
    with pytest.raises(ex.ConfigError):
        ex.ExperimentConfig(y_min=0.7)


def test_relative_paths_resolve_against_config_dir(tmp_path):
    (tmp_path / "sub").mkdir()
    p = tmp_path / "sub" / "exp.ini"
    p.write_text("[experiment]\noutput_dir = res\ndataset = data.txt\n")
    cfg = ex.load_config(p)
    assert cfg.output_dir == str(tmp_path / "sub" / "res")
    assert cfg.dataset == str(tmp_path / "sub" / "data.txt")


def test_preprocess_cache_is_reused_byte_identical(tmp_path):
    cfg = small_config(tmp_path)
    first = ex.preprocess(cfg)
    data = first.path.read_bytes()
    second = ex.preprocess(cfg)
    assert not first.cached and second.cached
    assert second.sha256 == first.sha256 and second.path.read_bytes() == data
    other = ex.preprocess(cfg.replace(cache_dir=str(tmp_path / "elsewhere")))
    assert other.sha256 == first.sha256


def test_preprocess_from_edge_list_file(tmp_path):
    rng = np.random.default_rng(0)
    lines = ["# toy"]
    for _ in range(3000):
        a, b = rng.integers(0, 400, 2)
        lines.append(f"{a}\t{b}")
        if rng.random() < 0.8:
            lines.append(f"{b}\t{a}")
    (tmp_path / "toy.txt").write_text("\n".join(lines) + "\n")
    cfg = small_config(tmp_path, dataset=str(tmp_path / "toy.txt"), subsample=300, core_k=3)
    pre = ex.preprocess(cfg)
    g = load_graph(pre.path)
    assert g.n_nodes == pre.walk.n_nodes > 0
    assert pre.info["load"]["lines"] == len(lines)
    assert ex.preprocess(cfg).sha256 == pre.sha256


def test_stale_cache_rebuilt(tmp_path):
    cfg = small_config(tmp_path)
    pre = ex.preprocess(cfg)
    pre.path.write_bytes(b"garbage")
    again = ex.preprocess(cfg)
    assert not again.cached and again.sha256 == pre.sha256


def test_parse_error_surfaces_line(tmp_path):
    (tmp_path / "bad.txt").write_text("1 2\n3 four\n")
    with pytest.raises(ValueError, match="line 2"):
        ex.preprocess(small_config(tmp_path, dataset=str(tmp_path / "bad.txt")))


@pytest.fixture(scope="module")
def benign_run(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("benign")
    cfg = small_config(tmp)
    t0 = time.perf_counter()
    rep = ex.run_experiment(cfg)
    wall = time.perf_counter() - t0
    return cfg, rep, wall


def test_run_writes_all_outputs(benign_run):
    cfg, rep, _ = benign_run
    out = ex.Path(cfg.output_dir)
    for name in ("report.json", "timings.json", "verifiers.csv", "summary.txt"):
        assert (out / name).exists()
    assert len((out / "verifiers.csv").read_text().splitlines()) == 1 + cfg.repeats * cfg.verifiers
    body = json.loads((out / "report.json").read_text())
    assert body["config"]["seed"] == 3
    assert all(r["error"] is None for r in body["repeats"])
    assert rep.failures(cfg) == []


def test_report_is_deterministic(benign_run):
    cfg, _, _ = benign_run
    out = ex.Path(cfg.output_dir)
    before = (out / "report.json").read_bytes(), (out / "verifiers.csv").read_bytes()
    ex.run_experiment(cfg)
    after = (out / "report.json").read_bytes(), (out / "verifiers.csv").read_bytes()
    assert before == after


def test_verdicts_recomputable_from_snapshots(benign_run):
    cfg, rep, _ = benign_run
    for rec in rep.repeats:
        again = ex.recheck_snapshot(ex.Path(cfg.output_dir) / "snapshots" / f"repeat-{rec['repeat']:03d}.npz")
        assert all(again[k] == rec[k] for k in again)


def test_stage_timings_add_up(benign_run):
    _, rep, wall = benign_run
    for t in rep.timings:
        stages = sum(v for k, v in t.items() if k not in ("total", "repeat"))
        assert stages == pytest.approx(t["total"], rel=1e-9)
    assert sum(t["total"] for t in rep.timings) <= wall


def test_repeats_use_distinct_seeds(benign_run):
    _, rep, _ = benign_run
    seeds = {r["attack"]["seed"] for r in rep.repeats}
    assert len(seeds) == len(rep.repeats)


def test_null_attack_is_safe(tmp_path):
    cfg = small_config(tmp_path, condition="custom", n_sybils=0, repeats=1)
    rep = ex.run_experiment(cfg)
    r = rep.repeats[0]
    assert r["sybil_nodes"] == 0 and r["safe"] and r["live"] and r["dset_size"] == 0


def test_stage_error_recorded_and_other_repeats_continue(tmp_path, monkeypatch):
    cfg = small_config(tmp_path, repeats=3, snapshots=False)
    real = ex.run_repeat

    def flaky(cfg, honest, repeat, snapshot_dir=None):
        if repeat == 1:
            raise RuntimeError("boom")
        return real(cfg, honest, repeat, snapshot_dir)

    monkeypatch.setattr(ex, "run_repeat", flaky)
    rep = ex.run_experiment(cfg)
    assert [r["error"] is None for r in rep.repeats] == [True, False, True]
    assert "boom" in rep.repeats[1]["error"]
    assert rep.summary["errors"] == 1
    assert any("error" in m for m in rep.failures(cfg))


def test_parallel_workers_match_serial(tmp_path):
    serial = ex.run_experiment(small_config(tmp_path, repeats=2, output_dir=str(tmp_path / "a")))
    parallel = ex.run_experiment(small_config(tmp_path, repeats=2, workers=2, output_dir=str(tmp_path / "b")))
    strip = lambda rs: [{k: v for k, v in r.items() if k != "snapshot"} for r in rs]
    assert strip(serial.repeats) == strip(parallel.repeats)
    assert [r["snapshot"] for r in serial.repeats] == [r["snapshot"] for r in parallel.repeats]


def test_sampled_walk_mode_runs(tmp_path):
    cfg = small_config(tmp_path, synthetic_nodes=120, repeats=1, sampled_walks=300, snapshots=False)
    rep = ex.run_experiment(cfg)
    assert rep.repeats[0]["error"] is None


def test_sweep_grid(tmp_path):
    cfg = small_config(tmp_path, condition="byzantine", repeats=1, verifiers=3, snapshots=False,
                       sweep_n_sybils=(10, 40), sweep_attack_links=(20, 60))
    reports = ex.run_sweep(cfg)
    assert len(reports) == 4
    index = json.loads((ex.Path(cfg.output_dir) / "sweep.json").read_text())
    assert {tuple(sorted(e["point"].items())) for e in index} == {
        (("attack_links", a), ("n_sybils", n)) for n in (10, 40) for a in (20, 60)
    }
    for rep in reports.values():
        assert rep.summary["errors"] == 0
