"""Configuration-driven experiment harness.

One run: preprocess the dataset into an honest walk graph (cached), then for
each repeat inject an attack, run inference for every honest verifier, build
the FBAS, and check liveness and safety with the Sybils as the bad set.

Config files are INI with a single ``[experiment]`` section::

    [experiment]
    schema_version = 1
    dataset = synthetic
    condition = benign
    repeats = 10
    seed = 7

Every field of :class:`ExperimentConfig` is a key.  Sweep axes take comma
separated values (``sweep_n_sybils = 10, 50, 100``).

Repeat ``r`` draws its randomness from ``numpy.random.SeedSequence(seed,
spawn_key=(r,))``, the same stream ``SeedSequence(seed).spawn(...)[r]`` gives.
"""
from __future__ import annotations

import configparser
import csv
import dataclasses
import hashlib
import io
import itertools
import json
import logging
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import attack as attack_mod
from .fbas import Fbas, delete_nodes, determine_dset, determine_safety, fbas_from_matrix
from .graph import (
    DirectedGraph,
    k_core_prune,
    load_edge_list,
    load_graph,
    preferential_attachment_graph,
    save_graph,
    subsample_nodes,
)
from .inference import CutoffParams, WalkGraph, honesty_scores, infer_honest_sets, select_cutoff
from .ledger import SecurityState, to_walk_graph

log = logging.getLogger(__name__)

CONFIG_SCHEMA_VERSION = 1
REPORT_VERSION = 1
SECTION = "experiment"
SWEEP_AXES = ("n_sybils", "sybil_links", "attack_links", "naive_fraction")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    # dataset and preprocessing
    dataset: str = "synthetic"
    synthetic_nodes: int = 5000
    synthetic_degree: int = 5
    subsample: int = 0
    core_k: int = 3
    honest_stake: int = 1
    # attack
    condition: str = "benign"
    n_sybils: int = 0
    sybil_links: int = 0
    attack_links: int = 0
    naive_fraction: float = 1.0
    stake_per_link: int = 1
    max_links_per_naive: int = 0
    # inference
    walk_multiplier: float = 3.0
    steepness: float = 10.0
    y_min: float = 0.45
    y_max: float = 0.55
    y_step: float = 0.01
    cut_rule: str = "all"
    sampled_walks: int = 0
    # fbas
    delete_mode: str = "literal"
    # protocol
    verifiers: int = 20
    repeats: int = 10
    seed: int = 0
    workers: int = 1
    require_safe: bool = True
    require_live: bool = True
    # output
    output_dir: str = "results"
    cache_dir: str = ".cache"
    snapshots: bool = True
    # sweeps
    sweep_n_sybils: tuple = ()
    sweep_sybil_links: tuple = ()
    sweep_attack_links: tuple = ()
    sweep_naive_fraction: tuple = ()

    def __post_init__(self):
        if self.repeats < 1:
            raise ConfigError("repeats must be at least 1")
        if self.condition not in ("benign", "byzantine", "custom"):
            raise ConfigError(f"unknown condition {self.condition!r}")
        if self.delete_mode not in ("literal", "recompute"):
            raise ConfigError(f"unknown delete_mode {self.delete_mode!r}")
        if self.verifiers < 1 or self.core_k < 1 or self.workers < 1:
            raise ConfigError("verifiers, core_k and workers must be positive")
        if self.honest_stake < 1:
            raise ConfigError("honest_stake must be positive")
        try:
            self.cutoff_params()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def cutoff_params(self) -> CutoffParams:
        return CutoffParams(self.y_min, self.y_max, self.y_step,
                            self.walk_multiplier, self.steepness, self.cut_rule)

    @property
    def is_sweep(self) -> bool:
        return any(getattr(self, f"sweep_{a}") for a in SWEEP_AXES)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        for a in SWEEP_AXES:
            d[f"sweep_{a}"] = list(d[f"sweep_{a}"])
        return d

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


def _field_kind(f: dataclasses.Field) -> type:
    return type(f.default) if not isinstance(f.default, tuple) else tuple


def parse_value(f: dataclasses.Field, raw: str):
    kind = _field_kind(f)
    raw = raw.strip()
    try:
        if kind is bool:
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind is tuple:
            cast = float if f.name == "sweep_naive_fraction" else int
            return tuple(cast(x) for x in raw.replace(",", " ").split())
        return kind(raw)
    except ValueError:
        raise ConfigError(f"{f.name}: cannot parse {raw!r} as {kind.__name__}") from None


def config_fields() -> dict[str, dataclasses.Field]:
    return {f.name: f for f in dataclasses.fields(ExperimentConfig)}


def load_config(path=None, overrides: Optional[dict] = None) -> ExperimentConfig:
    """Read an INI config, apply ``overrides`` (already typed) and validate."""
    values: dict = {}
    fields = config_fields()
    if path is not None:
        parser = configparser.ConfigParser()
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
        if not parser.has_section(SECTION):
            raise ConfigError(f"{path}: missing [{SECTION}] section")
        sec = parser[SECTION]
        version = int(sec.get("schema_version", CONFIG_SCHEMA_VERSION))
        if version != CONFIG_SCHEMA_VERSION:
            raise ConfigError(f"{path}: schema_version {version} unsupported")
        for key, raw in sec.items():
            if key == "schema_version":
                continue
            if key not in fields:
                raise ConfigError(f"{path}: unknown key {key!r}")
            values[key] = parse_value(fields[key], raw)
        base = Path(path).parent
        for key in ("output_dir", "cache_dir"):
            if key in values and not Path(values[key]).is_absolute():
                values[key] = str(base / values[key])
        if "dataset" in values and values["dataset"] != "synthetic" and not Path(values["dataset"]).is_absolute():
            values["dataset"] = str(base / values["dataset"])
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return ExperimentConfig(**values)


def dump_config(cfg: ExperimentConfig) -> str:
    lines = [f"[{SECTION}]", f"schema_version = {CONFIG_SCHEMA_VERSION}"]
    for name, value in cfg.to_dict().items():
        if isinstance(value, list):
            value = ", ".join(str(v) for v in value)
        elif isinstance(value, bool):
            value = str(value).lower()
        lines.append(f"{name} = {value}")
    return "\n".join(lines) + "\n"


# -- preprocessing -----------------------------------------------------------

@dataclass(frozen=True)
class Preprocessed:
    walk: WalkGraph
    path: Path
    sha256: str
    cached: bool
    info: dict


def _file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _source_key(cfg: ExperimentConfig) -> dict:
    if cfg.dataset == "synthetic":
        source = {"synthetic": "preferential_attachment", "nodes": cfg.synthetic_nodes,
                  "degree": cfg.synthetic_degree}
    else:
        source = {"file_sha256": _file_sha256(cfg.dataset)}
    return {"source": source, "subsample": cfg.subsample, "core_k": cfg.core_k,
            "honest_stake": cfg.honest_stake, "seed": cfg.seed, "version": 1}


def build_honest_graph(cfg: ExperimentConfig) -> tuple[WalkGraph, dict]:
    """Load, subsample, prune and derive the reciprocal unit-stake walk graph."""
    info: dict = {}
    if cfg.dataset == "synthetic":
        g = preferential_attachment_graph(cfg.synthetic_nodes, cfg.synthetic_degree, cfg.seed)
        info["dataset"] = f"synthetic preferential attachment n={cfg.synthetic_nodes} m={cfg.synthetic_degree}"
    else:
        g, stats = load_edge_list(cfg.dataset)
        info["dataset"] = str(cfg.dataset)
        info["load"] = dataclasses.asdict(stats)
    info["raw_nodes"], info["raw_arcs"] = g.n_nodes, g.n_arcs
    if cfg.subsample:
        g = subsample_nodes(g, cfg.subsample, cfg.seed)
        info["subsample"] = "uniform"
    g = k_core_prune(g, cfg.core_k)
    info["core_nodes"], info["core_arcs"] = g.n_nodes, g.n_arcs
    g = DirectedGraph.from_arcs(g.n_nodes, g.tails, g.heads, cfg.honest_stake, g.labels)
    state = SecurityState.from_graph(g)
    walk = to_walk_graph(state)
    info["walk_nodes"], info["walk_arcs"] = walk.n_nodes, walk.n_arcs
    return walk, info


def preprocess(cfg: ExperimentConfig) -> Preprocessed:
    """Build the honest walk graph, reusing a cached snapshot when inputs match."""
    key = _source_key(cfg)
    digest = hashlib.sha256(json.dumps(key, sort_keys=True).encode()).hexdigest()
    cache = Path(cfg.cache_dir)
    snap = cache / f"walk-{digest[:20]}.npz"
    meta = cache / f"walk-{digest[:20]}.json"
    if snap.exists() and meta.exists():
        stored = json.loads(meta.read_text())
        if stored.get("key") == key and _file_sha256(snap) == stored.get("sha256"):
            g = load_graph(snap)
            walk = WalkGraph(g.n_nodes, g.tails, g.heads, g.stakes, g.labels)
            return Preprocessed(walk, snap, stored["sha256"], True, stored["info"])
        log.warning("cache entry %s is stale, rebuilding", snap)
    walk, info = build_honest_graph(cfg)
    cache.mkdir(parents=True, exist_ok=True)
    sha = save_graph(walk.to_graph(), snap)
    meta.write_text(json.dumps({"key": key, "sha256": sha, "info": info}, sort_keys=True, indent=1))
    return Preprocessed(walk, snap, sha, False, info)


# -- one repeat --------------------------------------------------------------

def repeat_seed(cfg: ExperimentConfig, repeat: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(cfg.seed, spawn_key=(repeat,))


def attack_params_for(cfg: ExperimentConfig, honest: WalkGraph, seed: int) -> attack_mod.AttackParams:
    if cfg.condition == "benign":
        p = attack_mod.benign_preset(seed)
    elif cfg.condition == "byzantine":
        p = attack_mod.byzantine_preset(honest.n_nodes, honest.grand_total // 2, cfg.stake_per_link, seed)
    else:
        p = attack_mod.AttackParams(
            n_sybils=cfg.n_sybils, sybil_links=cfg.sybil_links, attack_links=cfg.attack_links,
            naive_fraction=cfg.naive_fraction, stake_per_link=cfg.stake_per_link,
            max_links_per_naive=cfg.max_links_per_naive or None, seed=seed,
        )
    return p


class _Clock:
    def __init__(self):
        self.stages: dict[str, float] = {}
        self._last = time.perf_counter()
        self.start = self._last

    def lap(self, name: str) -> None:
        now = time.perf_counter()
        self.stages[name] = self.stages.get(name, 0.0) + now - self._last
        self._last = now

    def total(self) -> float:
        return self._last - self.start


def build_system(walk: WalkGraph, verifiers: np.ndarray, honest_rows: np.ndarray,
                 sybil_mask: np.ndarray) -> Fbas:
    """FBAS over every walk-graph node.

    Honest verifiers trust their inferred honest sets; Sybils trust each other.
    """
    n = walk.n_nodes
    trust = np.zeros((n, n), dtype=bool)
    trust[verifiers] = honest_rows
    syb = np.flatnonzero(sybil_mask)
    trust[np.ix_(syb, syb)] = True
    trust[np.arange(n), np.arange(n)] = True
    return fbas_from_matrix(trust, walk.labels)


def evaluate_system(f: Fbas, bad: np.ndarray, delete_mode: str, clock: Optional[_Clock] = None) -> dict:
    dset = determine_dset(f, bad)
    if clock:
        clock.lap("dset")
    residual = delete_nodes(f, sorted(dset.nodes), delete_mode)
    safe, bounds = determine_safety(residual)
    if clock:
        clock.lap("safety")
    return {
        "dset_size": len(dset.nodes),
        "befouled": len(dset.befouled),
        "live": dset.available,
        "safe": safe,
        "residual_nodes": residual.n_nodes,
        "min_bound": int(bounds.bounds.min()) if residual.n_nodes else None,
        "safety_iterations": bounds.iterations,
    }


def _verifier_rows(repeat: int, verifiers, cutoffs, honest_rows, sybil_mask) -> list[dict]:
    rows = []
    n_sybil = int(sybil_mask.sum())
    n_honest = len(sybil_mask) - n_sybil
    for v, y, row in zip(verifiers.tolist(), cutoffs.tolist(), honest_rows):
        size = int(row.sum())
        syb = int(np.count_nonzero(row & sybil_mask))
        rows.append({
            "repeat": repeat,
            "verifier": v,
            "cutoff": round(y, 10),
            "honest_set_size": size,
            "honest_accepted": size - syb,
            "honest_total": n_honest,
            "sybils_accepted": syb,
            "sybil_total": n_sybil,
            "sybil_fraction": syb / size,
        })
    return rows


def _y_histogram(cutoffs: np.ndarray) -> dict:
    u, c = np.unique(np.round(cutoffs, 10), return_counts=True)
    return {f"{y:.2f}": int(k) for y, k in zip(u.tolist(), c.tolist())}


def run_repeat(cfg: ExperimentConfig, honest: WalkGraph, repeat: int,
               snapshot_dir: Optional[Path] = None) -> tuple[dict, list[dict], dict]:
    """One repeat.  Returns (record, sampled verifier rows, stage timings)."""
    clock = _Clock()
    ss = repeat_seed(cfg, repeat)
    attack_seed, sample_seed, walk_seed = (int(s.generate_state(1)[0]) for s in ss.spawn(3))

    state = SecurityState.from_graph(honest.to_graph())
    clock.lap("honest_state")
    params = attack_params_for(cfg, honest, attack_seed)
    outcome = attack_mod.inject_attack(state, params)
    clock.lap("inject")
    walk = to_walk_graph(outcome.state)
    sybil_mask = np.isin(walk.labels, outcome.sybils)
    honest_nodes = np.flatnonzero(~sybil_mask)
    clock.lap("walk_graph")

    cp = cfg.cutoff_params()
    if cfg.sampled_walks:
        rng = np.random.default_rng(walk_seed)
        cutoffs = np.empty(len(honest_nodes))
        rows = np.zeros((len(honest_nodes), walk.n_nodes), dtype=bool)
        for i, v in enumerate(honest_nodes.tolist()):
            sm = honesty_scores(walk, v, cp, n_walks=cfg.sampled_walks, rng=rng)
            cutoffs[i] = select_cutoff(walk, sm, cp)
            rows[i] = sm.scores >= cutoffs[i]
            rows[i, v] = True
    else:
        res = infer_honest_sets(walk, honest_nodes, cp)
        cutoffs, rows = res.cutoffs, res.honest
    clock.lap("inference")

    f = build_system(walk, honest_nodes, rows, sybil_mask)
    clock.lap("fbas_build")
    verdict = evaluate_system(f, sybil_mask, cfg.delete_mode, clock)

    sample_rng = np.random.default_rng(sample_seed)
    k = min(cfg.verifiers, len(honest_nodes))
    pick = np.sort(sample_rng.choice(len(honest_nodes), size=k, replace=False))
    table = _verifier_rows(repeat, walk.labels[honest_nodes[pick]], cutoffs[pick], rows[pick], sybil_mask)

    syb_in = np.count_nonzero(rows & sybil_mask, axis=1)
    frac = syb_in / rows.sum(axis=1)
    all_honest = np.count_nonzero(rows & ~sybil_mask, axis=1) == len(honest_nodes)
    n_syb = int(sybil_mask.sum())
    sampled_y = cutoffs[pick]
    record = {
        "repeat": repeat,
        "seed_entropy": cfg.seed,
        "spawn_key": [repeat],
        "attack": params.to_dict(),
        "minted_total": outcome.minted_total,
        "nodes": walk.n_nodes,
        "arcs": walk.n_arcs,
        "honest_nodes": len(honest_nodes),
        "sybil_nodes": n_syb,
        "walk_length": int(np.ceil(cfg.walk_multiplier * np.log(walk.n_nodes))),
        "effective_steepness": cp.effective_steepness(walk.n_nodes),
        "cutoff_histogram": _y_histogram(cutoffs),
        "sampled_cutoff_mean": float(sampled_y.mean()),
        "sampled_cutoff_min": float(sampled_y.min()),
        "sampled_cutoff_max": float(sampled_y.max()),
        "sampled_all_honest": bool(all_honest[pick].all()),
        "verifiers_all_honest": int(all_honest.sum()),
        "max_sybil_fraction": float(frac.max()),
        "confused": int(np.count_nonzero(3 * syb_in > rows.sum(axis=1))),
        "max_sybils_accepted": int(syb_in.max()),
        "max_share_of_sybils_accepted": float(syb_in.max() / n_syb) if n_syb else 0.0,
        **verdict,
        "error": None,
    }
    if snapshot_dir is not None:
        record["snapshot"] = write_snapshot(snapshot_dir / f"repeat-{repeat:03d}.npz", walk, honest_nodes,
                                            rows, cutoffs, sybil_mask, cfg.delete_mode)
        clock.lap("snapshot")
    timings = dict(clock.stages, total=clock.total())
    return record, table, timings


# -- snapshots ---------------------------------------------------------------

def write_snapshot(path: Path, walk: WalkGraph, verifiers, rows, cutoffs, sybil_mask, delete_mode) -> str:
    """Everything needed to recompute a repeat's verdicts without rerunning inference."""
    buf = io.BytesIO()
    np.savez_compressed(
        buf,
        version=np.array(REPORT_VERSION),
        n_nodes=np.array(walk.n_nodes),
        tails=walk.tails, heads=walk.heads, stakes=walk.stakes, labels=walk.labels,
        verifiers=np.asarray(verifiers, dtype=np.int64),
        honest_bits=np.packbits(rows, axis=1),
        cutoffs=cutoffs,
        sybil_mask=sybil_mask,
        delete_mode=np.array(delete_mode),
    )
    data = buf.getvalue()
    path.write_bytes(data)
    return hashlib.sha256(data).hexdigest()


def recheck_snapshot(path) -> dict:
    """Recompute liveness and safety from a stored repeat snapshot."""
    with np.load(path, allow_pickle=False) as z:
        n = int(z["n_nodes"])
        walk = WalkGraph(n, z["tails"], z["heads"], z["stakes"], z["labels"])
        rows = np.unpackbits(z["honest_bits"], axis=1, count=n).astype(bool)
        verifiers, sybil_mask = z["verifiers"], z["sybil_mask"]
        mode = str(z["delete_mode"])
    f = build_system(walk, verifiers, rows, sybil_mask)
    return evaluate_system(f, sybil_mask, mode)


# -- a full run --------------------------------------------------------------

@dataclass
class ExperimentReport:
    config: dict
    preprocess: dict
    repeats: list
    table: list = field(repr=False)
    timings: list = field(repr=False)
    summary: dict = field(default_factory=dict)

    def failures(self, cfg: ExperimentConfig) -> list[str]:
        out = []
        for r in self.repeats:
            if r["error"]:
                out.append(f"repeat {r['repeat']}: error {r['error'].splitlines()[0]}")
                continue
            if cfg.require_safe and not r["safe"]:
                out.append(f"repeat {r['repeat']}: unsafe")
            if cfg.require_live and not r["live"]:
                out.append(f"repeat {r['repeat']}: not live")
        return out

    def to_json(self) -> str:
        body = {"report_version": REPORT_VERSION, "config": self.config, "preprocess": self.preprocess,
                "summary": self.summary, "repeats": self.repeats}
        return json.dumps(body, sort_keys=True, indent=1) + "\n"


def _summarize(repeats: list[dict]) -> dict:
    ok = [r for r in repeats if not r["error"]]
    s = {"repeats": len(repeats), "errors": len(repeats) - len(ok)}
    if not ok:
        return s
    y = np.array([r["sampled_cutoff_mean"] for r in ok])
    s.update({
        "cutoff_mean": float(y.mean()),
        "cutoff_min": min(r["sampled_cutoff_min"] for r in ok),
        "cutoff_max": max(r["sampled_cutoff_max"] for r in ok),
        "all_safe": all(r["safe"] for r in ok),
        "all_live": all(r["live"] for r in ok),
        "all_sampled_accept_all_honest": all(r["sampled_all_honest"] for r in ok),
        "max_sybil_fraction": max(r["max_sybil_fraction"] for r in ok),
        "confused_total": sum(r["confused"] for r in ok),
        "min_bound": min((r["min_bound"] for r in ok if r["min_bound"] is not None), default=None),
    })
    return s


def _run_one(args):
    cfg, honest_arrays, repeat, snapshot_dir = args
    honest = WalkGraph(*honest_arrays)
    try:
        return run_repeat(cfg, honest, repeat, snapshot_dir)
    except Exception:
        # record and keep going with the remaining repeats
        log.exception("repeat %d failed", repeat)
        return ({"repeat": repeat, "error": traceback.format_exc(limit=3)}, [], {})


def run_experiment(cfg: ExperimentConfig, out_dir: Optional[Path] = None,
                   pre: Optional[Preprocessed] = None) -> ExperimentReport:
    """Run every repeat of one grid point and write the report files to ``out_dir``."""
    out_dir = Path(out_dir if out_dir is not None else cfg.output_dir)
    pre = pre or preprocess(cfg)
    snap_dir = None
    if cfg.snapshots:
        snap_dir = out_dir / "snapshots"
        snap_dir.mkdir(parents=True, exist_ok=True)
    h = pre.walk
    arrays = (h.n_nodes, h.tails, h.heads, h.stakes, h.labels)
    jobs = [(cfg, arrays, r, snap_dir) for r in range(cfg.repeats)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]
    results.sort(key=lambda x: x[0]["repeat"])
    repeats = [r for r, _, _ in results]
    table = [row for _, rows, _ in results for row in rows]
    timings = [dict(t, repeat=r["repeat"]) for r, _, t in results]
    pre_info = dict(pre.info, snapshot_sha256=pre.sha256, snapshot=pre.path.name)
    report = ExperimentReport(cfg.to_dict(), pre_info, repeats, table, timings, _summarize(repeats))
    write_report(report, out_dir)
    return report


def write_report(report: ExperimentReport, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_text(report.to_json())
    (out_dir / "timings.json").write_text(json.dumps(report.timings, sort_keys=True, indent=1) + "\n")
    cols = ["repeat", "verifier", "cutoff", "honest_set_size", "honest_accepted", "honest_total",
            "sybils_accepted", "sybil_total", "sybil_fraction"]
    with open(out_dir / "verifiers.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        w.writerows(report.table)
    (out_dir / "summary.txt").write_text(format_summary(report))


def format_summary(report: ExperimentReport) -> str:
    s = report.summary
    cfg = report.config
    lines = [
        f"condition      {cfg['condition']}",
        f"graph          {report.preprocess.get('walk_nodes')} nodes, {report.preprocess.get('walk_arcs')} arcs",
        f"repeats        {s['repeats']} ({s['errors']} failed)",
    ]
    if "cutoff_mean" in s:
        lines += [
            f"cut-off        mean {s['cutoff_mean']:.3f}  range [{s['cutoff_min']:.2f}, {s['cutoff_max']:.2f}]",
            f"honest sets    sampled verifiers accept every honest node: {s['all_sampled_accept_all_honest']}",
            f"sybil share    max {s['max_sybil_fraction']:.4f}  confused verifiers {s['confused_total']}",
            f"liveness       {s['all_live']}",
            f"safety         {s['all_safe']}  (smallest quorum bound {s['min_bound']})",
        ]
    lines.append("")
    lines.append("repeat  y-hist                     B'     live  safe  minF")
    for r in report.repeats:
        if r["error"]:
            lines.append(f"{r['repeat']:6d}  error: {r['error'].splitlines()[-1]}")
            continue
        hist = " ".join(f"{k}:{v}" for k, v in r["cutoff_histogram"].items())
        lines.append(f"{r['repeat']:6d}  {hist:<26} {r['dset_size']:6d}  {str(r['live']):5} "
                     f"{str(r['safe']):5} {r['min_bound']}")
    return "\n".join(lines) + "\n"


# -- sweeps ------------------------------------------------------------------

def sweep_points(cfg: ExperimentConfig) -> list[dict]:
    axes = [(a, getattr(cfg, f"sweep_{a}")) for a in SWEEP_AXES if getattr(cfg, f"sweep_{a}")]
    names = [a for a, _ in axes]
    return [dict(zip(names, combo)) for combo in itertools.product(*(v for _, v in axes))]


def point_config(cfg: ExperimentConfig, point: dict, honest: WalkGraph) -> ExperimentConfig:
    """Custom-condition config for one grid point, starting from the base condition's values.

    The per-naive-node link cap comes from the config, not the base preset, so
    grid points with few naive nodes stay feasible.  When the Sybil count is
    swept on its own, the Sybil-internal budget keeps the base per-Sybil density.
    """
    base = attack_params_for(cfg, honest, 0)
    values = {a: getattr(base, a) for a in SWEEP_AXES}
    values.update(point)
    if "n_sybils" in point and "sybil_links" not in point:
        n, spl = point["n_sybils"], base.stake_per_link
        per_sybil = base.sybil_pairs / base.n_sybils if base.n_sybils else 0.0
        values["sybil_links"] = min(round(per_sybil * n), n * (n - 1) // 2) * spl
    return cfg.replace(condition="custom", **values, **{f"sweep_{a}": () for a in SWEEP_AXES})


def point_name(point: dict) -> str:
    return "-".join(f"{k}={v}" for k, v in point.items())


def run_sweep(cfg: ExperimentConfig, out_dir: Optional[Path] = None) -> dict[str, ExperimentReport]:
    out_dir = Path(out_dir if out_dir is not None else cfg.output_dir)
    pre = preprocess(cfg)
    reports = {}
    index = []
    for point in sweep_points(cfg):
        name = point_name(point)
        sub = point_config(cfg, point, pre.walk)
        rep = run_experiment(sub, out_dir / name, pre)
        reports[name] = rep
        index.append({"point": point, "dir": name, "summary": rep.summary})
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "sweep.json").write_text(json.dumps(index, sort_keys=True, indent=1) + "\n")
    return reports
