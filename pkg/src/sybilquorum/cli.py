"""Command-line entry point: ``sybilquorum {preprocess,run,check-fbas,oracle,recheck}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import experiment as ex
from .fbas import FbasError, check_fbas, determine_safety, fbas_from_matrix, read_fbas
from .oracle import (
    DEFAULT_ORACLE_BOUND,
    OracleBoundError,
    brute_force_min_quorums,
    brute_force_quorum_intersection,
)


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", "-c", type=Path, help="INI file with an [experiment] section")
    group = p.add_argument_group("config overrides")
    for name, f in ex.config_fields().items():
        flag = "--" + name.replace("_", "-")
        kind = ex._field_kind(f)
        if kind is bool:
            group.add_argument(flag, dest=name, action=argparse.BooleanOptionalAction, default=None)
        else:
            group.add_argument(flag, dest=name, default=None, metavar=kind.__name__.upper(),
                               help=f"default {f.default!r}")


def _config_from_args(args) -> ex.ExperimentConfig:
    fields = ex.config_fields()
    overrides = {}
    for name, f in fields.items():
        value = getattr(args, name, None)
        if value is None:
            continue
        overrides[name] = value if isinstance(value, bool) else ex.parse_value(f, value)
    return ex.load_config(args.config, overrides)


def cmd_preprocess(args) -> int:
    cfg = _config_from_args(args)
    pre = ex.preprocess(cfg)
    state = "reused" if pre.cached else "built"
    print(f"{state} {pre.path} sha256={pre.sha256}")
    print(json.dumps(pre.info, sort_keys=True, indent=1))
    return 0


def cmd_run(args) -> int:
    cfg = _config_from_args(args)
    if cfg.is_sweep:
        reports = ex.run_sweep(cfg)
        failed = []
        for name, rep in reports.items():
            print(f"{name}: {json.dumps(rep.summary, sort_keys=True)}")
            failed += [f"{name}: {m}" for m in rep.failures(cfg)]
    else:
        rep = ex.run_experiment(cfg)
        print(ex.format_summary(rep), end="")
        failed = rep.failures(cfg)
    for msg in failed:
        print(f"FAILED {msg}", file=sys.stderr)
    print(f"report written to {cfg.output_dir}")
    return 1 if failed else 0


def _parse_ids(text: str) -> list[int]:
    return [int(x) for x in text.replace(",", " ").split()] if text else []


def cmd_check_fbas(args) -> int:
    f = read_fbas(args.file)
    bad = [f.index_of(x) for x in _parse_ids(args.bad)]
    rep = check_fbas(f, bad, args.delete_mode)
    befouled = sorted(int(f.labels[i]) for i in rep.dset.befouled)
    print(f"nodes          {f.n_nodes}")
    print(f"bad            {len(bad)}")
    print(f"befouled       {len(befouled)} {befouled[:20]}{' ...' if len(befouled) > 20 else ''}")
    print(f"live           {rep.live}")
    print(f"residual       {rep.residual_nodes}")
    print(f"safe           {rep.safe}  (smallest quorum bound {rep.min_bound}, "
          f"{rep.bounds.iterations} iterations)")
    failed = (args.require_safe and not rep.safe) or (args.require_live and not rep.live)
    return 1 if failed else 0


def random_fbas(n: int, rng: np.random.Generator, density: float):
    trust = rng.random((n, n)) < density
    return fbas_from_matrix(trust)


def cmd_oracle(args) -> int:
    if args.file:
        systems = [read_fbas(args.file)]
    else:
        rng = np.random.default_rng(args.seed)
        systems = []
        for _ in range(args.instances):
            n = int(rng.integers(1, args.max_nodes + 1))
            systems.append(random_fbas(n, rng, float(rng.uniform(0.2, 0.9))))
    unsound = false_safe = safe_count = 0
    for f in systems:
        try:
            exact = brute_force_min_quorums(f, args.bound)
            intersect = brute_force_quorum_intersection(f, args.bound)
        except OracleBoundError as exc:
            print(f"refused: {exc}", file=sys.stderr)
            return 2
        safe, bounds = determine_safety(f)
        unsound += sum(e is not None and b > e for b, e in zip(bounds.bounds.tolist(), exact))
        false_safe += safe and not intersect
        safe_count += safe
    print(f"instances      {len(systems)}")
    print(f"safe verdicts  {safe_count}")
    print(f"bound > exact  {unsound}")
    print(f"false safe     {false_safe}")
    return 1 if unsound or false_safe else 0


def cmd_recheck(args) -> int:
    report = json.loads((args.dir / "report.json").read_text())
    mismatches = 0
    for rec in report["repeats"]:
        if rec.get("error"):
            continue
        again = ex.recheck_snapshot(args.dir / "snapshots" / f"repeat-{rec['repeat']:03d}.npz")
        same = all(again[k] == rec[k] for k in again)
        mismatches += not same
        print(f"repeat {rec['repeat']:3d}  live={again['live']} safe={again['safe']}  "
              f"{'matches' if same else 'DIFFERS'}")
    return 1 if mismatches else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sybilquorum")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="build or reuse the cached honest walk graph")
    _add_config_flags(p)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("run", help="run the experiment (or sweep) described by the config")
    _add_config_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("check-fbas", help="liveness and safety of a serialized FBAS")
    p.add_argument("file", type=Path)
    p.add_argument("--bad", default="", help="comma separated ids of bad nodes")
    p.add_argument("--delete-mode", choices=("literal", "recompute"), default="literal")
    p.add_argument("--require-safe", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--require-live", action=argparse.BooleanOptionalAction, default=True)
    p.set_defaults(func=cmd_check_fbas)

    p = sub.add_parser("oracle", help="cross-check the fixpoint bounds by exhaustive search")
    p.add_argument("file", type=Path, nargs="?")
    p.add_argument("--instances", type=int, default=200)
    p.add_argument("--max-nodes", type=int, default=12)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bound", type=int, default=DEFAULT_ORACLE_BOUND)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("recheck", help="recompute verdicts of a finished run from its snapshots")
    p.add_argument("dir", type=Path)
    p.set_defaults(func=cmd_recheck)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ex.ConfigError, FbasError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
