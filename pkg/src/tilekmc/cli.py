"""Command-line front end.

Exit codes: 0 success, 1 configuration or input error (bad flags, unreadable
config, malformed manifest, invalid k), 2 runtime failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import errors as E
from .clustering import LINKAGES
from .complexity import NCD_REPRESENTATION, PARAM_NAMES, REPRESENTATIONS, TRANSITION_METHODS, ParamPoint
from .engine import run
from .sweep import (SweepConfig, custom_sim_config, execute, expand, finish_run, read_json, run_id_for,
                    simulate_point)
from . import reports

log = logging.getLogger("tilekmc")

INPUT_ERRORS = (E.ConfigError, E.BadK, E.TooFewPoints, E.EmptyInput, E.DegenerateMatrix, E.UnknownLabel)
ANALYZE_MODES = ("ratio", "ncd", "correlation", "transition", "ortho")


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def default_out() -> str:
    return os.environ.get("TILEKMC_OUT", "out")


def emit(label: str, payload) -> None:
    print(f"{label}: {json.dumps(payload, sort_keys=True, default=str)}", flush=True)


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(args) -> int:
    raw = read_json(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if "species" in raw:
        seed = args.seed if args.seed is not None else int(raw.get("base_seed", 0))
        cfg = custom_sim_config(raw, seed)
        resolved = dict(raw, steps=cfg.steps, lattice_side=cfg.lattice_side, max_coverage=cfg.max_coverage)
        emit("config", resolved)
        emit("seed", seed)
        rid = f"{Path(args.config).stem}_seed{seed}"
        res = run(cfg, record_events=args.events)
        rec = finish_run(res, rid, ParamPoint(cfg.energy.E_s, 0.0, 0.0, 0.0), out).to_dict()
        rec["params"] = {"E_s": cfg.energy.E_s, "custom": True}
        rec.pop("dist")
    else:
        cfg = SweepConfig.from_dict(raw)
        points = {p for p, _ in expand(cfg)}
        if len(points) != 1:
            raise E.ConfigError(f"simulate needs a single parameter point, config spans {len(points)}")
        seed = args.seed if args.seed is not None else cfg.base_seed
        point = points.pop()
        emit("config", dict(cfg.to_dict(), **point.as_dict()))
        emit("seed", seed)
        rid = run_id_for(point, seed)
        if args.events:
            res = run(cfg.sim_config(point, seed), record_events=True)
            rec = finish_run(res, rid, point, out).to_dict()
        else:
            res = None
            rec = simulate_point(cfg, point, seed, out).to_dict()
    if args.events:
        res.events.write_tsv(out / f"{rid}.events.tsv")
    (out / f"{rid}.json").write_text(json.dumps(rec, indent=2, sort_keys=True) + "\n")
    print(f"wrote {out / rec['png']} ratio={rec['ratio']:.6f} C_bits={rec['C_bits']}")
    return 0


def cmd_sweep(args) -> int:
    cfg = SweepConfig.from_dict(read_json(args.config))
    emit("config", cfg.to_dict())
    emit("seed", {"base_seed": cfg.base_seed, "seeds_per_point": cfg.seeds_per_point})
    manifest = Path(args.out) / cfg.id / "manifest.jsonl"
    if manifest.exists() and manifest.stat().st_size and not (args.resume or args.overwrite):
        raise E.ConfigError(f"{manifest} exists; pass --resume to continue or --overwrite to start over")

    def progress(rec, k, n):
        print(f"[{k}/{n}] {rec.run_id} {rec.status}", flush=True)

    res = execute(cfg, args.out, jobs=args.jobs, resume=not args.overwrite, on_record=progress)
    print(f"sweep {cfg.id}: executed={res.executed} skipped={res.skipped} failed={res.failed} "
          f"manifest={res.manifest}")
    return 2 if res.failed else 0


def _analysis_dir(args, default_name: str) -> Path:
    return Path(args.out) if args.out else Path(args.manifest).parent / default_name


def cmd_analyze(args) -> int:
    emit("config", {k: v for k, v in vars(args).items() if k != "func"})
    base, records = reports.load_ok(args.manifest)
    out = _analysis_dir(args, "analysis")
    mode = args.mode
    if mode == "ratio":
        info = reports.ratio_report(records, base, out, gallery=args.gallery)
    elif mode == "ncd":
        info = reports.ncd_report(records, base, out, args.representation, args.jobs)
    elif mode == "correlation":
        info = reports.correlation_report(records, out)
    elif mode == "transition":
        info = reports.transition_report(records, out, args.method)
        if not info["found"]:
            print("no transition")
    else:
        info = reports.ortho_report(records, out, args.varied, args.tau)
    if args.gallery and mode != "ratio":
        reports.ratio_report(records, base, out, gallery=True)
    emit(mode, info)
    return 0


def cmd_cluster(args) -> int:
    emit("config", {k: v for k, v in vars(args).items() if k != "func"})
    emit("seed", args.seed)
    base, records = reports.load_ok(args.manifest)
    if not 1 <= args.k <= len(records):
        raise E.BadK(f"k must lie in 1..{len(records)}, got {args.k}")
    out = _analysis_dir(args, f"cluster-{args.metric}-k{args.k}")
    if args.metric == "ratio":
        info = reports.cluster_ratio(records, out, args.k, args.seed, args.linkage)
        reps = info.pop("representatives")
        path = reports.write_subset_manifest(reps, base, out / "representatives.jsonl")
        info["representatives"] = str(path)
    else:
        info = reports.cluster_ncd(records, base, out, args.k, args.linkage, args.representation, args.jobs)
    info["sizes"] = [info["assignments"].count(g) for g in range(args.k)]
    info.pop("assignments")
    emit("cluster", info)
    return 0


def cmd_report(args) -> int:
    emit("config", {k: v for k, v in vars(args).items() if k != "func"})
    base, records = reports.load_ok(args.manifest)
    out = _analysis_dir(args, "report")
    summary = {"records": len(records), "ratio": reports.ratio_report(records, base, out, gallery=True)}
    if len(records) >= 3:
        summary["correlation"] = reports.correlation_report(records, out)
    if len(records) >= 4:
        summary["transition"] = reports.transition_report(records, out)
    summary["ortho"] = [reports.ortho_report(records, out, p, args.tau) for p in PARAM_NAMES]
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True, default=str) + "\n")
    emit("report", {"out": str(out), "records": len(records)})
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = Parser(prog="tilekmc", description="Tile self-assembly kinetic Monte Carlo and complexity analysis.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True, parser_class=Parser)

    s = sub.add_parser("simulate", help="run a single simulation")
    s.add_argument("--config", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--out", default=default_out())
    s.add_argument("--events", action="store_true", help="also write the per-step event log")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("sweep", help="run a parameter sweep")
    s.add_argument("--config", required=True)
    s.add_argument("--out", default=default_out())
    s.add_argument("--jobs", type=int, default=1)
    g = s.add_mutually_exclusive_group()
    g.add_argument("--resume", action="store_true")
    g.add_argument("--overwrite", action="store_true")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("analyze", help="compression analyses over a manifest")
    s.add_argument("--manifest", required=True)
    s.add_argument("--mode", required=True, choices=ANALYZE_MODES)
    s.add_argument("--out")
    s.add_argument("--gallery", action="store_true", help="write a ratio-sorted contact sheet")
    s.add_argument("--varied", default="E_12", choices=PARAM_NAMES)
    s.add_argument("--tau", type=float, default=0.02)
    s.add_argument("--method", default="jump", choices=sorted(TRANSITION_METHODS))
    s.add_argument("--representation", default=NCD_REPRESENTATION, choices=sorted(REPRESENTATIONS))
    s.add_argument("--jobs", type=int, default=4)
    s.set_defaults(func=cmd_analyze)

    s = sub.add_parser("cluster", help="hierarchical clustering of manifest records")
    s.add_argument("--manifest", required=True)
    s.add_argument("--metric", required=True, choices=("ncd", "ratio"))
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--seed", type=int, default=0, help="representative draw (ratio metric)")
    s.add_argument("--linkage", default="average", choices=LINKAGES)
    s.add_argument("--representation", default=NCD_REPRESENTATION, choices=sorted(REPRESENTATIONS))
    s.add_argument("--jobs", type=int, default=4)
    s.add_argument("--out")
    s.set_defaults(func=cmd_cluster)

    s = sub.add_parser("report", help="all scalar analyses plus a gallery")
    s.add_argument("--manifest", required=True)
    s.add_argument("--out")
    s.add_argument("--tau", type=float, default=0.02)
    s.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (E.TileKMCError, OSError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
