"""Manifest-level analyses written as tab-separated reports."""
from __future__ import annotations

import json
import math
import os
from pathlib import Path
from typing import Sequence

import numpy as np

from .clustering import DistanceMatrix, choose_representatives, cut, hcluster, ncd_group
from .complexity import (NCD_REPRESENTATION, PARAM_NAMES, detect_transition, ncd_matrix,
                         param_output_correlation, representation, sort_by_ratio)
from .render import contact_sheet
from .sweep import RunRecord, load_manifest, orthogonality_report

PARAM_COLS = list(PARAM_NAMES)


def load_ok(manifest) -> tuple[Path, list[RunRecord]]:
    """Base directory for relative raster paths, and the successful records."""
    path = Path(manifest)
    return path.parent, [r for r in load_manifest(path) if r.status == "ok"]


def write_tsv(path, header: Sequence[str], rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w") as fh:
        fh.write("\t".join(header) + "\n")
        for row in rows:
            fh.write("\t".join(_fmt(v) for v in row) + "\n")
    os.replace(tmp, path)
    return path


def _fmt(v) -> str:
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


def _record_row(r: RunRecord) -> list:
    return [r.run_id, *r.params.as_tuple(), r.seed, r.raw_len, r.C_bits, r.ratio, r.dist]


RECORD_HEADER = ["run_id", *PARAM_COLS, "seed", "raw_len", "C_bits", "ratio", "dist"]


def ratio_report(records, base, out_dir, gallery: bool = False, columns: int = 8) -> dict:
    ordered = sort_by_ratio(records)
    out = Path(out_dir)
    write_tsv(out / "ratio.tsv", ["rank", *RECORD_HEADER], ([i, *_record_row(r)] for i, r in enumerate(ordered)))
    info = {"n": len(ordered), "report": str(out / "ratio.tsv")}
    if ordered:
        info["ratio_min"] = ordered[0].ratio
        info["ratio_max"] = ordered[-1].ratio
    if gallery and ordered:
        sheet = contact_sheet([r.load_raster(base) for r in ordered], columns=columns)
        (out / "gallery.png").write_bytes(sheet)
        info["gallery"] = str(out / "gallery.png")
    return info


def correlation_report(records, out_dir) -> dict:
    rho = param_output_correlation([r.dist for r in records], [r.C_bits for r in records])
    write_tsv(Path(out_dir) / "correlation.tsv", ["n", "spearman_rho"], [[len(records), rho]])
    return {"n": len(records), "spearman_rho": rho}


def transition_report(records, out_dir, method: str = "jump") -> dict:
    ordered = sort_by_ratio(records)
    res = detect_transition([r.ratio for r in ordered], method)
    rows = [[i, a, b, lo, hi] for i, (a, b, lo, hi) in enumerate(res.segments)]
    write_tsv(Path(out_dir) / "transition.tsv", ["segment", "start", "stop", "ratio_min", "ratio_max"], rows)
    info = {"method": method, "found": res.found, "boundary": res.boundary, "score": res.score}
    if res.found:
        info["boundary_ratio"] = ordered[res.boundary].ratio
        info["boundary_run_id"] = ordered[res.boundary].run_id
    return info


def ortho_report(records, out_dir, varied: str = "E_12", tau: float = 0.02) -> dict:
    groups = orthogonality_report(records, varied, tau)
    fixed = [n for n in PARAM_NAMES if n != varied]
    rows = [[*(g.fixed[n] for n in fixed), g.seed, g.classification, int(g.incomplete),
             ",".join(map(str, g.values)), ",".join(map(str, g.C)), ",".join(map(str, g.deltas))]
            for g in groups]
    write_tsv(Path(out_dir) / f"ortho_{varied}.tsv",
              [*fixed, "seed", "class", "incomplete", varied, "C_bits", "delta_C"], rows)
    counts = {c: sum(g.classification == c for g in groups) for c in ("increasing", "reversed", "flat")}
    return {"varied": varied, "tau": tau, "groups": len(groups),
            "incomplete": sum(g.incomplete for g in groups), **counts}


def ncd_objects(records, base, mode: str = NCD_REPRESENTATION) -> list[bytes]:
    return [representation(r.load_raster(base), mode) for r in records]


def ncd_report(records, base, out_dir, mode: str = NCD_REPRESENTATION, workers: int = 4) -> dict:
    M = ncd_matrix(ncd_objects(records, base, mode), workers=workers)
    ids = [r.run_id for r in records]
    write_tsv(Path(out_dir) / "ncd.tsv", ["run_id", *ids], ([rid, *map(float, row)] for rid, row in zip(ids, M)))
    off = M[~np.eye(len(ids), dtype=bool)] if len(ids) > 1 else np.zeros(0)
    return {
        "n": len(ids), "representation": mode,
        "diag_max": float(M.diagonal().max()),
        "asymmetry_max": float(np.abs(M - M.T).max()),
        "offdiag_min": float(off.min()) if off.size else float("nan"),
        "max": float(M.max()),
    }


# ---------------------------------------------------------------------------
# clustering


def cluster_ratio(records, out_dir, k: int, seed: int = 0, linkage: str = "average") -> dict:
    """Cluster on compression ratio, draw one representative per group.

    Writes ``assignments.tsv`` and ``representatives.jsonl``; the latter is a
    valid manifest, so it can be fed back into an NCD clustering.
    """
    ids = [r.run_id for r in records]
    dend = hcluster(DistanceMatrix.euclidean([r.ratio for r in records]), linkage, ids)
    labels = cut(dend, k)
    reps = choose_representatives(labels, seed)
    out = Path(out_dir)
    rep_set = set(reps)
    write_tsv(out / "assignments.tsv", ["run_id", "group", "ratio", "representative"],
              ([r.run_id, g, r.ratio, int(i in rep_set)] for i, (r, g) in enumerate(zip(records, labels))))
    (out / "dendrogram.nwk").write_text(dend.to_newick() + "\n")
    return {"k": k, "metric": "ratio", "linkage": linkage, "seed": seed,
            "representatives": [records[i] for i in reps], "assignments": labels}


def cluster_ncd(records, base, out_dir, k: int, linkage: str = "average",
                mode: str = NCD_REPRESENTATION, workers: int = 4) -> dict:
    ids = [r.run_id for r in records]
    g = ncd_group(ncd_objects(records, base, mode), [r.ratio for r in records], k, linkage, ids, workers)
    out = Path(out_dir)
    write_tsv(out / "assignments.tsv", ["run_id", "group", "ratio"],
              ([r.run_id, a, r.ratio] for r, a in zip(records, g.assignments)))
    (out / "dendrogram.nwk").write_text(g.dendrogram.to_newick() + "\n")
    return {"k": k, "metric": "ncd", "linkage": linkage, "representation": mode,
            "group_mean_ratio": g.mean_ratio, "assignments": g.assignments}


def write_subset_manifest(records, base, dest) -> Path:
    """Copy records into a new manifest, re-pointing raster paths relative to it."""
    dest = Path(dest)
    dest.parent.mkdir(parents=True, exist_ok=True)
    lines = []
    for r in records:
        d = r.to_dict()
        for key in ("png", "raw"):
            if d[key]:
                d[key] = os.path.relpath(Path(base) / d[key], dest.parent)
        lines.append(json.dumps(d, sort_keys=True))
    tmp = dest.with_name(dest.name + ".tmp")
    tmp.write_text("".join(line + "\n" for line in lines))
    os.replace(tmp, dest)
    return dest
