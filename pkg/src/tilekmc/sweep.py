"""Parameter sweeps: grid expansion, parallel execution, manifests.

Layout of one sweep::

    <out>/<sweep_id>/config.json        resolved configuration
    <out>/<sweep_id>/manifest.jsonl     one JSON record per finished run
    <out>/<sweep_id>/<run_id>.png       indexed-colour image
    <out>/<sweep_id>/<run_id>.raw       raw raster dump (TKMCRAST header)

The main process is the only manifest writer. Each record is appended with a
single ``write`` on an ``O_APPEND`` descriptor followed by ``fsync``; a torn
last line left by a crash is ignored on load and cut off before the next
append. Runs already present with status ``ok`` are skipped on resume.
"""
from __future__ import annotations

import hashlib
import itertools
import json
import logging
import math
import multiprocessing as mp
import os
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

import numpy as np

from .complexity import PARAM_NAMES, ParamPoint, compress_len, compression_ratio, param_distance
from .energetics import DEFAULT_E_R, DEFAULT_R_DEP, DEFAULT_TT0, EnergyModel, GROUP_LABELS, functional_group_model, two_label_model
from .engine import SimConfig, run
from .errors import ConfigError, EmptyRange, IoFailure
from .lattice import SpeciesDescriptor, aggregates, hetero_bond_fraction
from .render import encode_png, rasterize, read_raw, write_raw

log = logging.getLogger(__name__)

SCHEMA = "tilekmc-config/1"
STEPS_PER_TILE = 40

_DEFAULT_ENERGY_RANGE = {"start": 0.1, "stop": 1.0, "step": 0.1}
_DEFAULT_SUBSTRATE_RANGE = {"start": 0.5, "stop": 1.0, "step": 0.1}

_SCALAR_KEYS = {
    "schema", "sweep_id", "lattice_side", "max_coverage", "E_r", "TT0", "R_Dep",
    "steps", "seeds_per_point", "base_seed", "concentrations",
}
_CUSTOM_KEYS = {"labels", "pair_energy", "species"}


def expand_range(value, name: str = "range") -> list[float]:
    """Scalar, list, or ``{"start", "stop", "step"}`` (inclusive) to a value list."""
    if isinstance(value, dict):
        try:
            start, stop, step = float(value["start"]), float(value["stop"]), float(value["step"])
        except KeyError as exc:
            raise ConfigError(f"{name}: missing {exc.args[0]!r}") from None
        if step <= 0:
            raise ConfigError(f"{name}: step must be positive")
        if stop < start:
            raise EmptyRange(f"{name}: stop < start")
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + i * step, 10) for i in range(n)]
    if isinstance(value, (list, tuple)):
        if not value:
            raise EmptyRange(f"{name}: empty value list")
        return [float(v) for v in value]
    if isinstance(value, (int, float)):
        return [float(value)]
    raise ConfigError(f"{name}: cannot interpret {value!r} as a range")


@dataclass
class SweepConfig:
    E_s: list[float] = field(default_factory=lambda: expand_range(_DEFAULT_SUBSTRATE_RANGE))
    E_11: list[float] = field(default_factory=lambda: expand_range(_DEFAULT_ENERGY_RANGE))
    E_22: list[float] = field(default_factory=lambda: expand_range(_DEFAULT_ENERGY_RANGE))
    E_12: list[float] = field(default_factory=lambda: expand_range(_DEFAULT_ENERGY_RANGE))
    lattice_side: int = 256
    max_coverage: float = 0.25
    E_r: float = DEFAULT_E_R
    TT0: float = DEFAULT_TT0
    R_Dep: float = DEFAULT_R_DEP
    steps: int | None = None
    seeds_per_point: int = 1
    base_seed: int = 0
    concentrations: tuple[float, float] = (0.5, 0.5)
    sweep_id: str | None = None

    def __post_init__(self):
        for name in PARAM_NAMES:
            vals = getattr(self, name)
            if not vals:
                raise EmptyRange(f"{name}: empty range")
            setattr(self, name, [float(v) for v in vals])
        if self.lattice_side < 2:
            raise ConfigError("lattice_side must be >= 2")
        if not 0 < self.max_coverage <= 1:
            raise ConfigError("max_coverage must lie in (0, 1]")
        if self.steps is not None and self.steps <= 0:
            raise ConfigError("steps must be positive")
        if self.seeds_per_point < 1:
            raise ConfigError("seeds_per_point must be >= 1")
        self.concentrations = tuple(float(c) for c in self.concentrations)
        if len(self.concentrations) != 2 or abs(sum(self.concentrations) - 1) > 1e-9:
            raise ConfigError("concentrations must be two values summing to 1")

    @property
    def resolved_steps(self) -> int:
        if self.steps is not None:
            return int(self.steps)
        max_tiles = math.ceil(self.max_coverage * self.lattice_side ** 2)
        return STEPS_PER_TILE * max_tiles

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["schema"] = SCHEMA
        d["concentrations"] = list(self.concentrations)
        d["steps"] = self.resolved_steps
        if d["sweep_id"] is None:
            d["sweep_id"] = self.default_id()
        return d

    def default_id(self) -> str:
        d = asdict(self)
        d.pop("sweep_id")
        d["steps"] = self.resolved_steps
        d["concentrations"] = list(self.concentrations)
        blob = json.dumps(d, sort_keys=True).encode()
        return "sweep-" + hashlib.sha256(blob).hexdigest()[:12]

    @property
    def id(self) -> str:
        return self.sweep_id or self.default_id()

    @classmethod
    def from_dict(cls, d: dict) -> "SweepConfig":
        d = dict(d)
        schema = d.pop("schema", SCHEMA)
        if schema != SCHEMA:
            raise ConfigError(f"unsupported config schema {schema!r} (expected {SCHEMA!r})")
        extra = set(d) - _SCALAR_KEYS - set(PARAM_NAMES)
        if extra & _CUSTOM_KEYS:
            raise ConfigError("custom species configs describe single runs; use 'simulate'")
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        kw: dict[str, Any] = {}
        for name in PARAM_NAMES:
            if name in d:
                kw[name] = expand_range(d.pop(name), name)
        try:
            return cls(**kw, **d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def species(self) -> list[SpeciesDescriptor]:
        c1, c2 = self.concentrations
        return [SpeciesDescriptor(1, (0, 0, 0, 0), c1, "species-1"),
                SpeciesDescriptor(2, (1, 1, 1, 1), c2, "species-2")]

    def sim_config(self, point: ParamPoint, seed: int) -> SimConfig:
        model = two_label_model(point.E_11, point.E_22, point.E_12, point.E_s,
                                E_r=self.E_r, TT0=self.TT0, R_Dep=self.R_Dep)
        return SimConfig(self.lattice_side, self.species(), model, self.max_coverage,
                         self.resolved_steps, seed)


def read_json(path) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    return data


def load_config(path) -> SweepConfig:
    return SweepConfig.from_dict(read_json(path))


def custom_sim_config(d: dict, seed: int) -> SimConfig:
    """Single-run config with explicitly programmed species.

    ``labels`` is a list of label names or ``"functional_groups"`` for the
    five measured groups; ``pair_energy`` lists ``[label_a, label_b, eV]``
    triples (unlisted pairs bind with 0 eV); each species gives four
    ``edge_labels`` (N, E, S, W) and a ``concentration``.
    """
    d = dict(d)
    schema = d.pop("schema", SCHEMA)
    if schema != SCHEMA:
        raise ConfigError(f"unsupported config schema {schema!r}")
    allowed = _CUSTOM_KEYS | {"schema", "lattice_side", "max_coverage", "E_r", "TT0", "R_Dep",
                              "steps", "E_s", "base_seed", "sweep_id"}
    extra = set(d) - allowed
    if extra:
        raise ConfigError(f"unknown config keys: {sorted(extra)}")
    try:
        kw = dict(E_s=float(d.get("E_s", 0.5)), E_r=float(d.get("E_r", DEFAULT_E_R)),
                  TT0=float(d.get("TT0", DEFAULT_TT0)), R_Dep=float(d.get("R_Dep", DEFAULT_R_DEP)))
        labels = d.get("labels", "functional_groups")
        if labels == "functional_groups" and "pair_energy" not in d:
            model = functional_group_model(**kw)
        else:
            names = GROUP_LABELS if labels == "functional_groups" else tuple(labels)
            pairs = {(a, b): float(e) for a, b, e in d.get("pair_energy", [])}
            model = EnergyModel.from_pairs(names, pairs, **kw)
        species = []
        for i, s in enumerate(d["species"], start=1):
            ids = tuple(model.label_id(x) for x in s["edge_labels"])
            species.append(SpeciesDescriptor(i, ids, float(s.get("concentration", 1.0)), s.get("name", "")))
        side = int(d.get("lattice_side", 256))
        cov = float(d.get("max_coverage", 0.25))
        steps = d.get("steps")
        if steps is None:
            steps = STEPS_PER_TILE * math.ceil(cov * side * side)
        return SimConfig(side, species, model, cov, int(steps), seed)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad custom config: {exc!r}") from None


# ---------------------------------------------------------------------------
# records


@dataclass
class RunRecord:
    run_id: str
    params: ParamPoint
    seed: int
    status: str = "ok"
    steps: int = 0
    lattice_side: int = 0
    png: str = ""
    raw: str = ""
    raw_len: int = 0
    C_bits: int = 0
    ratio: float = 0.0
    dist: float = 0.0
    aggregates: int = 0
    singletons: int = 0
    hetero_bond_fraction: float = 0.0
    tiles: int = 0
    coverage: float = 0.0
    events: dict[str, int] = field(default_factory=dict)
    error: str = ""

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["params"] = self.params.as_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunRecord":
        d = dict(d)
        d["params"] = ParamPoint.from_dict(d["params"])
        return cls(**d)

    def raster_path(self, base: Path) -> Path:
        return Path(base) / self.raw

    def load_raster(self, base: Path):
        return read_raw(self.raster_path(base))


def run_id_for(point: ParamPoint, seed: int) -> str:
    return "es{:.2f}_e11-{:.2f}_e22-{:.2f}_e12-{:.2f}_seed{}".format(*point.as_tuple(), seed)


def expand(config: SweepConfig) -> list[tuple[ParamPoint, int]]:
    """Cartesian product of the four ranges times the seed replicates."""
    out = []
    for es, e11, e22, e12 in itertools.product(config.E_s, config.E_11, config.E_22, config.E_12):
        for rep in range(config.seeds_per_point):
            out.append((ParamPoint(es, e11, e22, e12), config.base_seed + rep))
    return out


def _atomic_write(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def simulate_point(config: SweepConfig, point: ParamPoint, seed: int, out_dir) -> RunRecord:
    """Run one grid point and write its PNG and raw dump into ``out_dir``."""
    rid = run_id_for(point, seed)
    return finish_run(run(config.sim_config(point, seed)), rid, point, out_dir)


def finish_run(res, run_id: str, point: ParamPoint, out_dir) -> RunRecord:
    """Persist the final raster of ``res`` and measure it."""
    out_dir = Path(out_dir)
    lat = res.lattice
    raster = rasterize(lat)
    _atomic_write(out_dir / f"{run_id}.png", encode_png(raster))
    write_raw(raster, out_dir / f"{run_id}.raw.tmp")
    os.replace(out_dir / f"{run_id}.raw.tmp", out_dir / f"{run_id}.raw")
    c = compress_len(raster.pixels)
    comps = aggregates(lat)
    return RunRecord(
        run_id=run_id, params=point, seed=res.seed, steps=res.steps, lattice_side=lat.side,
        png=f"{run_id}.png", raw=f"{run_id}.raw", raw_len=len(raster.pixels), C_bits=c,
        ratio=compression_ratio(len(raster.pixels), c), dist=param_distance(point),
        aggregates=comps.n_aggregates, singletons=len(comps.singletons),
        hetero_bond_fraction=hetero_bond_fraction(lat)[0], tiles=lat.n_tiles,
        coverage=lat.coverage(), events=res.counts,
    )


def _worker(cfg_dict: dict, point: tuple, seed: int, out_dir: str) -> dict:
    config = SweepConfig.from_dict(cfg_dict)
    p = ParamPoint(*point)
    try:
        return simulate_point(config, p, seed, out_dir).to_dict()
    except Exception as exc:  # recorded, never fatal to the sweep
        return RunRecord(run_id_for(p, seed), p, seed, status="failed",
                         error=f"{type(exc).__name__}: {exc}").to_dict()


# ---------------------------------------------------------------------------
# manifest


class ManifestError(ConfigError):
    pass


def load_manifest(path) -> list[RunRecord]:
    """Records in file order; a torn final line is dropped, later duplicates win."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from None
    lines = text.split("\n")
    torn = lines[-1]  # "" when the file ends with a newline
    by_id: dict[str, RunRecord] = {}
    for n, line in enumerate(lines[:-1], start=1):
        if not line.strip():
            continue
        try:
            rec = RunRecord.from_dict(json.loads(line))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ManifestError(f"{path}:{n}: malformed record ({exc})") from None
        by_id.pop(rec.run_id, None)
        by_id[rec.run_id] = rec
    if torn.strip():
        log.warning("%s: ignoring torn trailing record", path)
    return list(by_id.values())


class ManifestWriter:
    def __init__(self, path):
        self.path = Path(path)
        if self.path.exists():
            data = self.path.read_bytes()
            if data and not data.endswith(b"\n"):
                cut = data.rfind(b"\n") + 1
                with open(self.path, "r+b") as fh:
                    fh.truncate(cut)
        self.fd = os.open(self.path, os.O_WRONLY | os.O_APPEND | os.O_CREAT, 0o644)

    def append(self, record: RunRecord) -> None:
        line = (json.dumps(record.to_dict(), sort_keys=True) + "\n").encode()
        try:
            os.write(self.fd, line)
            os.fsync(self.fd)
        except OSError as exc:
            raise IoFailure(f"cannot append to {self.path}: {exc}") from None

    def close(self) -> None:
        os.close(self.fd)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


@dataclass
class SweepResult:
    directory: Path
    records: list[RunRecord]
    executed: int
    skipped: int
    failed: int

    @property
    def manifest(self) -> Path:
        return self.directory / "manifest.jsonl"


def execute(
    config: SweepConfig,
    out_root,
    jobs: int = 1,
    resume: bool = True,
    on_record: Callable[[RunRecord, int, int], None] | None = None,
) -> SweepResult:
    """Simulate every grid point not yet recorded as ``ok``.

    ``on_record(record, done, todo)`` is called in the main process after each
    record has been appended to the manifest.
    """
    sweep_dir = Path(out_root) / config.id
    try:
        sweep_dir.mkdir(parents=True, exist_ok=True)
        cfg_dict = config.to_dict()
        _atomic_write(sweep_dir / "config.json", (json.dumps(cfg_dict, indent=2, sort_keys=True) + "\n").encode())
    except OSError as exc:
        raise IoFailure(f"cannot prepare {sweep_dir}: {exc}") from None
    manifest = sweep_dir / "manifest.jsonl"
    done_ids: set[str] = set()
    if resume and manifest.exists():
        done_ids = {r.run_id for r in load_manifest(manifest) if r.status == "ok"}
    elif not resume and manifest.exists():
        manifest.unlink()
    plan = expand(config)
    todo = [(p, s) for p, s in plan if run_id_for(p, s) not in done_ids]
    log.info("sweep %s: %d points, %d to run", config.id, len(plan), len(todo))
    failed = 0
    with ManifestWriter(manifest) as writer:

        def accept(d: dict, k: int) -> None:
            nonlocal failed
            rec = RunRecord.from_dict(d)
            if rec.status != "ok":
                failed += 1
                log.error("run %s failed: %s", rec.run_id, rec.error)
            writer.append(rec)
            if on_record is not None:
                on_record(rec, k, len(todo))

        if jobs <= 1:
            for k, (p, s) in enumerate(todo, start=1):
                accept(_worker(cfg_dict, p.as_tuple(), s, str(sweep_dir)), k)
        elif todo:
            ctx = mp.get_context("fork") if "fork" in mp.get_all_start_methods() else None
            with ProcessPoolExecutor(max_workers=jobs, mp_context=ctx) as pool:
                futures = [pool.submit(_worker, cfg_dict, p.as_tuple(), s, str(sweep_dir)) for p, s in todo]
                try:
                    for k, fut in enumerate(as_completed(futures), start=1):
                        accept(fut.result(), k)
                except BaseException:
                    for f in futures:
                        f.cancel()
                    raise
    order = {run_id_for(p, s): i for i, (p, s) in enumerate(plan)}
    records = [r for r in load_manifest(manifest) if r.run_id in order]
    records.sort(key=lambda r: order[r.run_id])
    return SweepResult(sweep_dir, records, len(todo), len(plan) - len(todo), failed)


# ---------------------------------------------------------------------------
# single-parameter variation


@dataclass
class OrthoGroup:
    fixed: dict[str, float]
    seed: int
    values: list[float]
    run_ids: list[str]
    C: list[int]
    deltas: list[int]
    classification: str  # "increasing" | "reversed" | "flat"
    incomplete: bool = False
    missing: list[float] = field(default_factory=list)


def classify_deltas(C: Sequence[float], tau: float = 0.02) -> str:
    """``reversed`` if any drop exceeds ``tau * max(C)``, ``flat`` if no step does, else ``increasing``."""
    if len(C) < 2:
        return "flat"
    thr = tau * max(C)
    d = np.diff(np.asarray(C, dtype=float))
    if (d < -thr).any():
        return "reversed"
    if (np.abs(d) < thr).all():
        return "flat"
    return "increasing"


def orthogonality_report(records: Iterable[RunRecord], varied: str = "E_12", tau: float = 0.02) -> list[OrthoGroup]:
    """Group by the three other parameters (and seed); classify the C series along ``varied``."""
    if varied not in PARAM_NAMES:
        raise ValueError(f"varied parameter must be one of {PARAM_NAMES}")
    recs = [r for r in records if r.status == "ok"]
    fixed_names = [n for n in PARAM_NAMES if n != varied]
    full = sorted({getattr(r.params, varied) for r in recs})
    buckets: dict[tuple, list[RunRecord]] = {}
    for r in recs:
        key = tuple(getattr(r.params, n) for n in fixed_names) + (r.seed,)
        buckets.setdefault(key, []).append(r)
    out = []
    for key in sorted(buckets):
        rs = sorted(buckets[key], key=lambda r: getattr(r.params, varied))
        vals = [getattr(r.params, varied) for r in rs]
        C = [r.C_bits for r in rs]
        missing = [v for v in full if v not in set(vals)]
        out.append(OrthoGroup(
            fixed=dict(zip(fixed_names, key[:3])), seed=key[3], values=vals,
            run_ids=[r.run_id for r in rs], C=C, deltas=[int(x) for x in np.diff(C)],
            classification=classify_deltas(C, tau), incomplete=bool(missing), missing=missing,
        ))
    return out
