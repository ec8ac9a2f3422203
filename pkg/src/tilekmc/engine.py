"""Kinetic Monte Carlo loop: enumerate transitions, roulette-select, deposit.

Every step either applies one hop/turn or deposits a tile. With ``total`` the
summed transition rate and ``R_eff`` the deposition rate (``R_Dep`` while the
coverage is below the cap, else 0), a uniform ``u`` picks the first
transition whose cumulative rate exceeds ``u * (total + R_eff)``; when none
does, a tile is deposited.

Transitions are enumerated site-major in row-major order and, per tile, in
slot order MoveN, MoveE, MoveS, MoveW, RotCW, RotCCW.

Draw order per step: (1) the roulette uniform; on deposition (2) the index
into the empty-site list, (3) a uniform for the species (weighted by
concentration), (4) the orientation in 0..3.

:func:`run` uses the compiled incremental kernel; :func:`run_reference`
recomputes every rate from scratch each step with plain Python and exists as
an oracle for it.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import _kernel as K
from .energetics import EnergyModel, activation_motion, activation_rotation, rate
from .errors import ConfigError, NoEmptySite
from .lattice import Lattice, SpeciesDescriptor, validate_species
from .rng import RngStream

log = logging.getLogger(__name__)

KIND_NAMES = ("MoveN", "MoveE", "MoveS", "MoveW", "RotCW", "RotCCW", "Deposit", "Stall")


@dataclass(frozen=True)
class Transition:
    kind: str
    tile_pos: tuple[int, int]
    activation: float
    rate: float

    @property
    def code(self) -> int:
        return KIND_NAMES.index(self.kind)


@dataclass
class SimConfig:
    lattice_side: int
    species: Sequence[SpeciesDescriptor]
    energy: EnergyModel
    max_coverage: float = 0.25
    steps: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.lattice_side < 2:
            raise ConfigError("lattice_side must be >= 2")
        if self.steps < 0:
            raise ConfigError("steps must be >= 0")
        if not 0.0 < self.max_coverage <= 1.0:
            raise ConfigError("max_coverage must lie in (0, 1]")
        self.species = tuple(sorted(self.species, key=lambda s: s.id))
        validate_species(self.species, len(self.energy.labels))

    @property
    def concentration_cumsum(self) -> np.ndarray:
        return np.cumsum([s.concentration for s in self.species], dtype=np.float64)


@dataclass
class EventReport:
    kind: str  # "diffused" | "deposited" | "stalled"
    transition: Transition | None = None
    position: tuple[int, int] | None = None
    species: int | None = None
    orientation: int | None = None


@dataclass
class EventLog:
    kind: np.ndarray
    site: np.ndarray
    activation: np.ndarray
    aux: np.ndarray
    side: int

    def __len__(self):
        return len(self.kind)

    def __eq__(self, other):
        if not isinstance(other, EventLog):
            return NotImplemented
        return (
            np.array_equal(self.kind, other.kind)
            and np.array_equal(self.site, other.site)
            and np.array_equal(self.activation, other.activation, equal_nan=True)
            and np.array_equal(self.aux, other.aux)
        )

    def rows(self):
        for step, (k, s, a, x) in enumerate(zip(self.kind, self.site, self.activation, self.aux)):
            row, col = divmod(int(s), self.side) if s >= 0 else (-1, -1)
            sp, o = divmod(int(x), 4) if x >= 0 else (-1, -1)
            yield step, KIND_NAMES[k], row, col, float(a), sp, o

    def write_tsv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("step\tkind\trow\tcol\tactivation\tspecies\torientation\n")
            for step, kind, r, c, a, sp, o in self.rows():
                act = "" if math.isnan(a) else repr(a)
                fh.write(f"{step}\t{kind}\t{r}\t{c}\t{act}\t{'' if sp < 0 else sp}\t{'' if o < 0 else o}\n")


@dataclass
class RunResult:
    lattice: Lattice
    counts: dict[str, int]
    steps: int
    seed: int
    events: EventLog | None = None
    snapshots: list = field(default_factory=list)


# ---------------------------------------------------------------------------
# reference path (full recomputation)


def enumerate_transitions(lat: Lattice, model: EnergyModel) -> list[Transition]:
    out = []
    for i in np.flatnonzero(lat.species):
        pos = lat.position(i)
        for d in range(4):
            if lat.species[lat.nbr[i, d]] == 0:
                e = activation_motion(model, lat, pos, d)
                out.append(Transition(KIND_NAMES[d], pos, e, rate(model, e)))
        for kind, sense in (("RotCW", 1), ("RotCCW", -1)):
            e = activation_rotation(model, lat, pos, sense)
            out.append(Transition(kind, pos, e, rate(model, e)))
    return out


def _pick_species(conc_cum: np.ndarray, u: float) -> int:
    v = u * conc_cum[-1]
    for k, c in enumerate(conc_cum):
        if c > v:
            return k + 1
    return len(conc_cum)


def apply_transition(lat: Lattice, t: Transition) -> None:
    i = lat.index(t.tile_pos)
    code = t.code
    if code < 4:
        lat.move_index(i, int(lat.nbr[i, code]))
    else:
        lat.rotate(t.tile_pos, 1 if code == K.ROT_CW else -1)


def select_and_apply(
    lat: Lattice,
    model: EnergyModel,
    transitions: Sequence[Transition],
    rng: RngStream,
    conc_cum: Sequence[float] = (1.0,),
    max_coverage: float = 1.0,
) -> EventReport:
    """One roulette step over ``transitions`` plus the deposition channel."""
    conc_cum = np.asarray(conc_cum, dtype=np.float64)
    total = 0.0
    for t in transitions:
        total += t.rate
    r_eff = model.R_Dep if lat.coverage() < max_coverage else 0.0
    if total == 0.0 and r_eff == 0.0:
        return EventReport("stalled")
    shoot = rng.uniform() * (total + r_eff)
    cum = 0.0
    chosen = None
    for t in transitions:
        cum += t.rate
        if cum > shoot:
            chosen = t
            break
    if chosen is None and r_eff == 0.0:
        # u * total rounded up to total; fall back to the last live transition
        chosen = [t for t in transitions if t.rate > 0][-1]
    if chosen is not None:
        apply_transition(lat, chosen)
        return EventReport("diffused", chosen, chosen.tile_pos)
    if lat.n_empty == 0:
        raise NoEmptySite("deposition drawn on a full lattice")
    s = int(lat.empties[rng.randbelow(lat.n_empty)])
    sp = _pick_species(conc_cum, rng.uniform())
    o = rng.randbelow(4)
    lat.place_at_index(s, sp, o)
    return EventReport("deposited", None, lat.position(s), sp, o)


def run_reference(config: SimConfig, record_events: bool = False) -> RunResult:
    """Plain-Python run with every rate recomputed at every step (slow)."""
    lat = Lattice(config.lattice_side, config.species)
    rng = RngStream(config.seed)
    counts = dict(depositions=0, moves=0, rotations=0, stalls=0)
    conc_cum = config.concentration_cumsum
    n = config.steps
    kinds = np.zeros(n, dtype=np.int8)
    sites = np.full(n, -1, dtype=np.int64)
    acts = np.full(n, np.nan)
    aux = np.full(n, -1, dtype=np.int64)
    for step in range(n):
        transitions = enumerate_transitions(lat, config.energy)
        ev = select_and_apply(lat, config.energy, transitions, rng, conc_cum, config.max_coverage)
        if ev.kind == "stalled":
            counts["stalls"] += 1
            kinds[step] = K.STALL
        elif ev.kind == "deposited":
            counts["depositions"] += 1
            kinds[step] = K.DEPOSIT
            sites[step] = lat.index(ev.position)
            aux[step] = ev.species * 4 + ev.orientation
        else:
            t = ev.transition
            counts["moves" if t.code < 4 else "rotations"] += 1
            kinds[step] = t.code
            sites[step] = lat.index(t.tile_pos)
            acts[step] = t.activation
    events = EventLog(kinds, sites, acts, aux, lat.side) if record_events else None
    return RunResult(lat, counts, n, config.seed, events)


# ---------------------------------------------------------------------------
# compiled path


class Simulation:
    """Incremental simulation state driven by the compiled kernel."""

    def __init__(self, config: SimConfig, lattice: Lattice | None = None):
        self.config = config
        self.lattice = lattice if lattice is not None else Lattice(config.lattice_side, config.species)
        if self.lattice.side != config.lattice_side:
            raise ConfigError("lattice side does not match config")
        self.rng = RngStream(config.seed)
        n = self.lattice.n_sites
        self.m = K.tree_size(n)
        self.rates = np.zeros((n, K.N_SLOTS))
        self.acts = np.full((n, K.N_SLOTS), np.nan)
        self.tree = np.zeros(2 * self.m)
        self.counters = np.zeros(4, dtype=np.int64)
        self.state = np.zeros(1, dtype=np.int64)
        self.conc_cum = config.concentration_cumsum
        self.step = 0
        self.refresh_all()

    def _model_args(self):
        lat, e = self.lattice, self.config.energy
        return (lat.species, lat.orient, lat.label_table, e.pair_energy, lat.nbr,
                e.E_s, e.E_r, e.TT0)

    def refresh_all(self) -> None:
        K.refresh_all(*self._model_args(), self.rates, self.acts, self.tree, self.m)

    @property
    def total_rate(self) -> float:
        return float(self.tree[1])

    def advance(self, n_steps: int, log: EventLog | None = None) -> None:
        lat, e = self.lattice, self.config.energy
        self.state[0] = lat.n_empty
        if log is None:
            dummy_i = np.zeros(1, dtype=np.int64)
            logs = (np.zeros(1, dtype=np.int8), dummy_i, np.zeros(1), dummy_i, False)
            offset = 0
        else:
            logs = (log.kind, log.site, log.activation, log.aux, True)
            offset = self.step
        done = K.run_steps(
            n_steps, offset, *self._model_args(), e.R_Dep, self.config.max_coverage,
            self.conc_cum, self.rates, self.acts, self.tree, self.m,
            lat.empties, lat.empty_index, self.state, self.rng.state, self.counters, *logs,
        )
        lat.n_empty = int(self.state[0])
        if done < 0:
            self.step += -done - 1
            raise NoEmptySite("deposition drawn on a full lattice")
        self.step += n_steps

    @property
    def counts(self) -> dict[str, int]:
        c = self.counters
        return dict(depositions=int(c[K.C_DEPOSIT]), moves=int(c[K.C_MOVE]),
                    rotations=int(c[K.C_ROTATE]), stalls=int(c[K.C_STALL]))


def run(
    config: SimConfig,
    record_events: bool = False,
    hook: Callable[[int, Lattice], object] | None = None,
    hook_every: int = 0,
) -> RunResult:
    """Run ``config.steps`` events with the compiled incremental kernel.

    ``hook(step, lattice)`` is called every ``hook_every`` steps (and after the
    last one); non-None return values are collected in ``snapshots``.
    """
    sim = Simulation(config)
    n = config.steps
    events = None
    if record_events:
        events = EventLog(np.zeros(n, dtype=np.int8), np.full(n, -1, dtype=np.int64),
                          np.full(n, np.nan), np.full(n, -1, dtype=np.int64), config.lattice_side)
    snapshots = []
    chunk = hook_every if (hook is not None and hook_every > 0) else n
    while sim.step < n:
        sim.advance(min(chunk, n - sim.step), events)
        if hook is not None:
            out = hook(sim.step, sim.lattice)
            if out is not None:
                snapshots.append(out)
    log.debug("run seed=%d steps=%d counts=%s", config.seed, n, sim.counts)
    return RunResult(sim.lattice, sim.counts, n, config.seed, events, snapshots)
