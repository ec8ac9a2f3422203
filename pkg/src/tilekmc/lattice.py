"""Periodic square lattice holding at most one tile per site.

Sites are addressed either as ``(row, col)`` positions or as flat indices
``row * side + col``. Side order is north, east, south, west; an orientation
counts clockwise quarter-turns, so the label shown on side ``k`` of a tile is
``edge_labels[(k - orientation) % 4]``.

Occupancy lives in flat numpy arrays (``species``, ``orient``) so that the
compiled simulation kernel can mutate a lattice in place. Empty sites are
additionally tracked in a swap-remove list (``empties`` / ``empty_index``);
deposition draws an index into that list, so its ordering is part of the
reproducibility contract.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np
from scipy import ndimage

from .errors import ConfigError, NotAdjacent, SiteEmpty, SiteOccupied

NORTH, EAST, SOUTH, WEST = 0, 1, 2, 3
SIDE_NAMES = ("north", "east", "south", "west")
DELTAS = ((-1, 0), (0, 1), (1, 0), (0, -1))
EMPTY = 0


@dataclass(frozen=True)
class SpeciesDescriptor:
    """A tile family: four edge labels (N, E, S, W at orientation 0)."""

    id: int
    edge_labels: tuple[int, int, int, int]
    concentration: float = 1.0
    name: str = ""

    def __post_init__(self):
        if self.id < 1:
            raise ConfigError("species ids start at 1 (0 marks an empty site)")
        if len(self.edge_labels) != 4:
            raise ConfigError("a species needs exactly four edge labels")
        object.__setattr__(self, "edge_labels", tuple(int(x) for x in self.edge_labels))
        if not 0.0 <= self.concentration <= 1.0:
            raise ConfigError(f"concentration {self.concentration} outside [0, 1]")

    @property
    def iso_functionalised(self) -> bool:
        return len(set(self.edge_labels)) == 1

    def label_on(self, side: int, orientation: int) -> int:
        return self.edge_labels[(side - orientation) % 4]


def validate_species(species: Sequence[SpeciesDescriptor], n_labels: int) -> None:
    if not species:
        raise ConfigError("at least one species is required")
    ids = [s.id for s in species]
    if sorted(ids) != list(range(1, len(species) + 1)):
        raise ConfigError(f"species ids must be 1..{len(species)}, got {ids}")
    for s in species:
        bad = [lab for lab in s.edge_labels if not 0 <= lab < n_labels]
        if bad:
            raise ConfigError(f"species {s.id} uses unknown label ids {bad}")
    total = sum(s.concentration for s in species)
    if abs(total - 1.0) > 1e-9:
        raise ConfigError(f"species concentrations sum to {total}, expected 1")


def label_table(species: Sequence[SpeciesDescriptor]) -> np.ndarray:
    """Row ``k`` holds the orientation-0 edge labels of species ``k``; row 0 is unused."""
    table = np.zeros((len(species) + 1, 4), dtype=np.int64)
    for s in species:
        table[s.id] = s.edge_labels
    return table


@dataclass(frozen=True)
class TileInstance:
    species: int
    orientation: int
    position: tuple[int, int]


def neighbor_table(side: int) -> np.ndarray:
    """Flat indices of the (N, E, S, W) neighbours of every site."""
    r, c = np.divmod(np.arange(side * side), side)
    table = np.empty((side * side, 4), dtype=np.int64)
    for k, (dr, dc) in enumerate(DELTAS):
        table[:, k] = ((r + dr) % side) * side + (c + dc) % side
    return table


class Lattice:
    """Periodic ``side x side`` site lattice."""

    def __init__(self, side: int, species: Sequence[SpeciesDescriptor] = ()):
        if side < 2:
            raise ConfigError("lattice side must be at least 2")
        self.side = int(side)
        self.species_set = tuple(sorted(species, key=lambda s: s.id))
        self.label_table = label_table(self.species_set)
        n = self.side * self.side
        self.species = np.zeros(n, dtype=np.int16)
        self.orient = np.zeros(n, dtype=np.int8)
        self.empties = np.arange(n, dtype=np.int64)
        self.empty_index = np.arange(n, dtype=np.int64)
        self.n_empty = n
        self.nbr = neighbor_table(self.side)

    # -- addressing -------------------------------------------------------

    @property
    def n_sites(self) -> int:
        return self.side * self.side

    @property
    def n_tiles(self) -> int:
        return self.n_sites - self.n_empty

    def index(self, pos) -> int:
        r, c = pos
        if not (0 <= r < self.side and 0 <= c < self.side):
            raise IndexError(f"position {pos} outside {self.side}x{self.side} lattice")
        return r * self.side + c

    def position(self, idx: int) -> tuple[int, int]:
        return divmod(int(idx), self.side)

    def wrap(self, pos) -> tuple[int, int]:
        return pos[0] % self.side, pos[1] % self.side

    # -- queries ----------------------------------------------------------

    def is_occupied(self, pos) -> bool:
        return bool(self.species[self.index(pos)] != EMPTY)

    def tile_at(self, pos) -> TileInstance | None:
        i = self.index(pos)
        if self.species[i] == EMPTY:
            return None
        return TileInstance(int(self.species[i]), int(self.orient[i]), self.position(i))

    def tiles(self) -> Iterator[TileInstance]:
        for i in np.flatnonzero(self.species):
            yield TileInstance(int(self.species[i]), int(self.orient[i]), self.position(i))

    def neighbors(self, pos) -> tuple[tuple[tuple[int, int], int], ...]:
        """Wrapped (N, E, S, W) neighbours of ``pos`` with occupancy bits."""
        i = self.index(pos)
        return tuple(
            (self.position(j), int(self.species[j] != EMPTY)) for j in self.nbr[i]
        )

    def coverage(self) -> float:
        return self.n_tiles / self.n_sites

    def grid(self) -> np.ndarray:
        """Species ids as a ``side x side`` view (0 = empty)."""
        return self.species.reshape(self.side, self.side)

    def orientation_grid(self) -> np.ndarray:
        return self.orient.reshape(self.side, self.side)

    def species_counts(self) -> dict[int, int]:
        ids, counts = np.unique(self.species[self.species != EMPTY], return_counts=True)
        return {int(k): int(v) for k, v in zip(ids, counts)}

    # -- empty-site bookkeeping --------------------------------------------

    def _take_empty(self, i: int) -> None:
        k = self.empty_index[i]
        last = self.empties[self.n_empty - 1]
        self.empties[k] = last
        self.empty_index[last] = k
        self.empty_index[i] = -1
        self.n_empty -= 1

    def _give_empty(self, i: int) -> None:
        self.empties[self.n_empty] = i
        self.empty_index[i] = self.n_empty
        self.n_empty += 1

    # -- mutation -----------------------------------------------------------

    def place(self, tile: TileInstance) -> None:
        i = self.index(tile.position)
        if self.species[i] != EMPTY:
            raise SiteOccupied(tile.position)
        if tile.species < 1:
            raise ValueError("species id must be >= 1")
        self.species[i] = tile.species
        self.orient[i] = tile.orientation % 4
        self._take_empty(i)

    def place_at_index(self, i: int, species: int, orientation: int) -> None:
        """Deposit without building a TileInstance (engine fast path)."""
        if self.species[i] != EMPTY:
            raise SiteOccupied(self.position(i))
        self.species[i] = species
        self.orient[i] = orientation % 4
        self._take_empty(i)

    def remove(self, pos) -> TileInstance:
        i = self.index(pos)
        if self.species[i] == EMPTY:
            raise SiteEmpty(pos)
        tile = TileInstance(int(self.species[i]), int(self.orient[i]), self.position(i))
        self.species[i] = EMPTY
        self.orient[i] = 0
        self._give_empty(i)
        return tile

    def move(self, src, dst) -> None:
        i, j = self.index(src), self.index(dst)
        if self.species[i] == EMPTY:
            raise SiteEmpty(src)
        if self.species[j] != EMPTY:
            raise SiteOccupied(dst)
        if j not in self.nbr[i]:
            raise NotAdjacent((src, dst))
        self.move_index(i, j)

    def move_index(self, i: int, j: int) -> None:
        self.species[j] = self.species[i]
        self.orient[j] = self.orient[i]
        self.species[i] = EMPTY
        self.orient[i] = 0
        self._take_empty(j)
        self._give_empty(i)

    def rotate(self, pos, sense: int) -> None:
        """Quarter-turn a tile; ``sense`` is +1 (clockwise) or -1."""
        if sense not in (1, -1):
            raise ValueError("sense must be +1 or -1")
        i = self.index(pos)
        if self.species[i] == EMPTY:
            raise SiteEmpty(pos)
        self.orient[i] = (int(self.orient[i]) + sense) % 4

    # -- misc -------------------------------------------------------------------

    def copy(self) -> "Lattice":
        other = Lattice.__new__(Lattice)
        other.side = self.side
        other.species_set = self.species_set
        other.label_table = self.label_table
        other.species = self.species.copy()
        other.orient = self.orient.copy()
        other.empties = self.empties.copy()
        other.empty_index = self.empty_index.copy()
        other.n_empty = self.n_empty
        other.nbr = self.nbr
        return other

    @classmethod
    def from_grid(cls, species_grid, orientation_grid=None, species=()) -> "Lattice":
        """Build a lattice by placing tiles in row-major order."""
        g = np.asarray(species_grid)
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise ValueError("species grid must be square")
        o = np.zeros_like(g) if orientation_grid is None else np.asarray(orientation_grid)
        lat = cls(g.shape[0], species)
        for r, c in zip(*np.nonzero(g)):
            lat.place(TileInstance(int(g[r, c]), int(o[r, c]), (int(r), int(c))))
        return lat

    def check_invariants(self) -> None:
        """Raise AssertionError if the placement index is inconsistent."""
        occupied = self.species != EMPTY
        listed = self.empties[: self.n_empty]
        assert len(np.unique(listed)) == self.n_empty, "duplicate empty entries"
        assert not occupied[listed].any(), "occupied site listed as empty"
        assert int((~occupied).sum()) == self.n_empty, "empty count mismatch"
        assert np.array_equal(self.empty_index[listed], np.arange(self.n_empty))
        assert (self.empty_index[occupied] == -1).all()
        assert ((self.orient >= 0) & (self.orient < 4)).all()

    def __eq__(self, other):
        if not isinstance(other, Lattice):
            return NotImplemented
        return (
            self.side == other.side
            and np.array_equal(self.species, other.species)
            and np.array_equal(self.orient, other.orient)
        )

    def __repr__(self):
        return f"Lattice(side={self.side}, tiles={self.n_tiles})"


# ---------------------------------------------------------------------------
# Aggregate statistics


@dataclass
class Component:
    size: int
    members: list[tuple[int, int]]
    species_counts: dict[int, int] = field(default_factory=dict)


@dataclass
class ComponentReport:
    aggregates: list[Component]
    singletons: list[tuple[int, int]]

    @property
    def n_aggregates(self) -> int:
        return len(self.aggregates)


def periodic_labels(occupied: np.ndarray) -> tuple[np.ndarray, int]:
    """4-connected component labels of a boolean grid on a torus.

    Labels are renumbered 1..n in order of each component's first site in
    row-major order.
    """
    labels, n = ndimage.label(occupied)
    if n == 0:
        return labels, 0
    parent = np.arange(n + 1)

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a_edge, b_edge in ((labels[0, :], labels[-1, :]), (labels[:, 0], labels[:, -1])):
        for a, b in zip(a_edge, b_edge):
            if a and b:
                ra, rb = find(a), find(b)
                if ra != rb:
                    parent[max(ra, rb)] = min(ra, rb)
    roots = np.array([find(a) for a in range(n + 1)])
    merged = roots[labels]
    # renumber by first appearance
    flat = merged.ravel()
    uniq, first = np.unique(flat[flat > 0], return_index=True)
    order = uniq[np.argsort(first)]
    remap = np.zeros(n + 1, dtype=np.int64)
    remap[order] = np.arange(1, len(order) + 1)
    return remap[merged], len(order)


def aggregates(lat: Lattice) -> ComponentReport:
    """Connected components with periodic wrap; size >= 2 counts as an aggregate."""
    grid = lat.grid()
    labels, n = periodic_labels(grid != EMPTY)
    aggs: list[Component] = []
    singles: list[tuple[int, int]] = []
    if n == 0:
        return ComponentReport(aggs, singles)
    flat_labels = labels.ravel()
    order = np.argsort(flat_labels, kind="stable")
    bounds = np.searchsorted(flat_labels[order], np.arange(1, n + 2))
    for k in range(n):
        idx = order[bounds[k]:bounds[k + 1]]
        members = [lat.position(i) for i in idx]
        if len(idx) == 1:
            singles.append(members[0])
            continue
        sp, cnt = np.unique(lat.species[idx], return_counts=True)
        aggs.append(Component(len(idx), members, {int(a): int(b) for a, b in zip(sp, cnt)}))
    return ComponentReport(aggs, singles)


def bond_pair_counts(lat: Lattice) -> tuple[int, int]:
    """(heterospecific, total) adjacent occupied pairs, each pair once."""
    g = lat.grid()
    hetero = total = 0
    for axis in (0, 1):
        other = np.roll(g, -1, axis=axis)
        both = (g != EMPTY) & (other != EMPTY)
        total += int(both.sum())
        hetero += int((both & (g != other)).sum())
    if lat.side == 2:
        # every adjacent pair on a 2-torus is joined across both sides
        hetero //= 2
        total //= 2
    return hetero, total


def hetero_bond_fraction(lat: Lattice) -> tuple[float, bool]:
    """Fraction of adjacent occupied pairs whose species differ.

    Returns ``(fraction, defined)``; ``defined`` is False (and the fraction 0)
    when the lattice has no adjacent occupied pair at all.
    """
    hetero, total = bond_pair_counts(lat)
    if total == 0:
        return 0.0, False
    return hetero / total, True
