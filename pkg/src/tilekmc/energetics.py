"""Bond energies, activation energies and the Arrhenius-type rate law.

Energies are in eV. A hop of a tile breaks the bonds to its three
neighbours that are not in the hop direction:

    E_move = E_s + sum_{k != hop} c_k * bond_k

A quarter-turn is priced with neighbours visited in the sweep direction of
the turn (N, E, S, W for clockwise; N, W, S, E for counter-clockwise). With
``cur_i`` the bond to neighbour ``i`` before the turn and ``new_i`` the bond
it would have after it:

    E_rot = E_r + sum_i cur_i * c_i * (1 - c_{i+1}) + sum_i |cur_i - new_i| * c_i

(indices cyclic). Rates are ``exp(-E / TT0)``.

The ``*_kernel`` functions work on raw lattice arrays and are shared by the
compiled simulation loop and the Python-level API below.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from numba import njit

from .errors import ConfigError, NonPositiveTemperature, SiteEmpty, TargetOccupied, UnknownLabel

GROUP_LABELS = ("nitro", "carboxylic_acid", "bromine", "iodine", "pyridine")

# measured pairs; every other pair is unmeasured and treated as 0 eV
GROUP_PAIRS = {
    ("nitro", "iodine"): 0.13,
    ("carboxylic_acid", "carboxylic_acid"): 0.30,
    ("carboxylic_acid", "pyridine"): 0.39,
    ("bromine", "bromine"): 1.00,
    ("iodine", "iodine"): 0.087,
    ("iodine", "pyridine"): 0.17,
    ("pyridine", "pyridine"): 0.10,
}

DEFAULT_E_R = 1.3
DEFAULT_TT0 = 28e-3
DEFAULT_R_DEP = 5e-5


@dataclass(frozen=True)
class EnergyModel:
    labels: tuple[str, ...]
    pair_energy: np.ndarray
    E_s: float
    E_r: float = DEFAULT_E_R
    TT0: float = DEFAULT_TT0
    R_Dep: float = DEFAULT_R_DEP

    def __post_init__(self):
        pe = np.array(self.pair_energy, dtype=np.float64)
        n = len(self.labels)
        if pe.shape != (n, n):
            raise ConfigError(f"pair energy table must be {n}x{n}, got {pe.shape}")
        if not np.array_equal(pe, pe.T):
            raise ConfigError("pair energy table is not symmetric")
        if (pe < 0).any() or self.E_s < 0 or self.E_r < 0:
            raise ConfigError("energies must be non-negative")
        if self.R_Dep < 0:
            raise ConfigError("R_Dep must be non-negative")
        if not self.TT0 > 0:
            raise NonPositiveTemperature(f"TT0 must be positive, got {self.TT0}")
        pe.setflags(write=False)
        object.__setattr__(self, "pair_energy", pe)
        object.__setattr__(self, "labels", tuple(self.labels))

    @classmethod
    def from_pairs(cls, labels: Sequence[str], pairs: Mapping[tuple[str, str], float], **kw):
        labels = tuple(labels)
        index = {name: i for i, name in enumerate(labels)}
        pe = np.zeros((len(labels), len(labels)))
        for (a, b), e in pairs.items():
            if a not in index or b not in index:
                raise UnknownLabel((a, b))
            i, j = index[a], index[b]
            if pe[i, j] and pe[i, j] != e:
                raise ConfigError(f"conflicting energies for pair {(a, b)}")
            pe[i, j] = pe[j, i] = e
        return cls(labels, pe, **kw)

    def label_id(self, label) -> int:
        if isinstance(label, (int, np.integer)):
            if not 0 <= label < len(self.labels):
                raise UnknownLabel(label)
            return int(label)
        try:
            return self.labels.index(label)
        except ValueError:
            raise UnknownLabel(label) from None


def functional_group_model(E_s: float = 0.5, **kw) -> EnergyModel:
    """Energy model over the five measured functional groups."""
    return EnergyModel.from_pairs(GROUP_LABELS, GROUP_PAIRS, E_s=E_s, **kw)


def two_label_model(E_11, E_22, E_12, E_s, **kw) -> EnergyModel:
    """Two abstract labels "1" and "2", as used by the parameter sweep."""
    pe = np.array([[E_11, E_12], [E_12, E_22]], dtype=np.float64)
    return EnergyModel(("1", "2"), pe, E_s=E_s, **kw)


def bond_energy(model: EnergyModel, label_a, label_b) -> float:
    return float(model.pair_energy[model.label_id(label_a), model.label_id(label_b)])


# ---------------------------------------------------------------------------
# array kernels


@njit(cache=True)
def facing_bond(species, orient, labels, pair, nbr, s, side, o_s):
    """Bond between the tile at ``s`` (at orientation ``o_s``) and its neighbour on ``side``."""
    t = nbr[s, side]
    la = labels[species[s], (side - o_s + 4) % 4]
    lb = labels[species[t], (side + 2 - orient[t] + 4) % 4]
    return pair[la, lb]


@njit(cache=True)
def motion_kernel(species, orient, labels, pair, nbr, E_s, s, direction):
    e = E_s
    o = orient[s]
    for k in range(4):
        if k == direction:
            continue
        if species[nbr[s, k]] != 0:
            e += facing_bond(species, orient, labels, pair, nbr, s, k, o)
    return e


@njit(cache=True)
def rotation_kernel(species, orient, labels, pair, nbr, E_r, s, sense):
    o = orient[s]
    o_new = (o + sense + 4) % 4
    cur = np.zeros(4)
    new = np.zeros(4)
    occ = np.zeros(4)
    for i in range(4):
        side = (4 - i) % 4 if sense < 0 else i
        if species[nbr[s, side]] != 0:
            occ[i] = 1.0
            cur[i] = facing_bond(species, orient, labels, pair, nbr, s, side, o)
            new[i] = facing_bond(species, orient, labels, pair, nbr, s, side, o_new)
    e = E_r
    for i in range(4):
        e += cur[i] * occ[i] * (1.0 - occ[(i + 1) % 4])
    for i in range(4):
        e += abs(cur[i] - new[i]) * occ[i]
    return e


# ---------------------------------------------------------------------------
# Python API


def _occupied_index(lat, pos) -> int:
    i = lat.index(pos)
    if lat.species[i] == 0:
        raise SiteEmpty(pos)
    return i


def activation_motion(model: EnergyModel, lat, pos, direction: int) -> float:
    """Activation energy for hopping the tile at ``pos`` one site in ``direction``."""
    i = _occupied_index(lat, pos)
    if lat.species[lat.nbr[i, direction]] != 0:
        raise TargetOccupied((pos, direction))
    return float(motion_kernel(lat.species, lat.orient, lat.label_table, model.pair_energy,
                               lat.nbr, model.E_s, i, direction))


def activation_rotation(model: EnergyModel, lat, pos, sense: int) -> float:
    """Activation energy for a quarter-turn; ``sense`` +1 is clockwise, -1 counter-clockwise."""
    if sense not in (1, -1):
        raise ValueError("sense must be +1 or -1")
    i = _occupied_index(lat, pos)
    return float(rotation_kernel(lat.species, lat.orient, lat.label_table, model.pair_energy,
                                 lat.nbr, model.E_r, i, sense))


def rate(model_or_tt0, energy: float) -> float:
    tt0 = model_or_tt0.TT0 if isinstance(model_or_tt0, EnergyModel) else float(model_or_tt0)
    if not tt0 > 0:
        raise NonPositiveTemperature(f"TT0 must be positive, got {tt0}")
    return math.exp(-energy / tt0)
