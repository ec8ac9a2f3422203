import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from tilekmc.energetics import (DEFAULT_E_R, DEFAULT_TT0, EnergyModel, activation_motion, activation_rotation,
                                bond_energy, rate, functional_group_model, two_label_model)
from tilekmc.errors import ConfigError, NonPositiveTemperature, SiteEmpty, TargetOccupied, UnknownLabel
from tilekmc.lattice import EAST, NORTH, SOUTH, WEST, Lattice, SpeciesDescriptor, TileInstance

import oracles
from energy_cases import random_case

T1 = functional_group_model()


def t1_lattice(side, tiles):
    """tiles: {pos: (labels by name NESW, orientation)}; one species per distinct tile."""
    species, placed = [], []
    for k, (pos, (names, o)) in enumerate(tiles.items(), start=1):
        species.append(SpeciesDescriptor(k, tuple(T1.label_id(x) for x in names), 1.0 / len(tiles)))
        placed.append(TileInstance(k, o, pos))
    fix = 1.0 - sum(s.concentration for s in species[:-1])
    species[-1] = SpeciesDescriptor(species[-1].id, species[-1].edge_labels, fix)
    lat = Lattice(side, species)
    for t in placed:
        lat.place(t)
    return lat


class TestBondTable:
    @pytest.mark.parametrize("a,b,e", [
        ("bromine", "bromine", 1.00),
        ("iodine", "iodine", 0.087),
        ("nitro", "iodine", 0.13),
        ("iodine", "nitro", 0.13),
        ("carboxylic_acid", "carboxylic_acid", 0.30),
        ("carboxylic_acid", "pyridine", 0.39),
        ("iodine", "pyridine", 0.17),
        ("pyridine", "pyridine", 0.10),
        ("nitro", "nitro", 0.0),
        ("bromine", "iodine", 0.0),
    ])
    def test_group_pair_values(self, a, b, e):
        assert bond_energy(T1, a, b) == e
        assert bond_energy(T1, b, a) == e

    def test_unknown_label(self):
        with pytest.raises(UnknownLabel):
            bond_energy(T1, "fluorine", "nitro")
        with pytest.raises(UnknownLabel):
            T1.label_id(9)

    def test_model_validation(self):
        with pytest.raises(ConfigError):
            EnergyModel(("a", "b"), [[0.1, 0.2], [0.3, 0.1]], E_s=0.5)
        with pytest.raises(ConfigError):
            two_label_model(-0.1, 0.1, 0.1, 0.5)
        with pytest.raises(NonPositiveTemperature):
            two_label_model(0.1, 0.1, 0.1, 0.5, TT0=0.0)
        with pytest.raises(ConfigError):
            EnergyModel.from_pairs(("a",), {("a", "a"): 0.1, ("a", "a"): 0.1, }, E_s=0.5, R_Dep=-1)

    def test_defaults(self):
        assert (T1.E_r, T1.TT0, T1.R_Dep) == (1.3, 0.028, 5e-5)


class TestMotion:
    def test_isolated_tile(self):
        lat = t1_lattice(5, {(2, 2): (["nitro"] * 4, 0)})
        for d in range(4):
            assert activation_motion(T1, lat, (2, 2), d) == 0.5

    def test_three_neighbours_at_point_three(self):
        acid = ["carboxylic_acid"] * 4
        lat = t1_lattice(5, {(2, 2): (acid, 0), (1, 2): (acid, 0), (2, 1): (acid, 0), (3, 2): (acid, 0)})
        assert activation_motion(T1, lat, (2, 2), EAST) == pytest.approx(1.4, abs=1e-12)

    def test_two_neighbours_mixed(self):
        # north neighbour bonds at 0.1 (pyridine-pyridine), west at 0.39 (acid-pyridine), south empty
        centre = ["pyridine", "nitro", "nitro", "pyridine"]
        lat = t1_lattice(5, {(2, 2): (centre, 0),
                             (1, 2): (["nitro", "nitro", "pyridine", "nitro"], 0),
                             (2, 1): (["nitro", "carboxylic_acid", "nitro", "nitro"], 0)})
        assert activation_motion(T1, lat, (2, 2), EAST) == pytest.approx(0.99, abs=1e-12)

    def test_errors(self):
        lat = t1_lattice(4, {(0, 0): (["nitro"] * 4, 0), (0, 1): (["nitro"] * 4, 0)})
        with pytest.raises(TargetOccupied):
            activation_motion(T1, lat, (0, 0), EAST)
        with pytest.raises(SiteEmpty):
            activation_motion(T1, lat, (2, 2), EAST)

    @given(st.sampled_from([NORTH, EAST, SOUTH, WEST]), st.floats(0.0, 1.0))
    def test_depends_only_on_broken_bonds(self, d, e):
        # a tile with a single neighbour opposite the hop: same energy in every frame
        m = two_label_model(e, e, e, 0.7)
        sp = [SpeciesDescriptor(1, (0, 0, 0, 0), 1.0)]
        lat = Lattice(6, sp)
        lat.place(TileInstance(1, 0, (3, 3)))
        dr, dc = oracles.STEP["NESW"[(d + 2) % 4]]
        lat.place(TileInstance(1, 0, (3 + dr, 3 + dc)))
        assert activation_motion(m, lat, (3, 3), d) == pytest.approx(0.7 + e, abs=1e-12)


class TestRotation:
    def test_isolated_tile(self):
        lat = t1_lattice(5, {(2, 2): (["nitro", "iodine", "bromine", "pyridine"], 1)})
        assert activation_rotation(T1, lat, (2, 2), 1) == DEFAULT_E_R
        assert activation_rotation(T1, lat, (2, 2), -1) == DEFAULT_E_R

    @pytest.mark.parametrize("side", ["N", "E", "S", "W"])
    def test_iso_single_neighbour(self, side):
        lat = Lattice(5, [SpeciesDescriptor(1, (0, 0, 0, 0), 1.0)])
        m = two_label_model(0.42, 0.1, 0.1, 0.5)
        lat.place(TileInstance(1, 0, (2, 2)))
        dr, dc = oracles.STEP[side]
        lat.place(TileInstance(1, 0, (2 + dr, 2 + dc)))
        for sense in (1, -1):
            assert activation_rotation(m, lat, (2, 2), sense) == pytest.approx(m.E_r + 0.42, abs=1e-12)

    def test_surrounded_equal_bonds(self):
        lat = Lattice(5, [SpeciesDescriptor(1, (0, 0, 0, 0), 1.0)])
        m = two_label_model(0.8, 0.1, 0.1, 0.5)
        for p in [(2, 2), (1, 2), (2, 3), (3, 2), (2, 1)]:
            lat.place(TileInstance(1, 0, p))
        assert activation_rotation(m, lat, (2, 2), 1) == m.E_r

    def test_saddle_term(self):
        # east contact is pyridine-acid (0.39); a clockwise turn brings the acid edge east (0.30),
        # a counter-clockwise turn brings a nitro edge east (0 eV)
        lat = t1_lattice(5, {(2, 2): (["carboxylic_acid", "pyridine", "nitro", "nitro"], 0),
                             (2, 3): (["nitro", "nitro", "nitro", "carboxylic_acid"], 0)})
        # broken 0.39 (no successor in either sweep) plus saddle |0.39 - 0.30|
        assert activation_rotation(T1, lat, (2, 2), 1) == pytest.approx(1.3 + 0.39 + 0.09, abs=1e-12)
        assert activation_rotation(T1, lat, (2, 2), -1) == pytest.approx(1.3 + 0.78, abs=1e-12)

    def test_sweep_order_matters(self):
        # neighbours N and E: the clockwise sweep visits N then E (N keeps a successor),
        # the counter-clockwise sweep visits E then N... after W, S
        acid = ["carboxylic_acid"] * 4
        pyr = ["pyridine"] * 4
        lat = t1_lattice(5, {(2, 2): (acid, 0), (1, 2): (pyr, 0), (2, 3): (acid, 0)})
        # clockwise order N, E, S, W: N followed by E (occupied), E followed by S (empty) -> E breaks
        assert activation_rotation(T1, lat, (2, 2), 1) == pytest.approx(1.3 + 0.30, abs=1e-12)
        # counter-clockwise order N, W, S, E: N followed by W (empty), E followed by N (occupied) -> N breaks
        assert activation_rotation(T1, lat, (2, 2), -1) == pytest.approx(1.3 + 0.39, abs=1e-12)

    def test_bad_sense(self):
        lat = t1_lattice(3, {(0, 0): (["nitro"] * 4, 0)})
        with pytest.raises(ValueError):
            activation_rotation(T1, lat, (0, 0), 2)

    @given(st.integers(0, 2**31))
    def test_iso_single_species_turn_symmetric(self, seed):
        g = np.random.default_rng(seed)
        m = two_label_model(*g.uniform(0, 1, 3), 0.5)
        lat = Lattice(4, [SpeciesDescriptor(1, (1, 1, 1, 1), 1.0)])
        occ = g.random((4, 4)) < 0.5
        occ[1, 1] = True
        for r, c in zip(*np.nonzero(occ)):
            lat.place(TileInstance(1, int(g.integers(4)), (int(r), int(c))))
        assert activation_rotation(m, lat, (1, 1), 1) == activation_rotation(m, lat, (1, 1), -1)


@pytest.mark.parametrize("seed", range(200))
def test_random_configurations_match_oracle(seed):
    model, lat, centre, conf, bonds = random_case(seed)
    for d, name in enumerate("NESW"):
        if oracles.neighbour(centre, name, lat.side) in conf:
            continue
        want = oracles.motion_energy(conf, centre, name, lat.side, bonds, model.E_s)
        assert abs(activation_motion(model, lat, centre, d) - want) <= 1e-12
    for sense in (1, -1):
        want = oracles.rotation_energy(conf, centre, sense == 1, lat.side, bonds, model.E_r)
        assert abs(activation_rotation(model, lat, centre, sense) - want) <= 1e-12


class TestRate:
    def test_values(self):
        assert rate(DEFAULT_TT0, 0.0) == 1.0
        assert rate(DEFAULT_TT0, DEFAULT_TT0) == pytest.approx(math.exp(-1), abs=1e-15)
        assert rate(T1, 0.5) == math.exp(-0.5 / 0.028)
        assert rate(T1, 0.5) == pytest.approx(1.75e-8, rel=1e-2)

    def test_nonpositive_temperature(self):
        with pytest.raises(NonPositiveTemperature):
            rate(0.0, 1.0)
        with pytest.raises(NonPositiveTemperature):
            rate(-1.0, 1.0)

    @given(st.floats(0, 5), st.floats(0, 5), st.floats(0.005, 1.0))
    def test_monotone_and_bounded(self, e1, e2, tt0):
        r1, r2 = rate(tt0, e1), rate(tt0, e2)
        assert 0 <= r1 <= 1 and 0 <= r2 <= 1
        if e1 < e2:
            assert r1 >= r2
        if e2 - e1 > 1e-6 and r2 > 0:
            assert r1 > r2
