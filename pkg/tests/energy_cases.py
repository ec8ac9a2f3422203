"""Random small configurations shared by the energy tests and the acceptance suite."""
import numpy as np

from tilekmc.energetics import functional_group_model
from tilekmc.lattice import Lattice, SpeciesDescriptor, TileInstance


def random_case(seed):
    """A random 3..5 lattice over Table-1 labels plus its oracle description."""
    g = np.random.default_rng(seed)
    model = functional_group_model(E_s=float(g.uniform(0.5, 1.0)))
    n_species = int(g.integers(1, 4))
    conc = np.full(n_species, 1.0 / n_species)
    conc[-1] = 1.0 - conc[:-1].sum()
    species = [SpeciesDescriptor(k + 1, tuple(int(x) for x in g.integers(0, 5, 4)), float(conc[k]))
               for k in range(n_species)]
    side = int(g.integers(3, 6))
    lat = Lattice(side, species)
    centre = (int(g.integers(side)), int(g.integers(side)))
    lat.place(TileInstance(int(g.integers(1, n_species + 1)), int(g.integers(4)), centre))
    for r in range(side):
        for c in range(side):
            if (r, c) != centre and g.random() < 0.5:
                lat.place(TileInstance(int(g.integers(1, n_species + 1)), int(g.integers(4)), (r, c)))
    conf = {t.position: (list(species[t.species - 1].edge_labels), t.orientation) for t in lat.tiles()}
    pe = model.pair_energy
    bonds = {(a, b): float(pe[a, b]) for a in range(5) for b in range(5)}
    return model, lat, centre, conf, bonds
