"""Kinetic Monte Carlo simulation of programmable square tiles on a lattice,
with compression-based complexity analysis of the resulting patterns."""

from .clustering import DistanceMatrix, Dendrogram, cut, hcluster, ncd_group
from .complexity import (CompressionRecord, ParamPoint, compress_len, compression_ratio, detect_transition,
                         ncd, ncd_matrix, param_distance, param_output_correlation, sort_by_ratio)
from .energetics import EnergyModel, activation_motion, activation_rotation, rate, functional_group_model, two_label_model
from .engine import SimConfig, Simulation, run, run_reference
from .lattice import Lattice, SpeciesDescriptor, aggregates, hetero_bond_fraction
from .render import Raster, encode_png, rasterize
from .rng import RngStream
from .sweep import RunRecord, SweepConfig, execute, expand, orthogonality_report

__version__ = "0.1.0"
