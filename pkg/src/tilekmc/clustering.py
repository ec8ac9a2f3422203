"""Agglomerative hierarchical clustering over distance matrices.

Clusters are tracked by their smallest leaf id. When several pairs share
the smallest linkage distance, the pair with the lexicographically smallest
``(smallest leaf of one cluster, smallest leaf of the other)`` merges first.
Merge ids follow the usual convention: leaves are ``0..n-1`` and the
cluster created by merge ``t`` gets id ``n + t``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .complexity import ncd_matrix
from .errors import BadK, DegenerateMatrix
from .rng import RngStream

LINKAGES = ("average", "single", "complete")


@dataclass(frozen=True)
class DistanceMatrix:
    entries: np.ndarray
    metric_tag: str  # "euclidean-ratio" | "ncd"

    def __post_init__(self):
        d = np.asarray(self.entries, dtype=np.float64)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise DegenerateMatrix("distance matrix must be square")
        if not np.allclose(d, d.T, atol=1e-9, rtol=0):
            raise DegenerateMatrix("distance matrix must be symmetric")
        object.__setattr__(self, "entries", d)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def euclidean(cls, features, tag: str = "euclidean-ratio") -> "DistanceMatrix":
        x = np.asarray(features, dtype=np.float64)
        if x.ndim == 1:
            x = x[:, None]
        diff = x[:, None, :] - x[None, :, :]
        return cls(np.sqrt((diff ** 2).sum(axis=2)), tag)

    @classmethod
    def from_ncd(cls, raw: np.ndarray) -> "DistanceMatrix":
        """Symmetrise an NCD matrix by averaging; the measured self-distances stay on the diagonal."""
        raw = np.asarray(raw, dtype=np.float64)
        sym = (raw + raw.T) / 2.0
        return cls(sym, "ncd")


@dataclass
class Dendrogram:
    merges: list[tuple[int, int, float]]
    sizes: list[int]
    leaf_ids: list[str]

    @property
    def n_leaves(self) -> int:
        return len(self.leaf_ids)

    @property
    def heights(self) -> list[float]:
        return [h for _, _, h in self.merges]

    def to_newick(self) -> str:
        n = self.n_leaves
        text = {i: _newick_name(name) for i, name in enumerate(self.leaf_ids)}
        height = {i: 0.0 for i in range(n)}
        for t, (a, b, h) in enumerate(self.merges):
            text[n + t] = f"({text.pop(a)}:{h - height[a]:.6g},{text.pop(b)}:{h - height[b]:.6g})"
            height[n + t] = h
        return "".join(text.values()) + ";"


def _newick_name(name: str) -> str:
    if any(ch in name for ch in " ():,;[]'"):
        return "'" + name.replace("'", "''") + "'"
    return name


def hcluster(matrix: DistanceMatrix | np.ndarray, linkage: str = "average",
             leaf_ids: Sequence[str] | None = None) -> Dendrogram:
    """Agglomerative clustering with Lance-Williams updates."""
    if linkage not in LINKAGES:
        raise ValueError(f"unknown linkage {linkage!r}")
    d = matrix.entries if isinstance(matrix, DistanceMatrix) else np.asarray(matrix, dtype=float)
    n = d.shape[0]
    if n < 2:
        raise DegenerateMatrix("need at least two items to cluster")
    leaf_ids = [str(i) for i in range(n)] if leaf_ids is None else [str(x) for x in leaf_ids]
    D = d.astype(np.float64, copy=True)
    np.fill_diagonal(D, np.inf)
    size = np.ones(n, dtype=np.int64)
    cid = np.arange(n)
    rm_val = D.min(axis=1)
    rm_idx = D.argmin(axis=1)
    merges: list[tuple[int, int, float]] = []
    sizes: list[int] = []
    for t in range(n - 1):
        a = int(np.argmin(rm_val))
        b = int(rm_idx[a])
        h = float(D[a, b])
        merges.append((int(cid[a]), int(cid[b]), h))
        sizes.append(int(size[a] + size[b]))
        if linkage == "average":
            new = (size[a] * D[a] + size[b] * D[b]) / (size[a] + size[b])
        elif linkage == "single":
            new = np.minimum(D[a], D[b])
        else:
            new = np.maximum(D[a], D[b])
        new[a] = new[b] = np.inf
        D[a, :] = new
        D[:, a] = new
        D[b, :] = np.inf
        D[:, b] = np.inf
        size[a] += size[b]
        cid[a] = n + t
        rm_val[b] = np.inf
        stale = np.flatnonzero((rm_idx == a) | (rm_idx == b))
        stale = stale[stale != b]
        better = (new < rm_val) | ((new == rm_val) & (a < rm_idx))
        better[b] = False
        rm_val[better] = new[better]
        rm_idx[better] = a
        recompute = np.union1d(stale, [a])
        rm_val[recompute] = D[recompute].min(axis=1)
        rm_idx[recompute] = D[recompute].argmin(axis=1)
    return Dendrogram(merges, sizes, leaf_ids)


def cut(dendrogram: Dendrogram, k: int) -> list[int]:
    """Cluster label per leaf after undoing the last ``k - 1`` merges.

    Labels are numbered 0.. in order of each cluster's smallest leaf.
    """
    n = dendrogram.n_leaves
    if not 1 <= k <= n:
        raise BadK(f"k must lie in 1..{n}, got {k}")
    parent = list(range(2 * n - 1))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for t, (a, b, _) in enumerate(dendrogram.merges[: n - k]):
        parent[find(a)] = n + t
        parent[find(b)] = n + t
    labels: dict[int, int] = {}
    out = []
    for leaf in range(n):
        root = find(leaf)
        out.append(labels.setdefault(root, len(labels)))
    return out


def groups(assignments: Sequence[int]) -> list[list[int]]:
    out: dict[int, list[int]] = {}
    for i, g in enumerate(assignments):
        out.setdefault(g, []).append(i)
    return [out[g] for g in sorted(out)]


def choose_representatives(assignments: Sequence[int], seed: int) -> list[int]:
    """One uniformly drawn member per cluster, clusters taken in label order."""
    rng = RngStream(seed)
    return [members[rng.randbelow(len(members))] for members in groups(assignments)]


@dataclass
class NcdGrouping:
    assignments: list[int]
    matrix: DistanceMatrix
    dendrogram: Dendrogram
    mean_ratio: list[float]


def ncd_group(objects: Sequence[bytes], ratios: Sequence[float], k: int = 2,
              linkage: str = "average", leaf_ids: Sequence[str] | None = None,
              workers: int = 4) -> NcdGrouping:
    """Cluster objects on NCD and relabel groups by ascending mean compression ratio."""
    if len(objects) < 2:
        raise DegenerateMatrix("need at least two records")
    if len(objects) != len(ratios):
        raise ValueError("objects and ratios differ in length")
    dm = DistanceMatrix.from_ncd(ncd_matrix(objects, workers=workers))
    dend = hcluster(dm, linkage, leaf_ids)
    raw = cut(dend, k)
    members = groups(raw)
    means = [float(np.mean([ratios[i] for i in m])) for m in members]
    order = sorted(range(len(members)), key=lambda g: (means[g], g))
    relabel = {old: new for new, old in enumerate(order)}
    return NcdGrouping([relabel[g] for g in raw], dm, dend, [means[g] for g in order])
