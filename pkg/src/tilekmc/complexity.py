"""Compression-based complexity measures.

Compressed length ``C`` is the size in bits of a raw DEFLATE stream (zlib,
level 9, memLevel 9, 32 KiB window, default strategy, no preset
dictionary). The compression ratio divides compressed bytes by input bytes.
NCD follows the usual definition with byte concatenation.

DEFLATE cannot reference data more than 32 KiB back, so NCD of two inputs
whose first one is longer than 32 KiB loses the cross-object matches it is
meant to measure. NCD therefore defaults to the ``packed`` representation
(minimal bit depth, 2 bits/pixel for two species), which keeps a 256x256
raster at 16 KiB and, on small rasters, also keeps ``ncd(a, b)`` and
``ncd(b, a)`` much closer than one byte per pixel does.
"""
from __future__ import annotations

import math
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import stats

from .errors import EmptyInput, TooFewPoints, ZeroLength
from .render import Raster, encode_png

PARAM_NAMES = ("E_s", "E_11", "E_22", "E_12")


def compress_len(data: bytes) -> int:
    """Length in bits of the maximum-effort raw DEFLATE stream of ``data``."""
    if not data:
        raise EmptyInput("cannot measure an empty input")
    c = zlib.compressobj(9, zlib.DEFLATED, -15, 9, zlib.Z_DEFAULT_STRATEGY)
    return 8 * (len(c.compress(bytes(data))) + len(c.flush()))


def compression_ratio(raw_len: int, compressed_bits: int) -> float:
    if raw_len <= 0:
        raise ZeroLength("raw length must be positive")
    return compressed_bits / 8.0 / raw_len


@dataclass(frozen=True)
class CompressionRecord:
    run_id: str
    raw_len: int
    C_bits: int
    ratio: float

    @classmethod
    def measure(cls, run_id: str, data: bytes) -> "CompressionRecord":
        c = compress_len(data)
        return cls(run_id, len(data), c, compression_ratio(len(data), c))


# ---------------------------------------------------------------------------
# representations fed to the compressor


def packed_bytes(raster: Raster) -> bytes:
    """Pixels packed MSB-first at the smallest bit depth in {1, 2, 4, 8} holding every index."""
    a = raster.array()
    top = int(a.max(initial=0))
    depth = next(d for d in (1, 2, 4, 8) if top < (1 << d))
    if depth == 8:
        return raster.pixels
    per = 8 // depth
    w = raster.width
    padded = np.zeros((raster.height, -(-w // per) * per), dtype=np.uint8)
    padded[:, :w] = a
    groups = padded.reshape(raster.height, -1, per)
    shifts = np.arange(per - 1, -1, -1, dtype=np.uint8) * depth
    return (groups << shifts).sum(axis=2, dtype=np.uint16).astype(np.uint8).tobytes()


NCD_REPRESENTATION = "packed"

REPRESENTATIONS: dict[str, Callable[[Raster], bytes]] = {
    "raw": lambda r: r.pixels,
    "png": encode_png,
    "packed": packed_bytes,
}


def representation(raster: Raster, mode: str = NCD_REPRESENTATION) -> bytes:
    try:
        return REPRESENTATIONS[mode](raster)
    except KeyError:
        raise ValueError(f"unknown representation {mode!r}; choose from {sorted(REPRESENTATIONS)}") from None


# ---------------------------------------------------------------------------
# NCD


def ncd(o1: bytes, o2: bytes, c1: int | None = None, c2: int | None = None) -> float:
    """Normalized compression distance; ``c1``/``c2`` may pass cached lengths."""
    if not o1 or not o2:
        raise EmptyInput("NCD needs two non-empty inputs")
    c1 = compress_len(o1) if c1 is None else c1
    c2 = compress_len(o2) if c2 is None else c2
    c12 = compress_len(bytes(o1) + bytes(o2))
    return (c12 - min(c1, c2)) / max(c1, c2)


def ncd_matrix(objects: Sequence[bytes], workers: int = 4) -> np.ndarray:
    """Full (asymmetric) matrix ``M[i, j] = ncd(objects[i], objects[j])``, diagonal included."""
    n = len(objects)
    if any(not o for o in objects):
        raise EmptyInput("NCD needs non-empty inputs")
    single = [compress_len(o) for o in objects]
    out = np.zeros((n, n))

    def row(i):
        return [ncd(objects[i], objects[j], single[i], single[j]) for j in range(n)]

    if workers > 1 and n > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for i, vals in enumerate(pool.map(row, range(n))):
                out[i] = vals
    else:
        for i in range(n):
            out[i] = row(i)
    return out


# ---------------------------------------------------------------------------
# parameter space


@dataclass(frozen=True)
class ParamPoint:
    E_s: float
    E_11: float
    E_22: float
    E_12: float

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.E_s, self.E_11, self.E_22, self.E_12)

    def as_dict(self) -> dict[str, float]:
        return dict(zip(PARAM_NAMES, self.as_tuple()))

    @classmethod
    def from_dict(cls, d) -> "ParamPoint":
        return cls(*(float(d[k]) for k in PARAM_NAMES))


ORIGIN = ParamPoint(0.0, 0.0, 0.0, 0.0)


def param_distance(p: ParamPoint) -> float:
    """Euclidean distance from the all-zero parameter point."""
    return math.sqrt(sum(v * v for v in p.as_tuple()))


def param_output_correlation(distances: Sequence[float], sizes: Sequence[float]) -> float:
    """Spearman rank correlation between parameter distance and compressed size."""
    if len(distances) != len(sizes):
        raise ValueError("distances and sizes differ in length")
    if len(distances) < 3:
        raise TooFewPoints("need at least 3 records")
    if len(set(distances)) == 1 or len(set(sizes)) == 1:
        return float("nan")
    rho = stats.spearmanr(distances, sizes)[0]
    return float(rho)


# ---------------------------------------------------------------------------
# ordering and change points


def sort_by_ratio(records: Iterable) -> list:
    """Ascending by ``ratio``, ties broken by ``run_id``."""
    return sorted(records, key=lambda r: (r.ratio, r.run_id))


@dataclass
class TransitionResult:
    boundary: int | None
    score: float
    segments: list[tuple[int, int, float, float]]  # (start, stop, min, max), stop exclusive
    method: str

    @property
    def found(self) -> bool:
        return self.boundary is not None


def _jump_boundary(x: np.ndarray) -> tuple[int, float]:
    d = np.diff(x) / (x.max() - x.min())
    k = int(np.argmax(d))
    return k + 1, float(d[k])


def _two_segment_boundary(x: np.ndarray) -> tuple[int, float]:
    """Break index of the best two-piece least-squares line fit (each piece >= 2 points)."""
    n = len(x)
    t = np.arange(n, dtype=float)
    total = np.sum((x - x.mean()) ** 2)
    best_k, best_sse = 2, math.inf
    for k in range(2, n - 1):
        sse = 0.0
        for sl in (slice(0, k), slice(k, n)):
            coef = np.polyfit(t[sl], x[sl], 1)
            sse += float(np.sum((np.polyval(coef, t[sl]) - x[sl]) ** 2))
        if sse < best_sse - 1e-15:
            best_k, best_sse = k, sse
    return best_k, 1.0 - best_sse / total


TRANSITION_METHODS = {"jump": _jump_boundary, "two_segment": _two_segment_boundary}


def detect_transition(values: Sequence[float], method: str = "jump") -> TransitionResult:
    """Split a sorted series into a low and a high regime.

    ``jump`` (default) puts the boundary after the largest first difference,
    normalised by the series range. ``two_segment`` picks the break of the
    best two-piece linear fit. A constant series has no transition.
    """
    x = np.asarray(values, dtype=float)
    if len(x) < 4:
        raise TooFewPoints("need at least 4 points")
    if method not in TRANSITION_METHODS:
        raise ValueError(f"unknown method {method!r}")
    if x.max() == x.min():
        return TransitionResult(None, 0.0, [(0, len(x), float(x[0]), float(x[0]))], method)
    b, score = TRANSITION_METHODS[method](x)
    segs = [(0, b, float(x[:b].min()), float(x[:b].max())),
            (b, len(x), float(x[b:].min()), float(x[b:].max()))]
    return TransitionResult(b, score, segs, method)
