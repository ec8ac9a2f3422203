"""Deterministic rasterisation and PNG / raw-dump encoding.

A raster stores one byte per pixel: 0 for bare substrate, ``k`` for a tile
of species ``k``. Orientation is not drawn.

The PNG writer is fixed on purpose (indexed colour, 8-bit, no interlace,
filter type 0 on every row, zlib level 9 with default window and strategy)
because the compressed size of the output is used as a measurement.
"""
from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import EncodingFailure
from .lattice import Lattice

PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"
RAW_MAGIC = b"TKMCRAST"
RAW_HEADER = struct.Struct("<8sII")

# background, then species 1 (yellow), 2 (blue), then extra species
DEFAULT_PALETTE = (
    (0, 0, 0),
    (240, 200, 30),
    (40, 90, 220),
    (200, 50, 50),
    (60, 170, 80),
    (160, 80, 200),
    (240, 130, 40),
    (90, 200, 210),
    (230, 230, 230),
)
SEPARATOR_RGB = (255, 255, 255)


@dataclass(frozen=True)
class Raster:
    width: int
    height: int
    pixels: bytes

    def __post_init__(self):
        if len(self.pixels) != self.width * self.height:
            raise ValueError("pixel buffer does not match raster size")

    def array(self) -> np.ndarray:
        return np.frombuffer(self.pixels, dtype=np.uint8).reshape(self.height, self.width)

    @classmethod
    def from_array(cls, arr) -> "Raster":
        a = np.ascontiguousarray(arr, dtype=np.uint8)
        return cls(a.shape[1], a.shape[0], a.tobytes())


def rasterize(lat: Lattice, scale: int = 1) -> Raster:
    if scale < 1:
        raise ValueError("scale must be >= 1")
    if lat.species.max(initial=0) > 255:
        raise ValueError("more than 255 species cannot be rasterised")
    g = lat.grid().astype(np.uint8)
    if scale > 1:
        g = np.repeat(np.repeat(g, scale, axis=0), scale, axis=1)
    return Raster.from_array(g)


def canonical_bytes(raster: Raster) -> bytes:
    return raster.pixels


def _chunk(tag: bytes, data: bytes) -> bytes:
    return struct.pack(">I", len(data)) + tag + data + struct.pack(">I", zlib.crc32(tag + data) & 0xFFFFFFFF)


def encode_png(raster: Raster, palette: Sequence[tuple[int, int, int]] = DEFAULT_PALETTE) -> bytes:
    """Indexed-colour PNG of ``raster``."""
    pal = list(palette)
    if not 1 <= len(pal) <= 256:
        raise EncodingFailure("palette must have 1..256 entries")
    top = max(raster.pixels, default=0)
    if top >= len(pal):
        raise EncodingFailure(f"pixel index {top} not covered by a {len(pal)}-colour palette")
    try:
        plte = bytes(int(v) for rgb in pal for v in rgb)
    except ValueError as exc:
        raise EncodingFailure(f"bad palette entry: {exc}") from None
    if len(plte) != 3 * len(pal):
        raise EncodingFailure("palette entries must be RGB triples")
    rows = raster.array()
    filtered = np.zeros((raster.height, raster.width + 1), dtype=np.uint8)
    filtered[:, 1:] = rows
    ihdr = struct.pack(">IIBBBBB", raster.width, raster.height, 8, 3, 0, 0, 0)
    idat = zlib.compress(filtered.tobytes(), 9)
    return PNG_SIGNATURE + _chunk(b"IHDR", ihdr) + _chunk(b"PLTE", plte) + _chunk(b"IDAT", idat) + _chunk(b"IEND", b"")


def decode_png(data: bytes) -> tuple[Raster, list[tuple[int, int, int]]]:
    """Decode PNGs written by :func:`encode_png` (indexed, 8-bit, filter 0)."""
    if not data.startswith(PNG_SIGNATURE):
        raise EncodingFailure("not a PNG stream")
    pos = len(PNG_SIGNATURE)
    width = height = None
    palette: list[tuple[int, int, int]] = []
    idat = bytearray()
    while pos < len(data):
        (length,) = struct.unpack(">I", data[pos:pos + 4])
        tag = data[pos + 4:pos + 8]
        body = data[pos + 8:pos + 8 + length]
        pos += 12 + length
        if tag == b"IHDR":
            width, height, depth, ctype, _, _, interlace = struct.unpack(">IIBBBBB", body)
            if (depth, ctype, interlace) != (8, 3, 0):
                raise EncodingFailure("only 8-bit indexed non-interlaced PNGs are supported")
        elif tag == b"PLTE":
            palette = [tuple(body[i:i + 3]) for i in range(0, len(body), 3)]
        elif tag == b"IDAT":
            idat += body
        elif tag == b"IEND":
            break
    if width is None:
        raise EncodingFailure("missing IHDR")
    raw = np.frombuffer(zlib.decompress(bytes(idat)), dtype=np.uint8).reshape(height, width + 1)
    if raw[:, 0].any():
        raise EncodingFailure("unsupported row filter")
    return Raster.from_array(raw[:, 1:]), palette


def write_raw(raster: Raster, path) -> None:
    with open(path, "wb") as fh:
        fh.write(RAW_HEADER.pack(RAW_MAGIC, raster.width, raster.height))
        fh.write(raster.pixels)


def read_raw(path) -> Raster:
    with open(path, "rb") as fh:
        head = fh.read(RAW_HEADER.size)
        if len(head) != RAW_HEADER.size:
            raise EncodingFailure(f"{path}: truncated raw raster header")
        magic, w, h = RAW_HEADER.unpack(head)
        if magic != RAW_MAGIC:
            raise EncodingFailure(f"{path}: bad raw raster magic {magic!r}")
        pixels = fh.read()
    if len(pixels) != w * h:
        raise EncodingFailure(f"{path}: expected {w * h} pixel bytes, found {len(pixels)}")
    return Raster(w, h, pixels)


def contact_sheet(rasters: Sequence[Raster], columns: int = 8, gap: int = 2,
                  palette: Sequence[tuple[int, int, int]] = DEFAULT_PALETTE) -> bytes:
    """Gallery PNG of ``rasters`` laid out left-to-right, top-to-bottom."""
    if not rasters:
        raise ValueError("no rasters to lay out")
    pal = list(palette)
    sep = len(pal)
    pal.append(SEPARATOR_RGB)
    cw = max(r.width for r in rasters)
    ch = max(r.height for r in rasters)
    cols = min(columns, len(rasters))
    nrows = -(-len(rasters) // cols)
    sheet = np.full((nrows * (ch + gap) + gap, cols * (cw + gap) + gap), sep, dtype=np.uint8)
    for k, r in enumerate(rasters):
        y = gap + (k // cols) * (ch + gap)
        x = gap + (k % cols) * (cw + gap)
        sheet[y:y + r.height, x:x + r.width] = r.array()
    return encode_png(Raster.from_array(sheet), pal)
