"""Grid data model and the GRD1 binary raster format.

Embedding rasters are dense float32 grids stored band-sequentially (one
complete row-major plane per band). Label rasters are uint16 class-id
grids with 0xFFFF as the nodata sentinel. Both share one container
format, GRD1:

    bytes 0..3    magic "GRD1"
    bytes 4..19   little-endian u32: version (=1), width, height, bands
    byte  20      dtype code: 0 = float32, 1 = uint16
    bytes 21..23  zero padding
    bytes 24..    payload (planar float32 planes, or one uint16 plane)

The format is little-endian on every platform and byte-exact: writing
the same raster twice produces identical files.
"""

from __future__ import annotations

import csv
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError

MAGIC = b"GRD1"
GRID_VERSION = 1
DTYPE_F32 = 0
DTYPE_U16 = 1
NODATA = 0xFFFF

_HEADER = struct.Struct("<4sIIIIB3x")
HEADER_SIZE = _HEADER.size  # 24 bytes


class GridFormatError(DataError):
    """Malformed GRD1 file."""


@dataclass(frozen=True, eq=False)
class EmbeddingRaster:
    """H x W x D float grid, held as a read-only (bands, height, width) array."""

    values: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.values, dtype=np.float32))
        if v.ndim != 3:
            raise DataError(f"embedding raster needs a (bands, height, width) array, got shape {v.shape}")
        if not np.isfinite(v).all():
            raise DataError("embedding raster contains non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def bands(self) -> int:
        return self.values.shape[0]

    @property
    def height(self) -> int:
        return self.values.shape[1]

    @property
    def width(self) -> int:
        return self.values.shape[2]

    def pixel_matrix(self) -> np.ndarray:
        """All pixels as an (H*W, D) float64 matrix in row-major pixel order."""
        d = self.bands
        return self.values.reshape(d, -1).T.astype(np.float64)

    def __eq__(self, other) -> bool:
        if not isinstance(other, EmbeddingRaster):
            return NotImplemented
        return self.values.shape == other.values.shape and np.array_equal(self.values, other.values)


@dataclass(frozen=True, eq=False)
class LabelRaster:
    """H x W uint16 class-id grid; 0xFFFF marks nodata."""

    ids: np.ndarray

    def __post_init__(self):
        a = np.ascontiguousarray(np.asarray(self.ids, dtype=np.uint16))
        if a.ndim != 2:
            raise DataError(f"label raster needs a (height, width) array, got shape {a.shape}")
        a.setflags(write=False)
        object.__setattr__(self, "ids", a)

    @property
    def height(self) -> int:
        return self.ids.shape[0]

    @property
    def width(self) -> int:
        return self.ids.shape[1]

    def valid_mask(self) -> np.ndarray:
        return self.ids != NODATA

    def __eq__(self, other) -> bool:
        if not isinstance(other, LabelRaster):
            return NotImplemented
        return self.ids.shape == other.ids.shape and np.array_equal(self.ids, other.ids)


@dataclass(frozen=True)
class ClassEntry:
    class_id: int
    name: str
    pixel_count: int
    fraction: float


@dataclass
class ClassTable:
    """Ordered class inventory: unique ascending ids with counts and fractions."""

    entries: list[ClassEntry] = field(default_factory=list)

    def __post_init__(self):
        ids = [e.class_id for e in self.entries]
        if ids != sorted(set(ids)):
            raise DataError("class table ids must be unique and ascending")
        total = sum(e.pixel_count for e in self.entries)
        if total > 0:
            s = sum(e.fraction for e in self.entries)
            if abs(s - 1.0) > 1e-9:
                raise DataError(f"class fractions sum to {s!r}, expected 1 within 1e-9")

    def __len__(self) -> int:
        return len(self.entries)

    def ids(self) -> list[int]:
        return [e.class_id for e in self.entries]

    def names(self) -> dict[int, str]:
        return {e.class_id: e.name for e in self.entries}

    def total_pixels(self) -> int:
        return sum(e.pixel_count for e in self.entries)

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["class_id", "name", "pixel_count", "fraction"])
            for e in self.entries:
                w.writerow([e.class_id, e.name, e.pixel_count, repr(e.fraction)])

    @classmethod
    def read_csv(cls, path: str | Path) -> "ClassTable":
        with open(path, newline="") as f:
            rows = list(csv.reader(f))
        if not rows or rows[0] != ["class_id", "name", "pixel_count", "fraction"]:
            raise DataError(f"{path}: not a class table CSV")
        entries = [ClassEntry(int(r[0]), r[1], int(r[2]), float(r[3])) for r in rows[1:]]
        return cls(entries)


@dataclass
class GridManifest:
    """Bookkeeping for one co-registered embedding/label pair on disk."""

    embedding_path: str
    label_path: str
    class_table_path: str
    resolution_m: float = 500.0
    notes: str = ""

    def write_json(self, path: str | Path) -> None:
        doc = {
            "embedding_path": self.embedding_path,
            "label_path": self.label_path,
            "class_table_path": self.class_table_path,
            "resolution_m": self.resolution_m,
            "notes": self.notes,
        }
        Path(path).write_text(json.dumps(doc, indent=2) + "\n")

    @classmethod
    def read_json(cls, path: str | Path) -> "GridManifest":
        doc = json.loads(Path(path).read_text())
        return cls(**doc)

    def validate(self, base: str | Path) -> None:
        """Check the referenced files exist and parse."""
        base = Path(base)
        read_grid(base / self.embedding_path)
        read_grid(base / self.label_path)
        ClassTable.read_csv(base / self.class_table_path)


def write_grid(raster: EmbeddingRaster | LabelRaster, path: str | Path) -> None:
    """Serialize a raster to a GRD1 file. Byte-identical for identical input."""
    if isinstance(raster, EmbeddingRaster):
        code = DTYPE_F32
        bands = raster.bands
        payload = raster.values.astype("<f4", copy=False).tobytes()
    elif isinstance(raster, LabelRaster):
        code = DTYPE_U16
        bands = 1
        payload = raster.ids.astype("<u2", copy=False).tobytes()
    else:
        raise DataError(f"cannot write object of type {type(raster).__name__} as a grid")
    header = _HEADER.pack(MAGIC, GRID_VERSION, raster.width, raster.height, bands, code)
    Path(path).write_bytes(header + payload)


def read_grid(path: str | Path) -> EmbeddingRaster | LabelRaster:
    """Parse a GRD1 file; the dtype code selects the returned raster kind."""
    blob = Path(path).read_bytes()
    if len(blob) < 4 or blob[:4] != MAGIC:
        raise GridFormatError(f"{path}: not a GRD1 file")
    if len(blob) < HEADER_SIZE:
        raise GridFormatError(f"{path}: truncated header")
    _, version, width, height, bands, code = _HEADER.unpack_from(blob)
    if version != GRID_VERSION:
        raise GridFormatError(f"{path}: unsupported GRD1 version {version}")
    payload = blob[HEADER_SIZE:]
    if code == DTYPE_F32:
        expected = 4 * width * height * bands
        if len(payload) < expected:
            raise GridFormatError(f"{path}: truncated payload ({len(payload)} < {expected} bytes)")
        if len(payload) > expected:
            raise GridFormatError(f"{path}: trailing bytes after payload")
        values = np.frombuffer(payload, dtype="<f4").reshape(bands, height, width)
        return EmbeddingRaster(values)
    if code == DTYPE_U16:
        if bands != 1:
            raise GridFormatError(f"{path}: label rasters must be single band, got {bands}")
        expected = 2 * width * height
        if len(payload) < expected:
            raise GridFormatError(f"{path}: truncated payload ({len(payload)} < {expected} bytes)")
        if len(payload) > expected:
            raise GridFormatError(f"{path}: trailing bytes after payload")
        ids = np.frombuffer(payload, dtype="<u2").reshape(height, width)
        return LabelRaster(ids)
    raise GridFormatError(f"{path}: unsupported dtype code {code}")


def validate_pair(emb: EmbeddingRaster, labels: LabelRaster) -> None:
    """Require the embedding and label grids to be co-registered (same W x H)."""
    if emb.width != labels.width or emb.height != labels.height:
        raise DataError(
            f"dimension mismatch: embeddings {emb.width}x{emb.height} vs labels {labels.width}x{labels.height}"
        )
