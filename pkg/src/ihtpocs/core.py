"""Shared types, pixel indexing and the on-disk formats.

Images and sinograms are plain 2-D ``float64`` numpy arrays: an image has
shape ``(rows, cols)`` and a sinogram ``(views, bins)``, both row-major.
"""
from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAGIC = b"RCF1"
_HEADER = struct.Struct("<4sII")


class FormatError(ValueError):
    """Raised when a matrix file cannot be decoded."""


class BadMagicError(FormatError):
    pass


class DimensionError(FormatError):
    pass


class TruncatedError(FormatError):
    pass


class TrailingDataError(FormatError):
    pass


class NonFiniteError(FormatError):
    pass


class DegenerateInputError(ValueError):
    """Raised for numerically meaningless inputs (zero denominators etc.)."""


def linearize(i, j, J, I=None):
    """Map 1-based pixel coordinates ``(i, j)`` to the 1-based flat index.

    ``n = (i - 1) * J + j``. Pass ``I`` to range-check the row as well.
    """
    if J < 1 or j < 1 or j > J or i < 1 or (I is not None and i > I):
        raise IndexError(f"pixel ({i}, {j}) outside a grid with {J} columns")
    return (i - 1) * J + j


def delinearize(n, J):
    if n < 1 or J < 1:
        raise IndexError(f"flat index {n} out of range")
    return (n - 1) // J + 1, (n - 1) % J + 1


def as_image(data, name="image"):
    """Validate and return ``data`` as a finite 2-D float64 array."""
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must be a non-empty 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf")
    return arr


@dataclass(frozen=True)
class Geometry:
    """Parallel-beam scan over an ``rows x cols`` pixel grid.

    The image occupies the square ``[-cols/2, cols/2] x [-rows/2, rows/2]``
    (times ``pixel_size``) centred on the rotation axis; row 1 is the top
    edge (largest y). Ray ``(theta, s)`` is the line
    ``x cos(theta) + y sin(theta) = s``.
    """

    rows: int
    cols: int
    angles: tuple
    bins: int
    pixel_size: float = 1.0
    bin_spacing: float = 1.0
    detector_offset: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "angles", tuple(float(a) for a in self.angles))
        if self.rows < 1 or self.cols < 1:
            raise ValueError("image dimensions must be positive")
        if self.bins < 1 or len(self.angles) < 1:
            raise ValueError("need at least one view and one detector bin")
        if self.pixel_size <= 0 or self.bin_spacing <= 0:
            raise ValueError("pixel size and bin spacing must be positive")
        a = np.asarray(self.angles)
        if np.any(a < 0) or np.any(a >= math.pi) or np.any(np.diff(a) <= 0):
            raise ValueError("angles must be strictly increasing within [0, pi)")
        # Small tolerance: ceil(sqrt(2) * n) is always enough but float noise is not.
        if self.bins * self.bin_spacing < self.diagonal * (1 - 1e-12):
            raise ValueError(
                f"detector ({self.bins} x {self.bin_spacing}) does not cover "
                f"the image diagonal {self.diagonal:.6g}"
            )

    @classmethod
    def parallel(cls, rows, cols, views, bins=None, pixel_size=1.0, angles=None):
        """Default scan: ``views`` angles evenly spaced over ``[0, pi)`` and
        the smallest centred detector covering the image diagonal."""
        if angles is None:
            angles = np.arange(views) * (math.pi / views)
        elif len(angles) != views:
            raise ValueError(f"{len(angles)} angles given for {views} views")
        if bins is None:
            bins = default_bins(rows, cols)
        return cls(int(rows), int(cols), tuple(angles), int(bins),
                   float(pixel_size), float(pixel_size), 0.0)

    @property
    def views(self):
        return len(self.angles)

    @property
    def n_pixels(self):
        return self.rows * self.cols

    @property
    def n_measurements(self):
        return self.views * self.bins

    @property
    def image_shape(self):
        return (self.rows, self.cols)

    @property
    def sino_shape(self):
        return (self.views, self.bins)

    @property
    def diagonal(self):
        return self.pixel_size * math.hypot(self.rows, self.cols)

    def bin_centers(self):
        k = np.arange(self.bins) - (self.bins - 1) / 2.0
        return k * self.bin_spacing + self.detector_offset


def default_bins(rows, cols):
    return math.ceil(math.sqrt(2.0) * max(rows, cols))


def write_matrix(path, data):
    """Write a 2-D array in the ``RCF1`` binary format."""
    arr = as_image(data, "matrix")
    rows, cols = arr.shape
    payload = arr.astype("<f8", copy=False).tobytes(order="C")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, rows, cols))
        fh.write(payload)


def read_matrix(path):
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise TruncatedError(f"{path}: {len(raw)} bytes is shorter than the header")
    magic, rows, cols = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise BadMagicError(f"{path}: bad magic {magic!r}")
    if rows == 0 or cols == 0:
        raise DimensionError(f"{path}: invalid dimensions {rows}x{cols}")
    need = _HEADER.size + 8 * rows * cols
    if len(raw) < need:
        raise TruncatedError(
            f"{path}: declared {rows}x{cols} needs {need} bytes, found {len(raw)}"
        )
    if len(raw) > need:
        raise TrailingDataError(f"{path}: {len(raw) - need} unexpected trailing bytes")
    arr = np.frombuffer(raw, dtype="<f8", count=rows * cols, offset=_HEADER.size)
    arr = arr.astype(np.float64).reshape(rows, cols)
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"{path}: payload contains NaN or Inf")
    return arr


@dataclass(frozen=True)
class TraceRecord:
    k: int
    epsilon: float
    d: float | None = None
    r: float | None = None
    psnr: float | None = None


@dataclass
class ConvergenceTrace:
    records: list = field(default_factory=list)

    def append(self, record):
        expected = len(self.records) + 1
        if record.k != expected:
            raise ValueError(f"trace expects iteration {expected}, got {record.k}")
        if not record.epsilon >= 0:
            raise ValueError("epsilon must be nonnegative")
        self.records.append(record)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, idx):
        return self.records[idx]

    def column(self, name):
        return np.array([getattr(rec, name) for rec in self.records], dtype=float)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iter", "epsilon", "d", "r", "psnr"])
            for rec in self.records:
                writer.writerow([rec.k, repr(rec.epsilon)] + [
                    "" if v is None else repr(float(v)) for v in (rec.d, rec.r, rec.psnr)
                ])

    @classmethod
    def from_csv(cls, path):
        trace = cls()
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            for row in reader:
                opt = {key: (float(row[key]) if row[key] else None) for key in ("d", "r", "psnr")}
                trace.append(TraceRecord(int(row["iter"]), float(row["epsilon"]), **opt))
        return trace
