"""Parallel-beam system matrix from exact ray/pixel intersection lengths.

Rows are produced by a Siddon-style parametric traversal. Measurement
``m`` (1-based) is view ``(m - 1) // bins`` and bin ``(m - 1) % bins``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .core import as_image

# Rays are treated as axis-parallel when the direction component is below this.
_AXIS_EPS = 1e-14
_DROP_REL = 1e-12


@dataclass(frozen=True)
class SparseRow:
    """One row of the system matrix.

    ``indices`` are 1-based flat pixel indices (see :func:`core.linearize`),
    ``weights`` the matching intersection lengths.
    """

    indices: np.ndarray
    weights: np.ndarray

    def __len__(self):
        return len(self.indices)

    def to_dense(self, n_pixels):
        out = np.zeros(n_pixels)
        out[self.indices - 1] = self.weights
        return out


def trace_ray(rows, cols, pixel_size, theta, s):
    """Intersect the line ``x cos(theta) + y sin(theta) = s`` with the grid.

    Returns ``(flat0, lengths)`` with 0-based flat indices, sorted.
    """
    c, sn = math.cos(theta), math.sin(theta)
    # point on the line closest to the origin, and unit direction
    px, py = s * c, s * sn
    dx, dy = -sn, c
    x0, x1 = -0.5 * cols * pixel_size, 0.5 * cols * pixel_size
    y0, y1 = -0.5 * rows * pixel_size, 0.5 * rows * pixel_size

    tmin, tmax = -math.inf, math.inf
    for p, d, lo, hi in ((px, dx, x0, x1), (py, dy, y0, y1)):
        if abs(d) < _AXIS_EPS:
            if p < lo or p > hi:
                return np.empty(0, np.int64), np.empty(0)
        else:
            ta, tb = (lo - p) / d, (hi - p) / d
            tmin = max(tmin, min(ta, tb))
            tmax = min(tmax, max(ta, tb))
    if not tmax - tmin > 0:
        return np.empty(0, np.int64), np.empty(0)

    ts = [np.array([tmin, tmax])]
    if abs(dx) >= _AXIS_EPS:
        ts.append((x0 + pixel_size * np.arange(cols + 1) - px) / dx)
    if abs(dy) >= _AXIS_EPS:
        ts.append((y0 + pixel_size * np.arange(rows + 1) - py) / dy)
    t = np.concatenate(ts)
    t = np.unique(t[(t >= tmin) & (t <= tmax)])

    seg = np.diff(t)
    mid = 0.5 * (t[:-1] + t[1:])
    col = np.floor((px + mid * dx - x0) / pixel_size).astype(np.int64)
    row = np.floor((y1 - (py + mid * dy)) / pixel_size).astype(np.int64)
    np.clip(col, 0, cols - 1, out=col)
    np.clip(row, 0, rows - 1, out=row)
    flat = row * cols + col

    keep = seg >= _DROP_REL * pixel_size
    flat, seg = flat[keep], seg[keep]
    order = np.argsort(flat, kind="stable")
    flat, seg = flat[order], seg[order]
    # rays running exactly along a grid line can revisit a clipped pixel
    uniq, start = np.unique(flat, return_index=True)
    if len(uniq) != len(flat):
        seg = np.add.reduceat(seg, start)
        flat = uniq
    return flat, seg


def measurement_ray(geom, m):
    """``(theta, s)`` of 1-based measurement ``m``."""
    if not 1 <= m <= geom.n_measurements:
        raise IndexError(f"measurement {m} outside 1..{geom.n_measurements}")
    v, d = divmod(m - 1, geom.bins)
    return geom.angles[v], float(geom.bin_centers()[d])


def ray_row(geom, m):
    theta, s = measurement_ray(geom, m)
    flat, w = trace_ray(geom.rows, geom.cols, geom.pixel_size, theta, s)
    return SparseRow(flat + 1, w)


def row_norm_sq(geom, m):
    w = ray_row(geom, m).weights
    return float(np.dot(w, w))


@lru_cache(maxsize=8)
def system_matrix(geom):
    """All rows of ``R`` as a CSR matrix of shape ``(M, N)``.

    Memory is ``O(nnz)``, roughly ``M * max(rows, cols)`` entries. Cached per
    geometry since the solvers sweep the same rows hundreds of times.
    """
    centers = geom.bin_centers()
    indptr = [0]
    indices, data = [], []
    for theta in geom.angles:
        for s in centers:
            flat, w = trace_ray(geom.rows, geom.cols, geom.pixel_size, theta, float(s))
            indices.append(flat)
            data.append(w)
            indptr.append(indptr[-1] + len(flat))
    R = sp.csr_matrix(
        (np.concatenate(data), np.concatenate(indices), np.asarray(indptr, dtype=np.int64)),
        shape=(geom.n_measurements, geom.n_pixels),
    )
    R.has_sorted_indices = True
    return R


def row_norms_sq(geom):
    R = system_matrix(geom)
    return np.asarray(R.multiply(R).sum(axis=1)).ravel()


def forward_project(geom, f):
    """Sinogram ``p = R f`` with shape ``(views, bins)``."""
    f = as_image(f)
    if f.shape != geom.image_shape:
        raise ValueError(f"image shape {f.shape} does not match geometry {geom.image_shape}")
    return (system_matrix(geom) @ f.ravel()).reshape(geom.sino_shape)


def back_project(geom, q):
    """Adjoint ``R^T q`` as an image."""
    q = np.asarray(q, dtype=np.float64)
    if q.shape != geom.sino_shape:
        raise ValueError(f"sinogram shape {q.shape} does not match geometry {geom.sino_shape}")
    return (system_matrix(geom).T @ q.ravel()).reshape(geom.image_shape)
