"""Piecewise-constant ellipse phantoms.

Tables use the conventional ``[-1, 1]^2`` frame (x to the right, y up).
Pixel ``(i, j)`` samples the point ``(x_j, y_i)`` with the outermost pixel
centres on the frame edges, i.e. ``x = linspace(-1, 1, cols)`` and
``y = linspace(1, -1, rows)``. This is the sampling used by the common
``phantom(n)`` implementations; with it the 128x128 modified Shepp-Logan
phantom has exactly 1081 nonzero gradient magnitudes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Ellipse:
    x: float
    y: float
    a: float
    b: float
    rotation: float
    intensity: float

    def __post_init__(self):
        if self.a <= 0 or self.b <= 0:
            raise ValueError("ellipse semi-axes must be positive")

    def contains(self, x, y):
        c, s = math.cos(self.rotation), math.sin(self.rotation)
        dx, dy = x - self.x, y - self.y
        u = dx * c + dy * s
        v = -dx * s + dy * c
        return (u / self.a) ** 2 + (v / self.b) ** 2 <= 1.0


def _table(rows):
    return tuple(
        Ellipse(x, y, a, b, math.radians(deg), val) for val, a, b, x, y, deg in rows
    )


# (intensity, a, b, x, y, rotation in degrees); Toft's modified intensities.
MODIFIED_SHEPP_LOGAN = _table([
    (1.0, 0.69, 0.92, 0.0, 0.0, 0),
    (-0.8, 0.6624, 0.874, 0.0, -0.0184, 0),
    (-0.2, 0.11, 0.31, 0.22, 0.0, -18),
    (-0.2, 0.16, 0.41, -0.22, 0.0, 18),
    (0.1, 0.21, 0.25, 0.0, 0.35, 0),
    (0.1, 0.046, 0.046, 0.0, 0.1, 0),
    (0.1, 0.046, 0.046, 0.0, -0.1, 0),
    (0.1, 0.046, 0.023, -0.08, -0.605, 0),
    (0.1, 0.023, 0.023, 0.0, -0.605, 0),
    (0.1, 0.023, 0.046, 0.06, -0.605, 0),
])

# Ellipse-only stand-in for the FORBILD head: bone shell around ~1.05 brain
# with low-contrast inserts spanning roughly +-0.01.
FORBILD_HEAD = _table([
    (1.80, 0.72, 0.94, 0.0, 0.0, 0),
    (-0.75, 0.67, 0.89, 0.0, 0.0, 0),
    (-0.010, 0.06, 0.20, -0.20, 0.18, 15),
    (-0.010, 0.06, 0.20, 0.20, 0.18, -15),
    (0.010, 0.10, 0.10, 0.0, -0.22, 0),
    (0.005, 0.05, 0.05, -0.28, -0.45, 0),
    (-0.005, 0.05, 0.05, 0.28, -0.45, 0),
    (0.008, 0.06, 0.06, 0.0, 0.50, 0),
    (0.010, 0.08, 0.05, -0.30, 0.68, 0),
    (0.010, 0.08, 0.05, 0.30, 0.68, 0),
])


def sample_points(rows, cols):
    x = np.linspace(-1.0, 1.0, cols)
    y = np.linspace(1.0, -1.0, rows)
    return np.meshgrid(x, y)


def rasterize(ellipses, rows, cols):
    """Sum ellipse intensities at every pixel sample point."""
    rows, cols = int(rows), int(cols)
    if rows < 2 or cols < 2:
        raise ValueError(f"phantom size must be at least 2x2, got {rows}x{cols}")
    X, Y = sample_points(rows, cols)
    img = np.zeros((rows, cols))
    for e in ellipses:
        img[e.contains(X, Y)] += e.intensity
    # Intensity sums like 1 - 0.8 - 0.2 leave ~1e-17 residue; snap it so that
    # nominally equal regions are bitwise equal (and zero is +0.0).
    return np.round(img, 12) + 0.0


def shepp_logan(rows, cols=None):
    return rasterize(MODIFIED_SHEPP_LOGAN, rows, rows if cols is None else cols)


def forbild_head(rows, cols=None):
    return rasterize(FORBILD_HEAD, rows, rows if cols is None else cols)


PHANTOMS = {"shepp-logan": shepp_logan, "forbild": forbild_head}
