"""Estimate the gradient sparsity ``S`` from projection data alone.

The residual ``sigma(S) = ||p - R f_S||^2`` of an ``S``-constrained IHT-POCS
reconstruction stays small while ``S`` is at least the true sparsity and
jumps once ``S`` falls below it; above it sigma only drifts gently. A coarse
scan (powers of two by default) locates the jump, bisection narrows it, and
the upper end of the final bracket is returned so the estimate errs large.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .solvers import SolverConfig, reconstruct, residual_sq

DEFAULT_PROBE_ITERS = 800
DEFAULT_KNEE_FACTOR = 3.0
DEFAULT_REL_WIDTH = 0.05


class EstimationFailedError(RuntimeError):
    def __init__(self, message, curve):
        super().__init__(message)
        self.curve = curve


@dataclass(frozen=True)
class CurvePoint:
    S: int
    sigma: float
    iters: int


@dataclass
class ResidualCurve:
    points: list = field(default_factory=list)

    def add(self, point):
        self.points.append(point)
        self.points.sort(key=lambda pt: pt.S)
        s = [pt.S for pt in self.points]
        if len(set(s)) != len(s):
            raise ValueError(f"duplicate sparsity {point.S} in residual curve")

    def sigma(self, S):
        for pt in self.points:
            if pt.S == S:
                return pt.sigma
        raise KeyError(S)

    def __iter__(self):
        return iter(self.points)

    def __len__(self):
        return len(self.points)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["S", "sigma", "iters"])
            for pt in self.points:
                writer.writerow([pt.S, repr(pt.sigma), pt.iters])


def pow2_grid(n_pixels):
    """``1, 2, 4, ...`` up to and including ``n_pixels``."""
    grid = [2 ** k for k in range(int(math.log2(n_pixels)) + 1)]
    if grid[-1] != n_pixels:
        grid.append(n_pixels)
    return grid


def residual_at(geom, p, S, probe_iters=DEFAULT_PROBE_ITERS):
    if not 1 <= S <= geom.n_pixels:
        raise ValueError(f"sparsity {S} outside 1..{geom.n_pixels}")
    cfg = SolverConfig(method="iht-pocs", n_iter=probe_iters, sparsity=int(S))
    result = reconstruct(geom, p, cfg)
    return residual_sq(geom, p, result.image)


def find_knee(curve, knee_factor=DEFAULT_KNEE_FACTOR):
    """Bracket ``(S_low, S_high)`` of the sudden residual jump.

    The smallest adjacent pair with ``sigma(S_low) > knee_factor * sigma(S_high)``
    whose upper end already sits on the low-residual plateau, i.e. within
    ``knee_factor`` of the smallest residual at any ``S >= S_high``. Without the
    plateau condition a point just below the true sparsity (still partially
    fitting the data) would be taken as the upper end.
    """
    pts = curve.points
    sig = [pt.sigma for pt in pts]
    for i in range(len(pts) - 1):
        floor = min(sig[i + 1:])
        if sig[i] > knee_factor * sig[i + 1] and sig[i + 1] <= knee_factor * floor:
            return pts[i].S, pts[i + 1].S
    raise EstimationFailedError(
        f"no adjacent residual ratio above {knee_factor}; cannot locate the knee", curve
    )


def estimate_sparsity(geom, p, probe_iters=DEFAULT_PROBE_ITERS, grid=None,
                      knee_factor=DEFAULT_KNEE_FACTOR, rel_width=DEFAULT_REL_WIDTH,
                      jobs=1):
    """Return ``(S_est, curve)``.

    ``curve`` holds every probed point, coarse grid and bisection alike. A
    bisection midpoint counts as above the true sparsity when its residual is
    at most the geometric mean of the bracket ends' residuals.
    """
    n = geom.n_pixels
    grid = sorted({int(s) for s in (pow2_grid(n) if grid is None else grid)})
    if not grid:
        raise ValueError("sparsity grid is empty")
    if grid[0] < 1 or grid[-1] > n:
        raise ValueError(f"grid values must lie in 1..{n}")

    curve = ResidualCurve()

    def probe(S):
        return CurvePoint(S, residual_at(geom, p, S, probe_iters), probe_iters)

    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            points = list(pool.map(probe, grid))
    else:
        points = [probe(S) for S in grid]
    for pt in points:
        curve.add(pt)

    lo, hi = find_knee(curve, knee_factor)
    s_lo, s_hi = curve.sigma(lo), curve.sigma(hi)
    while hi - lo > rel_width * hi and hi - lo > 1:
        mid = (lo + hi) // 2
        pt = probe(mid)
        curve.add(pt)
        if pt.sigma <= math.sqrt(s_lo * s_hi):
            hi, s_hi = mid, pt.sigma
        else:
            lo, s_lo = mid, pt.sigma
    return hi, curve
