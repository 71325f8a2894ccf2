"""ART and the regularized reconstructions built on top of it.

Every method runs the same outer loop starting from a zero image:

1. one ART sweep over all rays in measurement order,
2. clip negative pixels to zero,
3. a method-specific regularization step,
4. record ``||f_k - f_{k-1}||`` and stop once it drops below ``eps0``.

``iht-pocs`` hard-thresholds the gradient magnitude at its ``S``-th largest
value, ``ist-tv`` applies the soft (shrinkage) variant of the same filter,
``art-tv`` runs a few normalized steepest-descent steps on smoothed TV and
``art`` does nothing.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from numba import njit

from . import dgt, metrics
from .core import ConvergenceTrace, TraceRecord, as_image
from .projector import row_norms_sq, system_matrix

log = logging.getLogger(__name__)

METHODS = ("art", "iht-pocs", "art-tv", "ist-tv")


@njit(cache=True, nogil=True)
def _kaczmarz(indptr, indices, data, norms, p, x, lam):
    for m in range(p.shape[0]):
        nrm = norms[m]
        if nrm == 0.0:
            continue
        lo, hi = indptr[m], indptr[m + 1]
        acc = 0.0
        for k in range(lo, hi):
            acc += data[k] * x[indices[k]]
        c = lam * (p[m] - acc) / nrm
        for k in range(lo, hi):
            x[indices[k]] += c * data[k]


def _csr_arrays(R, norms=None):
    R = sp.csr_matrix(R)
    R.sort_indices()
    if norms is None:
        norms = np.asarray(R.multiply(R).sum(axis=1)).ravel()
    return (R.indptr.astype(np.int64), R.indices.astype(np.int64),
            R.data.astype(np.float64), np.ascontiguousarray(norms, dtype=np.float64))


def kaczmarz_sweep(R, p, x, lam, norms=None):
    """One sequential pass of relaxed row projections over a sparse matrix.

    Rows with zero norm are skipped. Returns a new vector.
    """
    p = np.ascontiguousarray(p, dtype=np.float64).ravel()
    x = np.array(x, dtype=np.float64).ravel()
    if R.shape != (p.size, x.size):
        raise ValueError(f"matrix {R.shape} incompatible with p[{p.size}], x[{x.size}]")
    _kaczmarz(*_csr_arrays(R, norms), p, x, float(lam))
    return x


def art_sweep(geom, p, f, lambda_k):
    """Apply the ART row update for every measurement ``m = 1..M`` in order."""
    f = as_image(f)
    p = np.asarray(p, dtype=np.float64)
    if f.shape != geom.image_shape or p.shape != geom.sino_shape:
        raise ValueError(
            f"image {f.shape} / sinogram {p.shape} do not match geometry "
            f"{geom.image_shape} / {geom.sino_shape}"
        )
    if not 0 < lambda_k < 2:
        raise ValueError(f"relaxation must lie in (0, 2), got {lambda_k}")
    x = kaczmarz_sweep(system_matrix(geom), p, f, lambda_k, row_norms_sq(geom))
    return x.reshape(geom.image_shape)


def positivity_clamp(f):
    return np.maximum(np.asarray(f, dtype=np.float64), 0.0)


def tv_gradient(f, delta=1e-8):
    """Gradient of ``sum sqrt(dx^2 + dy^2 + delta^2)`` (forward differences,
    replicate boundary)."""
    dx = np.zeros_like(f)
    dy = np.zeros_like(f)
    dx[:-1, :] = f[:-1, :] - f[1:, :]
    dy[:, :-1] = f[:, :-1] - f[:, 1:]
    norm = np.sqrt(dx * dx + dy * dy + delta * delta)
    ux, uy = dx / norm, dy / norm
    g = ux + uy
    g[1:, :] -= ux[:-1, :]
    g[:, 1:] -= uy[:, :-1]
    return g


@dataclass
class SolverConfig:
    method: str = "iht-pocs"
    n_iter: int = 800
    lam: float = 1.0
    lambda_decay: float | None = None
    sparsity: int | None = None
    eps0: float = 0.0
    tv_steps: int = 20
    tv_beta: float = 0.2
    tv_delta: float = 1e-8
    snapshots: tuple = ()

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {METHODS}")
        if self.n_iter < 1:
            raise ValueError("n_iter must be at least 1")
        if not 0 < self.lam < 2:
            raise ValueError("lambda must lie in (0, 2)")
        if self.lambda_decay is not None and not 0 < self.lambda_decay <= 1:
            raise ValueError("lambda decay must lie in (0, 1]")
        if self.eps0 < 0:
            raise ValueError("eps0 must be nonnegative")
        if self.method in ("iht-pocs", "ist-tv"):
            if self.sparsity is None or self.sparsity < 1:
                raise ValueError(f"method {self.method} needs a sparsity S >= 1")
        if self.tv_steps < 0 or self.tv_beta < 0 or self.tv_delta <= 0:
            raise ValueError("invalid TV parameters")
        self.snapshots = tuple(sorted({int(k) for k in self.snapshots}))

    def relaxation(self, k):
        if self.lambda_decay is None:
            return self.lam
        return self.lam * self.lambda_decay ** k


@dataclass
class ReconResult:
    image: np.ndarray
    iterations: int
    converged: bool
    trace: ConvergenceTrace
    snapshots: dict = field(default_factory=dict)


def _regularize(f, f_prev, cfg):
    if cfg.method == "art":
        return f
    if cfg.method in ("iht-pocs", "ist-tv"):
        g = dgt.gradient_magnitude(f)
        w = dgt.select_threshold(g, min(cfg.sparsity, f.size)).w
        pinv = dgt.hard_threshold_pinv if cfg.method == "iht-pocs" else dgt.soft_threshold_pinv
        return pinv(f, w, g)
    # art-tv: step length tied to how far the data step moved the image
    dp = np.linalg.norm(f - f_prev)
    for _ in range(cfg.tv_steps):
        g = tv_gradient(f, cfg.tv_delta)
        gn = np.linalg.norm(g)
        if gn == 0 or dp == 0:
            break
        f = f - cfg.tv_beta * dp * g / gn
    return f


def reconstruct(geom, p, cfg, reference=None, callback=None):
    """Run ``cfg.method`` on sinogram ``p`` from ``f = 0``.

    If ``reference`` is given, d, r and PSNR are recorded every iteration.
    ``callback(k, image, record)`` is invoked after each iteration.
    """
    p = np.asarray(p, dtype=np.float64)
    if p.shape != geom.sino_shape:
        raise ValueError(f"sinogram {p.shape} does not match geometry {geom.sino_shape}")
    if not np.all(np.isfinite(p)):
        raise ValueError("sinogram contains NaN or Inf")
    if reference is not None:
        reference = as_image(reference, "reference")
        if reference.shape != geom.image_shape:
            raise ValueError("reference image does not match geometry")

    arrays = _csr_arrays(system_matrix(geom), row_norms_sq(geom))
    p_flat = np.ascontiguousarray(p.ravel())
    f = np.zeros(geom.image_shape)
    trace = ConvergenceTrace()
    snapshots = {}
    converged = False
    k = 0
    for k in range(1, cfg.n_iter + 1):
        f_prev = f
        x = f_prev.ravel().copy()
        _kaczmarz(*arrays, p_flat, x, float(cfg.relaxation(k)))
        f = positivity_clamp(x.reshape(geom.image_shape))
        f = _regularize(f, f_prev, cfg)

        eps = float(np.linalg.norm(f - f_prev))
        if reference is not None:
            rep = metrics.evaluate(reference, f)
            rec = TraceRecord(k, eps, rep.d, rep.r, rep.psnr)
        else:
            rec = TraceRecord(k, eps)
        trace.append(rec)
        if k in cfg.snapshots:
            snapshots[k] = f.copy()
        if callback is not None:
            callback(k, f, rec)
        log.debug("%s k=%d eps=%.6g", cfg.method, k, eps)
        if eps < cfg.eps0:
            converged = True
            break
    return ReconResult(f, k, converged, trace, snapshots)


def residual_sq(geom, p, f):
    """``||p - R f||^2``."""
    res = np.asarray(p, dtype=np.float64).ravel() - system_matrix(geom) @ np.ravel(f)
    return float(res @ res)
