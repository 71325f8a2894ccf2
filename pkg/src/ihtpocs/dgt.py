"""Discrete gradient transform and the thresholding pseudo-inverse filters.

All functions accept a single image ``(I, J)`` or a stack ``(..., I, J)``.
Out-of-grid neighbours take the value of the nearest in-grid pixel
(replicate boundary), so constant images have an all-zero gradient.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Threshold:
    w: float
    S: int


def _check(f):
    f = np.asarray(f, dtype=np.float64)
    if f.ndim < 2 or f.shape[-2] < 2 or f.shape[-1] < 2:
        raise ValueError(f"need images of at least 2x2, got shape {f.shape}")
    return f


def _down(f):
    """``f[i+1, j]`` with the last row replicated."""
    out = np.empty_like(f)
    out[..., :-1, :] = f[..., 1:, :]
    out[..., -1, :] = f[..., -1, :]
    return out


def _right(f):
    """``f[i, j+1]`` with the last column replicated."""
    out = np.empty_like(f)
    out[..., :, :-1] = f[..., :, 1:]
    out[..., :, -1] = f[..., :, -1]
    return out


def gradient_magnitude(f):
    r"""Isotropic forward-difference magnitude

    .. math:: \nabla f_{i,j} = \sqrt{(f_{i,j} - f_{i+1,j})^2 + (f_{i,j} - f_{i,j+1})^2}
    """
    f = _check(f)
    dx = f - _down(f)
    dy = f - _right(f)
    return np.sqrt(dx * dx + dy * dy)


def l0_norm(g, tau=0.0):
    """Number of entries of ``g`` strictly greater than ``tau``."""
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    return int(np.count_nonzero(np.asarray(g) > tau))


def select_threshold(g, S):
    """Return the ``S``-th largest magnitude of ``g`` (ties share a rank)."""
    flat = np.asarray(g, dtype=np.float64).ravel()
    n = flat.size
    S = int(S)
    if not 1 <= S <= n:
        raise ValueError(f"sparsity S={S} outside 1..{n}")
    return Threshold(float(np.partition(flat, n - S)[n - S]), S)


def _mean3(x, y, z):
    # (x + y + z) / 3 can round outside [min, max] (e.g. for x == y == z).
    lo = np.minimum(np.minimum(x, y), z)
    hi = np.maximum(np.maximum(x, y), z)
    return np.clip((x + y + z) / 3, lo, hi)


def _candidates(f, g, w, blend):
    """Shared skeleton of the pseudo-inverse filters.

    ``blend(mean, keep, grad)`` returns the candidate pixel given the local
    three-pixel mean, the kept value and the governing gradient magnitude.
    """
    down = _down(f)
    right = _right(f)

    fa = blend(_mean3(f, down, right), f, g)

    fb = f.copy()
    fb[..., 1:, :] = blend(
        _mean3(f[..., :-1, :], f[..., 1:, :], right[..., :-1, :]),
        f[..., 1:, :],
        g[..., :-1, :],
    )

    fc = f.copy()
    fc[..., :, 1:] = blend(
        _mean3(f[..., :, :-1], f[..., :, 1:], down[..., :, :-1]),
        f[..., :, 1:],
        g[..., :, :-1],
    )
    return (2 * fa + fb + fc) / 4


def _threshold_array(w, f):
    w = np.asarray(w, dtype=np.float64)
    if np.any(w < 0):
        raise ValueError("threshold must be nonnegative")
    if w.ndim:
        # per-image thresholds for a stack
        w = w.reshape(w.shape + (1, 1))
    return w


def hard_threshold_pinv(f, w, g=None):
    """Hard-threshold the gradient of ``f`` at ``w`` and map back to an image.

    Each pixel blends three candidates ``(2 f_a + f_b + f_c) / 4``. A
    candidate is the mean of a pixel and its two forward neighbours when the
    governing gradient is below ``w``; otherwise the pixel is kept. Gradients
    are read from the unmodified input.
    """
    f = _check(f)
    if g is None:
        g = gradient_magnitude(f)
    w = _threshold_array(w, f)

    def blend(mean, keep, grad):
        return np.where(grad < w, mean, keep)

    return _candidates(f, g, w, blend)


def soft_threshold_pinv(f, w, g=None):
    """Shrinkage counterpart of :func:`hard_threshold_pinv`.

    Candidates become ``mean + max(0, 1 - w / grad) * (value - mean)``;
    below ``w`` this is the plain mean, at ``w = 0`` the identity.
    """
    f = _check(f)
    if g is None:
        g = gradient_magnitude(f)
    w = _threshold_array(w, f)

    def blend(mean, keep, grad):
        with np.errstate(divide="ignore", invalid="ignore"):
            shrink = np.where(grad > 0, 1 - w / grad, 1.0)
        shrink = np.where(grad >= w, np.maximum(shrink, 0.0), 0.0)
        out = np.clip(mean + shrink * (keep - mean),
                      np.minimum(mean, keep), np.maximum(mean, keep))
        out = np.where(shrink == 1.0, keep, out)
        return np.where(shrink == 0.0, mean, out)

    return _candidates(f, g, w, blend)
