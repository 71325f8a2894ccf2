"""Reconstruction quality against a reference image ``t``."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import DegenerateInputError


@dataclass(frozen=True)
class MetricReport:
    d: float
    r: float
    psnr: float

    def as_row(self):
        return f"{self.d!r},{self.r!r},{self.psnr!r}"


def _pair(t, f):
    t = np.asarray(t, dtype=np.float64)
    f = np.asarray(f, dtype=np.float64)
    if t.shape != f.shape:
        raise ValueError(f"shape mismatch: reference {t.shape} vs test {f.shape}")
    return t, f


def nmsd(t, f):
    """Normalized mean square distance ``d``.

    ``sqrt(sum((t - f)^2) / sum((t - mean(t))^2))``; sensitive to a few large
    errors.
    """
    t, f = _pair(t, f)
    den = np.sum((t - t.mean()) ** 2)
    if den <= 0:
        raise DegenerateInputError("reference image is constant; d is undefined")
    return math.sqrt(np.sum((t - f) ** 2) / den)


def naad(t, f):
    """Normalized absolute average distance ``r = sum|t - f| / sum|t|``."""
    t, f = _pair(t, f)
    den = np.sum(np.abs(t))
    if den <= 0:
        raise DegenerateInputError("reference image is all zero; r is undefined")
    return float(np.sum(np.abs(t - f)) / den)


def psnr(t, f):
    """PSNR in dB with peak ``max(t)``; ``inf`` for identical images."""
    t, f = _pair(t, f)
    peak = float(t.max())
    if peak <= 0:
        raise DegenerateInputError("reference peak must be positive for PSNR")
    rmse = math.sqrt(np.sum((t - f) ** 2) / t.size)
    if rmse == 0:
        return math.inf
    return 20 * math.log10(peak / rmse)


def evaluate(t, f):
    return MetricReport(nmsd(t, f), naad(t, f), psnr(t, f))
