import csv

import numpy as np
import pytest

from ihtpocs.core import Geometry
from ihtpocs.dgt import gradient_magnitude, l0_norm
from ihtpocs.projector import forward_project
from ihtpocs.solvers import SolverConfig, reconstruct, residual_sq
from ihtpocs.sparsity import (CurvePoint, EstimationFailedError, ResidualCurve, estimate_sparsity,
                              find_knee, pow2_grid, residual_at)


def curve_of(pairs):
    c = ResidualCurve()
    for S, sigma in pairs:
        c.add(CurvePoint(S, sigma, 1))
    return c


def blocks():
    f = np.zeros((32, 32))
    f[4:14, 5:20] = 1.0
    f[18:28, 8:16] = 0.5
    f[20:26, 20:29] = 0.8
    f[8:11, 9:12] = 1.4
    return f


def disk():
    y, x = np.mgrid[:32, :32]
    f = np.zeros((32, 32))
    f[(x - 15.5) ** 2 + (y - 15.5) ** 2 < 144] = 1.0
    f[(x - 12) ** 2 + (y - 14) ** 2 < 16] = 1.5
    f[(x - 20) ** 2 + (y - 19) ** 2 < 9] = 0.4
    return f


def test_pow2_grid():
    assert pow2_grid(16) == [1, 2, 4, 8, 16]
    assert pow2_grid(20) == [1, 2, 4, 8, 16, 20]
    assert pow2_grid(128 * 128)[-2:] == [8192, 16384]


def test_curve_bookkeeping(tmp_path):
    c = curve_of([(8, 1.0), (2, 5.0), (4, 3.0)])
    assert [pt.S for pt in c] == [2, 4, 8]
    assert c.sigma(4) == 3.0
    with pytest.raises(ValueError):
        c.add(CurvePoint(4, 0.0, 1))
    c.to_csv(tmp_path / "c.csv")
    rows = list(csv.reader(open(tmp_path / "c.csv")))
    assert rows[0] == ["S", "sigma", "iters"] and rows[1] == ["2", "5.0", "1"]


def test_knee_plain_jump():
    c = curve_of([(256, 900.0), (512, 300.0), (1024, 4.0), (2048, 0.13), (4096, 0.8)])
    assert find_knee(c) == (1024, 2048)


def test_knee_ignores_drift_above_exact_fit():
    # sigma rises gently as S falls towards S*, collapses at S*, jumps below it
    c = curve_of([(64, 31.0), (128, 1e-12), (256, 0.063), (512, 0.0148), (1024, 0.0155)])
    assert find_knee(c) == (64, 128)


def test_knee_missing():
    c = curve_of([(1, 1.0), (2, 0.9), (4, 0.8), (8, 0.8)])
    with pytest.raises(EstimationFailedError) as err:
        find_knee(c)
    assert err.value.curve is c


def test_full_sparsity_equals_art_floor():
    f = disk()
    g = Geometry.parallel(32, 32, 8)
    p = forward_project(g, f)
    art = reconstruct(g, p, SolverConfig(method="art", n_iter=50))
    assert residual_at(g, p, g.n_pixels, 50) == residual_sq(g, p, art.image)


def test_residual_trend_at_ends():
    f = blocks()
    g = Geometry.parallel(32, 32, 8)
    p = forward_project(g, f)
    assert residual_at(g, p, 1, 100) > 100 * residual_at(g, p, g.n_pixels, 100)
    with pytest.raises(ValueError):
        residual_at(g, p, 0, 10)


@pytest.mark.parametrize("make,views,iters", [
    (blocks, 6, 400), (blocks, 10, 200), (disk, 6, 200), (disk, 8, 400),
])
def test_synthetic_recovery(make, views, iters):
    f = make()
    S_true = l0_norm(gradient_magnitude(f))
    g = Geometry.parallel(32, 32, views)
    p = forward_project(g, f)
    S_est, curve = estimate_sparsity(g, p, probe_iters=iters)
    assert S_true <= S_est <= 2 * S_true
    assert all(pt.iters == iters for pt in curve)
    assert set(pow2_grid(g.n_pixels)) <= {pt.S for pt in curve}


def test_parallel_probes_match_serial():
    f = disk()
    g = Geometry.parallel(32, 32, 8)
    p = forward_project(g, f)
    a, ca = estimate_sparsity(g, p, probe_iters=100)
    b, cb = estimate_sparsity(g, p, probe_iters=100, jobs=2)
    assert a == b and ca.points == cb.points


def test_grid_validation():
    g = Geometry.parallel(8, 8, 4)
    p = np.zeros(g.sino_shape)
    with pytest.raises(ValueError):
        estimate_sparsity(g, p, grid=[0, 4])
    with pytest.raises(ValueError):
        estimate_sparsity(g, p, grid=[])
