"""Image export, run manifests and the canned reproduction experiments."""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import dgt, metrics
from .core import Geometry, read_matrix, write_matrix
from .phantom import forbild_head, shepp_logan
from .projector import forward_project
from .solvers import METHODS, SolverConfig, reconstruct

log = logging.getLogger(__name__)


def window_to_uint16(img, lo, hi):
    if not lo < hi:
        raise ValueError(f"display window needs lo < hi, got [{lo}, {hi}]")
    scaled = np.clip((np.asarray(img, dtype=np.float64) - lo) / (hi - lo), 0.0, 1.0)
    return np.round(65535 * scaled).astype(np.uint16)


def write_pgm(path, img, lo, hi):
    """Write ``img`` as a 16-bit binary PGM using display window ``[lo, hi]``."""
    data = window_to_uint16(img, lo, hi)
    rows, cols = data.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{cols} {rows}\n65535\n".encode("ascii"))
        fh.write(data.astype(">u2").tobytes())


def read_pgm(path):
    raw = Path(path).read_bytes()
    tokens, pos = [], 0
    while len(tokens) < 4:
        while raw[pos:pos + 1].isspace():
            pos += 1
        start = pos
        while not raw[pos:pos + 1].isspace():
            pos += 1
        tokens.append(raw[start:pos].decode("ascii"))
    if tokens[0] != "P5" or tokens[3] != "65535":
        raise ValueError(f"{path}: not a 16-bit binary PGM")
    cols, rows = int(tokens[1]), int(tokens[2])
    return np.frombuffer(raw[pos + 1:], dtype=">u2").reshape(rows, cols)


def export_pgm(image_path, lo, hi, out_path):
    write_pgm(out_path, read_matrix(image_path), lo, hi)


def sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(path, command, params, inputs, outputs, duration):
    manifest = {
        "command": command,
        "params": params,
        "inputs": {str(p): sha256(p) for p in inputs},
        "outputs": {str(p): sha256(p) for p in outputs},
        "duration_s": round(duration, 3),
    }
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


@dataclass(frozen=True)
class Experiment:
    phantom: str
    size: int
    views: int
    n_iter: int
    window: tuple
    snapshot_window: tuple
    sparsity: int | None = None   # None: count the phantom's gradient support
    snapshots: tuple = (100, 200, 400, 800)


EXPERIMENTS = {
    "shepp-logan-21": Experiment("shepp-logan", 128, 21, 800, (0.1, 0.35), (0.15, 0.25), 1081),
    "forbild-41": Experiment("forbild", 256, 41, 800, (1.035, 1.065), (1.035, 1.065)),
}

_PHANTOMS = {"shepp-logan": shepp_logan, "forbild": forbild_head}


def run_experiment(name, out_dir, n_iter=None, methods=METHODS):
    """Phantom -> sinogram -> every method -> metrics, traces and images.

    Returns the summary rows ``{method: MetricReport}``.
    """
    if name not in EXPERIMENTS:
        raise ValueError(f"unknown experiment {name!r}; choose from {sorted(EXPERIMENTS)}")
    spec = EXPERIMENTS[name]
    n_iter = spec.n_iter if n_iter is None else int(n_iter)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()

    truth = _PHANTOMS[spec.phantom](spec.size)
    geom = Geometry.parallel(spec.size, spec.size, spec.views)
    sino = forward_project(geom, truth)
    S = spec.sparsity
    if S is None:
        S = dgt.l0_norm(dgt.gradient_magnitude(truth))
    outputs = []

    def save(fname, writer, *args):
        path = out / fname
        writer(path, *args)
        outputs.append(path)
        return path

    save("phantom.rcf", write_matrix, truth)
    save("phantom.pgm", write_pgm, truth, *spec.window)
    save("sinogram.rcf", write_matrix, sino)

    summary = {}
    for method in methods:
        snaps = tuple(k for k in spec.snapshots if k <= n_iter) if method == "iht-pocs" else ()
        cfg = SolverConfig(method=method, n_iter=n_iter, sparsity=S, snapshots=snaps)
        log.info("%s: running %s for %d iterations", name, method, n_iter)
        res = reconstruct(geom, sino, cfg, reference=truth)
        save(f"recon_{method}.rcf", write_matrix, res.image)
        save(f"recon_{method}.pgm", write_pgm, res.image, *spec.window)
        save(f"trace_{method}.csv", res.trace.to_csv)
        for k, img in sorted(res.snapshots.items()):
            save(f"snapshot_{method}_{k:04d}.rcf", write_matrix, img)
            save(f"snapshot_{method}_{k:04d}.pgm", write_pgm, img, *spec.snapshot_window)
        summary[method] = metrics.evaluate(truth, res.image)

    def write_summary(path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["method", "d", "r", "psnr"])
            for method, rep in summary.items():
                writer.writerow([method, repr(rep.d), repr(rep.r), repr(rep.psnr)])

    save("summary.csv", write_summary)
    params = {
        "experiment": name, "phantom": spec.phantom, "size": spec.size, "views": spec.views,
        "bins": geom.bins, "iters": n_iter, "sparsity": S, "lambda": 1.0, "eps0": 0.0,
        "methods": list(methods), "window": list(spec.window),
        "snapshot_window": list(spec.snapshot_window),
    }
    write_manifest(out / "manifest.json", "experiment", params, [], outputs,
                   time.perf_counter() - t0)
    return summary
