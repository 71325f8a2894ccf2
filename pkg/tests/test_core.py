import math
import struct

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra import numpy as hnp

from ihtpocs.core import (BadMagicError, ConvergenceTrace, DimensionError, Geometry,
                          NonFiniteError, TraceRecord, TrailingDataError, TruncatedError,
                          default_bins, delinearize, linearize, read_matrix, write_matrix)


@pytest.mark.parametrize("i, j, J, n", [(1, 1, 128, 1), (2, 1, 128, 129), (128, 128, 128, 16384)])
def test_linearize_examples(i, j, J, n):
    assert linearize(i, j, J) == n


@pytest.mark.parametrize("i, j", [(0, 1), (1, 0), (1, 5), (4, 1)])
def test_linearize_out_of_range(i, j):
    with pytest.raises(IndexError):
        linearize(i, j, 4, I=3)


@given(st.integers(1, 40), st.integers(1, 40))
def test_linearize_bijection(I, J):
    seen = sorted(linearize(i, j, J, I) for i in range(1, I + 1) for j in range(1, J + 1))
    assert seen == list(range(1, I * J + 1))
    for n in (1, I * J, (I * J + 1) // 2):
        assert linearize(*delinearize(n, J), J) == n


def test_roundtrip_example(tmp_path):
    data = np.array([[1.5, 0.0], [-3.0, 2.0 ** -52]])
    write_matrix(tmp_path / "m.rcf", data)
    back = read_matrix(tmp_path / "m.rcf")
    assert back.shape == (2, 2)
    assert back.tobytes() == data.tobytes()


def test_byte_layout(tmp_path):
    path = tmp_path / "m.rcf"
    write_matrix(path, np.array([[1.0, 2.0, 3.0]]))
    raw = path.read_bytes()
    assert raw[:4] == b"RCF1"
    assert struct.unpack("<II", raw[4:12]) == (1, 3)
    assert struct.unpack("<3d", raw[12:]) == (1.0, 2.0, 3.0)
    assert len(raw) == 12 + 24


finite = st.floats(allow_nan=False, allow_infinity=False)


@given(hnp.arrays(np.float64, hnp.array_shapes(min_dims=2, max_dims=2, max_side=9), elements=finite))
def test_roundtrip_bitwise(tmp_path_factory, arr):
    path = tmp_path_factory.mktemp("rt") / "x.rcf"
    write_matrix(path, arr)
    assert read_matrix(path).tobytes() == arr.tobytes()


def _raw(magic=b"RCF1", rows=2, cols=2, values=4, extra=b""):
    return struct.pack("<4sII", magic, rows, cols) + struct.pack(f"<{values}d", *range(values)) + extra


@pytest.mark.parametrize("raw, exc", [
    (_raw(magic=b"RCF2"), BadMagicError),
    (_raw(rows=4, cols=4, values=15), TruncatedError),
    (b"RCF1\x01", TruncatedError),
    (_raw(rows=0), DimensionError),
    (_raw(extra=b"\x00"), TrailingDataError),
    (struct.pack("<4sII", b"RCF1", 1, 1) + struct.pack("<d", math.nan), NonFiniteError),
])
def test_read_errors(tmp_path, raw, exc):
    path = tmp_path / "bad.rcf"
    path.write_bytes(raw)
    with pytest.raises(exc):
        read_matrix(path)


def test_geometry_defaults():
    g = Geometry.parallel(128, 128, 21)
    assert g.bins == 182 == default_bins(128, 128)
    assert g.n_measurements == 21 * 182
    assert g.angles[1] == pytest.approx(math.pi / 21)
    assert g.bins * g.bin_spacing >= g.diagonal
    c = g.bin_centers()
    assert c[0] == pytest.approx(-c[-1])


@pytest.mark.parametrize("kwargs", [
    dict(angles=(0.0, 0.0)),
    dict(angles=(0.5, 0.1)),
    dict(angles=(math.pi,)),
    dict(bins=10),
])
def test_geometry_invariants(kwargs):
    base = dict(rows=16, cols=16, angles=(0.0, 1.0), bins=23)
    base.update(kwargs)
    with pytest.raises(ValueError):
        Geometry(**base)


def test_trace_csv(tmp_path):
    tr = ConvergenceTrace()
    tr.append(TraceRecord(1, 2.5))
    tr.append(TraceRecord(2, 0.125, 0.5, 0.25, math.inf))
    tr.to_csv(tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "iter,epsilon,d,r,psnr"
    assert lines[1] == "1,2.5,,,"
    back = ConvergenceTrace.from_csv(tmp_path / "t.csv")
    assert back.records == tr.records


def test_trace_rejects_gaps():
    tr = ConvergenceTrace()
    with pytest.raises(ValueError):
        tr.append(TraceRecord(2, 1.0))
    with pytest.raises(ValueError):
        tr.append(TraceRecord(1, -1.0))
