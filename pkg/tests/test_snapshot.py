import struct
import zlib

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fpp.errors import SnapshotCorruptError, SnapshotVersionError
from fpp.gadgets.barrel import BarrelSpec
from fpp.gadgets.goodvertex import scan_good_vertices
from fpp.gadgets.planting import planted_patch
from fpp.growth import Ball
from fpp.harness.snapshot import MAGIC, dumps, loads, snapshot_load, snapshot_save
from fpp.weights import EdgePatch, WeightDistribution, WeightField

EXP = WeightDistribution.exponential()


def tables_equal(a, b):
    ca, ta = a.time_table()
    cb, tb = b.time_table()
    return np.array_equal(ca, cb) and np.array_equal(ta, tb)


@pytest.fixture(scope="module")
def ball40():
    return Ball(WeightField(EXP, 11)).grow_to(40.0)


@pytest.fixture(scope="module")
def blob(ball40):
    return dumps(ball40)


def test_file_round_trip_then_grow(tmp_path, ball40):
    path = snapshot_save(ball40, tmp_path / "b.snap")
    back = snapshot_load(path)
    assert back.horizon == ball40.horizon
    assert tables_equal(back, ball40)
    ref = Ball(WeightField(EXP, 11)).grow_to(90.0)
    assert tables_equal(back.grow_to(90.0), ref)
    assert not (tmp_path / "b.snap.tmp").exists()


@pytest.mark.parametrize("dist", [WeightDistribution.uniform(0.5, 1.5),
                                  WeightDistribution.two_point(0.0, 1.0, 0.3),
                                  WeightDistribution.constant(2.0)])
def test_round_trip_other_distributions(dist):
    b = Ball(WeightField(dist, 5)).grow_to(12.0)
    back = loads(dumps(b))
    assert back.field.distribution == dist and tables_equal(back, b)
    assert tables_equal(back.grow_to(20.0), Ball(WeightField(dist, 5)).grow_to(20.0))


def test_round_trip_keeps_overrides_and_3d():
    patch = {((30, 0, 0), 0): 0.0, ((-2, -31, 4), 2): 7.5}
    field = WeightField(EXP, 3, 3).with_overrides(patch)
    b = Ball(field).grow_to(6.0)
    back = loads(dumps(b))
    assert back.field.overrides == field.overrides
    assert tables_equal(back.grow_to(15.0), Ball(field).grow_to(15.0))


def test_cached_vertices_survive(ball40):
    b = ball40.copy()
    far = (60, 0)
    T = b.passage_time(far)
    back = loads(dumps(b))
    assert back.passage_time(far) == T


@settings(max_examples=40)
@given(st.data())
def test_any_truncation_is_corruption(blob, data):
    cut = data.draw(st.integers(0, len(blob) - 1))
    with pytest.raises(SnapshotCorruptError):
        loads(blob[:cut])


@settings(max_examples=40)
@given(st.data())
def test_bit_flip_after_header_is_caught(blob, data):
    i = data.draw(st.integers(12, len(blob) - 1))
    bit = data.draw(st.integers(0, 7))
    bad = bytearray(blob)
    bad[i] ^= 1 << bit
    with pytest.raises(SnapshotCorruptError):
        loads(bytes(bad))


def test_version_mismatch_is_its_own_error(blob):
    bad = blob[:8] + struct.pack("<I", 2) + blob[12:]
    with pytest.raises(SnapshotVersionError):
        loads(bad)
    assert not issubclass(SnapshotVersionError, SnapshotCorruptError)


def test_bad_magic_and_trailing_bytes(blob):
    with pytest.raises(SnapshotCorruptError):
        loads(b"NOTASNAP" + blob[8:])
    with pytest.raises(SnapshotCorruptError):
        loads(blob + b"\0")


def test_layout_is_little_endian_records(blob):
    assert blob[:8] == MAGIC and struct.unpack_from("<I", blob, 8)[0] == 1
    tag, length = struct.unpack_from("<BQ", blob, 12)
    assert bytes([tag]) == b"H" and blob[21:21 + length].startswith(b"{")
    # last record is the CRC of everything before it
    assert blob[-13] == ord("E")
    assert struct.unpack("<I", blob[-4:])[0] == zlib.crc32(blob[:-13])


SPEC = BarrelSpec.build(100, 0.35, 1.0, 10.0)
T0 = 100.0


def test_snapshot_plant_regrow_equals_single_pass(tmp_path):
    done = 0
    for seed in range(6):
        field = WeightField(EXP, seed)
        b = Ball(field).grow_to(T0)
        certs = scan_good_vertices(b, 2.0, SPEC.n, limit=1)
        if not certs:
            continue
        patch = planted_patch(certs[0], SPEC, "min-extremal")
        resumed = snapshot_load(snapshot_save(b, tmp_path / f"{seed}.snap"))
        regrown = resumed.with_overrides(patch).grow_to(T0 + SPEC.kappa)
        single = Ball(field.with_overrides(patch)).grow_to(T0 + SPEC.kappa)
        assert regrown.as_dict() == single.as_dict()
        done += 1
    assert done >= 2


def test_overrides_touching_the_ball_are_refused(ball40):
    b = loads(dumps(ball40))
    with pytest.raises(ValueError):
        b.with_overrides(EdgePatch.from_mapping({((0, 0), 0): 5.0}, 2))
