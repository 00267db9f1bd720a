"""Binary ball snapshots.

Layout (all integers little-endian)::

    magic    8 bytes  b"FPPSNAP\\0"
    version  u32
    records  repeated: tag u8, length u64, payload[length]

Record tags:

    H  JSON header: d, seed, distribution, source, vertex count, override count
    Z  horizon as one f64
    O  overrides: per edge, zig-zag varint coords, varint axis, f64 weight
    V  settled vertices in settlement order: zig-zag varint coords, f64 time
    E  CRC-32 (u32) of every byte before this record; must come last

A snapshot round-trips to a ball that grows bit-identically to the original.
"""

from __future__ import annotations

import json
import struct
import zlib
from pathlib import Path

import numpy as np
from numba import njit

from ..errors import SnapshotCorruptError, SnapshotVersionError
from ..growth import Ball
from ..weights import EdgePatch, WeightDistribution, WeightField

MAGIC = b"FPPSNAP\0"
VERSION = 1
_REC = struct.Struct("<BQ")


@njit(cache=True)
def _encode(coords, extra_int, has_extra, floats, out):
    """Per row: zig-zag varint coords, optional varint, then an f64."""
    pos = 0
    for i in range(coords.shape[0]):
        for k in range(coords.shape[1]):
            c = coords[i, k]
            z = np.uint64(c) << np.uint64(1) if c >= 0 else (np.uint64(-c) << np.uint64(1)) - np.uint64(1)
            while z >= np.uint64(0x80):
                out[pos] = np.uint8((z & np.uint64(0x7F)) | np.uint64(0x80))
                z >>= np.uint64(7)
                pos += 1
            out[pos] = np.uint8(z)
            pos += 1
        if has_extra:
            z = np.uint64(extra_int[i])
            while z >= np.uint64(0x80):
                out[pos] = np.uint8((z & np.uint64(0x7F)) | np.uint64(0x80))
                z >>= np.uint64(7)
                pos += 1
            out[pos] = np.uint8(z)
            pos += 1
        bits = floats[i:i + 1].view(np.uint64)[0]
        for b in range(8):
            out[pos] = np.uint8((bits >> np.uint64(8 * b)) & np.uint64(0xFF))
            pos += 1
    return pos


@njit(cache=True)
def _decode(buf, count, d, has_extra, coords, extra_int, floats):
    """Inverse of _encode; returns bytes consumed or -1 on a short buffer."""
    pos = 0
    n = buf.shape[0]
    for i in range(count):
        for k in range(d + (1 if has_extra else 0)):
            z = np.uint64(0)
            shift = np.uint64(0)
            while True:
                if pos >= n or shift > np.uint64(63):
                    return -1
                byte = np.uint64(buf[pos])
                pos += 1
                z |= (byte & np.uint64(0x7F)) << shift
                if byte < np.uint64(0x80):
                    break
                shift += np.uint64(7)
            if k < d:
                if z & np.uint64(1):
                    coords[i, k] = -np.int64(z >> np.uint64(1)) - 1
                else:
                    coords[i, k] = np.int64(z >> np.uint64(1))
            else:
                extra_int[i] = np.int64(z)
        if pos + 8 > n:
            return -1
        bits = np.uint64(0)
        for b in range(8):
            bits |= np.uint64(buf[pos + b]) << np.uint64(8 * b)
        pos += 8
        tmp = np.empty(1, dtype=np.uint64)
        tmp[0] = bits
        floats[i] = tmp.view(np.float64)[0]
    return pos


def _pack_rows(coords, floats, extra=None) -> bytes:
    coords = np.ascontiguousarray(coords, dtype=np.int64)
    floats = np.ascontiguousarray(floats, dtype=np.float64)
    has = extra is not None
    ext = np.ascontiguousarray(extra if has else np.zeros(0), dtype=np.int64)
    width = coords.shape[1] * 10 + (10 if has else 0) + 8
    out = np.empty(max(len(floats) * width, 1), dtype=np.uint8)
    used = _encode(coords, ext, has, floats, out)
    return out[:used].tobytes()


def _unpack_rows(payload: bytes, count: int, d: int, has_extra: bool):
    buf = np.frombuffer(payload, dtype=np.uint8)
    coords = np.empty((count, d), dtype=np.int64)
    extra = np.empty(count, dtype=np.int64)
    floats = np.empty(count, dtype=np.float64)
    used = _decode(buf, count, d, has_extra, coords, extra, floats)
    if used != len(buf):
        raise SnapshotCorruptError("record length does not match its contents")
    return coords, extra, floats


def _record(tag: bytes, payload: bytes) -> bytes:
    return _REC.pack(tag[0], len(payload)) + payload


def dumps(ball: Ball) -> bytes:
    coords, times = ball.time_table(include_cached=True)
    patch = ball.field.patch
    header = {
        "d": ball.d, "seed": ball.field.seed,
        "distribution": ball.field.distribution.to_dict(),
        "source": list(ball.source), "vertices": int(len(times)),
        "overrides": int(len(patch)),
    }
    body = MAGIC + struct.pack("<I", VERSION)
    body += _record(b"H", json.dumps(header, sort_keys=True).encode())
    body += _record(b"Z", struct.pack("<d", ball.horizon))
    body += _record(b"O", _pack_rows(patch.bases.reshape(-1, ball.d), patch.values, patch.axes))
    body += _record(b"V", _pack_rows(coords, times))
    return body + _record(b"E", struct.pack("<I", zlib.crc32(body)))


def loads(data: bytes, **ball_kw) -> Ball:
    if len(data) < 12 or data[:8] != MAGIC:
        raise SnapshotCorruptError("not a ball snapshot (bad magic)")
    (version,) = struct.unpack_from("<I", data, 8)
    if version != VERSION:
        raise SnapshotVersionError(f"snapshot version {version}; this build reads {VERSION}")
    pos = 12
    recs = {}
    while pos < len(data):
        if pos + _REC.size > len(data):
            raise SnapshotCorruptError("truncated record header")
        tag, length = _REC.unpack_from(data, pos)
        start = pos + _REC.size
        if start + length > len(data):
            raise SnapshotCorruptError("truncated record")
        tag = bytes([tag])
        if tag == b"E":
            if length != 4:
                raise SnapshotCorruptError("bad checksum record")
            (crc,) = struct.unpack_from("<I", data, start)
            if crc != zlib.crc32(data[:pos]):
                raise SnapshotCorruptError("checksum mismatch")
            if start + length != len(data):
                raise SnapshotCorruptError("trailing bytes after checksum")
            recs[tag] = b""
            break
        recs[tag] = data[start:start + length]
        pos = start + length
    for need in (b"H", b"Z", b"O", b"V", b"E"):
        if need not in recs:
            raise SnapshotCorruptError(f"missing record {need.decode()}")
    try:
        header = json.loads(recs[b"H"])
        d = int(header["d"])
        dist = WeightDistribution.from_dict(header["distribution"])
    except (ValueError, KeyError, TypeError) as exc:
        raise SnapshotCorruptError(f"bad header: {exc}") from None
    (horizon,) = struct.unpack("<d", recs[b"Z"])
    ob, oa, ow = _unpack_rows(recs[b"O"], int(header["overrides"]), d, True)
    vc, _, vt = _unpack_rows(recs[b"V"], int(header["vertices"]), d, False)
    field = WeightField(dist, int(header["seed"]), d, EdgePatch(ob, oa, ow))
    return Ball.from_settled(field, tuple(header["source"]), vc, vt, horizon, **ball_kw)


def snapshot_save(ball: Ball, path) -> Path:
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(dumps(ball))
    tmp.replace(path)
    return path


def snapshot_load(path, **ball_kw) -> Ball:
    return loads(Path(path).read_bytes(), **ball_kw)
