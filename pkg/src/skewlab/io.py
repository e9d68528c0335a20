"""File formats: CSV tables, binary trajectory blocks, key-value reports.

Binary trajectory block ("TRJ1"), all little-endian:

    offset  type     field
    0       4 bytes  magic b"TRJ1"
    4       u32      dims       (columns per row)
    8       u32      rows
    12      f64      t0
    20      f64      dt
    28      u32      frame      (0 = slow time, 1 = fast time)
    32      f64[rows * dims]    states, row-major

mu-sample block ("MUS1"): magic b"MUS1", u32 dims, u32 count, then
f64[count * dims].

CSV floats are written with 17 significant digits so a read-back is exact.
"""
from __future__ import annotations

import csv
import hashlib
import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .errors import InputError
from .ode import TrajectoryGrid

TRJ_HEADER = struct.Struct("<4sIIddI")
MUS_HEADER = struct.Struct("<4sII")
FRAME_CODES = {"slow": 0, "fast": 1}


def fmt(v) -> str:
    return format(float(v), ".17g")


def atomic_write(path, data: bytes) -> None:
    """Write via a temporary file in the same directory and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path, header, rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt(v) if isinstance(v, (float, int, np.floating, np.integer)) and not isinstance(v, bool) else str(v) for v in row))
    atomic_write(path, ("\n".join(lines) + "\n").encode())


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, [row for row in reader]


def write_trajectory_csv(path, grid: TrajectoryGrid, names=None) -> None:
    states = grid.states.reshape(len(grid), -1)
    names = names or [f"s{i + 1}" for i in range(states.shape[1])]
    if len(names) != states.shape[1]:
        raise InputError("column names do not match the state dimension")
    write_csv(path, ["time", *names], ([t, *row] for t, row in zip(grid.times, states)))


def read_trajectory_csv(path, time_frame: str = "slow") -> TrajectoryGrid:
    _, rows = read_csv(path)
    data = np.array(rows, dtype=float)
    t = data[:, 0]
    dt = t[1] - t[0] if len(t) > 1 else 1.0
    return TrajectoryGrid(t[0], dt, data[:, 1:], time_frame)


def encode_trajectory(grid: TrajectoryGrid) -> bytes:
    states = np.ascontiguousarray(grid.states.reshape(len(grid), -1), dtype="<f8")
    head = TRJ_HEADER.pack(b"TRJ1", states.shape[1], states.shape[0], grid.t0, grid.dt, FRAME_CODES[grid.time_frame])
    return head + states.tobytes()


def decode_trajectory(blob: bytes) -> TrajectoryGrid:
    magic, dims, rows, t0, dt, frame = TRJ_HEADER.unpack_from(blob)
    if magic != b"TRJ1":
        raise InputError(f"not a TRJ1 block (magic {magic!r})")
    expected = TRJ_HEADER.size + 8 * dims * rows
    if len(blob) != expected:
        raise InputError(f"TRJ1 block has {len(blob)} bytes, expected {expected}")
    states = np.frombuffer(blob, dtype="<f8", offset=TRJ_HEADER.size).reshape(rows, dims).astype(float)
    inverse = {v: k for k, v in FRAME_CODES.items()}
    return TrajectoryGrid(t0, dt, states, inverse[frame])


def write_trajectory_bin(path, grid: TrajectoryGrid) -> None:
    atomic_write(path, encode_trajectory(grid))


def read_trajectory_bin(path) -> TrajectoryGrid:
    return decode_trajectory(Path(path).read_bytes())


def encode_mu_samples(states) -> bytes:
    states = np.ascontiguousarray(np.atleast_2d(states), dtype="<f8")
    return MUS_HEADER.pack(b"MUS1", states.shape[1], states.shape[0]) + states.tobytes()


def decode_mu_samples(blob: bytes) -> np.ndarray:
    magic, dims, count = MUS_HEADER.unpack_from(blob)
    if magic != b"MUS1":
        raise InputError(f"not a MUS1 block (magic {magic!r})")
    if len(blob) != MUS_HEADER.size + 8 * dims * count:
        raise InputError("MUS1 block has the wrong length")
    return np.frombuffer(blob, dtype="<f8", offset=MUS_HEADER.size).reshape(count, dims).astype(float)


def write_mu_samples(path, states) -> None:
    atomic_write(path, encode_mu_samples(states))


def read_mu_samples(path) -> np.ndarray:
    return decode_mu_samples(Path(path).read_bytes())


def _plain(value):
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        return float(value)
    return value


def to_json(value) -> str:
    return json.dumps(_plain(value), sort_keys=True, allow_nan=True)


def write_report(path, items: dict) -> None:
    """`key: value` lines; floats with 17 digits, booleans and containers as JSON."""
    lines = []
    for key, value in items.items():
        value = _plain(value)
        if isinstance(value, bool) or value is None:
            text = json.dumps(value)
        elif isinstance(value, float):
            text = fmt(value)
        elif isinstance(value, (list, dict)):
            text = json.dumps(value, sort_keys=True)
        else:
            text = str(value)
        lines.append(f"{key}: {text}")
    atomic_write(path, ("\n".join(lines) + "\n").encode())


def read_report(path) -> dict:
    out = {}
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        key, _, text = line.partition(": ")
        try:
            out[key] = json.loads(text)
        except json.JSONDecodeError:
            out[key] = text
    return out


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
