"""Persistence: CNSF binary snapshots, checkpoints, CSV and JSON reports.

CNSF layout (all little-endian)::

    offset  size  content
    0       4     magic b"CNSF"
    4       2     u16 format version (currently 1)
    6       4     u32 n, points per axis
    10      1     u8 field count F
    11      ...   F * 3 * n * n * (n//2 + 1) complex128 values, each stored as
                  (re: f64, im: f64), in C order over (field, component, ix, iy, iz)

The lattice is the real-input transform half-lattice: ``ix`` and ``iy`` follow
FFT order (wavenumber ``i`` for i <= n/2, ``i - n`` above) and ``iz`` runs
0..n/2. The dropped half is fixed by conjugate symmetry u(-k) = conj(u(k)).
Coefficients use the normalisation u(x) = sum_k u_k e^{i k.x}.

A checkpoint is a CNSF file plus a JSON sidecar ``<name>.json`` holding the
time, seed, config hash, format version and the SHA-256 of the CNSF bytes.
"""
from __future__ import annotations

import csv
import hashlib
import io as _io
import json
import math
import struct
from pathlib import Path

import numpy as np

from .exceptions import CheckpointError
from .spectral import SpectralField, WaveGrid

__all__ = [
    "MAGIC",
    "FORMAT_VERSION",
    "encode_snapshot",
    "decode_snapshot",
    "write_snapshot",
    "read_snapshot",
    "save_checkpoint",
    "load_checkpoint",
    "checkpoint_roundtrip",
    "format_float",
    "write_csv",
    "read_csv",
    "dumps_json",
    "write_json",
    "write_ou_csv",
]

MAGIC = b"CNSF"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHIB")


def encode_snapshot(fields) -> bytes:
    """Serialise one field or a sequence of fields on a common grid."""
    if isinstance(fields, SpectralField):
        fields = [fields]
    fields = list(fields)
    if not fields or len(fields) > 255:
        raise ValueError("a snapshot holds between 1 and 255 fields")
    grid = fields[0].grid
    if any(f.grid != grid for f in fields):
        raise ValueError("all fields in a snapshot must share a grid")
    data = np.stack([f.coeffs for f in fields]).astype("<c16", copy=False)
    return _HEADER.pack(MAGIC, FORMAT_VERSION, grid.n, len(fields)) + data.tobytes(order="C")


def decode_snapshot(blob: bytes, grid: WaveGrid | None = None) -> list:
    """Inverse of :func:`encode_snapshot`; refuses bad magic, version or size."""
    if len(blob) < _HEADER.size:
        raise CheckpointError("snapshot truncated before the header ends")
    magic, version, n, count = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise CheckpointError(f"bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported snapshot version {version} (expected {FORMAT_VERSION})")
    if grid is None:
        grid = WaveGrid(n)
    elif grid.n != n:
        raise CheckpointError(f"snapshot has n={n}, expected {grid.n}")
    shape = (count, 3, n, n, n // 2 + 1)
    expected = _HEADER.size + 16 * int(np.prod(shape))
    if len(blob) != expected:
        raise CheckpointError(f"snapshot size {len(blob)} does not match header ({expected} bytes)")
    data = np.frombuffer(blob, dtype="<c16", offset=_HEADER.size).reshape(shape)
    return [SpectralField(grid, np.array(data[i], dtype=complex)) for i in range(count)]


def write_snapshot(path, fields) -> None:
    Path(path).write_bytes(encode_snapshot(fields))


def read_snapshot(path, grid: WaveGrid | None = None) -> list:
    return decode_snapshot(Path(path).read_bytes(), grid)


def _sidecar(path: Path) -> Path:
    return path.with_suffix(".json")


def save_checkpoint(path, state: SpectralField, time: float, seed: int, config_hash: str) -> Path:
    """Write ``path`` (CNSF) and its JSON sidecar; returns the sidecar path."""
    path = Path(path)
    blob = encode_snapshot(state)
    path.write_bytes(blob)
    header = {
        "format": "CNSF",
        "version": FORMAT_VERSION,
        "n": state.grid.n,
        "time": float(time),
        "seed": int(seed),
        "config_hash": config_hash,
        "sha256": hashlib.sha256(blob).hexdigest(),
    }
    side = _sidecar(path)
    side.write_text(dumps_json(header))
    return side


def load_checkpoint(path, expected_config_hash: str | None = None, grid: WaveGrid | None = None):
    """(state, header) after verifying the sidecar; any mismatch raises CheckpointError."""
    path = Path(path)
    side = _sidecar(path)
    try:
        header = json.loads(side.read_text())
    except FileNotFoundError:
        raise CheckpointError(f"missing checkpoint header {side}") from None
    except json.JSONDecodeError as e:
        raise CheckpointError(f"unreadable checkpoint header: {e}") from None
    required = {"format", "version", "n", "time", "seed", "config_hash", "sha256"}
    if not isinstance(header, dict) or not required <= set(header):
        raise CheckpointError(f"checkpoint header lacks {sorted(required - set(header or {}))}")
    if header["format"] != "CNSF" or header["version"] != FORMAT_VERSION:
        raise CheckpointError(f"checkpoint version {header['version']!r} not supported")
    blob = path.read_bytes()
    if hashlib.sha256(blob).hexdigest() != header["sha256"]:
        raise CheckpointError("checkpoint payload does not match its recorded SHA-256")
    if expected_config_hash is not None and header["config_hash"] != expected_config_hash:
        raise CheckpointError("checkpoint was written under a different configuration")
    (state,) = decode_snapshot(blob, grid)
    if state.grid.n != header["n"]:
        raise CheckpointError("header grid size disagrees with the payload")
    return state, header


def checkpoint_roundtrip(state: SpectralField, directory, name="roundtrip") -> SpectralField:
    """Save then load ``state`` through a checkpoint in ``directory``."""
    p = Path(directory) / f"{name}.cnsf"
    save_checkpoint(p, state, 0.0, 0, "roundtrip")
    return load_checkpoint(p, grid=state.grid)[0]


# --------------------------------------------------------------------------- text formats


def format_float(x) -> str:
    """Shortest round-trip representation (``repr``); nan/inf spelled out."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def write_csv(path, columns: list, rows, meta: dict | None = None) -> None:
    """CSV with ``# key=value`` comment lines first (config hash etc.), then a header."""
    buf = _io.StringIO()
    for k, v in sorted((meta or {}).items()):
        buf.write(f"# {k}={v}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([format_float(x) if isinstance(x, (float, np.floating)) else x for x in row])
    Path(path).write_text(buf.getvalue())


def read_csv(path):
    """(meta dict, columns dict of float arrays) from :func:`write_csv` output."""
    meta, lines = {}, []
    for line in Path(path).read_text().splitlines():
        if line.startswith("# "):
            k, _, v = line[2:].partition("=")
            meta[k] = v
        else:
            lines.append(line)
    reader = csv.reader(lines)
    header = next(reader)
    data = list(reader)
    cols = {}
    for j, name in enumerate(header):
        vals = [r[j] for r in data]
        try:
            cols[name] = np.array([float(v) for v in vals])
        except ValueError:
            cols[name] = vals
    return meta, cols


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else format_float(x)
    return obj


def dumps_json(obj) -> str:
    """Deterministic JSON: sorted keys, fixed indentation, non-finite floats as strings."""
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(dumps_json(obj))


def write_ou_csv(path, ou, meta: dict | None = None) -> None:
    """Noise path as CSV columns t, omega, z."""
    rows = zip(ou.times.tolist(), ou.path.values.tolist(), ou.values.tolist())
    write_csv(path, ["t", "omega", "z"], rows, meta)
