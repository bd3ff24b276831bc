"""On-disk formats: binary array bundles, key=value configs and metrics CSV.

Array bundle layout (all little-endian)::

    magic     8 bytes  b"ELOSSLB1"
    version   u32
    seed      u64
    count     u32
    count x { name_len u32, name utf-8, ndim u32, dims u64[ndim], data f64[prod(dims)] }
"""
from __future__ import annotations

import csv
import io
import struct
from pathlib import Path

import numpy as np

MAGIC = b"ELOSSLB1"
FORMAT_VERSION = 1


class FormatError(ValueError):
    pass


def write_arrays(path, seed: int, arrays: dict) -> None:
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<IQI", FORMAT_VERSION, int(seed), len(arrays)))
    for name, arr in arrays.items():
        data = np.asarray(arr, dtype="<f8")
        raw = name.encode("utf-8")
        buf.write(struct.pack("<I", len(raw)))
        buf.write(raw)
        buf.write(struct.pack("<I", data.ndim))
        buf.write(struct.pack(f"<{data.ndim}Q", *data.shape))
        buf.write(data.tobytes())
    Path(path).write_bytes(buf.getvalue())


def read_arrays(path) -> tuple[int, dict]:
    """Return ``(seed, {name: float64 array})``."""
    raw = Path(path).read_bytes()
    if raw[:8] != MAGIC:
        raise FormatError(f"{path}: not an elosslab array file")
    pos = 8

    def take(fmt):
        nonlocal pos
        size = struct.calcsize(fmt)
        if pos + size > len(raw):
            raise FormatError(f"{path}: truncated")
        out = struct.unpack_from(fmt, raw, pos)
        pos += size
        return out

    version, seed, count = take("<IQI")
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    arrays = {}
    for _ in range(count):
        (name_len,) = take("<I")
        name = raw[pos:pos + name_len].decode("utf-8")
        pos += name_len
        (ndim,) = take("<I")
        shape = take(f"<{ndim}Q") if ndim else ()
        n_bytes = 8 * int(np.prod(shape, dtype=np.int64))
        if pos + n_bytes > len(raw):
            raise FormatError(f"{path}: truncated array {name!r}")
        arrays[name] = np.frombuffer(raw, dtype="<f8", count=n_bytes // 8, offset=pos).reshape(shape).copy()
        pos += n_bytes
    if pos != len(raw):
        raise FormatError(f"{path}: trailing bytes")
    return seed, arrays


def parse_key_values(text: str) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise FormatError(f"line {lineno}: expected key=value, got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise FormatError(f"line {lineno}: empty key")
        out[key] = value
    return out


def read_config(path) -> dict:
    return parse_key_values(Path(path).read_text())


def format_key_values(mapping: dict) -> str:
    lines = []
    for key, value in mapping.items():
        text = str(value)
        if "\n" in text or "#" in text:
            raise FormatError(f"value for {key!r} cannot contain newlines or '#'")
        lines.append(f"{key} = {text}")
    return "\n".join(lines) + "\n"


def write_config(path, mapping: dict) -> None:
    Path(path).write_text(format_key_values(mapping))


def format_cell(value) -> str:
    # repr round-trips float64 exactly
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path, header, rows) -> None:
    """RFC-4180 CSV (CRLF line endings) with ``header`` columns."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\r\n")
        writer.writerow(header)
        for row in rows:
            if isinstance(row, dict):
                row = [row[k] for k in header]
            writer.writerow([format_cell(v) for v in row])


def read_csv(path) -> tuple[list, list]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, [dict(zip(header, r)) for r in reader]
