"""Field files (CSV or raw little-endian float64) and JSON sidecars.

CSV layout: one header line ``# rows=R cols=C kind=<kind> alpha=<a>``, then one
row per line with ``re,im`` pairs at 17 significant digits.  The f64bin
layout is interleaved re/im float64, row-major, with ``<file>.json`` carrying
shape, kind, alpha and seed.  Every write goes to a temporary file in the
target directory and is renamed into place.
"""
import json
import os
import tempfile

import numpy as np

__all__ = ["FORMATS", "KINDS", "atomic_write", "write_json", "read_json",
           "write_field", "read_field", "field_path"]

FORMATS = ("csv", "f64bin")
KINDS = ("tf", "ambiguity", "kernel", "signal", "windows")
_EXT = {"csv": ".csv", "f64bin": ".f64"}


def atomic_write(path, data):
    """Write ``data`` (bytes or str) to ``path`` via temp file + rename."""
    path = os.fspath(path)
    if isinstance(data, str):
        data = data.encode("utf-8")
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path, obj):
    atomic_write(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def field_path(directory, stem, fmt):
    return os.path.join(directory, stem + _EXT[fmt])


def _as_2d(values):
    a = np.asarray(values, dtype=complex)
    if a.ndim == 1:
        a = a[None, :]
    if a.ndim != 2:
        raise ValueError(f"fields must be 1-D or 2-D, got shape {a.shape}")
    return a


def _fmt(v):
    return repr(float(v)) if np.isfinite(v) else str(float(v))


def write_field(path, values, kind, alpha=0.0, fmt="csv", seed=None):
    """Write a complex field; returns the list of paths written."""
    if fmt not in FORMATS:
        raise ValueError(f"format must be one of {FORMATS}, got {fmt!r}")
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}, got {kind!r}")
    a = _as_2d(values)
    rows, cols = a.shape
    path = os.fspath(path)
    if fmt == "csv":
        lines = [f"# rows={rows} cols={cols} kind={kind} alpha={_fmt(alpha)}"]
        for row in a:
            lines.append(",".join(f"{_fmt(z.real)},{_fmt(z.imag)}" for z in row))
        atomic_write(path, "\n".join(lines) + "\n")
        return [path]
    inter = np.empty((rows, cols, 2), dtype="<f8")
    inter[..., 0] = a.real
    inter[..., 1] = a.imag
    atomic_write(path, inter.tobytes(order="C"))
    side = {"shape": [rows, cols], "kind": kind, "alpha": float(alpha), "seed": seed,
            "dtype": "<f8", "layout": "interleaved re/im, row-major"}
    write_json(path + ".json", side)
    return [path, path + ".json"]


def _parse_header(line):
    if not line.startswith("#"):
        raise ValueError("missing '# rows=... cols=...' header line")
    meta = {}
    for tok in line[1:].split():
        if "=" not in tok:
            raise ValueError(f"malformed header token {tok!r}")
        k, v = tok.split("=", 1)
        meta[k] = v
    for key in ("rows", "cols", "kind", "alpha"):
        if key not in meta:
            raise ValueError(f"header lacks {key!r}")
    return int(meta["rows"]), int(meta["cols"]), meta["kind"], float(meta["alpha"])


def read_field(path):
    """Read a field written by :func:`write_field`.

    Returns ``(values, meta)`` with ``values`` complex of shape (rows, cols)
    and ``meta`` holding ``kind`` and ``alpha`` (plus ``seed`` for f64bin).
    Raises ``ValueError`` on malformed content and ``OSError`` when missing.
    """
    path = os.fspath(path)
    if path.endswith(".f64"):
        side = read_json(path + ".json")
        rows, cols = (int(s) for s in side["shape"])
        raw = np.fromfile(path, dtype="<f8")
        if raw.size != rows * cols * 2:
            raise ValueError(f"{path}: expected {rows * cols * 2} float64 values, found {raw.size}")
        raw = raw.reshape(rows, cols, 2)
        values = raw[..., 0] + 1j * raw[..., 1]
        return values, {"kind": side["kind"], "alpha": float(side["alpha"]), "seed": side.get("seed")}
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty file")
    rows, cols, kind, alpha = _parse_header(lines[0])
    body = lines[1:]
    if len(body) != rows:
        raise ValueError(f"{path}: header says {rows} rows, found {len(body)}")
    values = np.empty((rows, cols), dtype=complex)
    for i, line in enumerate(body):
        nums = [float(t) for t in line.split(",")]
        if len(nums) != 2 * cols:
            raise ValueError(f"{path}: row {i} has {len(nums)} numbers, expected {2 * cols}")
        values[i] = np.asarray(nums[0::2]) + 1j * np.asarray(nums[1::2])
    return values, {"kind": kind, "alpha": alpha}
