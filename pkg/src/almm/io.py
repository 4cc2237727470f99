"""File formats: binary matrices, CSV, JSON run configs, scene bundles, PGM maps.

Binary matrix layout (little-endian)::

    b"ALMM" | u32 version | u32 rows | u32 cols | rows*cols f64, row-major
"""
from __future__ import annotations

import csv
import json
import math
import os
import struct
import tempfile
from dataclasses import fields
from pathlib import Path

import numpy as np

from .metrics import ReportRow
from .model import SolverConfig
from .synthetic import Scene, SceneSpec

MAGIC = b"ALMM"
VERSION = 1
_HEADER = struct.Struct("<4sIII")


class DataError(ValueError):
    """Malformed or missing input data."""


class ConfigError(ValueError):
    """Invalid run configuration."""


def atomic_write(path, data: bytes):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def encode_matrix(M) -> bytes:
    M = np.asarray(M, dtype=np.float64)
    if M.ndim == 1:
        M = M[:, None]
    if M.ndim != 2:
        raise DataError("only 1-D or 2-D arrays can be stored")
    rows, cols = M.shape
    return _HEADER.pack(MAGIC, VERSION, rows, cols) + np.ascontiguousarray(M, dtype="<f8").tobytes()


def decode_matrix(buf: bytes) -> np.ndarray:
    if len(buf) < _HEADER.size:
        raise DataError("truncated matrix header")
    magic, version, rows, cols = _HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise DataError(f"bad magic {magic!r}")
    if version != VERSION:
        raise DataError(f"unsupported matrix version {version}")
    body = buf[_HEADER.size:]
    if len(body) != rows * cols * 8:
        raise DataError(f"expected {rows * cols * 8} data bytes, found {len(body)}")
    return np.frombuffer(body, dtype="<f8").reshape(rows, cols).astype(np.float64)


def write_matrix(path, M):
    atomic_write(path, encode_matrix(M))


def read_matrix(path) -> np.ndarray:
    try:
        buf = Path(path).read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    return decode_matrix(buf)


def write_csv_matrix(path, M):
    M = np.atleast_2d(np.asarray(M, dtype=np.float64))
    lines = [",".join(repr(float(v)) for v in row) for row in M]
    atomic_write(path, ("\n".join(lines) + "\n").encode())


def read_csv_matrix(path) -> np.ndarray:
    try:
        return np.atleast_2d(np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2))
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot read {path}: {exc}") from None


def load_any_matrix(path) -> np.ndarray:
    return read_csv_matrix(path) if str(path).endswith(".csv") else read_matrix(path)


# -- configs ---------------------------------------------------------------

_TOP_KEYS = {
    "scene": dict, "solver": dict, "model": str, "lambda_sparse": (int, float),
    "delta": (int, float), "input": str, "dict": str, "learn": bool, "out": str,
    "truth": str, "results": str, "range": list, "run_id": str, "strict": bool,
    "abundances": str, "shape": list,
}


def _check_keys(d, allowed, where):
    for key in d:
        if key not in allowed:
            raise ConfigError(f"unknown config key {where}{key!r}")


def parse_config(doc: dict) -> dict:
    """Validate a run config against the strict schema and fill defaults."""
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    _check_keys(doc, _TOP_KEYS, "")
    for key, typ in _TOP_KEYS.items():
        if key in doc and not isinstance(doc[key], typ):
            raise ConfigError(f"config key {key!r} has the wrong type")
    out = dict(doc)
    scene = doc.get("scene", {})
    _check_keys(scene, {f.name for f in fields(SceneSpec)}, "scene.")
    solver = doc.get("solver", {})
    _check_keys(solver, {f.name for f in fields(SolverConfig)}, "solver.")
    try:
        out["scene"] = SceneSpec.from_dict(scene)
        out["solver"] = SolverConfig(**solver)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    if "range" in out:
        r = out["range"]
        if len(r) != 2 or not r[0] < r[1]:
            raise ConfigError("range must be [lo, hi] with lo < hi")
    return out


def load_config(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    return doc


# -- scene bundles ---------------------------------------------------------

def save_scene(directory, scene: Scene):
    d = Path(directory)
    write_matrix(d / "Y.almm", scene.image.data)
    write_matrix(d / "X_true.almm", scene.abundances.data)
    write_matrix(d / "A.almm", scene.endmembers.data)
    write_matrix(d / "scales.almm", scene.scales)
    manifest = {
        "format_version": VERSION,
        "spec": scene.spec.to_dict(),
        "shape": [scene.spec.rows, scene.spec.cols],
        "files": ["Y.almm", "X_true.almm", "A.almm", "scales.almm"],
    }
    atomic_write(d / "manifest.json", (json.dumps(manifest, indent=2, sort_keys=True) + "\n").encode())


def load_scene_arrays(directory) -> dict:
    """Read whatever a scene directory holds: ``Y``, ``A`` and optional truth."""
    d = Path(directory)
    if not d.is_dir():
        raise DataError(f"scene directory {d} does not exist")
    out = {}
    for key, name in (("Y", "Y.almm"), ("A", "A.almm"), ("X_true", "X_true.almm"),
                      ("scales", "scales.almm")):
        if (d / name).exists():
            out[key] = read_matrix(d / name)
    if (d / "manifest.json").exists():
        out["manifest"] = json.loads((d / "manifest.json").read_text())
    for key in ("Y", "A"):
        if key not in out:
            raise DataError(f"scene directory {d} lacks {key}.almm")
    return out


# -- reports ---------------------------------------------------------------

def write_report(path, rows):
    lines = [",".join(ReportRow.FIELDS)]
    for r in rows:
        lines.append(",".join([r.run_id, r.algorithm] + [repr(float(getattr(r, f)))
                                                         for f in ReportRow.FIELDS[2:]]))
    atomic_write(path, ("\n".join(lines) + "\n").encode())


def read_report(path):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != ReportRow.FIELDS:
            raise DataError(f"unexpected report header {reader.fieldnames}")
        return [ReportRow(r["run_id"], r["algorithm"],
                          *(float(r[f]) for f in ReportRow.FIELDS[2:])) for r in reader]


def _fmt(v):
    return str(v) if isinstance(v, (int, np.integer)) else repr(float(v))


def write_series_csv(path, series: dict):
    keys = list(series)
    n = len(series[keys[0]])
    lines = [",".join(keys)]
    for i in range(n):
        lines.append(",".join(_fmt(series[k][i]) for k in keys))
    atomic_write(path, ("\n".join(lines) + "\n").encode())


def write_status_csv(path, status, iters=None):
    lines = ["pixel,status" + (",iters" if iters is not None else "")]
    for k, s in enumerate(status):
        lines.append(f"{k},{int(s)}" + (f",{int(iters[k])}" if iters is not None else ""))
    atomic_write(path, ("\n".join(lines) + "\n").encode())


# -- images ----------------------------------------------------------------

def to_gray8(values, lo: float, hi: float) -> np.ndarray:
    """Linear map of ``[lo, hi]`` onto ``0..255`` (floor), clamping outside values."""
    if not hi > lo:
        raise ValueError("need lo < hi")
    v = np.clip((np.asarray(values, dtype=np.float64) - lo) / (hi - lo), 0.0, 1.0)
    return np.floor(v * 255.0).astype(np.uint8)


def encode_pgm(img8: np.ndarray) -> bytes:
    img8 = np.asarray(img8, dtype=np.uint8)
    rows, cols = img8.shape
    return f"P5\n{cols} {rows}\n255\n".encode("ascii") + img8.tobytes()


def write_pgm(path, values2d, lo=0.0, hi=1.0):
    atomic_write(path, encode_pgm(to_gray8(values2d, lo, hi)))


def read_pgm(path) -> np.ndarray:
    buf = Path(path).read_bytes()
    parts = buf.split(maxsplit=4)
    if parts[0] != b"P5" or int(parts[3]) != 255:
        raise DataError("not an 8-bit binary PGM")
    cols, rows = int(parts[1]), int(parts[2])
    return np.frombuffer(parts[4][:rows * cols], dtype=np.uint8).reshape(rows, cols)


# -- dictionary-learning checkpoints ---------------------------------------

def save_svdl_state(directory, state):
    d = Path(directory)
    for name, arr in state.arrays().items():
        write_matrix(d / f"{name}.almm", arr)
    meta = {"xi": state.xi, "iter": state.iter, "converged": state.converged,
            "degenerate": [int(v) for v in np.flatnonzero(state.degenerate)],
            "residuals": [None if math.isinf(r) else r for r in state.residuals],
            "history": {k: [list(v) if isinstance(v, tuple) else v for v in vals]
                        for k, vals in state.history.items()}}
    meta["history"]["residuals"] = [[None if math.isinf(r) else r for r in row]
                                    for row in meta["history"]["residuals"]]
    atomic_write(d / "state.json", json.dumps(meta).encode())


def load_svdl_state(directory):
    from .svdl import SvdlState

    d = Path(directory)
    meta = json.loads((d / "state.json").read_text())
    arrays = {}
    for name in SvdlState.ARRAYS:
        m = read_matrix(d / f"{name}.almm")
        arrays[name] = m.ravel() if name in ("S", "T", "Delta") else m
    N = arrays["X"].shape[1]
    degenerate = np.zeros(N, dtype=bool)
    degenerate[meta["degenerate"]] = True
    unnone = lambda r: math.inf if r is None else r  # noqa: E731
    history = meta["history"]
    history["residuals"] = [tuple(unnone(r) for r in row) for row in history["residuals"]]
    return SvdlState(**arrays, xi=meta["xi"], iter=meta["iter"], converged=meta["converged"],
                     degenerate=degenerate,
                     residuals=tuple(unnone(r) for r in meta["residuals"]), history=history)
