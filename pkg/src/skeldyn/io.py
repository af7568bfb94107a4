"""Map configuration files and plain-text outputs.

Map configuration (JSON)
------------------------
Built-in example::

    {"example": "nonlinear"}
    {"example": "linear", "a": 1, "b": 101, "L": 1}

Coefficient tables::

    {"family": "linear", "L": 1, "alpha": 1, "eps1": 1, "Y": 3,
     "branches": [{"a": 1, "b": 101, "c": 0, "lo": -1, "hi": 1}, ...]}

    {"family": "quadratic", "L": 1, "alpha": 1, "eps1": 1, "Y": 3, "A": 144, "M": 2,
     "branches": [{"c2": -35.5, "c1": -214, "c0": -0.5, "height": 1}, ...]}

A linear row is the piece ``lo < a v + b u < hi`` with
``phi = a v + b u + c``. A quadratic row is the piece
``f(u) < v < f(u) + height`` with ``f(u) = c2 u^2 + c1 u + c0`` and
``phi = (2L / height)(v - f(u)) - L``. Each row may carry ``A``, ``M`` and
``holder_C``; otherwise the top-level values apply (linear rows default to
``A = |b|``, ``M = |a|``, ``holder_C = 0``). Pieces are always intersected
with the open square.

Outputs
-------
All numbers are written with ``%.17g`` so files round-trip exactly and are
byte-identical across runs.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .exceptions import ConfigError
from .gallery import build_linear, build_nonlinear
from .grids import GridFunction, GridFunction1D, Rect
from .map_model import Branch, Piece, PiecewiseMapSpec, square_constraints

FMT = "%.17g"


def _num(cfg, key, default=None, kind=float, where=""):
    name = f"{where}{key}"
    if key not in cfg:
        if default is None:
            raise ConfigError(f"missing key {name!r}", key=name)
        return default
    val = cfg[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"key {name!r} must be a number, got {val!r}", key=name)
    if kind is int and int(val) != val:
        raise ConfigError(f"key {name!r} must be an integer, got {val!r}", key=name)
    if not math.isfinite(val):
        raise ConfigError(f"key {name!r} must be finite", key=name)
    return kind(val)


def load_map_config(path):
    """Load a map from a JSON configuration file.

    Returns a built-in example object (with ``.spec``) or a
    :class:`PiecewiseMapSpec`.

    Raises
    ------
    ConfigError
        On unreadable JSON or a missing/malformed key; ``key`` names it.
    """
    try:
        cfg = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}", key=None) from exc
    return map_from_config(cfg)


def map_from_config(cfg):
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object", key=None)
    if "example" in cfg:
        name = cfg["example"]
        if name == "nonlinear":
            return build_nonlinear()
        if name == "linear":
            return build_linear(_num(cfg, "a", kind=int), _num(cfg, "b", kind=int), _num(cfg, "L", 1.0))
        raise ConfigError(f"unknown example {name!r}", key="example")
    family = cfg.get("family")
    if family not in ("linear", "quadratic"):
        raise ConfigError("need 'example' or 'family' in {'linear', 'quadratic'}", key="family")
    L = _num(cfg, "L")
    alpha = _num(cfg, "alpha", 1.0)
    eps1 = _num(cfg, "eps1")
    Y = _num(cfg, "Y", kind=int)
    rows = cfg.get("branches")
    if not isinstance(rows, list) or not rows:
        raise ConfigError("key 'branches' must be a non-empty list", key="branches")
    make = _linear_row if family == "linear" else _quadratic_row
    pieces = tuple(make(k, row, cfg, L) for k, row in enumerate(rows))
    try:
        return PiecewiseMapSpec(L=L, alpha=alpha, eps1=eps1, Y=Y, pieces=pieces,
                                name=str(cfg.get("name", family)))
    except ValueError as exc:
        raise ConfigError(str(exc), key=None) from exc


def _linear_row(k, row, cfg, L):
    w = f"branches[{k}]."
    if not isinstance(row, dict):
        raise ConfigError(f"branches[{k}] must be an object", key=f"branches[{k}]")
    a = _num(row, "a", where=w)
    b = _num(row, "b", where=w)
    c = _num(row, "c", 0.0, where=w)
    lo = _num(row, "lo", where=w)
    hi = _num(row, "hi", where=w)
    A = _num(row, "A", _num(cfg, "A", abs(b)), where=w)
    M = _num(row, "M", _num(cfg, "M", abs(a)), where=w)
    C = _num(row, "holder_C", _num(cfg, "holder_C", 0.0), where=w)

    def value(u, v):
        return a * np.asarray(v, float) + b * np.asarray(u, float) + c

    def gradient(u, v):
        shape = np.broadcast(np.asarray(u), np.asarray(v)).shape
        return np.full(shape, b), np.full(shape, a)

    cons = square_constraints(L) + (
        lambda u, v: lo - (a * np.asarray(v) + b * np.asarray(u)),
        lambda u, v: (a * np.asarray(v) + b * np.asarray(u)) - hi,
    )
    return Piece(k, cons, Branch(value, gradient, A, M, C))


def _quadratic_row(k, row, cfg, L):
    w = f"branches[{k}]."
    if not isinstance(row, dict):
        raise ConfigError(f"branches[{k}] must be an object", key=f"branches[{k}]")
    c2 = _num(row, "c2", where=w)
    c1 = _num(row, "c1", where=w)
    c0 = _num(row, "c0", where=w)
    height = _num(row, "height", where=w)
    if not height > 0:
        raise ConfigError(f"key {w}height must be positive", key=f"{w}height")
    A = _num(row, "A", _num(cfg, "A") if "A" in cfg else None, where=w)
    M = _num(row, "M", _num(cfg, "M") if "M" in cfg else None, where=w)
    C = _num(row, "holder_C", _num(cfg, "holder_C", abs(4.0 * L * c2 / height)), where=w)
    s = 2.0 * L / height

    def f(u):
        u = np.asarray(u, float)
        return c2 * u * u + c1 * u + c0

    def value(u, v):
        return s * (np.asarray(v, float) - f(u)) - L

    def gradient(u, v):
        u = np.asarray(u, float)
        return -s * (2.0 * c2 * u + c1), np.full(np.broadcast(u, np.asarray(v)).shape, s)

    cons = square_constraints(L) + (
        lambda u, v: f(u) - np.asarray(v),
        lambda u, v: np.asarray(v) - f(u) - height,
    )
    return Piece(k, cons, Branch(value, gradient, A, M, C))


# ------------------------------------------------------------------ writers

def _fmt(x):
    return FMT % x


def write_grid_csv(path, g):
    """Header lines document the rectangle and resolution, then ``x_index,y_index,value`` rows."""
    r = g.rect
    with open(path, "w", newline="") as fh:
        fh.write(f"# rect x0={_fmt(r.x0)} x1={_fmt(r.x1)} y0={_fmt(r.y0)} y1={_fmt(r.y1)}\n")
        fh.write(f"# resolution nx={g.nx} ny={g.ny}\n")
        fh.write("x_index,y_index,value\n")
        for i in range(g.nx):
            for j in range(g.ny):
                fh.write(f"{i},{j},{_fmt(g.values[i, j])}\n")


def read_grid_csv(path):
    meta = {}
    rows = []
    with open(path) as fh:
        for line in fh:
            if line.startswith("#"):
                for tok in line[1:].split()[1:]:
                    k, v = tok.split("=")
                    meta[k] = v
            elif not line.startswith("x_index"):
                rows.append(line.strip().split(","))
    nx, ny = int(meta["nx"]), int(meta["ny"])
    vals = np.zeros((nx, ny))
    for i, j, v in rows:
        vals[int(i), int(j)] = float(v)
    rect = Rect(*(float(meta[k]) for k in ("x0", "x1", "y0", "y1")))
    return GridFunction(rect, vals)


def write_1d_csv(path, fns, names):
    """Columns ``x`` (cell centres) then one column per function."""
    n = fns[0].n
    if any(f.n != n for f in fns):
        raise ValueError("1-D functions must share a grid")
    with open(path, "w", newline="") as fh:
        fh.write(f"# interval a={_fmt(fns[0].a)} b={_fmt(fns[0].b)} n={n}\n")
        fh.write(",".join(["x"] + list(names)) + "\n")
        xs = fns[0].centers()
        for k in range(n):
            fh.write(",".join([_fmt(xs[k])] + [_fmt(f.values[k]) for f in fns]) + "\n")


def write_operator_csv(path, op):
    """Sparse triplets ``row,col,value`` in row-major order."""
    m = op.matrix.tocoo()
    order = np.lexsort((m.col, m.row))
    with open(path, "w", newline="") as fh:
        fh.write(f"# ulam nx={op.nx} ny={op.ny} samples_per_cell={op.samples_per_cell} "
                 f"seed={op.seed} sampling={op.sampling}\n")
        fh.write("row,col,value\n")
        for k in order:
            fh.write(f"{m.row[k]},{m.col[k]},{_fmt(m.data[k])}\n")


def write_decay_csv(path, curve):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["lag", "cov_mc", "stderr", "cov_op"])
        for n, a, s, b in zip(curve.lags, curve.cov_mc, curve.stderr, curve.cov_op):
            w.writerow([int(n), _fmt(a), _fmt(s), _fmt(b)])


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag, "modulus": abs(obj)}
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def write_json(path, record):
    """Structured text record; keys keep insertion order for a stable layout."""
    Path(path).write_text(json.dumps(_clean(record), indent=2) + "\n")


def hypothesis_record(report):
    return {
        "overall": "pass" if report.overall else "fail",
        "constants": {"A": report.A, "M": report.M, "s": report.s, "eta": report.eta, "gamma": report.gamma},
        "checks": [
            {"id": c.id, "status": c.status, "samples_used": c.samples_used,
             "witnesses": [list(w) for w in c.witnesses], "note": c.note}
            for c in report.checks
        ],
    }


def spectral_record(report, op, extra=None):
    rec = {
        "grid": {"nx": op.nx, "ny": op.ny, "samples_per_cell": op.samples_per_cell,
                 "sampling": op.sampling, "seed": op.seed},
        "delta_halt": op.halt_fraction,
        "method": report.method,
        "iterations": report.iterations,
        "residual": report.residual,
        "eigenvalues": list(report.eigenvalues),
        "peripheral_count": report.peripheral_count,
        "gap_estimate": report.gap_estimate,
    }
    if extra:
        rec.update(extra)
    return rec
