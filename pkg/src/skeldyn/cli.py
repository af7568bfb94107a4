"""Command-line front end.

Subcommands
-----------
``check``    hypothesis report (``report.json``); exit 0 iff every check passes.
``density``  Ulam invariant density (``density.csv``, ``marginals.csv``, ``spectral.json``).
``decay``    covariance curve and fit (``decay.csv``, ``fit.json``).
``example``  regression facts of a built-in example (``facts.json``).

Exit codes: 0 success, 1 hypothesis failure or inadmissible parameters,
2 configuration error, 3 no convergence, 4 insufficient or non-decaying signal.
Every output is a pure function of the arguments and the seed.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from . import io
from .correlation import (DecayCurve, ObservablePair, covariance_mc, covariance_op, fit_decay,
                          observable, decay_bound_factor)
from .exceptions import (ConfigError, ExcessiveHalting, InsufficientSignal, InvalidBounds,
                         NoConvergence, NotAdmissible, NotDecaying)
from .gallery import (LinearExample, NonlinearExample, admissibility, build_linear, build_nonlinear,
                      ground_truth_facts, linear_constants_report)
from .grids import GridFunction
from .hypotheses import full_report
from .map_model import induce
from .norms import NormParams
from .transfer import (SpectralReport, UlamOperator, build_ulam, invariant_density,
                       marginal_density, pf_apply_exact)

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NOCONV, EXIT_SIGNAL = 0, 1, 2, 3, 4


class _Exit(Exception):
    def __init__(self, code, message=""):
        super().__init__(message)
        self.code = code


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer")
    if v < 1:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _lags(text):
    """``N`` means lags ``0..N``; a comma list gives explicit lags."""
    try:
        if "," in text:
            vals = sorted({int(t) for t in text.split(",") if t.strip()})
        else:
            vals = list(range(int(text) + 1))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad lag list {text!r}")
    if not vals or vals[0] < 0:
        raise argparse.ArgumentTypeError("lags must be nonnegative")
    return vals


def build_parser():
    p = argparse.ArgumentParser(prog="skeldyn", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp_, grid=True):
        sp_.add_argument("--example", choices=["nonlinear", "linear"])
        sp_.add_argument("--a", type=int, default=1)
        sp_.add_argument("--b", type=int, default=101)
        sp_.add_argument("--L", type=float, default=1.0)
        sp_.add_argument("--config", type=Path, help="JSON map configuration")
        sp_.add_argument("--seed", type=int, required=False, default=None,
                         help="random seed (mandatory)")
        sp_.add_argument("--out", type=Path, default=Path("skeldyn-out"))
        sp_.add_argument("--threads", type=_positive_int, default=1)
        if grid:
            sp_.add_argument("--nx", type=_positive_int, default=64)
            sp_.add_argument("--ny", type=_positive_int, default=64)
            sp_.add_argument("--samples-per-cell", type=_positive_int, default=200)
            sp_.add_argument("--sampling", choices=["lattice", "random"], default="lattice")
            sp_.add_argument("--force", action="store_true", help="skip the hypothesis gate")

    c = sub.add_parser("check", help="verify the hypotheses")
    common(c, grid=False)
    c.add_argument("--samples", type=_positive_int, default=10_000)

    d = sub.add_parser("density", help="invariant density by Ulam's method")
    common(d)

    k = sub.add_parser("decay", help="decay of correlations")
    common(k)
    k.add_argument("--trajectories", type=_positive_int, default=100_000)
    k.add_argument("--lags", type=_lags, default=list(range(21)))
    k.add_argument("--F", default="x", help="observable F: x, one, x2 or step")
    k.add_argument("--H", default="x", help="observable H: x, one, x2 or step")
    k.add_argument("--eps0", type=float, default=None, help="norm parameter for the bound factor")

    e = sub.add_parser("example", help="regression facts of a built-in example")
    e.add_argument("name", choices=["nonlinear", "linear"])
    e.add_argument("--a", type=int, default=1)
    e.add_argument("--b", type=int, default=101)
    e.add_argument("--L", type=float, default=1.0)
    e.add_argument("--out", type=Path, default=Path("skeldyn-out"))
    return p


# ------------------------------------------------------------------ helpers

def _source(args):
    """Return ``(example_or_spec, identity)``; ``identity`` keys the cache."""
    if args.config is not None:
        try:
            raw = Path(args.config).read_bytes()
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}")
        obj = io.load_map_config(args.config)
        return obj, {"config_sha256": hashlib.sha256(raw).hexdigest()}
    if args.example == "nonlinear":
        return build_nonlinear(), {"example": "nonlinear"}
    if args.example == "linear":
        return build_linear(args.a, args.b, args.L), {"example": "linear", "a": args.a, "b": args.b,
                                                      "L": args.L}
    raise ConfigError("choose a map with --example or --config", key="example")


def _spec(obj):
    return getattr(obj, "spec", obj)


def _require_seed(args):
    if args.seed is None:
        raise ConfigError("--seed is mandatory", key="seed")
    return args.seed


def _gate(args, spec, seed):
    if getattr(args, "force", False):
        return
    report = full_report(spec, samples=1000, seed=seed, partition_samples=20_000, geometric_samples=100)
    if not report.overall:
        failed = [c.id for c in report.checks if not c.passed]
        raise _Exit(EXIT_FAIL, f"hypotheses fail ({', '.join(failed)}); use --force to override")


def _cache_key(identity, args):
    key = dict(identity, nx=args.nx, ny=args.ny, spc=args.samples_per_cell, seed=args.seed,
               sampling=args.sampling)
    return hashlib.sha256(json.dumps(key, sort_keys=True).encode()).hexdigest()[:16]


def _density(args, obj, identity):
    """Build or reload the Ulam operator and invariant density."""
    sys_ = induce(_spec(obj))
    cache = args.out / "cache" / _cache_key(identity, args)
    if (cache / "meta.json").exists():
        meta = json.loads((cache / "meta.json").read_text())
        m = sp.csr_matrix((np.load(cache / "data.npy"), np.load(cache / "indices.npy"),
                           np.load(cache / "indptr.npy")), shape=(args.nx * args.ny,) * 2)
        op = UlamOperator(sys_.omega, args.nx, args.ny, m, args.samples_per_cell, args.seed,
                          args.sampling, meta["delta_halt"])
        mass = np.load(cache / "mass.npy")
        rep = SpectralReport([complex(*e) for e in meta["leading"]], op.to_grid(mass),
                             meta["gap"], meta["peripheral_count"], meta["iterations"], meta["residual"],
                             meta["method"], [complex(*e) for e in meta["eigenvalues"]])
        return sys_, op, rep
    op = build_ulam(sys_, args.nx, args.ny, args.samples_per_cell, args.seed, args.sampling, args.threads)
    try:
        rep = invariant_density(op, k_eigs=6)
    except NoConvergence as exc:
        args.out.mkdir(parents=True, exist_ok=True)
        with open(args.out / "residuals.csv", "w") as fh:
            fh.write("iteration,residual\n")
            for i, r in enumerate(exc.residuals, 1):
                fh.write(f"{i},{io.FMT % r}\n")
        raise
    cache.mkdir(parents=True, exist_ok=True)
    m = op.matrix
    np.save(cache / "data.npy", m.data)
    np.save(cache / "indices.npy", m.indices)
    np.save(cache / "indptr.npy", m.indptr)
    np.save(cache / "mass.npy", np.asarray(rep.invariant_density.values).ravel() * op.cell_area)
    meta = {"delta_halt": op.halt_fraction, "gap": rep.gap_estimate, "peripheral_count": rep.peripheral_count,
            "iterations": rep.iterations, "residual": rep.residual, "method": rep.method,
            "leading": [[e.real, e.imag] for e in rep.leading_eigs],
            "eigenvalues": [[e.real, e.imag] for e in rep.eigenvalues]}
    (cache / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    return sys_, op, rep


# ----------------------------------------------------------------- commands

def cmd_check(args):
    seed = _require_seed(args)
    args.out.mkdir(parents=True, exist_ok=True)
    extra = {}
    try:
        obj, _ = _source(args)
    except NotAdmissible as exc:
        obj = linear_constants_report(args.a, args.b, args.L)
        extra = {"admissible": False, "S": exc.S, "bound": exc.bound, "borderline": exc.borderline}
    report = full_report(_spec(obj), samples=args.samples, seed=seed)
    rec = io.hypothesis_record(report)
    if isinstance(obj, LinearExample):
        ok, S, bound, borderline = admissibility(obj.a, obj.b)
        rec["admissibility"] = extra or {"admissible": ok, "S": S, "bound": bound, "borderline": borderline}
    io.write_json(args.out / "report.json", rec)
    print(f"overall: {rec['overall']}")
    for c in rec["checks"]:
        print(f"  {c['id']:<10} {c['status']:<13} {c['note']}")
    if extra:
        print(f"  admissibility fails: |a| must be below {extra['bound']:.6g}")
        return EXIT_FAIL
    return EXIT_OK if report.overall else EXIT_FAIL


def cmd_density(args):
    seed = _require_seed(args)
    obj, identity = _source(args)
    _gate(args, _spec(obj), seed)
    sys_, op, rep = _density(args, obj, identity)
    h = rep.invariant_density
    f1, f2 = marginal_density(h, sys_.gamma)
    args.out.mkdir(parents=True, exist_ok=True)
    io.write_grid_csv(args.out / "density.csv", h)
    if f1.n == f2.n:
        io.write_1d_csv(args.out / "marginals.csv", [f1, f2], ["f_first", "f_second"])
    else:
        io.write_1d_csv(args.out / "marginal_first.csv", [f1], ["f_first"])
        io.write_1d_csv(args.out / "marginal_second.csv", [f2], ["f_second"])
    uniform = 1.0 / sys_.omega.area
    vals = np.asarray(h.values)
    extra = {"integral": h.integral(), "max_relative_deviation_from_uniform": float(np.abs(vals / uniform - 1).max()),
             "coefficient_of_variation": float(vals.std() / vals.mean())}
    io.write_json(args.out / "spectral.json", io.spectral_record(rep, op, extra))
    print(f"density: {args.nx}x{args.ny}, iterations {rep.iterations}, residual {rep.residual:.3g}, "
          f"max deviation from uniform {extra['max_relative_deviation_from_uniform']:.4g}")
    return EXIT_OK


def cmd_decay(args):
    seed = _require_seed(args)
    obj, identity = _source(args)
    _gate(args, _spec(obj), seed)
    sys_, op, rep = _density(args, obj, identity)
    h = rep.invariant_density
    L = sys_.L
    try:
        pair = ObservablePair(observable(args.F, L, h.nx), observable(args.H, L, h.nx))
    except ValueError as exc:
        raise ConfigError(str(exc), key="F/H")
    params = None
    if args.eps0 is not None:
        try:
            params = NormParams(_spec(obj).alpha, args.eps0, _spec(obj).eps1).validate(sys_.gamma)
        except InvalidBounds as exc:
            raise ConfigError(str(exc), key="eps0")
    lags = np.asarray(args.lags)
    cop = covariance_op(op, h, pair, lags)
    mc = covariance_mc(sys_, pair, lags, args.trajectories, seed, h)
    args.out.mkdir(parents=True, exist_ok=True)
    pos = lags >= 1
    curve = DecayCurve(lags, mc.cov, mc.stderr, cop)
    fit = fit_decay(lags[pos], cop[pos])
    curve.fit = fit
    io.write_decay_csv(args.out / "decay.csv", curve)
    agree = curve.agrees(fit.window)
    summary = {
        "rho": fit.rho, "C": fit.C, "window": fit.window,
        "estimator_agreement": "pass" if bool(np.all(agree)) else "fail",
        "bound_holds_on_window": bool(np.all(curve.bound_holds())),
        "halted_fraction": mc.halted_fraction,
        "seeds": {"density": args.seed, "trajectories": seed},
        "grid": {"nx": args.nx, "ny": args.ny, "samples_per_cell": args.samples_per_cell},
        "trajectories": args.trajectories, "observables": {"F": args.F, "H": args.H},
    }
    if params is not None:
        t4 = decay_bound_factor(pair, params, L, sys_.gamma, h)
        summary["bound_factor"] = {"value": t4.value, "tr_F_l1_mu": t4.tr_F_l1_mu, "tr_norm_H": t4.tr_norm_H,
                                   "eps0": args.eps0, "constant_multiplier": 1.0, "constant_symbolic": True}
    io.write_json(args.out / "fit.json", summary)
    print(f"rho = {fit.rho:.6g}, C = {fit.C:.6g}, window {fit.window[0]}..{fit.window[-1]}, "
          f"estimators {'agree' if np.all(agree) else 'disagree'}")
    return EXIT_OK


def cmd_example(args):
    args.out.mkdir(parents=True, exist_ok=True)
    if args.name == "nonlinear":
        ex = build_nonlinear()
    else:
        ex = build_linear(args.a, args.b, args.L)
    facts = ground_truth_facts(ex)
    checks = {}
    if isinstance(ex, NonlinearExample):
        z = np.linspace(0.52, 1.48, 50)
        y = np.full_like(z, -0.083)
        v = pf_apply_exact(ex, 1.0, np.column_stack([z + 6 * y, y]))
        checks["P1_increasing_region3"] = bool(np.all(np.diff(v) > 0))
    else:
        rng = np.random.default_rng(0)
        g = ex.gamma
        pts = np.column_stack([rng.uniform(-ex.L, ex.L, 1000), rng.uniform(-g * ex.L, g * ex.L, 1000)])
        checks["uniform_density"] = bool(np.nanmax(np.abs(pf_apply_exact(ex, 1.0, pts) - 1.0)) < 1e-12)
    rec = {"example": args.name, "facts": [{"id": f.id, "statement": f.statement, "value": f.value} for f in facts],
           "verified": checks}
    io.write_json(args.out / "facts.json", rec)
    for f in facts:
        print(f"  {f.id:<24} {f.value}")
    ok = all(checks.values()) and all(f.value for f in facts if f.id == "eta_lt_1")
    print("facts verified" if ok else "fact verification FAILED")
    return EXIT_OK if ok else EXIT_FAIL


COMMANDS = {"check": cmd_check, "density": cmd_density, "decay": cmd_decay, "example": cmd_example}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except _Exit as exc:
        print(str(exc), file=sys.stderr)
        return exc.code
    except NotAdmissible as exc:
        print(f"not admissible: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except ConfigError as exc:
        where = f" (key: {exc.key})" if exc.key else ""
        print(f"config error{where}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        if isinstance(exc, (InsufficientSignal, NotDecaying)):
            print(f"decay fit failed: {exc}", file=sys.stderr)
            return EXIT_SIGNAL
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NoConvergence as exc:
        print(f"no convergence: {exc} (residual trace in {args.out / 'residuals.csv'})", file=sys.stderr)
        return EXIT_NOCONV
    except ExcessiveHalting as exc:
        print(f"too many halted trajectories: {exc}", file=sys.stderr)
        return EXIT_SIGNAL


if __name__ == "__main__":
    sys.exit(main())
