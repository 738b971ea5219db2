"""Command-line interface.

Subcommands expose the solvers, oracles and sweeps with JSON config
files and explicit seeds so that every invocation is reproducible:
identical flags, config and seed produce byte-identical CSV output.

Config format: a JSON object with a flat ``params`` object mirroring
the model-parameter field names and an optional ``space`` object with a
``dims`` array.  Unknown keys anywhere are rejected.  All rates are in
units of kappa1; a config that sets kappa1 != 1 is rejected with an
explanation instead of being silently rescaled.

Exit codes: 0 success, 1 numeric failure, 2 bad input.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from . import classical, experiments, oracles, spectrum
from .fock import build_space
from .model import DimensionOverflowError, ModelParams, liouvillian
from .steady import (SteadyStateError, UndefinedCorrelationError, g2_equal_time,
                     solve_steady_state)
from .trajectory import TrajectoryBlowupError, evolve_trajectory

_PARAM_KEYS = {"drive", "chi", "kappa1", "kappa2", "delta1a", "delta1b", "delta2", "v1", "v2"}


class ConfigError(ValueError):
    pass


def load_config(path) -> tuple[ModelParams, list[int] | None]:
    """Parse and strictly validate a model config file."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    extra = set(doc) - {"params", "space"}
    if extra:
        raise ConfigError(f"unknown top-level config keys: {sorted(extra)}")
    raw = doc.get("params", {})
    extra = set(raw) - _PARAM_KEYS
    if extra:
        raise ConfigError(f"unknown params keys: {sorted(extra)} "
                          f"(valid: {sorted(_PARAM_KEYS)})")
    if "kappa1" in raw and raw["kappa1"] != 1:
        raise ConfigError(
            "kappa1 must be 1: all rates are expressed in units of kappa1 "
            "(time unit 1/kappa1). Divide your rates by kappa1 instead.")
    missing = {"drive", "chi"} - set(raw)
    if missing:
        raise ConfigError(f"params must set {sorted(missing)}")
    try:
        params = ModelParams(**raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid params: {exc}") from exc
    dims = None
    if "space" in doc:
        extra = set(doc["space"]) - {"dims"}
        if extra:
            raise ConfigError(f"unknown space keys: {sorted(extra)}")
        dims = list(doc["space"]["dims"])
        if len(dims) not in (2, 4):
            raise ConfigError("space.dims must list 2 (single cavity) or 4 dims")
    return params, dims


def _default_dims(params: ModelParams, two_cavity: bool) -> list[int]:
    return [3, 2, 3, 2] if two_cavity else [4, 3]


def _fmt(x) -> str:
    return format(float(x), ".10g")


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([format(v, ".17g") if isinstance(v, float) else str(v)
                             for v in row])


def cmd_steady(args) -> int:
    params, dims = load_config(args.config)
    two_cavity = params.v1 != 0 or params.v2 != 0 or dims is not None and len(dims) == 4
    if dims is None:
        dims = _default_dims(params, two_cavity)
    space = build_space(dims)
    rho = solve_steady_state(liouvillian(params, space, max_dim=None), space)
    pops = rho.populations()
    print("photon numbers:")
    for name, value in pops.items():
        print(f"  <n_{name}> = {_fmt(value)}")
    pairs = [("a1", "a2")]
    if space.n_modes == 4:
        pairs += [("b1", "b2"), ("a1", "b1"), ("a2", "b2")]
    rows = []
    for a, b in pairs:
        try:
            g = g2_equal_time(rho, a, b)
            print(f"g2({a},{b}) = {_fmt(g.value)}")
            rows.append((f"g2_{a}_{b}", g.value))
        except UndefinedCorrelationError:
            print(f"g2({a},{b}) = undefined (population below floor)")
            rows.append((f"g2_{a}_{b}", float("nan")))
    if rho.truncation_suspect:
        print("warning: truncation-suspect (top Fock level population above threshold)")
    if args.out:
        header = [f"n_{m}" for m in space.mode_names] + [r[0] for r in rows]
        _write_csv(args.out, header,
                   [[*(float(v) for v in pops.values()), *(float(v) for _, v in rows)]])
        print(f"wrote {args.out}")
    return 0


def cmd_trajectory(args) -> int:
    params, dims = load_config(args.config)
    two_cavity = params.v1 != 0 or params.v2 != 0 or dims is not None and len(dims) == 4
    if dims is None:
        dims = _default_dims(params, two_cavity)
    space = build_space(dims)
    rec = evolve_trajectory(params, space, args.tfinal, dt=args.dt, seed=args.seed)
    print(f"trajectory: {rec.jump_times.size} jumps over t={args.tfinal} "
          f"(seed {args.seed}, dt {args.dt})")
    means = rec.photon_numbers.mean(axis=0)
    for name, value in zip(space.mode_names, means):
        print(f"  time-mean <n_{name}> = {_fmt(value)}")
    if args.out:
        rec.to_csv(args.out)
        print(f"wrote {args.out}")
    return 0


def cmd_classical(args) -> int:
    params, dims = load_config(args.config)
    x0 = classical.limit_cycle_initial_state(params)
    path = classical.integrate(params, x0, args.tfinal, noise_sigma=args.noise,
                               seed=args.seed)
    g = classical.classical_g2(path, None, ("a1", "b1"))
    cls = classical.classify_synchronization(path)
    print(f"g2(a1,b1) = {_fmt(g.value)}")
    print(f"synchronization: {cls.value}")
    for name in ("a1", "a2", "b1", "b2"):
        series = path.mode_photon_series(name)
        tail = path.times >= classical.default_transient(path.times)
        print(f"  tail-mean |{name}|^2 = {_fmt(series[tail].mean())}")
    if args.out:
        header = ["t"]
        for name in ("a1", "a2", "b1", "b2"):
            header += [f"re_{name}", f"im_{name}"]
        header += [f"n_{name}" for name in ("a1", "a2", "b1", "b2")]
        rows = []
        for k, t in enumerate(path.times):
            z = path.states[k]
            row = [float(t)]
            for c in z:
                row += [float(c.real), float(c.imag)]
            row += [float(abs(c) ** 2) for c in z]
            rows.append(row)
        _write_csv(args.out, header, rows)
        print(f"wrote {args.out}")
    return 0


def cmd_hopf(args) -> int:
    params, _ = load_config(args.config)
    result = classical.hopf_threshold(params, tuple(args.bracket))
    print(f"E_c = {_fmt(result.e_critical)}")
    print(f"threshold eigenvalue pair = {_fmt(result.eigenvalue.real)} "
          f"+- {_fmt(result.eigenvalue.imag)} i")
    print(f"limit-cycle frequency at onset = {_fmt(result.eigenvalue.imag)} rad / (1/kappa1)")
    return 0


def cmd_spectrum(args) -> int:
    params, dims = load_config(args.config)
    if dims is None:
        dims = [5, 3]
    space = build_space(dims)
    manifold = spectrum.ManifoldSpec.parse(args.manifold)
    h = spectrum.undriven_hamiltonian(params, space)
    evals, _ = spectrum.manifold_eigensystem(h, space, manifold)
    states = " ".join("|" + ",".join(str(n) for n in occ) + ">" for occ in manifold.indices)
    print(f"manifold {states}")
    print("eigenvalues (units kappa1):")
    for value in evals:
        print(f"  {_fmt(value)}")
    return 0


def cmd_oracle(args) -> int:
    if args.which == "g2-single":
        value = oracles.g2_single_cavity_quantum(args.chi, args.k1, args.k2, args.d1, args.d2)
    elif args.which == "g2-cross":
        value = oracles.g2_cross_quantum_limit(args.d1a, args.d1b, args.k1, args.v1)
    else:
        value = oracles.nonmonotonicity_threshold(args.k1)
        print(_fmt(value))
        if args.d1 is not None:
            strengthened = oracles.split_strengthens_correlation(args.d1, args.k1)
            print(f"split strengthens correlation at delta1={args.d1}: {strengthened}")
        return 0
    print(_fmt(value))
    return 0


def cmd_sweep(args) -> int:
    with open(args.spec) as fh:
        spec = experiments.SweepSpec.from_json(fh.read())
    result = experiments.run_sweep(spec, n_workers=args.workers)
    csv_path, json_path = experiments.persist(result, args.out)
    failed = result.failed_rows()
    print(f"wrote {csv_path} and {json_path} ({len(result.rows)} points, "
          f"{len(failed)} failed)")
    return 1 if failed else 0


def cmd_figures(args) -> int:
    try:
        import shgsync_figures
    except ImportError:
        print("the figures package (shgsync-figures) is not installed; "
              "install it to render figures from sweep results", file=sys.stderr)
        return 2
    return shgsync_figures.render_cli(args.result, args.kind, args.out)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shgsync",
        description="Quantum and classical photon-correlation simulator for "
                    "coupled second-harmonic-generation cavities.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("steady", help="single steady-state solve: photon numbers and g2")
    p.add_argument("--config", required=True, help="JSON config (params + optional space.dims)")
    p.add_argument("--out", help="write a one-row CSV of the reported values")
    p.set_defaults(func=cmd_steady)

    p = sub.add_parser("trajectory", help="one quantum trajectory record")
    p.add_argument("--config", required=True)
    p.add_argument("--tfinal", type=float, required=True, help="duration (units 1/kappa1)")
    p.add_argument("--dt", type=float, default=0.005, help="integrator step (<= 0.01)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write CSV columns t, n_a1, n_a2[, n_b1, n_b2]")
    p.set_defaults(func=cmd_trajectory)

    p = sub.add_parser("classical", help="classical path, g2 and synchronization class")
    p.add_argument("--config", required=True)
    p.add_argument("--tfinal", type=float, required=True)
    p.add_argument("--noise", type=float, default=0.0, help="additive white-noise strength")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write CSV (t, Re/Im amplitudes, photon numbers)")
    p.set_defaults(func=cmd_classical)

    p = sub.add_parser("hopf", help="critical drive of the oscillatory instability")
    p.add_argument("--config", required=True)
    p.add_argument("--bracket", type=float, nargs=2, required=True, metavar=("LO", "HI"))
    p.set_defaults(func=cmd_hopf)

    p = sub.add_parser("spectrum", help="eigenvalues of an undriven-Hamiltonian manifold")
    p.add_argument("--config", required=True)
    p.add_argument("--manifold", required=True,
                   help="semicolon-separated occupations, e.g. '2,0;0,1'")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("oracle", help="closed-form quantum-limit values")
    which = p.add_subparsers(dest="which", required=True)
    q = which.add_parser("g2-single", help="single-cavity g2(a1,a2) in the quantum limit")
    q.add_argument("--chi", type=float, required=True)
    q.add_argument("--k1", type=float, default=1.0)
    q.add_argument("--k2", type=float, default=0.5)
    q.add_argument("--d1", type=float, default=0.0)
    q.add_argument("--d2", type=float, default=0.0)
    q = which.add_parser("g2-cross", help="two-cavity g2(a1,b1) in the quantum limit")
    q.add_argument("--d1a", type=float, required=True)
    q.add_argument("--d1b", type=float, required=True)
    q.add_argument("--k1", type=float, default=1.0)
    q.add_argument("--v1", type=float, required=True)
    q = which.add_parser("threshold", help="detuning above which a split strengthens g2")
    q.add_argument("--k1", type=float, default=1.0)
    q.add_argument("--d1", type=float, default=None,
                   help="also evaluate the strengthening predicate at this detuning")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("sweep", help="run a sweep spec and persist CSV + JSON sidecar")
    p.add_argument("--spec", required=True, help="SweepSpec JSON file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("figures", help="render figures from a sweep result directory")
    p.add_argument("--result", required=True)
    p.add_argument("--kind", default="auto")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_figures)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (SteadyStateError, UndefinedCorrelationError, TrajectoryBlowupError,
            classical.NonConvergenceError, spectrum.ManifoldLeakageError,
            DimensionOverflowError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"bad input: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
