"""Parameter sweeps reproducing the synchronization and correlation maps.

Three sweep kinds are provided:

* ``transition`` - the quantum-classical transition: g2(a1,b1) vs drive
  at fixed drive*chi, solved per point with the cheapest adequate
  backend (direct steady state for small spaces, trajectory averaging
  for large ones).
* ``phase_diagram`` - in-/anti-phase map over (delta1, delta2) for
  identical cavities, classical (limit-cycle integration at E_c+offset)
  or quantum (closed-form limit, cross-checked by direct solves).
* ``detuning`` - g2(a1,b1) vs the detuning split of nonidentical
  cavities at fixed average detuning, classical or quantum.

Every grid point is resolved to a full parameter set before running, so
any row of a result can be recomputed standalone; per-point seeds are
derived from the sweep-spec hash.  Results persist as a CSV table plus
a JSON sidecar holding the spec, schema and metadata.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import classical, oracles
from .fock import build_space
from .model import ModelParams, liouvillian
from .steady import g2_equal_time, solve_steady_state
from .trajectory import estimate_g2

SCHEMA_VERSION = "1"

# direct steady-state solves are fast below this vectorized size on a
# desk machine; the sparse LU fill-in of the 4-mode Liouvillian grows
# steeply beyond it, so larger points go to the trajectory backend
DIRECT_VEC_BUDGET = 8200

_TRANSITION_COLUMNS = [
    "index", "drive", "chi", "kappa2", "delta1a", "delta1b", "delta2", "v1", "v2",
    "backend", "dims", "g2_a1b1", "g2_error", "n_a1", "n_b1", "tail_max",
    "truncation_suspect", "seed", "status", "wall_time",
]
_PHASE_COLUMNS = [
    "index", "delta1", "delta2", "drive", "chi", "kappa2", "v1", "v2", "backend",
    "e_critical", "g2_a1b1", "g2_oracle", "classification", "seed", "status", "wall_time",
]
_DETUNING_COLUMNS = [
    "index", "delta_split", "delta1a", "delta1b", "drive", "chi", "kappa2", "delta2",
    "v1", "v2", "backend", "g2_a1b1", "g2_error", "g2_oracle", "classification",
    "seed", "status", "wall_time",
]

_SCHEMAS = {
    "transition": _TRANSITION_COLUMNS,
    "phase_diagram": _PHASE_COLUMNS,
    "detuning": _DETUNING_COLUMNS,
}


@dataclass(frozen=True)
class SweepSpec:
    """Declarative description of one sweep; hashable and JSON round-trippable."""

    kind: str                    # 'transition' | 'phase_diagram' | 'detuning'
    base: ModelParams
    axes: dict                   # axis name -> list of grid values
    constraint: dict = field(default_factory=dict)
    backend: str = "auto"        # 'auto'|'steady'|'trajectory'|'classical'|'oracle'
    mode: str = ""               # phase_diagram: 'classical' | 'quantum'
    solver: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in _SCHEMAS:
            raise ValueError(f"unknown sweep kind {self.kind!r}")
        if not self.axes:
            raise ValueError("sweep needs at least one axis")
        valid_axes = {"drive", "chi", "kappa2", "delta1a", "delta1b", "delta2",
                      "v1", "v2", "delta1", "delta_split"}
        for name, grid in self.axes.items():
            if name not in valid_axes:
                raise ValueError(f"unknown axis {name!r}; valid axes: {sorted(valid_axes)}")
            if len(list(grid)) == 0:
                raise ValueError(f"axis {name!r} has an empty grid")

    def to_json(self) -> str:
        doc = {
            "kind": self.kind,
            "base": asdict(self.base),
            "axes": {k: list(v) for k, v in self.axes.items()},
            "constraint": self.constraint,
            "backend": self.backend,
            "mode": self.mode,
            "solver": self.solver,
        }
        return json.dumps(doc, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "SweepSpec":
        doc = json.loads(text)
        known = {"kind", "base", "axes", "constraint", "backend", "mode", "solver"}
        extra = set(doc) - known
        if extra:
            raise ValueError(f"unknown keys in sweep spec: {sorted(extra)}")
        return SweepSpec(
            kind=doc["kind"],
            base=ModelParams(**doc["base"]),
            axes={k: list(v) for k, v in doc["axes"].items()},
            constraint=doc.get("constraint", {}),
            backend=doc.get("backend", "auto"),
            mode=doc.get("mode", ""),
            solver=doc.get("solver", {}),
        )

    def spec_hash(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()

    def grid(self) -> list[dict]:
        """Cartesian product of the axes, row-major in axis declaration order."""
        names = list(self.axes)
        shape = [len(self.axes[n]) for n in names]
        points = []
        for flat in range(math.prod(shape)):
            rem, coords = flat, []
            for s in reversed(shape):
                coords.append(rem % s)
                rem //= s
            coords.reverse()
            points.append({n: self.axes[n][c] for n, c in zip(names, coords)})
        return points

    def point_seed(self, index: int) -> int:
        digest = hashlib.sha256(f"{self.spec_hash()}:{index}".encode()).digest()
        return int.from_bytes(digest[:8], "big") >> 1


@dataclass
class SweepResult:
    spec: SweepSpec
    rows: list[dict]
    metadata: dict

    @property
    def columns(self) -> list[str]:
        return _SCHEMAS[self.spec.kind]

    def failed_rows(self) -> list[int]:
        return [r["index"] for r in self.rows if str(r.get("status", "")).startswith("failed")]


def resolve_point(spec: SweepSpec, index: int) -> ModelParams:
    """Full parameter set for grid point ``index``, constraints applied."""
    point = spec.grid()[index]
    params = spec.base
    updates = {}
    for name, value in point.items():
        if name == "delta1":
            updates["delta1a"] = value
            updates["delta1b"] = value
        elif name == "delta_split":
            avg = spec.constraint.get("fixed_average_delta1",
                                      0.5 * (spec.base.delta1a + spec.base.delta1b))
            updates["delta1a"] = avg + 0.5 * value
            updates["delta1b"] = avg - 0.5 * value
        else:
            updates[name] = value
    params = replace(params, **updates)
    if "fixed_echi" in spec.constraint:
        product = spec.constraint["fixed_echi"]
        if params.drive <= 0:
            raise ValueError("fixed_echi constraint needs drive > 0")
        params = replace(params, chi=product / params.drive)
    return params


def _estimate_classical_peaks(params: ModelParams) -> np.ndarray:
    """Peak attractor intensities per mode from a short classical run."""
    try:
        x0 = classical.limit_cycle_initial_state(params)
    except classical.NonConvergenceError:
        x0 = classical.ClassicalState(alpha1=1e-3)
    path = classical.integrate(params, x0, 300.0, rtol=1e-8, atol=1e-10)
    tail = path.times >= 150.0
    return path.photon_numbers[tail].max(axis=0)


def _dims_from_peaks(peaks, floor=(3, 2, 3, 2)) -> list[int]:
    """Truncation dims sized from classical peak intensities plus quantum headroom."""
    return [max(f, int(np.ceil(1.5 * p + 4.0 * np.sqrt(p) + 1.0)) + 1)
            for p, f in zip(peaks, floor)]


def _quantum_limit_params(spec: SweepSpec, params: ModelParams) -> ModelParams:
    """Finite stand-in for the E -> 0, chi -> inf limit at fixed leading order."""
    e = spec.solver.get("quantum_limit_drive", 0.01)
    chi = spec.solver.get("quantum_limit_chi", 100.0)
    return replace(params, drive=e, chi=chi)


def _steady_g2_row(params: ModelParams, dims, pair=("a1", "b1")) -> dict:
    space = build_space(dims)
    rho = solve_steady_state(liouvillian(params, space, max_dim=None), space)
    g2 = g2_equal_time(rho, pair[0], pair[1])
    tails = rho.tail_populations()
    return {
        "g2_a1b1": g2.value, "g2_error": 0.0,
        "n_a1": g2.mean_a, "n_b1": g2.mean_b,
        "tail_max": max(tails.values()),
        "truncation_suspect": rho.truncation_suspect,
    }


def _trajectory_g2_row(params: ModelParams, dims, seed: int, solver: dict) -> dict:
    space = build_space(dims)
    g2 = estimate_g2(
        params, space, ("a1", "b1"),
        t_transient=solver.get("t_transient", 50.0),
        t_average=solver.get("t_average", 400.0),
        n_trajectories=solver.get("n_trajectories", 16),
        seed=seed,
        dt=solver.get("dt", 0.004),
        sample_every=solver.get("sample_every", 0.1),
        n_workers=solver.get("n_workers", 1),
    )
    return {
        "g2_a1b1": g2.value, "g2_error": g2.statistical_error,
        "n_a1": g2.mean_a, "n_b1": g2.mean_b,
        "tail_max": float("nan"), "truncation_suspect": False,
    }


def run_transition_point(spec: SweepSpec, index: int) -> dict:
    t0 = time.perf_counter()
    params = resolve_point(spec, index)
    seed = spec.point_seed(index)
    row = {"index": index, "drive": params.drive, "chi": params.chi,
           "kappa2": params.kappa2, "delta1a": params.delta1a, "delta1b": params.delta1b,
           "delta2": params.delta2, "v1": params.v1, "v2": params.v2,
           "seed": seed, "status": "ok"}
    try:
        dims = spec.solver.get("dims")
        if dims is None:
            peaks = _estimate_classical_peaks(params)
            dims = _dims_from_peaks(peaks)
        total = math.prod(dims)
        backend = spec.backend
        if backend == "auto":
            # the budget counts vectorized unknowns D^2
            budget = spec.solver.get("direct_vec_budget", DIRECT_VEC_BUDGET)
            backend = "steady" if total * total <= budget else "trajectory"
        row["backend"] = backend
        row["dims"] = "x".join(str(d) for d in dims)
        if backend == "steady":
            row.update(_steady_g2_row(params, dims))
        elif backend == "trajectory":
            row.update(_trajectory_g2_row(params, dims, seed, spec.solver))
        else:
            raise ValueError(f"transition scan cannot use backend {backend!r}")
    except Exception as exc:  # per-point failures recorded, scan continues
        row.setdefault("backend", spec.backend)
        row.setdefault("dims", "")
        row.update({"g2_a1b1": float("nan"), "g2_error": float("nan"),
                    "n_a1": float("nan"), "n_b1": float("nan"),
                    "tail_max": float("nan"), "truncation_suspect": False,
                    "status": f"failed:{type(exc).__name__}"})
    row["wall_time"] = time.perf_counter() - t0
    return {c: row.get(c) for c in _TRANSITION_COLUMNS}


def run_phase_point(spec: SweepSpec, index: int) -> dict:
    t0 = time.perf_counter()
    params = resolve_point(spec, index)
    seed = spec.point_seed(index)
    row = {"index": index, "delta1": params.delta1a, "delta2": params.delta2,
           "kappa2": params.kappa2, "v1": params.v1, "v2": params.v2,
           "seed": seed, "status": "ok", "e_critical": float("nan"),
           "g2_oracle": float("nan"), "drive": params.drive, "chi": params.chi}
    try:
        if spec.mode == "classical":
            row["backend"] = "classical"
            bracket = spec.solver.get("hopf_bracket", (0.05, 60.0))
            hopf = classical.hopf_threshold(
                params, bracket, single_cavity=True,
                e_tol=spec.solver.get("hopf_tol", 1e-6))
            e_run = hopf.e_critical + spec.constraint.get("e_offset", 0.5)
            p_run = replace(params, drive=e_run)
            row.update({"e_critical": hopf.e_critical, "drive": e_run})
            x0 = classical.limit_cycle_initial_state(p_run)
            path = classical.integrate(p_run, x0, spec.solver.get("t_final", 600.0))
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                g2 = classical.classical_g2(path, None, ("a1", "b1"))
                cls = classical.classify_synchronization(path)
            row.update({"g2_a1b1": g2.value, "classification": cls.value})
        elif spec.mode == "quantum":
            oracle = oracles.g2_cross_quantum_limit(params.delta1a, params.delta1b,
                                                    params.kappa1, params.v1)
            row["g2_oracle"] = oracle
            check_every = spec.solver.get("solve_every", 1)
            if check_every and index % check_every == 0:
                row["backend"] = "steady"
                p_q = _quantum_limit_params(spec, params)
                dims = spec.solver.get("dims", [3, 2, 3, 2])
                data = _steady_g2_row(p_q, dims)
                row["g2_a1b1"] = data["g2_a1b1"]
            else:
                row["backend"] = "oracle"
                row["g2_a1b1"] = oracle
            row["classification"] = "bunching" if row["g2_a1b1"] > 1 else "antibunching"
        else:
            raise ValueError(f"phase diagram mode must be 'classical' or 'quantum', "
                             f"got {spec.mode!r}")
    except Exception as exc:
        row.setdefault("backend", spec.mode or spec.backend)
        row.update({"g2_a1b1": float("nan"), "classification": "",
                    "status": f"failed:{type(exc).__name__}"})
    row["wall_time"] = time.perf_counter() - t0
    return {c: row.get(c) for c in _PHASE_COLUMNS}


def run_detuning_point(spec: SweepSpec, index: int) -> dict:
    t0 = time.perf_counter()
    params = resolve_point(spec, index)
    seed = spec.point_seed(index)
    split = params.delta1a - params.delta1b
    row = {"index": index, "delta_split": split, "delta1a": params.delta1a,
           "delta1b": params.delta1b, "drive": params.drive, "chi": params.chi,
           "kappa2": params.kappa2, "delta2": params.delta2, "v1": params.v1,
           "v2": params.v2, "seed": seed, "status": "ok",
           "g2_oracle": float("nan"), "g2_error": 0.0, "classification": ""}
    try:
        if spec.mode == "classical":
            row["backend"] = "classical"
            x0 = classical.limit_cycle_initial_state(params)
            path = classical.integrate(params, x0, spec.solver.get("t_final", 1500.0))
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                g2 = classical.classical_g2(path, None, ("a1", "b1"))
                cls = classical.classify_synchronization(path)
            row.update({"g2_a1b1": g2.value, "classification": cls.value})
        elif spec.mode == "quantum":
            avg = 0.5 * (params.delta1a + params.delta1b)
            oracle = oracles.g2_cross_vs_split(avg, split, params.kappa1, params.v1)
            row["g2_oracle"] = oracle
            if spec.solver.get("direct_solve", False):
                row["backend"] = "steady"
                p_q = _quantum_limit_params(spec, params)
                dims = spec.solver.get("dims", [3, 2, 3, 2])
                data = _steady_g2_row(p_q, dims)
                row["g2_a1b1"] = data["g2_a1b1"]
            else:
                row["backend"] = "oracle"
                row["g2_a1b1"] = oracle
        else:
            raise ValueError(f"detuning scan mode must be 'classical' or 'quantum', "
                             f"got {spec.mode!r}")
    except Exception as exc:
        row.setdefault("backend", spec.mode or spec.backend)
        row.update({"g2_a1b1": float("nan"),
                    "status": f"failed:{type(exc).__name__}"})
    row["wall_time"] = time.perf_counter() - t0
    return {c: row.get(c) for c in _DETUNING_COLUMNS}


_POINT_RUNNERS = {
    "transition": run_transition_point,
    "phase_diagram": run_phase_point,
    "detuning": run_detuning_point,
}


def run_point(spec: SweepSpec, index: int) -> dict:
    """Recompute a single grid point; rows of a SweepResult reproduce this exactly."""
    return _POINT_RUNNERS[spec.kind](spec, index)


def _worker(args):
    spec_json, index = args
    return run_point(SweepSpec.from_json(spec_json), index)


def run_sweep(spec: SweepSpec, n_workers: int = 1) -> SweepResult:
    """Run every grid point; failures are recorded per row, never raised."""
    t0 = time.perf_counter()
    n = len(spec.grid())
    if n_workers > 1:
        jobs = [(spec.to_json(), i) for i in range(n)]
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            rows = list(pool.map(_worker, jobs, chunksize=1))
    else:
        rows = [run_point(spec, i) for i in range(n)]
    rows.sort(key=lambda r: r["index"])
    metadata = {
        "schema_version": SCHEMA_VERSION,
        "spec_hash": spec.spec_hash(),
        "n_points": n,
        "wall_time_total": time.perf_counter() - t0,
        "created": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }
    return SweepResult(spec=spec, rows=rows, metadata=metadata)


def run_transition_scan(spec: SweepSpec, n_workers: int = 1) -> SweepResult:
    if "fixed_echi" not in spec.constraint:
        raise ValueError("transition scan requires the fixed_echi constraint")
    return run_sweep(spec, n_workers)


def run_phase_diagram(spec: SweepSpec, n_workers: int = 1) -> SweepResult:
    return run_sweep(spec, n_workers)


def run_detuning_scan(spec: SweepSpec, n_workers: int = 1) -> SweepResult:
    return run_sweep(spec, n_workers)


def _format_cell(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".17g")
    if value is None:
        return ""
    return str(value)


def _parse_cell(text: str, reference):
    if isinstance(reference, bool):
        return text == "true"
    if isinstance(reference, float):
        return float(text)
    if isinstance(reference, int) and not isinstance(reference, bool):
        return int(text)
    return text


def persist(result: SweepResult, out_dir, basename: str | None = None) -> tuple[str, str]:
    """Write <kind>.csv and a JSON sidecar into ``out_dir``; returns both paths."""
    import os

    os.makedirs(out_dir, exist_ok=True)
    base = basename or result.spec.kind
    csv_path = os.path.join(out_dir, f"{base}.csv")
    json_path = os.path.join(out_dir, f"{base}.json")
    cols = result.columns
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(cols)
        for row in result.rows:
            writer.writerow([_format_cell(row[c]) for c in cols])
    sidecar = {
        "spec": json.loads(result.spec.to_json()),
        "metadata": result.metadata,
        "schema": cols,
    }
    with open(json_path, "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return csv_path, json_path


_COLUMN_TYPES = {
    "index": 0, "seed": 0,
    "backend": "", "dims": "", "status": "", "classification": "",
    "truncation_suspect": False,
}


def load_result(out_dir, basename: str) -> SweepResult:
    """Read back a persisted sweep; numeric fields round-trip losslessly."""
    import os

    with open(os.path.join(out_dir, f"{basename}.json")) as fh:
        sidecar = json.load(fh)
    spec = SweepSpec.from_json(json.dumps(sidecar["spec"]))
    stored_hash = sidecar["metadata"]["spec_hash"]
    if spec.spec_hash() != stored_hash:
        raise ValueError("sidecar spec hash does not match the recomputed hash")
    cols = sidecar["schema"]
    rows = []
    with open(os.path.join(out_dir, f"{basename}.csv"), newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != cols:
            raise ValueError(f"CSV columns {header} do not match sidecar schema {cols}")
        for line in reader:
            row = {}
            for c, cell in zip(cols, line):
                row[c] = _parse_cell(cell, _COLUMN_TYPES.get(c, 0.0))
            rows.append(row)
    return SweepResult(spec=spec, rows=rows, metadata=sidecar["metadata"])
