"""Monte-Carlo wave-function unraveling of the master equation.

Piecewise-deterministic pure-state evolution: between jumps the
unnormalized state follows dpsi/dt = -i H_eff psi with
H_eff = H - i/2 sum_k Ldag_k L_k, integrated by fixed-step fourth-order
Runge-Kutta.  Jumps use the waiting-time construction: draw r uniform,
evolve until |psi|^2 crosses r (the crossing time is located by
bisection inside the step, which avoids the first-order bias of
per-step jump probabilities), then apply a jump operator chosen with
probability proportional to <psi|Ldag_k L_k|psi>.

Everything is deterministic given the seed: the generator is
counter-based (Philox) and trajectory i of an ensemble uses sub-seed
seed XOR i, so ensembles are reproducible under any execution order.
"""

from __future__ import annotations

import csv
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .fock import FockSpace, adjoint, vacuum_vector
from .model import ModelParams, hamiltonian, jump_operators
from .steady import G2Result

DT_CAP = 0.01

# below this Hilbert dimension dense matvecs beat sparse ones
_DENSE_CUTOFF = 160


class TrajectoryBlowupError(RuntimeError):
    """Integrator instability: the no-jump norm grew."""


@dataclass
class TrajectoryRecord:
    """Sampled conditional photon numbers and the jump log of one trajectory."""

    times: np.ndarray            # (n_samples,)
    photon_numbers: np.ndarray   # (n_samples, n_modes), conditional <n_m>
    jump_times: np.ndarray
    jump_channels: np.ndarray    # index into the jump-operator list
    seed: int
    mode_names: tuple[str, ...]

    def to_csv(self, path) -> None:
        """Write columns t, n_a1, n_a2[, n_b1, n_b2]."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t"] + [f"n_{m}" for m in self.mode_names])
            for k, t in enumerate(self.times):
                writer.writerow([format(t, ".17g")]
                                + [format(v, ".17g") for v in self.photon_numbers[k]])


def _effective_hamiltonian(params: ModelParams, space: FockSpace):
    h = hamiltonian(params, space)
    jumps = [j.tocsr() for j in jump_operators(params, space)]
    h_eff = h.astype(complex)
    for l_op in jumps:
        h_eff = h_eff - 0.5j * (adjoint(l_op) @ l_op)
    gen = (-1j * h_eff).tocsr()
    if space.total_dim <= _DENSE_CUTOFF:
        return gen.toarray(), [j.toarray() for j in jumps]
    return gen, jumps


def _rk4_step(gen: sp.csr_matrix, psi: np.ndarray, dt: float) -> np.ndarray:
    k1 = gen @ psi
    k2 = gen @ (psi + 0.5 * dt * k1)
    k3 = gen @ (psi + 0.5 * dt * k2)
    k4 = gen @ (psi + dt * k3)
    return psi + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _locate_crossing(gen, psi, seg, target, tol):
    """Bisection for the time within (0, seg] where |psi(t)|^2 == target.

    Each probe is a single RK4 step of the candidate size from the
    segment start, so the located time is consistent with the stepping
    scheme itself.
    """
    lo, hi = 0.0, seg
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        trial = _rk4_step(gen, psi, mid)
        if np.vdot(trial, trial).real >= target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _simulate(gen, jumps, psi0, t_final, dt, rng, sample_every, on_sample):
    """Core loop; calls on_sample(psi, norm2) on the uniform sample grid."""
    steps_per_sample = max(1, round(sample_every / dt))
    dt_eff = sample_every / steps_per_sample
    n_samples = int(round(t_final / sample_every))
    jump_times: list[float] = []
    jump_channels: list[int] = []

    psi = psi0.astype(complex).copy()
    norm2 = np.vdot(psi, psi).real
    psi /= np.sqrt(norm2)
    norm2 = 1.0
    r = rng.random()
    on_sample(0.0, psi, norm2)
    t = 0.0
    bisect_tol = 1e-12 * dt_eff
    for k in range(1, n_samples + 1):
        for _ in range(steps_per_sample):
            seg = dt_eff
            offset = 0.0
            while seg > 1e-15 * dt_eff:
                trial = _rk4_step(gen, psi, seg)
                n2 = np.vdot(trial, trial).real
                if n2 > norm2 * (1.0 + 1e-9) + 1e-300:
                    raise TrajectoryBlowupError(
                        f"norm grew from {norm2:.6e} to {n2:.6e} at t={t:.4f}; reduce dt")
                if n2 >= r:
                    psi, norm2 = trial, n2
                    break
                tau = _locate_crossing(gen, psi, seg, r, bisect_tol)
                psi = _rk4_step(gen, psi, tau)
                weights = np.array([np.vdot(jp := j @ psi, jp).real for j in jumps])
                total = weights.sum()
                if total <= 0.0:
                    # dark state: no channel can fire, stop watching for crossings
                    norm2 = np.vdot(psi, psi).real
                    r = 0.0
                    offset += tau
                    seg -= tau
                    continue
                channel = int(np.searchsorted(np.cumsum(weights) / total, rng.random()))
                channel = min(channel, len(jumps) - 1)
                psi = jumps[channel] @ psi
                psi /= np.linalg.norm(psi)
                norm2 = 1.0
                offset += tau
                jump_times.append(t + offset)
                jump_channels.append(channel)
                r = rng.random()
                seg -= tau
            t += dt_eff
        on_sample(k * sample_every, psi, norm2)
    return np.array(jump_times), np.array(jump_channels, dtype=int)


def evolve_trajectory(params: ModelParams, space: FockSpace, t_final: float,
                      dt: float = 0.005, seed: int = 0, *, psi0: np.ndarray | None = None,
                      sample_every: float = 0.1, dt_cap: float = DT_CAP) -> TrajectoryRecord:
    """Run one trajectory from ``psi0`` (default vacuum) and record photon numbers."""
    if t_final <= 0:
        raise ValueError("t_final must be positive")
    if dt > dt_cap:
        raise ValueError(f"dt={dt} exceeds the cap {dt_cap}/kappa1")
    gen, jumps = _effective_hamiltonian(params, space)
    occ = np.stack([space.occupations(m) for m in range(space.n_modes)])
    if psi0 is None:
        psi0 = vacuum_vector(space)
    rng = np.random.Generator(np.random.Philox(key=seed))

    times: list[float] = []
    numbers: list[np.ndarray] = []

    def on_sample(t, psi, norm2):
        times.append(t)
        numbers.append((occ @ (np.abs(psi) ** 2)) / norm2)

    jt, jc = _simulate(gen, jumps, psi0, t_final, dt, rng, sample_every, on_sample)
    return TrajectoryRecord(times=np.array(times), photon_numbers=np.array(numbers),
                            jump_times=jt, jump_channels=jc, seed=seed,
                            mode_names=space.mode_names)


def _time_average_worker(args):
    (params, mode_dims, ops_data, t_transient, t_average, dt, sample_every,
     seed, index) = args
    space = FockSpace(tuple(mode_dims))
    gen, jumps = _effective_hamiltonian(params, space)
    if space.total_dim <= _DENSE_CUTOFF:
        ops = [o.toarray() if sp.issparse(o) else np.asarray(o) for o in ops_data]
    else:
        ops = [sp.csr_matrix(o) for o in ops_data]
    rng = np.random.Generator(np.random.Philox(key=seed ^ index))
    psi0 = vacuum_vector(space)
    t_final = t_transient + t_average
    sums = np.zeros(len(ops))
    count = 0

    def on_sample(t, psi, norm2):
        nonlocal count
        if t <= t_transient:
            return
        for i, op in enumerate(ops):
            sums[i] += np.vdot(psi, op @ psi).real / norm2
        count += 1

    n_jumps = _simulate(gen, jumps, psi0, t_final, dt, rng, sample_every, on_sample)[0].size
    if count == 0:
        raise ValueError("no samples after the transient; increase t_average")
    return index, sums / count, n_jumps


def estimate_observables(params: ModelParams, space: FockSpace, ops,
                         t_transient: float, t_average: float, n_trajectories: int,
                         seed: int = 0, *, dt: float = 0.005, sample_every: float = 0.1,
                         n_workers: int = 1) -> list[tuple[float, float]]:
    """Time-and-ensemble averages <O> over the trajectory ensemble.

    Returns one (mean, standard error) pair per operator; each
    trajectory contributes one batch (its own time average after the
    transient), so the standard error is the batch spread over
    sqrt(n_trajectories).  For correlator numerators pass the product
    operator n_A @ n_B itself, never separate factors.
    """
    if t_average < 50.0:
        warnings.warn(f"t_average={t_average} < 50/kappa1; averages may not have relaxed")
    if n_trajectories < 2:
        raise ValueError("need at least 2 trajectories for a standard error")
    ops = [sp.csr_matrix(o) for o in ops]
    jobs = [(params, space.mode_dims, ops, t_transient, t_average, dt, sample_every,
             seed, i) for i in range(n_trajectories)]
    if n_workers > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(_time_average_worker, jobs, chunksize=1))
    else:
        results = [_time_average_worker(j) for j in jobs]
    results.sort(key=lambda r: r[0])
    batch = np.stack([r[1] for r in results])     # (n_traj, n_ops)
    mean = batch.mean(axis=0)
    stderr = batch.std(axis=0, ddof=1) / np.sqrt(n_trajectories)
    return list(zip(mean.tolist(), stderr.tolist()))


def trajectory_averages(params: ModelParams, space: FockSpace, ops,
                        t_transient: float, t_average: float, n_trajectories: int,
                        seed: int = 0, **kw) -> np.ndarray:
    """Per-trajectory time averages, shape (n_trajectories, n_ops); see estimate_observables."""
    ops = [sp.csr_matrix(o) for o in ops]
    jobs = [(params, space.mode_dims, ops, t_transient, t_average,
             kw.get("dt", 0.005), kw.get("sample_every", 0.1), seed, i)
            for i in range(n_trajectories)]
    n_workers = kw.get("n_workers", 1)
    if n_workers > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(_time_average_worker, jobs, chunksize=1))
    else:
        results = [_time_average_worker(j) for j in jobs]
    results.sort(key=lambda r: r[0])
    return np.stack([r[1] for r in results])


def estimate_g2(params: ModelParams, space: FockSpace, pair,
                t_transient: float, t_average: float, n_trajectories: int,
                seed: int = 0, **kw) -> G2Result:
    """g2 between two mode populations from trajectory averages.

    The numerator is the average of the product operator; the
    statistical error is a leave-one-trajectory-out jackknife of the
    full ratio, which propagates the correlations between numerator and
    denominators.
    """
    from .fock import number_operator

    ma = space.mode_index(pair[0]) if isinstance(pair[0], str) else int(pair[0])
    mb = space.mode_index(pair[1]) if isinstance(pair[1], str) else int(pair[1])
    na, nb = number_operator(space, ma), number_operator(space, mb)
    ops = [na, nb, (na @ nb).tocsr()]
    batch = trajectory_averages(params, space, ops, t_transient, t_average,
                                n_trajectories, seed, **kw)
    tot = batch.mean(axis=0)
    value = tot[2] / (tot[0] * tot[1])
    n = batch.shape[0]
    loo = []
    for i in range(n):
        m = (tot * n - batch[i]) / (n - 1)
        loo.append(m[2] / (m[0] * m[1]))
    loo = np.array(loo)
    stderr = float(np.sqrt((n - 1) / n * np.sum((loo - loo.mean()) ** 2)))
    return G2Result(value=float(value), numerator=float(tot[2]), mean_a=float(tot[0]),
                    mean_b=float(tot[1]), statistical_error=stderr)
