"""Classical equations of motion of the coupled SHG cavities.

The coherent-state amplitudes (alpha1, alpha2, beta1, beta2) obey

    d(alpha1)/dt = E - (kappa1 + i*delta1a) alpha1 + chi alpha1* alpha2 - i V1 beta1
    d(alpha2)/dt =   - (kappa2 + i*delta2)  alpha2 - chi/2 alpha1^2    - i V2 beta2

and the mirror pair for beta with delta1b.  |amplitude|^2 is the photon
number.  The flow is invariant under the amplitude rescaling
alpha -> c*alpha with E -> c*E, chi -> chi/c, which is what connects the
classical limit to the quantum one at fixed E*chi.

Fixed points, linear stability and the Hopf threshold are computed in
real coordinates (Re, Im of each amplitude) because the equations are
not complex-analytic: the conjugate amplitudes appear explicitly, so a
complex Newton iteration would be invalid.  Single-cavity work uses the
reduced (alpha1, alpha2) system.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.integrate import solve_ivp

from .model import ModelParams
from .steady import G2Result, UndefinedCorrelationError

_MODE_SLOT = {"a1": 0, "a2": 1, "b1": 2, "b2": 3}


class NonConvergenceError(RuntimeError):
    """Newton or bracket search failed; carries the last residual in args."""


class SyncClass(enum.Enum):
    IN_PHASE = "in_phase"
    ANTI_PHASE = "anti_phase"
    UNLOCKED = "unlocked"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class ClassicalState:
    """Coherent amplitudes of the four modes; beta components idle in single-cavity work."""

    alpha1: complex = 0.0
    alpha2: complex = 0.0
    beta1: complex = 0.0
    beta2: complex = 0.0

    def as_array(self, single_cavity: bool = False) -> np.ndarray:
        if single_cavity:
            return np.array([self.alpha1, self.alpha2], dtype=complex)
        return np.array([self.alpha1, self.alpha2, self.beta1, self.beta2], dtype=complex)

    @staticmethod
    def from_array(z: np.ndarray) -> "ClassicalState":
        z = np.asarray(z, dtype=complex)
        if z.shape[0] == 2:
            return ClassicalState(z[0], z[1], 0.0, 0.0)
        return ClassicalState(z[0], z[1], z[2], z[3])

    def photon_numbers(self) -> np.ndarray:
        return np.abs(self.as_array()) ** 2


@dataclass
class ClassicalPath:
    """Uniformly sampled trajectory of the amplitude vector."""

    times: np.ndarray            # (n,)
    states: np.ndarray           # (n, 2) or (n, 4) complex
    n_rhs_evaluations: int = 0
    n_accepted_steps: int = 0

    @property
    def photon_numbers(self) -> np.ndarray:
        return np.abs(self.states) ** 2

    def mode_photon_series(self, mode) -> np.ndarray:
        slot = _MODE_SLOT[mode] if isinstance(mode, str) else int(mode)
        if slot >= self.states.shape[1]:
            raise ValueError(f"path has no mode {mode}")
        return np.abs(self.states[:, slot]) ** 2


@dataclass
class HopfResult:
    """Critical drive and the eigenvalue pair crossing the imaginary axis."""

    e_critical: float
    fixed_point: ClassicalState
    eigenvalue: complex   # leading eigenvalue at the threshold (+ imaginary branch)


def _rhs_complex(params: ModelParams, z: np.ndarray) -> np.ndarray:
    """Right-hand side in complex amplitudes; len(z) is 2 or 4."""
    e, chi = params.drive, params.chi
    k1, k2 = params.kappa1, params.kappa2
    single = z.shape[0] == 2
    a1, a2 = z[0], z[1]
    out = np.empty_like(z)
    v1 = 0.0 if single else params.v1
    v2 = 0.0 if single else params.v2
    b1 = 0.0 if single else z[2]
    b2 = 0.0 if single else z[3]
    out[0] = e - (k1 + 1j * params.delta1a) * a1 + chi * np.conj(a1) * a2 - 1j * v1 * b1
    out[1] = -(k2 + 1j * params.delta2) * a2 - 0.5 * chi * a1 * a1 - 1j * v2 * b2
    if not single:
        out[2] = e - (k1 + 1j * params.delta1b) * b1 + chi * np.conj(b1) * b2 - 1j * v1 * a1
        out[3] = -(k2 + 1j * params.delta2) * b2 - 0.5 * chi * b1 * b1 - 1j * v2 * a2
    return out


def rhs(params: ModelParams, state: ClassicalState, *, single_cavity: bool = False) -> ClassicalState:
    """Time derivative of the amplitudes; single-cavity mode ignores beta and couplings."""
    dz = _rhs_complex(params, state.as_array(single_cavity))
    return ClassicalState.from_array(dz)


def _wirtinger_blocks(params: ModelParams, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(df/dz, df/dz*) of the complex right-hand side."""
    nc = z.shape[0]
    single = nc == 2
    chi = params.chi
    a = np.zeros((nc, nc), dtype=complex)
    b = np.zeros((nc, nc), dtype=complex)
    a[0, 0] = -(params.kappa1 + 1j * params.delta1a)
    a[0, 1] = chi * np.conj(z[0])
    b[0, 0] = chi * z[1]
    a[1, 0] = -chi * z[0]
    a[1, 1] = -(params.kappa2 + 1j * params.delta2)
    if not single:
        a[0, 2] = -1j * params.v1
        a[1, 3] = -1j * params.v2
        a[2, 2] = -(params.kappa1 + 1j * params.delta1b)
        a[2, 3] = chi * np.conj(z[2])
        b[2, 2] = chi * z[3]
        a[3, 2] = -chi * z[2]
        a[3, 3] = -(params.kappa2 + 1j * params.delta2)
        a[2, 0] = -1j * params.v1
        a[3, 1] = -1j * params.v2
    return a, b


def jacobian(params: ModelParams, state: ClassicalState, *, single_cavity: bool = False) -> np.ndarray:
    """Real Jacobian in (Re z..., Im z...) coordinates; 4x4 single cavity, 8x8 coupled."""
    z = state.as_array(single_cavity)
    a, b = _wirtinger_blocks(params, z)
    apb, amb = a + b, a - b
    top = np.hstack([apb.real, -amb.imag])
    bot = np.hstack([apb.imag, amb.real])
    return np.vstack([top, bot])


def _to_real(z: np.ndarray) -> np.ndarray:
    return np.concatenate([z.real, z.imag])


def _to_complex(x: np.ndarray) -> np.ndarray:
    nc = x.shape[0] // 2
    return x[:nc] + 1j * x[nc:]


def find_fixed_point(params: ModelParams, guess: ClassicalState | None = None, *,
                     single_cavity: bool = False, max_iter: int = 100,
                     tol: float = 1e-12) -> ClassicalState:
    """Newton iteration on the real-coordinate system; residual below ``tol``.

    Without a guess, starts from the chi=0 cascade solution (driven
    linear cavity feeding the harmonic), which converges over the whole
    parameter range used here, including above threshold where the fixed
    point is unstable.
    """
    if guess is None:
        guess = _cascade_guess(params)
    x = _to_real(guess.as_array(single_cavity))
    residual = np.inf
    for _ in range(max_iter):
        z = _to_complex(x)
        f = _rhs_complex(params, z)
        residual = float(np.max(np.abs(_to_real(f))))
        if residual <= tol:
            return ClassicalState.from_array(z)
        j = jacobian(params, ClassicalState.from_array(z), single_cavity=single_cavity)
        try:
            step = np.linalg.solve(j, _to_real(f))
        except np.linalg.LinAlgError as exc:
            raise NonConvergenceError(
                f"singular Jacobian during Newton iteration (residual {residual:.3e})"
            ) from exc
        x = x - step
    raise NonConvergenceError(f"Newton did not reach {tol:.0e} in {max_iter} iterations "
                              f"(last residual {residual:.3e})")


def _cascade_guess(params: ModelParams) -> ClassicalState:
    a1 = params.drive / (params.kappa1 + 1j * params.delta1a)
    a2 = -0.5 * params.chi * a1 * a1 / (params.kappa2 + 1j * params.delta2)
    b1 = params.drive / (params.kappa1 + 1j * params.delta1b)
    b2 = -0.5 * params.chi * b1 * b1 / (params.kappa2 + 1j * params.delta2)
    return ClassicalState(a1, a2, b1, b2)


def scale_state(state: ClassicalState, c: float) -> ClassicalState:
    """Amplitude part of the invariance transformation alpha -> c*alpha."""
    if c == 0:
        raise ValueError("scale factor must be nonzero")
    return ClassicalState(*(c * z for z in state.as_array()))


def scale_params(params: ModelParams, c: float) -> ModelParams:
    """Parameter part of the invariance transformation: E -> c*E, chi -> chi/c."""
    if c == 0:
        raise ValueError("scale factor must be nonzero")
    return replace(params, drive=c * params.drive, chi=params.chi / c)


def integrate(params: ModelParams, state0: ClassicalState, t_final: float, *,
              rtol: float = 1e-9, atol: float = 1e-12, sample_dt: float = 0.05,
              single_cavity: bool = False, noise_sigma: float = 0.0, seed: int = 0,
              method: str = "DOP853") -> ClassicalPath:
    """Integrate the amplitude equations and sample them on a uniform grid.

    ``noise_sigma > 0`` switches to a fixed-step stochastic Heun scheme
    with independent additive white noise on every amplitude equation
    (complex increments with E|dW|^2 = dt), used for the noise-inhibits-
    synchronization experiments.  The deterministic path uses an
    adaptive high-order Runge-Kutta method with the given tolerances.
    """
    if t_final <= 0:
        raise ValueError("t_final must be positive")
    z0 = state0.as_array(single_cavity)
    times = np.arange(0.0, t_final + 0.5 * sample_dt, sample_dt)
    times = times[times <= t_final + 1e-12]

    if noise_sigma > 0.0:
        return _integrate_heun(params, z0, times, noise_sigma, seed, sample_dt)

    def f(t, x):
        return _to_real(_rhs_complex(params, _to_complex(x)))

    sol = solve_ivp(f, (0.0, t_final), _to_real(z0), method=method, t_eval=times,
                    rtol=rtol, atol=atol)
    if not sol.success:
        raise NonConvergenceError(f"integration failed: {sol.message}")
    states = np.stack([_to_complex(sol.y[:, k]) for k in range(sol.y.shape[1])])
    return ClassicalPath(times=sol.t.copy(), states=states,
                         n_rhs_evaluations=int(sol.nfev),
                         n_accepted_steps=int(sol.t.size))


def _integrate_heun(params, z0, times, sigma, seed, sample_dt):
    substeps = max(1, int(np.ceil(sample_dt / 1e-3)))
    h = sample_dt / substeps
    rng = np.random.Generator(np.random.Philox(key=seed))
    nc = z0.shape[0]
    states = np.empty((times.size, nc), dtype=complex)
    states[0] = z0
    z = z0.copy()
    scale = sigma * np.sqrt(h / 2.0)
    nfev = 0
    for k in range(1, times.size):
        for _ in range(substeps):
            dw = scale * (rng.standard_normal(nc) + 1j * rng.standard_normal(nc))
            f0 = _rhs_complex(params, z)
            pred = z + h * f0 + dw
            f1 = _rhs_complex(params, pred)
            z = z + 0.5 * h * (f0 + f1) + dw
            nfev += 2
        states[k] = z
        if not np.all(np.isfinite(z)):
            raise NonConvergenceError(f"stochastic path diverged by t={times[k]:.2f}")
    return ClassicalPath(times=times.copy(), states=states,
                         n_rhs_evaluations=nfev, n_accepted_steps=(times.size - 1) * substeps)


def limit_cycle_initial_state(params: ModelParams, *, single_cavity: bool = False,
                              kick: float = 1e-3) -> ClassicalState:
    """Fixed point with a small alpha1 kick; escapes the unstable point deterministically."""
    fp = find_fixed_point(params, single_cavity=single_cavity)
    return replace(fp, alpha1=fp.alpha1 + kick)


def default_transient(times: np.ndarray) -> float:
    """Default transient cutoff: 80% of the path or 500 time units, whichever is smaller."""
    span = times[-1] - times[0]
    return times[0] + min(0.8 * span, 500.0)


def dominant_frequency(times: np.ndarray, series: np.ndarray,
                       min_relative_amplitude: float = 1e-6) -> float | None:
    """Dominant oscillation frequency (cycles per unit time) of a sampled series.

    Hann-windowed discrete Fourier transform of the demeaned series;
    returns None when the series has no significant oscillating part
    (fixed point within ``min_relative_amplitude`` of its mean scale).
    """
    x = np.asarray(series, dtype=float)
    n = x.size
    if n < 8:
        return None
    mean = np.mean(x)
    fluct = x - mean
    scale = max(np.abs(mean), np.max(np.abs(x)), 1e-300)
    if np.max(np.abs(fluct)) < min_relative_amplitude * scale:
        return None
    dt = times[1] - times[0]
    window = np.hanning(n)
    power = np.abs(np.fft.rfft(fluct * window)) ** 2
    k = int(np.argmax(power[1:]) + 1)
    if power[k] <= 0:
        return None
    return k / (n * dt)


def _tail(path: ClassicalPath, t_transient: float | None) -> np.ndarray:
    if t_transient is None:
        t_transient = default_transient(path.times)
    mask = path.times >= t_transient
    if mask.sum() < 4:
        raise ValueError("averaging window after the transient is too short")
    return mask


def _period_commensurate_slice(times, series, mask):
    """Trim the tail window to an integer number of detected periods."""
    idx = np.flatnonzero(mask)
    t = times[idx]
    freq = dominant_frequency(t, series[idx])
    if freq is None:
        return idx
    span = t[-1] - t[0]
    n_periods = int(np.floor(span * freq))
    if n_periods < 1:
        return idx
    window = n_periods / freq
    start = t[-1] - window
    sub = idx[t >= start - 1e-12]
    return sub if sub.size >= 4 else idx


def classical_g2(path: ClassicalPath, t_transient: float | None, pair,
                 *, floor: float = 1e-12, min_periods: int = 20) -> G2Result:
    """Time-averaged g2 between two mode intensities over the path tail.

    Averages use trapezoidal weights; when the tail oscillates, the
    window is trimmed to an integer number of periods of the first mode
    so spectral leakage does not bias the average.
    """
    mask = _tail(path, t_transient)
    na_full = path.mode_photon_series(pair[0])
    nb_full = path.mode_photon_series(pair[1])
    idx = _period_commensurate_slice(path.times, na_full, mask)
    t = path.times[idx]
    na, nb = na_full[idx], nb_full[idx]
    freq = dominant_frequency(t, na)
    if freq is not None and (t[-1] - t[0]) * freq < min_periods:
        warnings.warn(f"averaging window covers only {(t[-1] - t[0]) * freq:.1f} periods "
                      f"(< {min_periods}); g2 may be biased")
    span = t[-1] - t[0]
    mean_a = np.trapezoid(na, t) / span
    mean_b = np.trapezoid(nb, t) / span
    num = np.trapezoid(na * nb, t) / span
    if mean_a < floor or mean_b < floor:
        raise UndefinedCorrelationError(
            f"classical g2 undefined: mean intensities {mean_a:.3e}, {mean_b:.3e}")
    return G2Result(value=float(num / (mean_a * mean_b)), numerator=float(num),
                    mean_a=float(mean_a), mean_b=float(mean_b), statistical_error=0.0)


def classify_synchronization(path: ClassicalPath, t_transient: float | None = None,
                             *, dead_band: float = 0.01) -> SyncClass:
    """In-/anti-phase/unlocked classification of a two-cavity path tail.

    Locking is decided by comparing the dominant frequencies of the two
    fundamental intensities (within two frequency-grid bins); the locked
    phase relation is read off the sign of g2(a1,b1) - 1 outside the
    dead band.
    """
    if path.states.shape[1] != 4:
        raise ValueError("synchronization classification needs a two-cavity path")
    mask = _tail(path, t_transient)
    t = path.times[mask]
    na = path.mode_photon_series("a1")[mask]
    nb = path.mode_photon_series("b1")[mask]
    fa = dominant_frequency(t, na)
    fb = dominant_frequency(t, nb)
    if fa is None or fb is None:
        return SyncClass.INCONCLUSIVE
    bin_width = 1.0 / (t[-1] - t[0])
    if abs(fa - fb) >= 2.0 * bin_width:
        return SyncClass.UNLOCKED
    g2 = classical_g2(path, t_transient, ("a1", "b1")).value
    if g2 > 1.0 + dead_band:
        return SyncClass.IN_PHASE
    if g2 < 1.0 - dead_band:
        return SyncClass.ANTI_PHASE
    return SyncClass.INCONCLUSIVE


def _stability(params: ModelParams, e: float, guess, single_cavity: bool):
    p = replace(params, drive=e)
    fp = find_fixed_point(p, guess, single_cavity=single_cavity)
    eigs = np.linalg.eigvals(jacobian(p, fp, single_cavity=single_cavity))
    lead = eigs[np.argmax(eigs.real)]
    return fp, lead


def hopf_threshold(params: ModelParams, e_bracket: tuple[float, float], *,
                   single_cavity: bool = True, e_tol: float = 1e-6) -> HopfResult:
    """Bisect the drive for the oscillatory instability of the fixed-point branch.

    The bracket must have a stable fixed point at the lower drive and an
    unstable one at the upper drive; the branch is continued by warm-
    starting Newton from the nearest solved point.  The returned
    eigenvalue is the leading pair at threshold (imaginary part is the
    nascent limit-cycle angular frequency).
    """
    e_lo, e_hi = float(e_bracket[0]), float(e_bracket[1])
    if not 0 <= e_lo < e_hi:
        raise ValueError("bracket must satisfy 0 <= E_lo < E_hi")
    fp_lo, lead_lo = _stability(params, e_lo, None, single_cavity)
    fp_hi, lead_hi = _stability(params, e_hi, fp_lo, single_cavity)
    if lead_lo.real >= 0 or lead_hi.real <= 0:
        raise NonConvergenceError(
            f"invalid Hopf bracket: max Re(eig) is {lead_lo.real:.3e} at E={e_lo} and "
            f"{lead_hi.real:.3e} at E={e_hi} (need stable -> unstable)")
    guess = fp_lo
    while e_hi - e_lo > e_tol:
        e_mid = 0.5 * (e_lo + e_hi)
        fp_mid, lead_mid = _stability(params, e_mid, guess, single_cavity)
        guess = fp_mid
        if lead_mid.real > 0:
            e_hi, fp_hi, lead_hi = e_mid, fp_mid, lead_mid
        else:
            e_lo, fp_lo, lead_lo = e_mid, fp_mid, lead_mid
    e_c = 0.5 * (e_lo + e_hi)
    fp_c, lead_c = _stability(params, e_c, guess, single_cavity)
    if lead_c.imag == 0:
        warnings.warn("leading eigenvalue at threshold is real; not a Hopf point")
    lead_c = lead_c if lead_c.imag >= 0 else np.conj(lead_c)
    return HopfResult(e_critical=e_c, fixed_point=fp_c, eigenvalue=complex(lead_c))
