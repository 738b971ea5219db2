"""Steady-state solver for the vectorized master equation.

Solves L vec(rho) = 0 with the trace constraint tr(rho) = 1 by replacing
one row of L (the one with the smallest diagonal magnitude, which keeps
the factorization well conditioned and is deterministic) with the trace
functional.  A sparse direct LU solve is used below a size threshold and
a preconditioned Krylov iteration above it.

The returned density matrix is symmetrized, rho <- (rho + rho^dag)/2,
and carries diagnostics (residual, Hermiticity defect, minimum
eigenvalue, top-Fock-level populations) so that solver noise and
truncation artifacts are surfaced rather than silently absorbed.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fock import FockSpace, number_operator
from .model import trace_functional, unvec, vec


class SteadyStateError(RuntimeError):
    """Solve failed or the residual contract was not met."""


class UndefinedCorrelationError(ValueError):
    """A g2 denominator fell below the floor; the correlation is undefined."""


TAIL_POPULATION_TOL = 1e-6


@dataclass
class DensityMatrix:
    """Dense steady-state density matrix plus solver diagnostics."""

    data: np.ndarray
    space: FockSpace
    residual_inf: float = 0.0
    herm_defect: float = 0.0
    min_eigenvalue: float = 0.0

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    def trace(self) -> complex:
        return complex(np.trace(self.data))

    def expectation(self, op) -> complex:
        """tr(rho * op)."""
        if op.shape != self.data.shape:
            raise ValueError(f"operator shape {op.shape} does not match dim {self.dim}")
        if sp.issparse(op):
            return complex((op.T.multiply(self.data)).sum())
        return complex(np.einsum("ij,ji->", self.data, op))

    def mode_population(self, mode: int) -> float:
        occ = self.space.occupations(mode)
        return float(np.real(np.diag(self.data)) @ occ)

    def populations(self) -> dict[str, float]:
        return {name: self.mode_population(m) for m, name in enumerate(self.space.mode_names)}

    def tail_populations(self) -> dict[str, float]:
        """Population of the top Fock level of each mode (truncation indicator)."""
        diag = np.real(np.diag(self.data))
        out = {}
        for m, name in enumerate(self.space.mode_names):
            occ = self.space.occupations(m)
            out[name] = float(diag[occ == self.space.mode_dims[m] - 1].sum())
        return out

    @property
    def truncation_suspect(self) -> bool:
        return max(self.tail_populations().values()) > TAIL_POPULATION_TOL

    def validate(self, herm_tol: float = 1e-9, trace_tol: float = 1e-10,
                 eig_tol: float = 1e-8) -> None:
        """Raise if the state violates its invariants beyond solver noise."""
        if self.herm_defect > herm_tol:
            raise SteadyStateError(f"Hermiticity defect {self.herm_defect:.2e} > {herm_tol:.0e}")
        if abs(self.trace() - 1.0) > trace_tol:
            raise SteadyStateError(f"trace deviates from 1 by {abs(self.trace() - 1.0):.2e}")
        if self.min_eigenvalue < -eig_tol:
            raise SteadyStateError(f"negative eigenvalue {self.min_eigenvalue:.2e} < -{eig_tol:.0e}")


@dataclass
class G2Result:
    """Equal-time intensity cross-correlation <n_A n_B> / (<n_A><n_B>)."""

    value: float
    numerator: float
    mean_a: float
    mean_b: float
    statistical_error: float = 0.0


def _replace_row_with_trace(lind: sp.spmatrix, dim: int) -> tuple[sp.csc_matrix, np.ndarray, int]:
    """Overwrite the weakest-diagonal row with the trace functional; rhs is e_k."""
    n = dim * dim
    diag = np.abs(lind.diagonal())
    k = int(np.argmin(diag))
    coo = lind.tocoo()
    keep = coo.row != k
    trace_cols = np.arange(0, n, dim + 1)
    rows = np.concatenate([coo.row[keep], np.full(dim, k)])
    cols = np.concatenate([coo.col[keep], trace_cols])
    data = np.concatenate([coo.data[keep], np.ones(dim, dtype=complex)])
    a = sp.csc_matrix((data, (rows, cols)), shape=(n, n))
    b = np.zeros(n, dtype=complex)
    b[k] = 1.0
    return a, b, k


def solve_steady_state(lind: sp.spmatrix, space: FockSpace, *,
                       residual_tol: float = 1e-10,
                       iterative_threshold: int = 40_000,
                       permc_spec: str = "COLAMD",
                       method: str = "auto") -> DensityMatrix:
    """Solve L vec(rho) = 0, tr(rho) = 1 and return the symmetrized density matrix.

    ``method`` is 'direct', 'iterative' or 'auto' (direct below
    ``iterative_threshold`` vectorized unknowns).  The residual contract
    ||L vec(rho)||_inf <= residual_tol * ||L||_inf is checked against the
    unmodified Liouvillian and violation raises :class:`SteadyStateError`.
    """
    dim = space.total_dim
    n = dim * dim
    if lind.shape != (n, n):
        raise ValueError(f"Liouvillian shape {lind.shape} does not match dim {dim}^2")

    a, b, _ = _replace_row_with_trace(lind, dim)
    if method == "auto":
        method = "direct" if n <= iterative_threshold else "iterative"

    x = None
    if method == "direct":
        try:
            lu = spla.splu(a, permc_spec=permc_spec)
            x = lu.solve(b)
        except RuntimeError as exc:  # singular factor: fall through to Krylov
            warnings.warn(f"direct solve failed ({exc}); falling back to iterative")
            method = "iterative"
    if x is None and method == "iterative":
        x = _iterative_solve(a, b, dim)

    norm_l = np.max(np.abs(lind).sum(axis=1)) if lind.nnz else 1.0
    residual = float(np.max(np.abs(lind @ x)))
    if residual > residual_tol * norm_l:
        raise SteadyStateError(
            f"residual {residual:.3e} exceeds {residual_tol:.0e} * ||L||_inf = "
            f"{residual_tol * norm_l:.3e}"
        )

    rho = unvec(x, dim)
    herm_defect = float(np.max(np.abs(rho - rho.conj().T)))
    rho = 0.5 * (rho + rho.conj().T)
    rho = rho / np.trace(rho).real
    min_eig = float(np.linalg.eigvalsh(rho)[0])
    return DensityMatrix(
        data=rho,
        space=space,
        residual_inf=residual,
        herm_defect=herm_defect,
        min_eigenvalue=min_eig,
    )


def _iterative_solve(a: sp.csc_matrix, b: np.ndarray, dim: int) -> np.ndarray:
    """Restarted Krylov with an incomplete-LU preconditioner.

    Incomplete factorizations of Liouvillians are fragile, so a failed
    or stagnating preconditioner is reported as a solver failure rather
    than retried blindly; callers fall back to trajectory averaging.
    """
    try:
        ilu = spla.spilu(a, drop_tol=1e-5, fill_factor=30)
        precond = spla.LinearOperator(a.shape, ilu.solve)
    except RuntimeError as exc:
        raise SteadyStateError(f"incomplete-LU preconditioner failed: {exc}") from exc
    x0 = vec(np.eye(dim, dtype=complex) / dim)
    x, info = spla.lgmres(a, b, x0=x0, M=precond, rtol=1e-13, atol=0.0, maxiter=1000)
    if info != 0:
        raise SteadyStateError(f"iterative solver did not converge (info={info})")
    return x


def expectation(rho: DensityMatrix, op) -> complex:
    """tr(rho * op)."""
    return rho.expectation(op)


def converged_g2(params, dims, pairs, *, tol: float = 1e-3, max_doublings: int = 3,
                 solver_kwargs: dict | None = None):
    """Grow the truncation until doubling every dim moves no g2 by more than ``tol``.

    Returns (g2 values at the accepted dims, accepted dims, converged
    flag).  The loop stops early when the dimension-doubled solve would
    exceed the solver budget; the flag is then False and the last
    comparison is reported as-is.
    """
    from .fock import build_space
    from .model import liouvillian

    solver_kwargs = solver_kwargs or {}

    def solve_at(d):
        space = build_space(d)
        rho = solve_steady_state(liouvillian(params, space, max_dim=None), space,
                                 **solver_kwargs)
        return [g2_equal_time(rho, a, b).value for a, b in pairs]

    current = list(dims)
    values = solve_at(current)
    for _ in range(max_doublings):
        doubled = [2 * d for d in current]
        values_doubled = solve_at(doubled)
        if max(abs(v - w) for v, w in zip(values, values_doubled)) < tol:
            return values, current, True
        current, values = doubled, values_doubled
    return values, current, False


def g2_equal_time(rho: DensityMatrix, mode_a, mode_b, *, floor: float = 1e-12) -> G2Result:
    """Equal-time g2 between the photon numbers of two modes of ``rho``.

    Modes may be given by index or by name ('a1', 'b1', ...).  Raises
    :class:`UndefinedCorrelationError` when either mean population falls
    below ``floor``.
    """
    space = rho.space
    ma = space.mode_index(mode_a) if isinstance(mode_a, str) else int(mode_a)
    mb = space.mode_index(mode_b) if isinstance(mode_b, str) else int(mode_b)
    if ma == mb:
        raise ValueError("g2 pair must involve two distinct modes")
    diag = np.real(np.diag(rho.data))
    occ_a = space.occupations(ma)
    occ_b = space.occupations(mb)
    mean_a = float(diag @ occ_a)
    mean_b = float(diag @ occ_b)
    numerator = float(diag @ (occ_a * occ_b))
    if mean_a < floor or mean_b < floor:
        raise UndefinedCorrelationError(
            f"g2 undefined: mode populations {mean_a:.3e}, {mean_b:.3e} below floor {floor:.0e}"
        )
    return G2Result(value=numerator / (mean_a * mean_b), numerator=numerator,
                    mean_a=mean_a, mean_b=mean_b, statistical_error=0.0)
