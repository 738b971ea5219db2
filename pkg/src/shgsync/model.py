"""Driven coupled-SHG cavity model: Hamiltonian, jump operators, Liouvillian.

Two cavities (a and b), each with a fundamental mode (a1, b1) and a
second-harmonic mode (a2, b2).  The fundamental modes are laser driven
with strength E; the crystal nonlinearity chi converts photon pairs at
the fundamental into one photon at the second harmonic; V1 and V2 couple
like modes of the two cavities.  All rates are dimensionless, measured
in units of the fundamental decay rate kappa1 (hbar = 1, time in units
of 1/kappa1).

A 2-mode space selects the single-cavity model: the b-mode and coupling
terms are simply absent.

The Liouvillian acts on column-stacked density matrices: vec stacks the
columns of rho, so -i[H, rho] maps to -i(I (x) H - H^T (x) I) vec(rho).
This convention is fixed here and verified in the tests.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp

from .fock import FockSpace, adjoint, annihilation, prune


class DimensionOverflowError(ValueError):
    """Raised when a requested superoperator would exceed the size cap."""


@dataclass(frozen=True)
class ModelParams:
    """Physical parameters of the coupled-SHG model, in units of kappa1."""

    drive: float            # laser drive E
    chi: float              # second-order susceptibility
    kappa2: float = 0.5     # second-harmonic decay rate
    delta1a: float = 0.0    # detuning of fundamental, cavity a
    delta1b: float = 0.0    # detuning of fundamental, cavity b
    delta2: float = 0.0     # detuning of both second harmonics
    v1: float = 0.0         # fundamental-fundamental coupling
    v2: float = 0.0         # harmonic-harmonic coupling
    kappa1: float = 1.0     # fundamental decay rate; 1 by convention

    def __post_init__(self):
        if self.drive < 0:
            raise ValueError("drive E must be >= 0")
        if self.chi < 0:
            raise ValueError("chi must be >= 0")
        if self.kappa1 <= 0 or self.kappa2 <= 0:
            raise ValueError("decay rates kappa1, kappa2 must be > 0")

    def normalized(self) -> "ModelParams":
        """Rescale all rates by kappa1 so that kappa1 == 1 (time unit 1/kappa1)."""
        k = self.kappa1
        if k == 1.0:
            return self
        return ModelParams(
            drive=self.drive / k,
            chi=self.chi / k,
            kappa2=self.kappa2 / k,
            delta1a=self.delta1a / k,
            delta1b=self.delta1b / k,
            delta2=self.delta2 / k,
            v1=self.v1 / k,
            v2=self.v2 / k,
            kappa1=1.0,
        )


def _check_space(space: FockSpace):
    if space.n_modes not in (2, 4):
        raise ValueError(
            f"the SHG model needs a 2-mode (single cavity) or 4-mode (two cavities) "
            f"space, got {space.n_modes} modes"
        )


def hamiltonian(params: ModelParams, space: FockSpace) -> sp.csr_matrix:
    """Full driven Hamiltonian on the given space; exactly Hermitian.

    Contains the drive, the two-photon conversion, the detunings and,
    on a 4-mode space, the inter-cavity hopping terms.
    """
    _check_space(space)
    e, chi = params.drive, params.chi

    a1 = annihilation(space, 0)
    a2 = annihilation(space, 1)
    a1d, a2d = adjoint(a1), adjoint(a2)

    h = 1j * e * (a1d - a1)
    h = h + 0.5j * chi * (a1d @ a1d @ a2 - a1 @ a1 @ a2d)
    h = h + params.delta1a * (a1d @ a1) + params.delta2 * (a2d @ a2)

    if space.n_modes == 4:
        b1 = annihilation(space, 2)
        b2 = annihilation(space, 3)
        b1d, b2d = adjoint(b1), adjoint(b2)
        h = h + 1j * e * (b1d - b1)
        h = h + 0.5j * chi * (b1d @ b1d @ b2 - b1 @ b1 @ b2d)
        h = h + params.delta1b * (b1d @ b1) + params.delta2 * (b2d @ b2)
        h = h + params.v1 * (a1d @ b1 + a1 @ b1d)
        h = h + params.v2 * (a2d @ b2 + a2 @ b2d)

    return prune(h)


def jump_operators(params: ModelParams, space: FockSpace) -> list[sp.csr_matrix]:
    """One jump operator per leaky mode, sqrt(2*kappa) * a_mode.

    With these prefactors the standard dissipator
    L rho Ldag - {Ldag L, rho}/2 reproduces the master-equation damping
    terms kappa*(2 a rho adag - adag a rho - rho adag a).
    """
    _check_space(space)
    rates = [params.kappa1, params.kappa2] * (space.n_modes // 2)
    return [
        prune(np.sqrt(2.0 * k) * annihilation(space, m))
        for m, k in enumerate(rates)
    ]


def vec(rho: np.ndarray) -> np.ndarray:
    """Column-stack a matrix into a vector."""
    return np.asarray(rho).reshape(-1, order="F")


def unvec(v: np.ndarray, dim: int) -> np.ndarray:
    """Inverse of :func:`vec`."""
    return np.asarray(v).reshape((dim, dim), order="F")


def trace_functional(dim: int) -> np.ndarray:
    """Row vector t with t @ vec(rho) == trace(rho)."""
    t = np.zeros(dim * dim)
    t[:: dim + 1] = 1.0
    return t


def liouvillian_from_ops(h: sp.spmatrix, jumps, max_dim: int | None = 2048) -> sp.csr_matrix:
    """Column-stacked superoperator for drho/dt = -i[H,rho] + sum_k D[L_k]rho."""
    d = h.shape[0]
    if max_dim is not None and d > max_dim:
        raise DimensionOverflowError(
            f"Hilbert dimension {d} exceeds the superoperator cap {max_dim}; "
            f"raise max_dim explicitly if you really want a {d * d}x{d * d} matrix"
        )
    ident = sp.identity(d, dtype=complex, format="csr")
    h = sp.csr_matrix(h)
    lind = -1j * (sp.kron(ident, h) - sp.kron(h.T, ident))
    for l_op in jumps:
        l_op = sp.csr_matrix(l_op)
        ldl = (adjoint(l_op) @ l_op).tocsr()
        lind = lind + sp.kron(l_op.conjugate(), l_op)
        lind = lind - 0.5 * (sp.kron(ident, ldl) + sp.kron(ldl.T, ident))
    return prune(lind)


def liouvillian(params: ModelParams, space: FockSpace, max_dim: int | None = 2048) -> sp.csr_matrix:
    """Liouvillian of the full model on ``space``; see module docstring for the vec convention."""
    _check_space(space)
    return liouvillian_from_ops(
        hamiltonian(params, space), jump_operators(params, space), max_dim=max_dim
    )


def single_cavity(params: ModelParams) -> ModelParams:
    """Parameter set with the couplings removed, for single-cavity work."""
    return replace(params, v1=0.0, v2=0.0)
