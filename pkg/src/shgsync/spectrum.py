"""Eigenstructure of the undriven Hamiltonians.

With the drive and detunings removed, the conversion term couples only
states within small excitation manifolds: {|2,0>, |0,1>} is split by
+-chi/sqrt(2), {|3,0>, |1,1>} by +-sqrt(3/2)*chi, and for two coupled
cavities the single-excitation pair is split by +-V1 into symmetric and
antisymmetric combinations.  These level shifts are what detune the
laser from multi-photon eigenstates and decide bunching vs antibunching
in the quantum limit.

Manifolds are never assumed invariant: the leakage of H out of the
projected block is measured and a non-closed manifold is an error,
since truncation can silently break invariance.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp

from .fock import FockSpace, basis_vector
from .model import ModelParams, hamiltonian


class ManifoldLeakageError(ValueError):
    """The requested manifold is not invariant under the Hamiltonian."""


@dataclass(frozen=True)
class ManifoldSpec:
    """A set of Fock multi-indices spanning one excitation manifold."""

    indices: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if len(self.indices) == 0:
            raise ValueError("manifold needs at least one basis state")
        object.__setattr__(self, "indices",
                           tuple(tuple(int(n) for n in occ) for occ in self.indices))

    @staticmethod
    def parse(text: str) -> "ManifoldSpec":
        """Parse '2,0;0,1' into ((2,0), (0,1))."""
        groups = [g for g in text.split(";") if g.strip()]
        return ManifoldSpec(tuple(tuple(int(n) for n in g.split(",")) for g in groups))


def undriven_hamiltonian(params: ModelParams, space: FockSpace) -> sp.csr_matrix:
    """Hamiltonian with drive and detunings zeroed; couplings stay on 4-mode spaces."""
    bare = replace(params, drive=0.0, delta1a=0.0, delta1b=0.0, delta2=0.0)
    return hamiltonian(bare, space)


def manifold_eigensystem(h: sp.spmatrix, space: FockSpace, manifold: ManifoldSpec,
                         *, leak_tol: float = 1e-10) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and eigenvectors of H projected on the manifold.

    Raises :class:`ManifoldLeakageError` when H maps the manifold
    outside itself by more than ``leak_tol`` in vector norm.
    """
    vectors = [basis_vector(space, occ) for occ in manifold.indices]
    basis = np.stack(vectors, axis=1)          # (dim, m)
    images = h @ basis
    block = basis.conj().T @ images            # (m, m)
    residual = images - basis @ block
    leakage = float(np.linalg.norm(residual))
    if leakage > leak_tol:
        raise ManifoldLeakageError(
            f"manifold {manifold.indices} leaks under H (norm {leakage:.3e} > {leak_tol:.0e})")
    evals, evecs = np.linalg.eigh(block)
    return evals, evecs


def manifold_table(params: ModelParams, space: FockSpace, manifolds) -> list[dict]:
    """Eigenvalues of several manifolds of the undriven Hamiltonian, for reporting."""
    h = undriven_hamiltonian(params, space)
    rows = []
    for m in manifolds:
        evals, _ = manifold_eigensystem(h, space, m)
        rows.append({"manifold": ";".join(",".join(str(n) for n in occ) for occ in m.indices),
                     "eigenvalues": evals.tolist()})
    return rows
