"""Truncated multimode Fock spaces and sparse bosonic mode operators.

A composite space is an ordered tensor product of truncated single-mode
Fock spaces.  Basis indexing is row-major with the first mode most
significant: for dims (d0, d1, ...) the occupation tuple (n0, n1, ...)
maps to index n0*d1*d2*... + n1*d2*... + ... .  The mode order is fixed
once and used everywhere in this package: (a1, a2) for a single cavity
and (a1, a2, b1, b2) for two coupled cavities.

All operators are scipy CSR matrices with complex entries.  Entries with
magnitude below ``PRUNE_TOL`` are dropped after arithmetic so that
round-off fill-in never accumulates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

PRUNE_TOL = 1e-15

_MODE_NAMES = {
    1: ("m0",),
    2: ("a1", "a2"),
    4: ("a1", "a2", "b1", "b2"),
}


@dataclass(frozen=True)
class FockSpace:
    """Composite truncated bosonic Hilbert space."""

    mode_dims: tuple[int, ...]

    def __post_init__(self):
        if len(self.mode_dims) == 0:
            raise ValueError("a Fock space needs at least one mode")
        for d in self.mode_dims:
            if int(d) != d or d < 2:
                raise ValueError(f"every mode dimension must be an integer >= 2, got {d}")
        object.__setattr__(self, "mode_dims", tuple(int(d) for d in self.mode_dims))

    @property
    def n_modes(self) -> int:
        return len(self.mode_dims)

    @property
    def total_dim(self) -> int:
        return math.prod(self.mode_dims)

    @property
    def mode_names(self) -> tuple[str, ...]:
        names = _MODE_NAMES.get(self.n_modes)
        if names is None:
            names = tuple(f"m{i}" for i in range(self.n_modes))
        return names

    def mode_index(self, name: str) -> int:
        try:
            return self.mode_names.index(name)
        except ValueError:
            raise ValueError(f"unknown mode {name!r}; modes are {self.mode_names}") from None

    def multi_index(self, i: int) -> tuple[int, ...]:
        """Occupation tuple of basis state ``i`` (row-major order)."""
        if not 0 <= i < self.total_dim:
            raise IndexError(f"basis index {i} outside [0, {self.total_dim})")
        occ = []
        for d in reversed(self.mode_dims):
            occ.append(i % d)
            i //= d
        return tuple(reversed(occ))

    def basis_index(self, occ) -> int:
        """Basis index of the occupation tuple ``occ``."""
        if len(occ) != self.n_modes:
            raise ValueError(f"expected {self.n_modes} occupations, got {len(occ)}")
        i = 0
        for n, d in zip(occ, self.mode_dims):
            if not 0 <= n < d:
                raise ValueError(f"occupation {n} outside [0, {d}) for dims {self.mode_dims}")
            i = i * d + n
        return i

    def occupations(self, mode: int) -> np.ndarray:
        """Vector of length total_dim giving the occupation of ``mode`` per basis state."""
        self._check_mode(mode)
        reps_after = math.prod(self.mode_dims[mode + 1:])
        reps_before = math.prod(self.mode_dims[:mode])
        block = np.repeat(np.arange(self.mode_dims[mode]), reps_after)
        return np.tile(block, reps_before).astype(float)

    def _check_mode(self, mode: int):
        if not 0 <= mode < self.n_modes:
            raise ValueError(f"mode index {mode} outside [0, {self.n_modes})")


def build_space(mode_dims) -> FockSpace:
    """Construct a composite Fock space from a list of per-mode truncation dims."""
    return FockSpace(tuple(mode_dims))


def basis_vector(space: FockSpace, occ) -> np.ndarray:
    """Dense unit vector for the Fock state with occupation tuple ``occ``."""
    v = np.zeros(space.total_dim, dtype=complex)
    v[space.basis_index(occ)] = 1.0
    return v


def vacuum_vector(space: FockSpace) -> np.ndarray:
    return basis_vector(space, (0,) * space.n_modes)


def prune(m: sp.spmatrix, tol: float = PRUNE_TOL) -> sp.csr_matrix:
    """Drop entries with magnitude below ``tol`` and exact zeros."""
    m = sp.csr_matrix(m)
    if m.nnz:
        m.data[np.abs(m.data) < tol] = 0.0
    m.eliminate_zeros()
    m.sort_indices()
    return m


def _single_mode_lowering(dim: int) -> sp.csr_matrix:
    amp = np.sqrt(np.arange(1, dim, dtype=float))
    return sp.diags(amp, offsets=1, shape=(dim, dim), dtype=complex, format="csr")


def annihilation(space: FockSpace, mode: int) -> sp.csr_matrix:
    """Lowering operator of ``mode`` embedded in the composite space.

    Acts as a|n> = sqrt(n)|n-1> on the selected mode and as identity on
    all others.
    """
    space._check_mode(mode)
    op = sp.identity(1, dtype=complex, format="csr")
    for m, d in enumerate(space.mode_dims):
        factor = _single_mode_lowering(d) if m == mode else sp.identity(d, dtype=complex, format="csr")
        op = sp.kron(op, factor, format="csr")
    return prune(op)


def creation(space: FockSpace, mode: int) -> sp.csr_matrix:
    return adjoint(annihilation(space, mode))


def number_operator(space: FockSpace, mode: int) -> sp.csr_matrix:
    """Diagonal photon-number operator of ``mode``; equals adag*a exactly."""
    space._check_mode(mode)
    return sp.diags(space.occupations(mode).astype(complex), format="csr")


def identity(space: FockSpace) -> sp.csr_matrix:
    return sp.identity(space.total_dim, dtype=complex, format="csr")


def adjoint(m: sp.spmatrix) -> sp.csr_matrix:
    """Conjugate transpose."""
    return prune(m.conjugate().transpose())


def kron(a: sp.spmatrix, b: sp.spmatrix) -> sp.csr_matrix:
    return prune(sp.kron(a, b, format="csr"))


def is_hermitian(m: sp.spmatrix, tol: float = 0.0) -> bool:
    """Entrywise Hermiticity check; ``tol=0`` demands exact equality."""
    d = (m - adjoint(m)).tocsr()
    if d.nnz == 0:
        return True
    return np.max(np.abs(d.data)) <= tol
