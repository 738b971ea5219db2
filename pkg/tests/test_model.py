import numpy as np
import pytest
import scipy.sparse as sp

from shgsync.fock import adjoint, annihilation, build_space, basis_vector
from shgsync.model import (DimensionOverflowError, ModelParams, hamiltonian,
                           jump_operators, liouvillian, liouvillian_from_ops,
                           single_cavity, trace_functional, unvec, vec)

TWO_CAVITY = ModelParams(drive=2.0, chi=0.8, kappa2=0.5, delta1a=0.5, delta1b=-0.3,
                         delta2=1.0, v1=0.2, v2=0.1)


def test_params_validation():
    with pytest.raises(ValueError):
        ModelParams(drive=-1.0, chi=0.0)
    with pytest.raises(ValueError):
        ModelParams(drive=0.0, chi=-0.1)
    with pytest.raises(ValueError):
        ModelParams(drive=0.0, chi=0.0, kappa2=0.0)


def test_params_normalized():
    p = ModelParams(drive=4.0, chi=1.6, kappa2=1.0, delta1a=1.0, kappa1=2.0)
    n = p.normalized()
    assert n.kappa1 == 1.0
    assert n.drive == 2.0 and n.chi == 0.8 and n.kappa2 == 0.5 and n.delta1a == 0.5


def test_zero_params_zero_hamiltonian():
    space = build_space([3, 2, 3, 2])
    p = ModelParams(drive=0.0, chi=0.0, kappa2=0.5)
    assert hamiltonian(p, space).nnz == 0


@pytest.mark.parametrize("dims", [[4, 3], [3, 2, 3, 2]])
def test_hamiltonian_exactly_hermitian(dims):
    space = build_space(dims)
    h = hamiltonian(TWO_CAVITY, space)
    assert (h - adjoint(h)).nnz == 0


def test_hamiltonian_wrong_mode_count():
    with pytest.raises(ValueError):
        hamiltonian(TWO_CAVITY, build_space([3, 3, 3]))


def test_conversion_block_eigenvalues():
    # E=0, detunings 0: the {|2,0>, |0,1>} block splits by +-chi/sqrt(2)
    space = build_space([4, 3])
    p = ModelParams(drive=0.0, chi=0.8, kappa2=0.5)
    h = hamiltonian(p, space).toarray()
    i20, i01 = space.basis_index((2, 0)), space.basis_index((0, 1))
    block = h[np.ix_([i20, i01], [i20, i01])]
    evals = np.linalg.eigvalsh(block)
    np.testing.assert_allclose(evals, [-0.8 / np.sqrt(2), 0.8 / np.sqrt(2)], atol=1e-14)


def test_jump_operator_prefactors_and_count():
    space = build_space([3, 2, 3, 2])
    jumps = jump_operators(TWO_CAVITY, space)
    assert len(jumps) == 4
    expected = np.sqrt(2.0) * annihilation(space, 0)
    assert (jumps[0] - expected).nnz == 0
    # kappa2 = 0.5 makes the harmonic jump exactly the annihilator
    assert (jumps[1] - annihilation(space, 1)).nnz == 0
    assert len(jump_operators(TWO_CAVITY, build_space([4, 3]))) == 2


def test_single_mode_decay_law():
    # H=0, rho(0)=|1><1|: <n(t)> = exp(-2 kappa1 t), via dense propagation
    space = build_space([3])
    a = annihilation(space, 0)
    lind = liouvillian_from_ops(sp.csr_matrix((3, 3), dtype=complex),
                                [np.sqrt(2.0) * a]).toarray()
    rho0 = np.zeros((3, 3), dtype=complex)
    rho0[1, 1] = 1.0
    from scipy.linalg import expm
    for t in (0.1, 0.5, 1.0):
        rho_t = unvec(expm(lind * t) @ vec(rho0), 3)
        n_t = np.real(np.trace(np.diag([0.0, 1.0, 2.0]) @ rho_t))
        assert n_t == pytest.approx(np.exp(-2.0 * t), abs=1e-12)


def test_trace_preservation():
    space = build_space([3, 2, 3, 2])
    lind = liouvillian(TWO_CAVITY, space)
    t = trace_functional(space.total_dim)
    assert np.max(np.abs(t @ lind)) < 1e-12


def test_vacuum_steady_without_drive():
    space = build_space([3, 2])
    p = ModelParams(drive=0.0, chi=1.3, kappa2=0.5, delta1a=0.4, delta2=-0.2)
    lind = liouvillian(p, space)
    vac = basis_vector(space, (0, 0))
    rho_vac = np.outer(vac, vac.conj())
    assert np.max(np.abs(lind @ vec(rho_vac))) < 1e-14


def test_liouvillian_spectrum_toy():
    # 1-mode driven cavity: all eigenvalues in the closed left half plane
    space = build_space([3])
    a = annihilation(space, 0)
    h = 1j * 0.1 * (adjoint(a) - a)
    lind = liouvillian_from_ops(h, [np.sqrt(2.0) * a]).toarray()
    evals = np.linalg.eigvals(lind)
    assert np.max(evals.real) <= 1e-10


def test_vectorization_convention():
    # -i[H, rho] maps to -i(I (x) H - H^T (x) I) vec(rho), column stacking
    rng = np.random.default_rng(5)
    d = 4
    h = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    h = 0.5 * (h + h.conj().T)
    rho = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    lind = liouvillian_from_ops(sp.csr_matrix(h), [])
    direct = -1j * (h @ rho - rho @ h)
    np.testing.assert_allclose(unvec(lind @ vec(rho), d), direct, atol=1e-12)


def test_kronecker_sum_structure_when_uncoupled():
    # V1=V2=0: the two-cavity Liouvillian decomposes into the two
    # single-cavity ones under the vec-index reshuffle
    dims_a, dims_b = [3, 2], [2, 2]
    p = ModelParams(drive=0.7, chi=0.9, kappa2=0.5, delta1a=0.3, delta1b=-0.4,
                    delta2=0.8, v1=0.0, v2=0.0)
    space = build_space(dims_a + dims_b)
    lind_full = liouvillian(p, space).toarray()

    space_a = build_space(dims_a)
    space_b = build_space(dims_b)
    import dataclasses
    pa = dataclasses.replace(p, delta1b=0.0)
    pb = dataclasses.replace(p, delta1a=p.delta1b)
    lind_a = liouvillian(pa, space_a).toarray()
    lind_b = liouvillian(pb, space_b).toarray()

    da, db = space_a.total_dim, space_b.total_dim
    d = da * db
    kron_sum = np.kron(lind_a, np.eye(db * db)) + np.kron(np.eye(da * da), lind_b)

    # permutation: composite vec index (cA,cB,rA,rB) -> (cA,rA) x (cB,rB)
    perm = np.empty(d * d, dtype=int)
    for c in range(d):
        ca, cb = divmod(c, db)
        for r in range(d):
            ra, rb = divmod(r, db)
            v = c * d + r
            w = (ca * da + ra) * (db * db) + (cb * db + rb)
            perm[v] = w
    reordered = kron_sum[np.ix_(perm, perm)]
    np.testing.assert_allclose(lind_full, reordered, atol=1e-12)


def test_cavity_exchange_symmetry():
    # delta1a == delta1b: swapping cavity labels permutes the Liouvillian into itself
    dims = [3, 2, 3, 2]
    p = ModelParams(drive=1.2, chi=0.7, kappa2=0.5, delta1a=0.4, delta1b=0.4,
                    delta2=-0.6, v1=0.15, v2=0.05)
    space = build_space(dims)
    lind = liouvillian(p, space).toarray()
    d = space.total_dim
    swap = np.empty(d, dtype=int)
    for i in range(d):
        m1, m2, n1, n2 = space.multi_index(i)
        swap[i] = space.basis_index((n1, n2, m1, m2))
    perm = np.empty(d * d, dtype=int)
    for c in range(d):
        for r in range(d):
            perm[c * d + r] = swap[c] * d + swap[r]
    np.testing.assert_allclose(lind, lind[np.ix_(perm, perm)], atol=1e-12)


def test_dimension_overflow_guard():
    space = build_space([8, 4, 8, 4])
    with pytest.raises(DimensionOverflowError):
        liouvillian(TWO_CAVITY, space, max_dim=512)


def test_single_cavity_helper():
    p = single_cavity(TWO_CAVITY)
    assert p.v1 == 0.0 and p.v2 == 0.0
    assert p.chi == TWO_CAVITY.chi
