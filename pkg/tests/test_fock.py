import numpy as np
import pytest
import scipy.sparse as sp

from shgsync.fock import (FockSpace, adjoint, annihilation, build_space, creation,
                          identity, is_hermitian, kron, number_operator, prune)


def nonzeros(m):
    m = m.tocoo()
    return {(int(r), int(c)): v for r, c, v in zip(m.row, m.col, m.data)}


def test_build_space_dims():
    assert build_space([3]).total_dim == 3
    assert build_space([3, 2]).total_dim == 6
    assert build_space([8, 4, 8, 4]).total_dim == 1024


@pytest.mark.parametrize("bad", [[], [1], [3, 1], [0, 4], [2.5, 3]])
def test_build_space_rejects(bad):
    with pytest.raises(ValueError):
        build_space(bad)


def test_index_roundtrip():
    space = build_space([3, 2, 4, 2])
    for i in range(space.total_dim):
        occ = space.multi_index(i)
        assert space.basis_index(occ) == i
    assert space.multi_index(0) == (0, 0, 0, 0)
    assert space.basis_index((2, 1, 3, 1)) == space.total_dim - 1
    with pytest.raises(IndexError):
        space.multi_index(space.total_dim)
    with pytest.raises(ValueError):
        space.basis_index((3, 0, 0, 0))


def test_annihilation_single_mode():
    a = annihilation(build_space([3]), 0)
    assert nonzeros(a) == {(0, 1): 1.0, (1, 2): pytest.approx(np.sqrt(2))}


def test_annihilation_embedded_mode():
    a = annihilation(build_space([2, 2]), 1)
    assert nonzeros(a) == {(0, 1): 1.0, (2, 3): 1.0}


def test_annihilation_invalid_mode():
    space = build_space([3, 3])
    with pytest.raises(ValueError):
        annihilation(space, 2)
    with pytest.raises(ValueError):
        number_operator(space, -1)


def test_commutator_below_truncation():
    space = build_space([6])
    a = annihilation(space, 0)
    comm = (a @ adjoint(a) - adjoint(a) @ a).toarray()
    # the identity holds on all Fock levels below the cutoff
    expected = np.eye(6)
    expected[5, 5] = -5.0  # truncation artifact at the top level
    np.testing.assert_allclose(comm, expected, atol=1e-14)


def test_distinct_mode_operators_commute():
    space = build_space([3, 4, 2])
    for i in range(3):
        for j in range(i + 1, 3):
            ai, aj = annihilation(space, i), annihilation(space, j)
            assert (ai @ aj - aj @ ai).nnz == 0


def test_number_operator_diagonal():
    n0 = number_operator(build_space([3]), 0)
    np.testing.assert_allclose(n0.toarray(), np.diag([0, 1, 2]), atol=0)
    n1 = number_operator(build_space([2, 3]), 1)
    np.testing.assert_allclose(np.diag(n1.toarray()).real, [0, 1, 2, 0, 1, 2], atol=0)


def test_number_equals_adag_a():
    space = build_space([4, 3])
    for m in range(2):
        a = annihilation(space, m)
        diff = number_operator(space, m) - adjoint(a) @ a
        assert prune(diff).nnz == 0


def test_adjoint_entries():
    ad = adjoint(annihilation(build_space([3]), 0))
    assert nonzeros(ad) == {(1, 0): 1.0, (2, 1): pytest.approx(np.sqrt(2))}


def test_kron_identape():
    k = kron(sp.identity(2, dtype=complex, format="csr"),
             sp.identity(3, dtype=complex, format="csr"))
    assert (k - sp.identity(6, dtype=complex)).nnz == 0


def test_product_adjoint_identity():
    rng = np.random.default_rng(7)
    for _ in range(5):
        a = sp.random(8, 8, density=0.3, random_state=rng.integers(1 << 31)).astype(complex)
        a = a + 1j * sp.random(8, 8, density=0.3, random_state=rng.integers(1 << 31))
        b = sp.random(8, 8, density=0.3, random_state=rng.integers(1 << 31)).astype(complex)
        left = adjoint(a @ b).toarray()
        right = (adjoint(b) @ adjoint(a)).toarray()
        # dense reference arithmetic
        ref = (a.toarray() @ b.toarray()).conj().T
        np.testing.assert_allclose(left, ref, atol=1e-14)
        np.testing.assert_allclose(right, ref, atol=1e-14)


def test_construction_deterministic():
    s1 = build_space([4, 3, 4, 3])
    s2 = build_space([4, 3, 4, 3])
    for m in range(4):
        a1, a2 = annihilation(s1, m), annihilation(s2, m)
        assert np.array_equal(a1.indices, a2.indices)
        assert np.array_equal(a1.indptr, a2.indptr)
        assert np.array_equal(a1.data, a2.data)


def test_prune_drops_small_entries():
    m = sp.csr_matrix(np.array([[1.0, 1e-16], [0.0, 2.0]], dtype=complex))
    p = prune(m)
    assert p.nnz == 2


def test_is_hermitian():
    space = build_space([4])
    n = number_operator(space, 0)
    assert is_hermitian(n)
    assert not is_hermitian(annihilation(space, 0))


def test_mode_names_and_lookup():
    s4 = build_space([3, 2, 3, 2])
    assert s4.mode_names == ("a1", "a2", "b1", "b2")
    assert s4.mode_index("b1") == 2
    with pytest.raises(ValueError):
        s4.mode_index("c1")
    assert build_space([4, 3]).mode_names == ("a1", "a2")


def test_occupations_vector():
    space = build_space([3, 2])
    np.testing.assert_array_equal(space.occupations(0), [0, 0, 1, 1, 2, 2])
    np.testing.assert_array_equal(space.occupations(1), [0, 1, 0, 1, 0, 1])
