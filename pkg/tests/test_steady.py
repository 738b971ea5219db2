import numpy as np
import pytest

from shgsync.fock import annihilation, build_space, number_operator
from shgsync.model import ModelParams, liouvillian
from shgsync.oracles import g2_cross_quantum_limit, g2_single_cavity_quantum
from shgsync.steady import (DensityMatrix, SteadyStateError, UndefinedCorrelationError,
                            converged_g2, expectation, g2_equal_time, solve_steady_state)

FIG2_PARAMS = dict(kappa2=0.5, delta1a=0.5, delta2=1.0)


def solve(params, dims, **kw):
    space = build_space(dims)
    return solve_steady_state(liouvillian(params, space, max_dim=None), space, **kw)


def test_vacuum_without_drive():
    rho = solve(ModelParams(drive=0.0, chi=3.0, **FIG2_PARAMS), [4, 3])
    assert rho.data[0, 0].real == pytest.approx(1.0, abs=1e-10)
    assert rho.mode_population(0) == pytest.approx(0.0, abs=1e-10)


def test_linear_cavity_coherent_state():
    # chi = 0: exact driven damped cavity, <a> = E/(kappa1 + i delta1)
    p = ModelParams(drive=0.4, chi=0.0, kappa2=0.5, delta1a=0.7)
    space = build_space([12, 2])
    rho = solve_steady_state(liouvillian(p, space, max_dim=None), space)
    alpha = 0.4 / (1.0 + 0.7j)
    assert expectation(rho, annihilation(space, 0)) == pytest.approx(alpha, abs=1e-9)
    assert rho.mode_population(0) == pytest.approx(abs(alpha) ** 2, abs=1e-9)


def test_perturbative_g2_single_cavity():
    # weak drive: the closed-form quantum-limit value, O(E^2) corrections
    rho = solve(ModelParams(drive=0.01, chi=6.4, **FIG2_PARAMS), [4, 3])
    g = g2_equal_time(rho, 0, 1)
    oracle = g2_single_cavity_quantum(6.4, 1.0, 0.5, 0.5, 1.0)
    assert oracle == pytest.approx(1.0 / 81.03, abs=2e-5)
    assert g.value == pytest.approx(oracle, abs=5e-3)
    assert g.statistical_error == 0.0
    assert g.value == pytest.approx(g.numerator / (g.mean_a * g.mean_b), rel=1e-12)


def test_quantum_limit_two_cavity_cross_g2():
    p = ModelParams(drive=0.01, chi=50.0, kappa2=0.5, delta1a=-3.0, delta1b=-3.0,
                    delta2=0.0, v1=0.01)
    rho = solve(p, [3, 2, 3, 2])
    g = g2_equal_time(rho, "a1", "b1")
    assert g.value == pytest.approx(0.994, abs=2e-3)
    assert g2_cross_quantum_limit(-3.0, -3.0, 1.0, 0.01) == pytest.approx(0.994, abs=1e-12)


def test_expectation_basics():
    rho = solve(ModelParams(drive=0.3, chi=0.5, **FIG2_PARAMS), [4, 3])
    space = rho.space
    ident = np.eye(space.total_dim, dtype=complex)
    assert expectation(rho, ident) == pytest.approx(1.0, abs=1e-10)
    n1 = number_operator(space, 0)
    assert abs(expectation(rho, n1).imag) < 1e-9
    pure = np.zeros((3, 3), dtype=complex)
    pure[1, 1] = 1.0
    dm = DensityMatrix(data=pure, space=build_space([3]))
    assert expectation(dm, number_operator(build_space([3]), 0)) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        expectation(dm, np.eye(4))


def test_g2_product_state_is_one():
    rng = np.random.default_rng(3)
    pa = rng.random(3)
    pa /= pa.sum()
    pb = rng.random(2)
    pb /= pb.sum()
    rho = np.kron(np.diag(pa), np.diag(pb)).astype(complex)
    dm = DensityMatrix(data=rho, space=build_space([3, 2]))
    assert g2_equal_time(dm, 0, 1).value == pytest.approx(1.0, abs=1e-9)


def test_g2_single_photon_superposition_is_zero():
    space = build_space([2, 2])
    psi = np.zeros(4, dtype=complex)
    psi[space.basis_index((1, 0))] = 1.0 / np.sqrt(2)
    psi[space.basis_index((0, 1))] = 1.0 / np.sqrt(2)
    dm = DensityMatrix(data=np.outer(psi, psi.conj()), space=space)
    assert g2_equal_time(dm, 0, 1).value == pytest.approx(0.0, abs=1e-12)


def test_g2_undefined_below_floor():
    rho = solve(ModelParams(drive=0.0, chi=1.0, **FIG2_PARAMS), [3, 2])
    with pytest.raises(UndefinedCorrelationError):
        g2_equal_time(rho, 0, 1)


def test_g2_same_mode_rejected():
    rho = solve(ModelParams(drive=0.3, chi=0.5, **FIG2_PARAMS), [4, 3])
    with pytest.raises(ValueError):
        g2_equal_time(rho, "a1", "a1")


def test_residual_contract_and_diagnostics():
    rho = solve(ModelParams(drive=0.5, chi=1.0, **FIG2_PARAMS), [4, 3])
    assert rho.residual_inf < 1e-12
    assert rho.herm_defect < 1e-12
    assert rho.min_eigenvalue > -1e-10
    assert rho.trace() == pytest.approx(1.0, abs=1e-12)
    rho.validate()


def test_uniqueness_under_ordering_change():
    p = ModelParams(drive=0.5, chi=1.0, **FIG2_PARAMS)
    r1 = solve(p, [4, 3], permc_spec="COLAMD")
    r2 = solve(p, [4, 3], permc_spec="MMD_AT_PLUS_A")
    assert np.max(np.abs(r1.data - r2.data)) < 1e-8


def test_iterative_path_matches_direct():
    p = ModelParams(drive=0.5, chi=1.0, **FIG2_PARAMS)
    direct = solve(p, [4, 3], method="direct")
    iterative = solve(p, [4, 3], method="iterative")
    assert np.max(np.abs(direct.data - iterative.data)) < 1e-8


def test_truncation_flag():
    # dim 2 on a populated harmonic traps visible weight in the top level
    p = ModelParams(drive=1.5, chi=1.0, **FIG2_PARAMS)
    tight = solve(p, [6, 2])
    roomy = solve(p, [8, 6])
    assert tight.truncation_suspect
    assert not roomy.truncation_suspect
    assert max(roomy.tail_populations().values()) <= 1e-6


def test_converged_g2_loop():
    p = ModelParams(drive=0.01, chi=6.4, **FIG2_PARAMS)
    values, dims, ok = converged_g2(p, [4, 3], [(0, 1)], tol=1e-3, max_doublings=1)
    assert ok
    assert dims == [4, 3]
    assert values[0] == pytest.approx(g2_single_cavity_quantum(6.4, 1.0, 0.5, 0.5, 1.0),
                                      abs=5e-3)


def test_shape_mismatch_rejected():
    space = build_space([3, 2])
    lind = liouvillian(ModelParams(drive=0.1, chi=0.1, kappa2=0.5), space)
    with pytest.raises(ValueError):
        solve_steady_state(lind, build_space([4, 3]))
