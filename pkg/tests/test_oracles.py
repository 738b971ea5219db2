import math

import numpy as np
import pytest

from shgsync.oracles import (g2_cross_quantum_limit, g2_cross_vs_split,
                             g2_single_cavity_quantum, nonmonotonicity_threshold,
                             split_strengthens_correlation)


def test_single_cavity_no_nonlinearity():
    assert g2_single_cavity_quantum(0.0, 1.0, 0.5, 0.3, -0.7) == 1.0


def test_single_cavity_strong_antibunching_limit():
    assert g2_single_cavity_quantum(1e6, 1.0, 0.5, 0.5, 1.0) < 1e-10


def test_single_cavity_reference_value():
    value = g2_single_cavity_quantum(6.4, 1.0, 0.5, 0.5, 1.0)
    assert value == pytest.approx(0.012342, abs=5e-7)


def test_single_cavity_singular_denominator():
    with pytest.raises(ZeroDivisionError):
        g2_single_cavity_quantum(1.0, kappa1=0.0, kappa2=0.0, delta1=0.0, delta2=0.0)


def test_single_cavity_monotone_in_chi():
    chis = np.linspace(0.0, 10.0, 201)
    vals = [g2_single_cavity_quantum(c, 1.0, 0.5, 0.5, 1.0) for c in chis]
    assert all(a >= b for a, b in zip(vals, vals[1:]))


def test_cross_no_coupling():
    assert g2_cross_quantum_limit(0.7, -0.4, 1.0, 0.0) == 1.0


def test_cross_identical_cavities_value():
    # split 0 at delta1 = -3 reduces the bracket to 2*delta1/(delta1^2+kappa1^2)
    assert g2_cross_quantum_limit(-3.0, -3.0, 1.0, 0.01) == pytest.approx(0.994, abs=1e-12)


def test_cross_large_split_limit():
    limit = 1.0 - 2.0 * (-3.0) * 0.01 / (1.0 + 9.0)
    assert limit == pytest.approx(1.006)
    value = g2_cross_vs_split(-3.0, 1e7, 1.0, 0.01)
    assert value == pytest.approx(limit, abs=1e-6)


def test_cross_symmetric_in_detunings():
    for d1a, d1b in ((0.3, -1.7), (2.0, 0.1), (-0.4, -0.9)):
        assert g2_cross_quantum_limit(d1a, d1b, 1.0, 0.05) == pytest.approx(
            g2_cross_quantum_limit(d1b, d1a, 1.0, 0.05), rel=1e-14)


def test_cross_sign_matches_average_detuning():
    for d1 in (0.5, 1.0, 2.5):
        assert g2_cross_quantum_limit(d1, d1, 1.0, 0.01) > 1.0
        assert g2_cross_quantum_limit(-d1, -d1, 1.0, 0.01) < 1.0


def test_nonmonotonicity_threshold_value():
    assert nonmonotonicity_threshold(1.0) == pytest.approx(1.7320508, abs=1e-7)
    assert nonmonotonicity_threshold(2.0) == pytest.approx(2.0 * math.sqrt(3.0))


def test_split_strengthens_predicate():
    assert split_strengthens_correlation(2.0, 1.0, 0.01)
    assert not split_strengthens_correlation(1.0, 1.0, 0.01)
