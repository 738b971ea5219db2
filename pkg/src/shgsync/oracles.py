"""Closed-form quantum-limit correlation formulas.

These are leading-order perturbative results for the steady state at
weak drive: the single-cavity g2(a1,a2) (perturbative in E) and the
two-cavity cross-correlation g2(a1,b1) in the limit of vanishing drive,
infinite nonlinearity and small coupling (first order in V1).  They are
pure arithmetic with no tolerance knobs and serve as independent
references for the full solvers.
"""

from __future__ import annotations

import math

import numpy as np


def g2_single_cavity_quantum(chi: float, kappa1: float = 1.0, kappa2: float = 0.5,
                             delta1: float = 0.0, delta2: float = 0.0) -> float:
    """Quantum-limit g2(a1,a2) of one SHG cavity, to leading order in the drive."""
    outer = (delta1**2 + kappa1**2) * ((delta1 + delta2)**2 + (kappa1 + kappa2)**2)
    if outer == 0.0:
        raise ZeroDivisionError("singular parameter combination: vanishing outer denominator")
    num = 0.25 * chi**4 + chi**2 * (-delta1 * (delta1 + delta2) + kappa1 * (kappa1 + kappa2))
    denom = 1.0 + num / outer
    if denom == 0.0:
        raise ZeroDivisionError("singular parameter combination: g2 denominator vanishes")
    return 1.0 / denom


def _lorentzian_weight(delta: float, kappa: float) -> float:
    return 2.0 * delta / (delta**2 + kappa**2)


def g2_cross_quantum_limit(delta1a: float, delta1b: float, kappa1: float = 1.0,
                           v1: float = 0.0) -> float:
    """Quantum-limit g2(a1,b1) of two coupled cavities, first order in V1.

    Valid for vanishing drive and infinite nonlinearity; the bracket is
    symmetric under exchange of the two detunings and approaches
    -2*delta1/(delta1^2+kappa1^2) when the detuning difference grows at
    fixed average delta1.
    """
    s = delta1a + delta1b
    bracket = (
        _lorentzian_weight(delta1a, kappa1)
        + _lorentzian_weight(delta1b, kappa1)
        - 4.0 * s / (s**2 + 4.0 * kappa1**2)
    )
    return 1.0 + bracket * v1


def g2_cross_vs_split(delta1: float, split: float, kappa1: float = 1.0,
                      v1: float = 0.0) -> float:
    """Same as :func:`g2_cross_quantum_limit` parametrized by average detuning and split.

    ``delta1`` is the average (d1a + d1b)/2 and ``split`` the difference
    d1a - d1b.
    """
    return g2_cross_quantum_limit(delta1 + 0.5 * split, delta1 - 0.5 * split, kappa1, v1)


def nonmonotonicity_threshold(kappa1: float = 1.0) -> float:
    """Average detuning above which a small detuning split strengthens g2(a1,b1)."""
    return math.sqrt(3.0) * kappa1


def split_strengthens_correlation(delta1: float, kappa1: float = 1.0, v1: float = 0.01,
                                  split_max: float | None = None, n_grid: int = 4001) -> bool:
    """Whether some split > 0 gives |g2 - 1| larger than at split = 0.

    Decided by scanning the closed-form cross-correlation over a split
    grid; a small relative margin guards against ties at split -> 0.
    """
    if split_max is None:
        split_max = 8.0 * max(abs(delta1), kappa1)
    splits = np.linspace(0.0, split_max, n_grid)
    dev = np.abs([g2_cross_vs_split(delta1, s, kappa1, v1) - 1.0 for s in splits])
    return bool(np.max(dev[1:]) > dev[0] * (1.0 + 1e-9))
