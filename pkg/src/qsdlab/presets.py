"""Ready-made models used throughout the tests and the documentation.

These are ordinary :class:`~qsdlab.model.Model` instances; nothing here is
special-cased elsewhere.  They pin down the coefficient choices that the
acceptance suite exercises so every entry point agrees on them.
"""

from __future__ import annotations

import math

import numpy as np

from .model import LitterLaw, Model


def logistic_1d(b=1.0, d=0.0, c=1.0, gamma=1.0) -> Model:
    """Single-type logistic chain: birth n*b, death n*(d + (c n)^gamma)."""
    return Model.constant([b], [d], [[c]], gamma)


def reference_2d() -> Model:
    """Two-type competitive logistic chain with mild cross-competition.

    Deterministic rest point near (4.5, 4.5), so a truncation at N = 60 holds
    essentially all of the quasi-stationary mass.
    """
    return Model.constant(b=[1.0, 1.0], d=[0.0, 0.0],
                          c=[[0.2, 0.02], [0.02, 0.2]], gamma=1.0)


def strong_intra_2d(b=4.0, c_diag=2.0, c_cross=0.1) -> Model:
    """Two types with constant self-competition and decaying cross-competition.

    c_ii = c_diag, c_ij(n) = c_cross / sqrt(1 + |n|) for i != j: the
    self-interaction dominates the mixed terms at scale, which is exactly the
    regime the intraspecific-dominance check certifies.
    """
    bvec = np.array([b, b], dtype=float)
    dvec = np.zeros(2)

    def competition(n):
        cross = c_cross / math.sqrt(1.0 + sum(n))
        return np.array([[c_diag, cross], [cross, c_diag]])

    return Model.from_callbacks(2, 1.0,
                                birth=lambda n: bvec,
                                death=lambda n: dvec,
                                competition=competition,
                                beta1=0.0, beta2=0.0)


def neutral(r=3, b=2.0, d=0.0, c=1.0, gamma=1.0) -> Model:
    """All competition coefficients equal: the exchangeable-types special case."""
    cmat = np.full((r, r), c, dtype=float)
    return Model.constant([b] * r, [d] * r, cmat, gamma)


def catastrophe_logistic_1d(rate_coef=0.5) -> Model:
    """Logistic single-type chain plus a linear catastrophe intensity a(n) = coef*n."""
    return Model.constant([1.0], [0.0], [[1.0]], 1.0,
                          catastrophe=lambda n: rate_coef * n[0])


def multibirth_uniform_1d() -> Model:
    """Single-type logistic chain whose births add 1, 2 or 3 offspring uniformly."""
    litter = LitterLaw({(1,): 1 / 3, (2,): 1 / 3, (3,): 1 / 3})
    return Model.constant([1.0], [0.0], [[1.0]], 1.0, litter=litter)


def mixed_dominance_2d(delta=0.5) -> Model:
    """Two types where the mixed competition terms themselves grow with the state.

    c_11 = c_21 = 1, c_12(n) = n_1^(1+delta), c_22(n) = n_2^0.5: single-type
    states are strongly suppressed relative to the boundary-adjacent ones,
    the regime covered by the boundary-pressure comparison check.
    """
    bvec = np.ones(2)
    dvec = np.zeros(2)

    def competition(n):
        return np.array([[1.0, float(n[0]) ** (1.0 + delta)],
                         [1.0, float(n[1]) ** 0.5]])

    return Model.from_callbacks(2, 1.0,
                                birth=lambda n: bvec,
                                death=lambda n: dvec,
                                competition=competition,
                                beta1=0.0)
