# Copyright (c) 2024 The wh-cert-lib authors
# SPDX-License-Identifier: AGPL-3.0

from __future__ import annotations

from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..exceptions import EncodingError
from .polynomial import Polynomial
from .system import state_variables

SET_TOL = 1e-12
Bounds = Tuple[np.ndarray, np.ndarray]


def _as_bounds(bounds) -> Optional[Bounds]:
    if bounds is None:
        return None
    lo, hi = bounds
    return np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)


class QuadraticForm:
    """
    Set {x : [x; 1]^T S [x; 1] >= 0} of a symmetric (n+1) x (n+1) matrix over the homogenized vector.
    """

    def __init__(self, S: np.ndarray, bounds: Optional[Bounds] = None):
        S = np.atleast_2d(np.asarray(S, dtype=float))
        if S.shape[0] != S.shape[1] or S.shape[0] < 2:
            raise ValueError(f"S must be square of size n+1 >= 2, got {S.shape}")
        if np.max(np.abs(S - S.T)) > SET_TOL:
            raise ValueError("S must be symmetric")
        self.S = (S + S.T) / 2
        self.bounds = _as_bounds(bounds)  # axis-aligned box containing the set, if known

    @property
    def n(self) -> int:
        return self.S.shape[0] - 1

    def evaluate(self, x: np.ndarray):
        x = np.asarray(x, dtype=float)
        z = np.concatenate([x, np.ones(x.shape[:-1] + (1,))], axis=-1)
        values = np.einsum("...i,ij,...j->...", z, self.S, z)
        return float(values) if np.ndim(values) == 0 else values

    def contains(self, x: np.ndarray, tol: float = SET_TOL):
        return self.evaluate(x) >= -tol

    def to_polynomial(self, variables: Optional[Sequence[str]] = None) -> Polynomial:
        return Polynomial.from_quadratic_matrix(self.S, variables or state_variables(self.n))

    def as_set(self) -> SemiAlgebraicSet:
        return SemiAlgebraicSet([self.to_polynomial()], self.bounds)

    def __repr__(self) -> str:
        return f"QuadraticForm(n={self.n})"


def quadratic_matrix(p: Polynomial) -> np.ndarray:
    """Homogenized symmetric matrix S with p(x) = [x; 1]^T S [x; 1], for degree <= 2."""
    if p.degree > 2:
        raise EncodingError(f"inequality of degree {p.degree} has no quadratic-form representation")
    n = p.n_vars
    S = np.zeros((n + 1, n + 1))
    for mono, coeff in p.terms().items():
        idx = [i for i, e in enumerate(mono) for _ in range(e)]
        if len(idx) == 0:
            S[n, n] += coeff
        elif len(idx) == 1:
            S[idx[0], n] += coeff / 2
            S[n, idx[0]] += coeff / 2
        elif idx[0] == idx[1]:
            S[idx[0], idx[0]] += coeff
        else:
            S[idx[0], idx[1]] += coeff / 2
            S[idx[1], idx[0]] += coeff / 2
    return S


class SemiAlgebraicSet:
    """Conjunction of polynomial inequalities g_i(x) >= 0."""

    def __init__(self, polys: Sequence[Polynomial], bounds: Optional[Bounds] = None, empty: bool = False):
        if len(polys) == 0:
            raise ValueError("a semialgebraic set needs at least one inequality")
        variables = polys[0].variables
        if any(p.variables != variables for p in polys):
            raise ValueError("all inequalities must share their variables")
        self.polys = list(polys)
        self.bounds = _as_bounds(bounds)
        self.empty = empty  # built by SemiAlgebraicSet.empty_set(), holds the inequality -1 >= 0

    @classmethod
    def empty_set(cls, n: int) -> SemiAlgebraicSet:
        return cls([Polynomial.constant(-1, state_variables(n))], empty=True)

    @property
    def n(self) -> int:
        return self.polys[0].n_vars

    @property
    def variables(self) -> Tuple[str, ...]:
        return self.polys[0].variables

    def evaluate_all(self, x: np.ndarray) -> np.ndarray:
        """Values of every inequality, shape (..., k)."""
        x = np.asarray(x, dtype=float)
        return np.stack([np.asarray(p.evaluate(x)) for p in self.polys], axis=-1)

    def contains(self, x: np.ndarray, tol: float = SET_TOL):
        inside = np.all(self.evaluate_all(x) >= -tol, axis=-1)
        return bool(inside) if np.ndim(inside) == 0 else inside

    def quadratic_forms(self) -> List[QuadraticForm]:
        return [QuadraticForm(quadratic_matrix(p)) for p in self.polys]

    @property
    def max_degree(self) -> int:
        return max(p.degree for p in self.polys)

    def intersect(self, other: SemiAlgebraicSet) -> SemiAlgebraicSet:
        bounds = self.bounds
        if bounds is None:
            bounds = other.bounds
        elif other.bounds is not None:
            bounds = (np.maximum(bounds[0], other.bounds[0]), np.minimum(bounds[1], other.bounds[1]))
        return SemiAlgebraicSet(self.polys + other.polys, bounds, self.empty or other.empty)

    def __repr__(self) -> str:
        return f"SemiAlgebraicSet(n={self.n}, {len(self.polys)} inequalities)"
