# Copyright (c) 2024 The wh-cert-lib authors
# SPDX-License-Identifier: AGPL-3.0

from __future__ import annotations

from functools import cached_property
from itertools import combinations_with_replacement
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import sympy

Monomial = Tuple[int, ...]
Number = Union[int, float, sympy.Rational]


def monomial_basis(n_vars: int, degree: int) -> List[Monomial]:
    """
    Exponent tuples of all monomials of total degree <= `degree`, graded-lexicographic ascending.
    Args:
        n_vars: number of variables
        degree: maximal total degree

    Returns:
        List[Monomial]: exponent tuples
    """
    monomials = []
    for d in range(degree + 1):
        for combo in combinations_with_replacement(range(n_vars), d):
            exps = [0] * n_vars
            for i in combo:
                exps[i] += 1
            monomials.append(tuple(exps))
    return sorted(set(monomials), key=lambda m: (sum(m), m))


def to_rational(value: Number) -> sympy.Rational:
    """Exact rational of a number as printed, so decimal literals stay exact."""
    if isinstance(value, sympy.Rational):
        return value
    if isinstance(value, (int, np.integer)):
        return sympy.Integer(int(value))
    return sympy.Rational(repr(float(value)))


class Polynomial:
    """
    Multivariate polynomial with exact rational coefficients over named variables.
    Arithmetic and composition stay exact; evaluation is vectorized in floating point.
    """

    def __init__(self, poly: sympy.Poly):
        self.poly = poly

    @classmethod
    def symbols(cls, variables: Sequence[str]) -> Tuple[sympy.Symbol, ...]:
        return tuple(sympy.Symbol(name, real=True) for name in variables)

    @classmethod
    def from_terms(cls, terms: Mapping[Monomial, Number], variables: Sequence[str]) -> Polynomial:
        gens = cls.symbols(variables)
        exact = {tuple(int(e) for e in mono): to_rational(coeff) for mono, coeff in terms.items() if coeff != 0}
        if not exact:
            return cls(sympy.Poly(0, *gens, domain=sympy.QQ))
        return cls(sympy.Poly.from_dict(exact, *gens, domain=sympy.QQ))

    @classmethod
    def constant(cls, value: Number, variables: Sequence[str]) -> Polynomial:
        return cls.from_terms({(0,) * len(variables): value}, variables)

    @classmethod
    def variable(cls, name: str, variables: Sequence[str]) -> Polynomial:
        exps = tuple(1 if v == name else 0 for v in variables)
        return cls.from_terms({exps: 1}, variables)

    @classmethod
    def from_expression(
        cls, text: str, variables: Sequence[str], params: Optional[Mapping[str, Number]] = None
    ) -> Polynomial:
        """
        Parses an expression such as "u1 + c_u - tau*(beta1*x1 + alpha1*x1**2)".
        Args:
            text: expression over `variables` and the names in `params`
            variables: ordered variable names
            params: named constants substituted exactly

        Returns:
            Polynomial: parsed polynomial
        """
        gens = cls.symbols(variables)
        local = {name: sym for name, sym in zip(variables, gens)}
        param_symbols = {name: sympy.Symbol(name, real=True) for name in (params or {})}
        local.update(param_symbols)
        expr = sympy.sympify(text, locals=local, rational=True)
        expr = expr.xreplace({param_symbols[name]: to_rational(value) for name, value in (params or {}).items()})
        unknown = sorted(str(s) for s in expr.free_symbols if s not in gens)
        if unknown:
            raise ValueError(f"unknown names {unknown} in expression {text!r}")
        return cls(sympy.Poly(sympy.expand(expr), *gens, domain=sympy.QQ))

    @classmethod
    def from_quadratic_matrix(cls, S: np.ndarray, variables: Sequence[str]) -> Polynomial:
        """Polynomial [x; 1]^T S [x; 1] of a homogenized symmetric matrix."""
        n = len(variables)
        S = np.asarray(S, dtype=float)
        terms: Dict[Monomial, sympy.Rational] = {}

        def _add(mono: Monomial, value: float):
            terms[mono] = terms.get(mono, sympy.Integer(0)) + to_rational(value)

        for i in range(n + 1):
            for j in range(n + 1):
                if S[i, j] == 0:
                    continue
                exps = [0] * n
                if i < n:
                    exps[i] += 1
                if j < n:
                    exps[j] += 1
                _add(tuple(exps), S[i, j])
        return cls.from_terms(terms, variables)

    @classmethod
    def from_dense(cls, coeffs: Sequence[Number], variables: Sequence[str], degree: int) -> Polynomial:
        basis = monomial_basis(len(variables), degree)
        if len(coeffs) != len(basis):
            raise ValueError(f"expected {len(basis)} coefficients for degree {degree}, got {len(coeffs)}")
        return cls.from_terms(dict(zip(basis, coeffs)), variables)

    @property
    def variables(self) -> Tuple[str, ...]:
        return tuple(str(g) for g in self.poly.gens)

    @property
    def n_vars(self) -> int:
        return len(self.poly.gens)

    @property
    def degree(self) -> int:
        if self.poly.is_zero:
            return 0
        return int(self.poly.total_degree())

    @property
    def is_zero(self) -> bool:
        return bool(self.poly.is_zero)

    def exact_terms(self) -> Dict[Monomial, sympy.Rational]:
        return {tuple(m): c for m, c in self.poly.terms() if c != 0}

    def terms(self) -> Dict[Monomial, float]:
        return {m: float(c) for m, c in self.exact_terms().items()}

    def dense(self, degree: Optional[int] = None) -> np.ndarray:
        """Coefficient vector over monomial_basis(n_vars, degree)."""
        degree = self.degree if degree is None else degree
        if self.degree > degree:
            raise ValueError(f"polynomial of degree {self.degree} does not fit a degree-{degree} basis")
        terms = self.terms()
        return np.array([terms.get(m, 0.0) for m in monomial_basis(self.n_vars, degree)])

    @cached_property
    def _numeric(self) -> Tuple[np.ndarray, np.ndarray]:
        terms = self.terms()
        if not terms:
            return np.zeros((0, self.n_vars), dtype=int), np.zeros(0)
        monos = sorted(terms, key=lambda m: (sum(m), m))
        return np.array(monos, dtype=int).reshape(len(monos), self.n_vars), np.array([terms[m] for m in monos])

    def evaluate(self, points: np.ndarray) -> Union[float, np.ndarray]:
        """
        Args:
            points: array of shape (n_vars,) or (N, n_vars)

        Returns:
            float or np.ndarray: value(s) of the polynomial
        """
        points = np.asarray(points, dtype=float)
        single = points.ndim == 1
        pts = np.atleast_2d(points)
        if pts.shape[-1] != self.n_vars:
            raise ValueError(f"expected points with {self.n_vars} coordinates, got shape {points.shape}")
        exps, coeffs = self._numeric
        if coeffs.size == 0:
            values = np.zeros(pts.shape[0])
        else:
            values = np.prod(pts[:, None, :] ** exps[None, :, :], axis=2) @ coeffs
        return float(values[0]) if single else values

    __call__ = evaluate

    def with_variables(self, variables: Sequence[str]) -> Polynomial:
        """Re-expresses the polynomial over a superset of its variables."""
        missing = [v for v in self.variables if v not in variables]
        if missing:
            raise ValueError(f"variables {missing} are not part of {list(variables)}")
        index = [list(variables).index(v) for v in self.variables]
        terms = {}
        for mono, coeff in self.exact_terms().items():
            exps = [0] * len(variables)
            for i, e in zip(index, mono):
                exps[i] = e
            terms[tuple(exps)] = coeff
        return Polynomial.from_terms(terms, variables)

    def _coerce(self, other) -> sympy.Poly:
        if isinstance(other, Polynomial):
            if other.variables != self.variables:
                raise ValueError(f"variable mismatch: {self.variables} vs {other.variables}")
            return other.poly
        return sympy.Poly(to_rational(other), *self.poly.gens, domain=sympy.QQ)

    def __add__(self, other) -> Polynomial:
        return Polynomial(self.poly + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other) -> Polynomial:
        return Polynomial(self.poly - self._coerce(other))

    def __rsub__(self, other) -> Polynomial:
        return Polynomial(self._coerce(other) - self.poly)

    def __mul__(self, other) -> Polynomial:
        return Polynomial(self.poly * self._coerce(other))

    __rmul__ = __mul__

    def __neg__(self) -> Polynomial:
        return Polynomial(-self.poly)

    def __pow__(self, power: int) -> Polynomial:
        return Polynomial(self.poly**power)

    def __eq__(self, other) -> bool:
        return isinstance(other, Polynomial) and self.variables == other.variables and self.poly == other.poly

    def __hash__(self):
        return hash((self.variables, tuple(sorted(self.exact_terms().items()))))

    def to_dict(self) -> dict:
        terms = self.terms()
        monos = sorted(terms, key=lambda m: (sum(m), m))
        return {"variables": list(self.variables), "monomials": [list(m) for m in monos], "coeffs": [terms[m] for m in monos]}

    @classmethod
    def from_dict(cls, d: dict) -> Polynomial:
        return cls.from_terms({tuple(m): c for m, c in zip(d["monomials"], d["coeffs"])}, d["variables"])

    def __repr__(self) -> str:
        return f"Polynomial({self.poly.as_expr()})"
