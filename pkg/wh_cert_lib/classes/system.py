# Copyright (c) 2024 The wh-cert-lib authors
# SPDX-License-Identifier: AGPL-3.0

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np

from ..exceptions import DimensionError
from .polynomial import Number, Polynomial


class Strategy(str, Enum):
    """Actuator behavior when a control input is lost."""

    ZERO = "zero"
    HOLD = "hold"


def state_variables(n: int) -> List[str]:
    return [f"x{i + 1}" for i in range(n)]


def input_variables(m: int) -> List[str]:
    return [f"u{i + 1}" for i in range(m)]


class System(ABC):
    """
    Discrete-time plant x(t+1) = f(x(t), u(t)).
    Step maps accept single vectors or batches of shape (N, n) / (N, m).
    """

    def __init__(self, n_states: int, n_inputs: int):
        if n_states < 1 or n_inputs < 1:
            raise DimensionError(f"systems need n >= 1 and m >= 1, got n={n_states}, m={n_inputs}")
        self.n_states = n_states
        self.n_inputs = n_inputs

    @abstractmethod
    def step(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def as_polynomials(self) -> List[Polynomial]:
        """One polynomial per state over the variables x1..xn, u1..um."""

    @abstractmethod
    def to_dict(self) -> dict:
        ...

    @property
    def variables(self) -> List[str]:
        return state_variables(self.n_states) + input_variables(self.n_inputs)

    def _check(self, x: np.ndarray, u: np.ndarray):
        if x.shape[-1] != self.n_states or u.shape[-1] != self.n_inputs:
            raise DimensionError(
                f"expected state/input of size {self.n_states}/{self.n_inputs}, got {x.shape}/{u.shape}"
            )


class LinearSystem(System):
    def __init__(self, A: np.ndarray, B: np.ndarray):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        B = np.asarray(B, dtype=float)
        if B.ndim == 1:
            B = B.reshape(-1, 1)
        if A.shape[0] != A.shape[1] or B.shape[0] != A.shape[0]:
            raise DimensionError(f"A must be n x n and B n x m, got {A.shape} and {B.shape}")
        super().__init__(A.shape[0], B.shape[1])
        self.A = A
        self.B = B

    def step(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        self._check(x, u)
        return x @ self.A.T + u @ self.B.T

    def as_polynomials(self) -> List[Polynomial]:
        variables = self.variables
        polys = []
        for i in range(self.n_states):
            terms = {}
            for j, v in enumerate(variables):
                coeff = self.A[i, j] if j < self.n_states else self.B[i, j - self.n_states]
                if coeff != 0:
                    terms[tuple(1 if k == j else 0 for k in range(len(variables)))] = coeff
            polys.append(Polynomial.from_terms(terms, variables))
        return polys

    def to_polynomial(self) -> PolynomialSystem:
        return PolynomialSystem(self.as_polynomials(), self.n_states, self.n_inputs)

    def to_dict(self) -> dict:
        return {"type": "linear", "A": self.A.tolist(), "B": self.B.tolist()}


class PolynomialSystem(System):
    """Plant whose update is a polynomial in (x, u) with exact rational coefficients."""

    def __init__(
        self,
        polys: Sequence[Polynomial],
        n_states: int,
        n_inputs: int,
        params: Optional[Mapping[str, Number]] = None,
        expressions: Optional[Sequence[str]] = None,
    ):
        super().__init__(n_states, n_inputs)
        if len(polys) != n_states:
            raise DimensionError(f"expected {n_states} state polynomials, got {len(polys)}")
        variables = tuple(self.variables)
        self.polys = [p if p.variables == variables else p.with_variables(variables) for p in polys]
        self.params = dict(params or {})
        self.expressions = list(expressions) if expressions is not None else None

    @classmethod
    def from_expressions(
        cls, expressions: Sequence[str], n_states: int, n_inputs: int, params: Optional[Mapping[str, Number]] = None
    ) -> PolynomialSystem:
        variables = state_variables(n_states) + input_variables(n_inputs)
        polys = [Polynomial.from_expression(e, variables, params) for e in expressions]
        return cls(polys, n_states, n_inputs, params, expressions)

    @property
    def degree(self) -> int:
        return max(p.degree for p in self.polys)

    def step(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        self._check(x, u)
        z = np.concatenate([x, u], axis=-1)
        return np.stack([p.evaluate(z) for p in self.polys], axis=-1)

    def as_polynomials(self) -> List[Polynomial]:
        return list(self.polys)

    def to_dict(self) -> dict:
        if self.expressions is not None:
            return {
                "type": "polynomial",
                "n": self.n_states,
                "m": self.n_inputs,
                "polys": list(self.expressions),
                "params": dict(self.params),
            }
        return {
            "type": "polynomial",
            "n": self.n_states,
            "m": self.n_inputs,
            "polys": [str(p.poly.as_expr()) for p in self.polys],
            "params": {},
        }


class Controller(ABC):
    """State feedback u^c = g(x)."""

    def __init__(self, n_states: int, n_inputs: int):
        self.n_states = n_states
        self.n_inputs = n_inputs

    @abstractmethod
    def __call__(self, x: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def as_polynomials(self) -> List[Polynomial]:
        """One polynomial per input over the variables x1..xn."""

    @abstractmethod
    def to_dict(self) -> dict:
        ...

    def check_against(self, system: System):
        if self.n_states != system.n_states or self.n_inputs != system.n_inputs:
            raise DimensionError(
                f"controller maps {self.n_states} states to {self.n_inputs} inputs, "
                f"system has {system.n_states} states and {system.n_inputs} inputs"
            )


class LinearController(Controller):
    def __init__(self, K: np.ndarray):
        K = np.atleast_2d(np.asarray(K, dtype=float))
        super().__init__(K.shape[1], K.shape[0])
        self.K = K

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=float) @ self.K.T

    def as_polynomials(self) -> List[Polynomial]:
        variables = state_variables(self.n_states)
        polys = []
        for i in range(self.n_inputs):
            terms = {tuple(1 if k == j else 0 for k in range(self.n_states)): self.K[i, j] for j in range(self.n_states)}
            polys.append(Polynomial.from_terms(terms, variables))
        return polys

    def to_dict(self) -> dict:
        return {"K": self.K.tolist()}


class PolynomialController(Controller):
    def __init__(self, polys: Sequence[Polynomial], n_states: int, expressions: Optional[Sequence[str]] = None):
        super().__init__(n_states, len(polys))
        variables = tuple(state_variables(n_states))
        self.polys = [p if p.variables == variables else p.with_variables(variables) for p in polys]
        self.expressions = list(expressions) if expressions is not None else None

    @classmethod
    def from_expressions(
        cls, expressions: Sequence[str], n_states: int, params: Optional[Mapping[str, Number]] = None
    ) -> PolynomialController:
        variables = state_variables(n_states)
        return cls([Polynomial.from_expression(e, variables, params) for e in expressions], n_states, expressions)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.stack([p.evaluate(x) for p in self.polys], axis=-1)

    def as_polynomials(self) -> List[Polynomial]:
        return list(self.polys)

    def to_dict(self) -> dict:
        exprs = self.expressions if self.expressions is not None else [str(p.poly.as_expr()) for p in self.polys]
        return {"poly": list(exprs)}


def controller_from_dict(d: Optional[Dict], n_states: int, n_inputs: int, params=None) -> Optional[Controller]:
    if d is None:
        return None
    if "K" in d:
        return LinearController(d["K"])
    if "poly" in d:
        return PolynomialController.from_expressions(d["poly"], n_states, params)
    raise ValueError("controller needs a 'K' matrix or a 'poly' list")


@dataclass
class AugmentedState:
    """State of the hold strategy: plant state plus the last input that reached the actuator."""

    x: np.ndarray
    u_held: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.u_held = np.asarray(self.u_held, dtype=float)

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.x, self.u_held], axis=-1)
