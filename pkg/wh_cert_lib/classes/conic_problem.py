# Copyright (c) 2024 The wh-cert-lib authors
# SPDX-License-Identifier: AGPL-3.0

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

SYM_TOL = 1e-12


def _arr(x) -> np.ndarray:
    return np.atleast_2d(np.asarray(x, dtype=float))


@dataclass
class ScalarVariable:
    name: str
    lower: Optional[float] = None
    upper: Optional[float] = None


@dataclass
class MatrixVariable:
    """Matrix variable, symmetric when `symmetric` is set; optional elementwise bounds."""

    name: str
    shape: Tuple[int, int]
    symmetric: bool = True
    lower: Optional[float] = None
    upper: Optional[float] = None

    def __post_init__(self):
        self.shape = (int(self.shape[0]), int(self.shape[1]))
        if self.symmetric and self.shape[0] != self.shape[1]:
            raise ValueError(f"symmetric variable {self.name} must be square, got {self.shape}")


@dataclass
class ScalarTerm:
    """coeff * scalar variable"""

    var: str
    coeff: np.ndarray

    def __post_init__(self):
        self.coeff = _arr(self.coeff)


@dataclass
class MatrixTerm:
    """left @ V @ right, or left @ V^T @ right when `transpose` is set."""

    var: str
    left: np.ndarray
    right: np.ndarray
    transpose: bool = False

    def __post_init__(self):
        self.left = _arr(self.left)
        self.right = _arr(self.right)


Term = Union[ScalarTerm, MatrixTerm]


@dataclass
class PsdConstraint:
    """
    Affine matrix expression constant + sum(terms), required to be >= margin * I (sense "psd")
    or <= -margin * I (sense "nsd").
    """

    name: str
    dim: int
    terms: List[Term] = field(default_factory=list)
    constant: Optional[np.ndarray] = None
    sense: str = "psd"
    margin: float = 0.0

    def __post_init__(self):
        self.constant = np.zeros((self.dim, self.dim)) if self.constant is None else _arr(self.constant)
        if self.sense not in ("psd", "nsd"):
            raise ValueError(f"unknown sense {self.sense}")
        if np.max(np.abs(self.constant - self.constant.T), initial=0.0) > SYM_TOL * max(1.0, np.abs(self.constant).max()):
            raise ValueError(f"constant block of {self.name} is not symmetric")


@dataclass
class AffineEquality:
    """sum_k A_k vec(V_k) + b = 0 with row-major vec; scalar variables count as 1 x 1."""

    name: str
    terms: List[Tuple[str, np.ndarray]]
    constant: np.ndarray

    def __post_init__(self):
        self.terms = [(var, _arr(A)) for var, A in self.terms]
        self.constant = np.asarray(self.constant, dtype=float).reshape(-1)


class ConicProblem:
    """
    Semidefinite feasibility problem over named scalar and matrix variables.
    An optional linear objective sum_k <C_k, V_k> is minimized.
    """

    def __init__(self, name: str = "problem"):
        self.name = name
        self.scalars: Dict[str, ScalarVariable] = {}
        self.matrices: Dict[str, MatrixVariable] = {}
        self.constraints: List[PsdConstraint] = []
        self.equalities: List[AffineEquality] = []
        self.objective: Dict[str, np.ndarray] = {}
        self.metadata: Dict[str, object] = {}

    def add_scalar(self, name: str, lower: Optional[float] = None, upper: Optional[float] = None) -> str:
        self._check_new(name)
        self.scalars[name] = ScalarVariable(name, lower, upper)
        return name

    def add_matrix(
        self,
        name: str,
        shape: Union[int, Tuple[int, int]],
        symmetric: bool = True,
        lower: Optional[float] = None,
        upper: Optional[float] = None,
    ) -> str:
        self._check_new(name)
        shape = (shape, shape) if isinstance(shape, int) else shape
        self.matrices[name] = MatrixVariable(name, shape, symmetric, lower, upper)
        return name

    def add_constraint(self, constraint: PsdConstraint) -> PsdConstraint:
        for term in constraint.terms:
            self._check_term(term, constraint.dim, constraint.name)
        self.constraints.append(constraint)
        return constraint

    def add_equality(self, equality: AffineEquality) -> AffineEquality:
        rows = equality.constant.size
        for var, A in equality.terms:
            size = 1 if var in self.scalars else int(np.prod(self._shape(var)))
            if A.shape != (rows, size):
                raise ValueError(f"equality {equality.name}: coefficient of {var} has shape {A.shape}, expected {(rows, size)}")
        self.equalities.append(equality)
        return equality

    def set_objective(self, var: str, coeff) -> None:
        self._shape(var)
        self.objective[var] = np.asarray(coeff, dtype=float)

    def _check_new(self, name: str):
        if name in self.scalars or name in self.matrices:
            raise ValueError(f"variable {name} declared twice")

    def _shape(self, var: str) -> Tuple[int, int]:
        if var in self.scalars:
            return (1, 1)
        if var in self.matrices:
            return self.matrices[var].shape
        raise KeyError(f"undeclared variable {var}")

    def _check_term(self, term: Term, dim: int, where: str):
        if isinstance(term, ScalarTerm):
            if term.var not in self.scalars:
                raise KeyError(f"{where}: undeclared scalar {term.var}")
            if term.coeff.shape != (dim, dim):
                raise ValueError(f"{where}: coefficient of {term.var} has shape {term.coeff.shape}")
            return
        rows, cols = self._shape(term.var)
        if term.var not in self.matrices:
            raise KeyError(f"{where}: undeclared matrix {term.var}")
        inner = (cols, rows) if term.transpose else (rows, cols)
        if term.left.shape != (dim, inner[0]) or term.right.shape != (inner[1], dim):
            raise ValueError(
                f"{where}: term on {term.var} maps {term.left.shape} x {inner} x {term.right.shape} into {dim} x {dim}"
            )

    @property
    def n_variables(self) -> int:
        return len(self.scalars) + len(self.matrices)

    def evaluate_constraint(self, constraint: PsdConstraint, assignment: Dict[str, np.ndarray]) -> np.ndarray:
        """Value of constant + sum(terms) under an assignment, symmetrized."""
        value = constraint.constant.copy()
        for term in constraint.terms:
            if isinstance(term, ScalarTerm):
                value = value + float(np.asarray(assignment[term.var]).reshape(())) * term.coeff
            else:
                V = np.atleast_2d(np.asarray(assignment[term.var], dtype=float))
                value = value + term.left @ (V.T if term.transpose else V) @ term.right
        return (value + value.T) / 2

    def evaluate_equality(self, equality: AffineEquality, assignment: Dict[str, np.ndarray]) -> np.ndarray:
        value = equality.constant.copy()
        for var, A in equality.terms:
            value = value + A @ np.asarray(assignment[var], dtype=float).reshape(-1)
        return value

    def to_dict(self) -> dict:
        def _term(t: Term) -> dict:
            if isinstance(t, ScalarTerm):
                return {"kind": "scalar", "var": t.var, "coeff": t.coeff.tolist()}
            return {"kind": "matrix", "var": t.var, "left": t.left.tolist(), "right": t.right.tolist(), "transpose": t.transpose}

        return {
            "name": self.name,
            "scalars": [{"name": v.name, "lower": v.lower, "upper": v.upper} for v in self.scalars.values()],
            "matrices": [
                {"name": v.name, "shape": list(v.shape), "symmetric": v.symmetric, "lower": v.lower, "upper": v.upper}
                for v in self.matrices.values()
            ],
            "constraints": [
                {
                    "name": c.name,
                    "dim": c.dim,
                    "sense": c.sense,
                    "margin": c.margin,
                    "constant": c.constant.tolist(),
                    "terms": [_term(t) for t in c.terms],
                }
                for c in self.constraints
            ],
            "equalities": [
                {"name": e.name, "constant": e.constant.tolist(), "terms": [[var, A.tolist()] for var, A in e.terms]}
                for e in self.equalities
            ],
            "objective": {var: np.asarray(c).tolist() for var, c in self.objective.items()},
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, d: dict) -> ConicProblem:
        problem = cls(d.get("name", "problem"))
        for v in d["scalars"]:
            problem.add_scalar(v["name"], v.get("lower"), v.get("upper"))
        for v in d["matrices"]:
            problem.add_matrix(v["name"], tuple(v["shape"]), v["symmetric"], v.get("lower"), v.get("upper"))
        for c in d["constraints"]:
            terms: List[Term] = []
            for t in c["terms"]:
                if t["kind"] == "scalar":
                    terms.append(ScalarTerm(t["var"], np.array(t["coeff"])))
                else:
                    terms.append(MatrixTerm(t["var"], np.array(t["left"]), np.array(t["right"]), t["transpose"]))
            problem.add_constraint(
                PsdConstraint(c["name"], c["dim"], terms, np.array(c["constant"]), c["sense"], c["margin"])
            )
        for e in d.get("equalities", []):
            problem.add_equality(
                AffineEquality(e["name"], [(var, np.array(A)) for var, A in e["terms"]], np.array(e["constant"]))
            )
        for var, coeff in d.get("objective", {}).items():
            problem.set_objective(var, np.array(coeff))
        problem.metadata = dict(d.get("metadata", {}))
        return problem

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> ConicProblem:
        return cls.from_dict(json.loads(text))


class SolveStatus(str, Enum):
    FEASIBLE = "feasible"
    INFEASIBLE = "infeasible"
    UNKNOWN = "unknown"


@dataclass
class SolveOutcome:
    status: SolveStatus
    assignment: Dict[str, np.ndarray] = field(default_factory=dict)
    residuals: Dict[str, float] = field(default_factory=dict)  # min eigenvalue minus margin per PSD constraint
    max_violation: float = 0.0
    solver: str = ""
    solve_time: float = 0.0
    iterations: Optional[int] = None
    objective: Optional[float] = None
    diagnostic: str = ""

    @property
    def feasible(self) -> bool:
        return self.status == SolveStatus.FEASIBLE

    def value(self, name: str) -> Union[float, np.ndarray]:
        return self.assignment[name]

    def to_dict(self) -> dict:
        return {
            "status": self.status.value,
            "solver": self.solver,
            "solve_time": self.solve_time,
            "iterations": self.iterations,
            "objective": self.objective,
            "max_violation": self.max_violation,
            "residuals": dict(self.residuals),
            "diagnostic": self.diagnostic,
        }
