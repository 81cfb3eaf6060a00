# Copyright (c) 2024 The wh-cert-lib authors
# SPDX-License-Identifier: AGPL-3.0

"""cvxpy backend of ConicProblem plus the independent residual check."""

import logging
import time
from typing import Dict, List, Optional, Sequence, Tuple

import cvxpy as cp
import numpy as np
from scipy.linalg import eigvalsh

from ..classes.conic_problem import ConicProblem, PsdConstraint, ScalarTerm, SolveOutcome, SolveStatus
from .parallel_utils import parallel_map

logger = logging.getLogger(__name__)

DEFAULT_FEAS_TOL = 1e-7
DEFAULT_EQ_TOL = 1e-6
PREFERRED_SOLVERS = ("CLARABEL", "SCS")
SYMMETRY_TOL = 1e-9

_FEASIBLE_STATUSES = (cp.OPTIMAL, cp.OPTIMAL_INACCURATE)


def eig_min(M: np.ndarray) -> float:
    """
    Smallest eigenvalue of a symmetric matrix.
    Args:
        M: symmetric matrix

    Returns:
        float: smallest eigenvalue
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape[0] != M.shape[1]:
        raise ValueError(f"eig_min needs a square matrix, got {M.shape}")
    scale = max(1.0, float(np.abs(M).max(initial=0.0)))
    if np.abs(M - M.T).max(initial=0.0) > SYMMETRY_TOL * scale:
        raise ValueError("eig_min needs a symmetric matrix")
    return float(eigvalsh((M + M.T) / 2, subset_by_index=[0, 0])[0])


def constraint_residual(problem: ConicProblem, constraint: PsdConstraint, assignment: Dict[str, np.ndarray]) -> float:
    """min eigenvalue of the oriented expression minus the margin; >= 0 means satisfied."""
    value = problem.evaluate_constraint(constraint, assignment)
    if constraint.sense == "nsd":
        value = -value
    return eig_min(value) - constraint.margin


def residuals(problem: ConicProblem, assignment: Dict[str, np.ndarray]) -> Dict[str, float]:
    return {c.name: constraint_residual(problem, c, assignment) for c in problem.constraints}


def equality_residual(problem: ConicProblem, assignment: Dict[str, np.ndarray]) -> float:
    worst = 0.0
    for equality in problem.equalities:
        worst = max(worst, float(np.abs(problem.evaluate_equality(equality, assignment)).max(initial=0.0)))
    return worst


def bound_violation(problem: ConicProblem, assignment: Dict[str, np.ndarray]) -> float:
    worst = 0.0
    for var in list(problem.scalars.values()) + list(problem.matrices.values()):
        value = np.asarray(assignment[var.name], dtype=float)
        if var.lower is not None:
            worst = max(worst, float(np.max(var.lower - value)))
        if var.upper is not None:
            worst = max(worst, float(np.max(value - var.upper)))
    return worst


def max_violation(problem: ConicProblem, assignment: Dict[str, np.ndarray]) -> float:
    psd = residuals(problem, assignment)
    worst_psd = max([-r for r in psd.values()], default=0.0)
    return max(0.0, worst_psd, equality_residual(problem, assignment), bound_violation(problem, assignment))


def _build(problem: ConicProblem) -> Tuple[cp.Problem, Dict[str, cp.Variable]]:
    variables: Dict[str, cp.Variable] = {}
    constraints = []
    for var in problem.scalars.values():
        v = cp.Variable(name=var.name)
        variables[var.name] = v
        if var.lower is not None:
            constraints.append(v >= var.lower)
        if var.upper is not None:
            constraints.append(v <= var.upper)
    for var in problem.matrices.values():
        v = cp.Variable(var.shape, symmetric=var.symmetric, name=var.name)
        variables[var.name] = v
        if var.lower is not None:
            constraints.append(v >= var.lower)
        if var.upper is not None:
            constraints.append(v <= var.upper)

    for c in problem.constraints:
        expr = c.constant
        for term in c.terms:
            if isinstance(term, ScalarTerm):
                expr = expr + term.coeff * variables[term.var]
            else:
                V = variables[term.var]
                expr = expr + term.left @ (V.T if term.transpose else V) @ term.right
        # cvxpy only accepts PSD constraints on expressions it can prove symmetric
        Z = cp.Variable((c.dim, c.dim), symmetric=True)
        constraints.append(Z == (expr + expr.T) / 2)
        if c.sense == "psd":
            constraints.append(Z >> c.margin * np.eye(c.dim))
        else:
            constraints.append(Z << -c.margin * np.eye(c.dim))

    for equality in problem.equalities:
        expr = equality.constant
        for var, A in equality.terms:
            v = variables[var]
            flat = cp.reshape(v, (1,)) if var in problem.scalars else cp.reshape(v, (v.size,), order="C")
            expr = expr + A @ flat
        constraints.append(expr == 0)

    if problem.objective:
        parts = []
        for var, coeff in problem.objective.items():
            v = variables[var]
            if var in problem.scalars:
                parts.append(float(np.asarray(coeff).reshape(())) * v)
            else:
                parts.append(cp.sum(cp.multiply(np.asarray(coeff), v)))
        objective = cp.Minimize(cp.sum(cp.hstack(parts)) if len(parts) > 1 else parts[0])
    else:
        objective = cp.Minimize(0)
    return cp.Problem(objective, constraints), variables


def _solver_order(solver: Optional[str]) -> List[str]:
    installed = set(cp.installed_solvers())
    if solver:
        return [solver.upper()]
    order = [name for name in PREFERRED_SOLVERS if name in installed]
    if not order:
        raise RuntimeError(f"none of the conic solvers {PREFERRED_SOLVERS} is installed")
    return order


def _extract(problem: ConicProblem, variables: Dict[str, cp.Variable]) -> Optional[Dict[str, np.ndarray]]:
    assignment: Dict[str, np.ndarray] = {}
    for name, v in variables.items():
        if v.value is None:
            return None
        if name in problem.scalars:
            assignment[name] = float(np.asarray(v.value).reshape(()))
        else:
            value = np.asarray(v.value, dtype=float)
            if problem.matrices[name].symmetric:
                value = (value + value.T) / 2
            assignment[name] = value
    return assignment


def solve(
    problem: ConicProblem,
    feas_tol: float = DEFAULT_FEAS_TOL,
    solver: Optional[str] = None,
    eq_tol: float = DEFAULT_EQ_TOL,
) -> SolveOutcome:
    """
    Solves a conic problem and re-checks the returned assignment independently.
    Solvers are tried in order (Clarabel, then SCS) until one gives a conclusive status.
    Args:
        problem: problem to solve
        feas_tol: tolerance on the minimum eigenvalue of every PSD constraint
        solver: force a specific cvxpy solver
        eq_tol: tolerance on affine equality residuals

    Returns:
        SolveOutcome: Feasible only if the residual check passes, Infeasible only if the backend proves it
    """
    diagnostics = []
    last: Optional[SolveOutcome] = None
    for name in _solver_order(solver):
        cvx_problem, variables = _build(problem)
        start = time.perf_counter()
        try:
            cvx_problem.solve(solver=name)
        except (cp.error.SolverError, ValueError, ArithmeticError) as err:
            diagnostics.append(f"{name}: {err}")
            logger.debug("solver %s failed on %s: %s", name, problem.name, err)
            continue
        elapsed = time.perf_counter() - start
        stats = cvx_problem.solver_stats
        iterations = getattr(stats, "num_iters", None) if stats is not None else None
        status = cvx_problem.status
        logger.debug("%s on %s: %s in %.3fs", name, problem.name, status, elapsed)

        if status == cp.INFEASIBLE:
            return SolveOutcome(
                SolveStatus.INFEASIBLE, solver=name, solve_time=elapsed, iterations=iterations, diagnostic=status
            )

        outcome = SolveOutcome(SolveStatus.UNKNOWN, solver=name, solve_time=elapsed, iterations=iterations)
        if status in _FEASIBLE_STATUSES:
            assignment = _extract(problem, variables)
            if assignment is not None:
                res = residuals(problem, assignment)
                eq_res = equality_residual(problem, assignment)
                violation = max_violation(problem, assignment)
                outcome.assignment = assignment
                outcome.residuals = res
                outcome.max_violation = violation
                outcome.objective = float(cvx_problem.value) if cvx_problem.value is not None else None
                psd_ok = all(r >= -feas_tol for r in res.values())
                if psd_ok and eq_res <= eq_tol and bound_violation(problem, assignment) <= feas_tol:
                    outcome.status = SolveStatus.FEASIBLE
                    outcome.diagnostic = status
                    return outcome
                diagnostics.append(f"{name}: {status} but residual check failed (violation {violation:.3e})")
            else:
                diagnostics.append(f"{name}: {status} without values")
        else:
            diagnostics.append(f"{name}: {status}")
        last = outcome

    if last is None:
        last = SolveOutcome(SolveStatus.UNKNOWN)
    last.diagnostic = "; ".join(diagnostics)
    return last


def solve_all(
    problems: Sequence[ConicProblem], feas_tol: float = DEFAULT_FEAS_TOL, solver: Optional[str] = None
) -> List[SolveOutcome]:
    """Solves independent problems on the worker pool, results in input order."""
    return parallel_map(lambda p: solve(p, feas_tol, solver), problems)
