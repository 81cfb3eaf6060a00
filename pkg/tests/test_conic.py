# Copyright (c) 2024 The wh-cert-lib authors
# SPDX-License-Identifier: AGPL-3.0

import numpy as np
import pytest

from wh_cert_lib.classes.conic_problem import (
    AffineEquality,
    ConicProblem,
    MatrixTerm,
    PsdConstraint,
    ScalarTerm,
    SolveStatus,
)
from wh_cert_lib.utils import parallel_utils
from wh_cert_lib.utils.conic_utils import eig_min, max_violation, residuals, solve, solve_all
from wh_cert_lib.utils.parallel_utils import parallel_map, worker_count


def unit_trace_problem() -> ConicProblem:
    problem = ConicProblem("unit-trace")
    problem.add_matrix("X", 2)
    problem.add_constraint(PsdConstraint("X>=0", 2, [MatrixTerm("X", np.eye(2), np.eye(2))]))
    problem.add_equality(AffineEquality("trace", [("X", np.array([[1.0, 0.0, 0.0, 1.0]]))], [-1.0]))
    return problem


def test_eig_min():
    assert eig_min(np.eye(3)) == pytest.approx(1.0)
    assert eig_min(np.diag([2.0, -3.0])) == pytest.approx(-3.0)


def test_eig_min_matches_an_independent_eigensolver():
    M = np.random.default_rng(7).normal(size=(5, 5))
    M = M + M.T
    assert eig_min(M) == pytest.approx(np.linalg.eigvalsh(M).min())


def test_eig_min_rejects_asymmetric_input():
    with pytest.raises(ValueError):
        eig_min(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_unit_trace_psd_matrix_is_feasible():
    outcome = solve(unit_trace_problem())
    assert outcome.status == SolveStatus.FEASIBLE
    X = outcome.value("X")
    assert np.trace(X) == pytest.approx(1.0, abs=1e-6)
    assert eig_min(X) >= -1e-7
    assert outcome.residuals["X>=0"] >= -1e-7


def test_sign_contradiction_is_infeasible():
    problem = ConicProblem("contradiction")
    problem.add_scalar("x", upper=-1.0)
    problem.add_constraint(PsdConstraint("x>=0", 1, [ScalarTerm("x", np.eye(1))]))
    outcome = solve(problem)
    assert outcome.status == SolveStatus.INFEASIBLE
    assert not outcome.feasible


def test_residuals_are_checked_independently_of_the_solver():
    problem = unit_trace_problem()
    good = {"X": np.diag([0.5, 0.5])}
    bad = {"X": np.diag([1.5, -0.5])}
    assert max_violation(problem, good) == pytest.approx(0.0)
    assert residuals(problem, bad)["X>=0"] == pytest.approx(-0.5)
    assert max_violation(problem, bad) == pytest.approx(0.5)


def test_problem_rejects_mismatched_terms():
    problem = ConicProblem()
    problem.add_matrix("P", 3)
    with pytest.raises(ValueError):
        problem.add_constraint(PsdConstraint("c", 2, [MatrixTerm("P", np.eye(2), np.eye(2))]))
    with pytest.raises(ValueError):
        problem.add_scalar("P")


def test_problem_json_round_trip():
    problem = unit_trace_problem()
    restored = ConicProblem.from_json(problem.to_json())
    assignment = {"X": np.diag([0.25, 0.75])}
    assert residuals(restored, assignment) == pytest.approx(residuals(problem, assignment))
    assert restored.evaluate_equality(restored.equalities[0], assignment) == pytest.approx([0.0])


def test_worker_count_follows_the_environment(monkeypatch):
    monkeypatch.setenv("WHCERT_THREADS", "3")
    assert worker_count() == 3
    monkeypatch.setenv("WHCERT_THREADS", "zero")
    assert worker_count() >= 1


def test_parallel_map_keeps_the_input_order(monkeypatch):
    monkeypatch.setenv("WHCERT_THREADS", "4")
    assert parallel_map(lambda x: x * x, range(10)) == [x * x for x in range(10)]


def test_parallel_map_runs_a_thread_pool_of_the_configured_size(monkeypatch):
    pools = []

    class RecordingParallel(parallel_utils.Parallel):
        def __init__(self, **kwargs):
            pools.append(kwargs)
            super().__init__(**kwargs)

    monkeypatch.setattr(parallel_utils, "Parallel", RecordingParallel)
    monkeypatch.setenv("WHCERT_THREADS", "3")
    assert parallel_map(str, [1, 2, 3, 4, 5]) == ["1", "2", "3", "4", "5"]
    assert pools == [{"n_jobs": 3, "prefer": "threads"}]

    monkeypatch.setenv("WHCERT_THREADS", "1")
    assert parallel_map(str, [1, 2]) == ["1", "2"]
    assert len(pools) == 1


def test_independent_problems_are_solved_in_input_order():
    contradiction = ConicProblem("contradiction")
    contradiction.add_scalar("x", upper=-1.0)
    contradiction.add_constraint(PsdConstraint("x>=0", 1, [ScalarTerm("x", np.eye(1))]))
    outcomes = solve_all([unit_trace_problem(), contradiction, unit_trace_problem()])
    assert [o.status for o in outcomes] == [SolveStatus.FEASIBLE, SolveStatus.INFEASIBLE, SolveStatus.FEASIBLE]
