# Copyright (c) 2024 The wh-cert-lib authors
# SPDX-License-Identifier: AGPL-3.0

import numpy as np
import pytest

from wh_cert_lib.classes.certificate import CertStatus, GbfVariant, PolyGbf, load_certificate
from wh_cert_lib.classes.problem import ProblemSets, Schedule
from wh_cert_lib.classes.system import LinearController, PolynomialSystem
from wh_cert_lib.exceptions import DegreeError, EncodingError
from wh_cert_lib.utils import conic_utils
from wh_cert_lib.utils.set_utils import box
from wh_cert_lib.utils.simulation_utils import falsify
from wh_cert_lib.utils.sos_utils import encode_sos, gram_reconstruction_residual, verify_sos


@pytest.fixture
def static_system():
    return PolynomialSystem.from_expressions(["x1", "x2"], 2, 1)


@pytest.fixture
def static_sets():
    return ProblemSets(
        X=box([-2, -2], [2, 2]),
        X0=box([-0.5, -0.5], [0.5, 0.5]),
        Xu=box([1.5, -2], [2, 2]),
        U=box([-1], [1]),
    )


@pytest.mark.parametrize("kind", ["gbf", "1gbf"])
def test_implication_variants_have_no_sos_encoding(kind, static_system, zero_gain, graph_1_1, static_sets):
    with pytest.raises(EncodingError):
        encode_sos(GbfVariant.of(kind, "zero"), static_system, zero_gain, graph_1_1, static_sets, n_p=2)


def test_barrier_degree_must_be_positive(static_system, zero_gain, graph_1_1, static_sets):
    with pytest.raises(DegreeError):
        encode_sos(GbfVariant.of("1dgbf", "zero"), static_system, zero_gain, graph_1_1, static_sets, n_p=0)


def test_odd_multiplier_degree_is_rejected(static_system, zero_gain, graph_1_1, static_sets):
    schedule = Schedule.from_dict({"multiplier_degree": 3})
    with pytest.raises(DegreeError):
        encode_sos(GbfVariant.of("1dgbf", "zero"), static_system, zero_gain, graph_1_1, static_sets, n_p=2, schedule=schedule)


def test_verification_needs_a_controller(static_system, graph_1_1, static_sets):
    with pytest.raises(EncodingError):
        encode_sos(GbfVariant.of("1dgbf", "zero"), static_system, None, graph_1_1, static_sets, n_p=2)


def test_platoon_encoding_structure(case_study_3):
    p = case_study_3
    problem, encoding = encode_sos(GbfVariant.of("1dgbf", p.strategy), p.system, p.controller, p.graph, p.sets, n_p=3)
    names = {e.name for e in problem.equalities}
    assert "match[init[v1]]" in names
    assert "match[switch[v1,0,v1]]" in names
    assert problem.metadata["n_p"] == 3
    assert problem.metadata["mode"] == "sos"
    assert len(problem.equalities) == len(encoding.conditions)
    assert sum(c.kind == "switching" for c in encoding.conditions) == len(p.graph.edges)
    assert "Q[unsafe[v1]]" in problem.matrices


def test_static_safe_system_is_certified(static_system, zero_gain, graph_1_1, static_sets):
    schedule = Schedule.from_dict({"validation_samples": 2000})
    report = verify_sos(GbfVariant.of("1dgbf", "zero"), static_system, zero_gain, graph_1_1, static_sets, schedule, n_p=2)
    assert report.status == CertStatus.CERTIFIED, report.diagnostics
    cert = report.certificate
    assert isinstance(cert, PolyGbf)
    assert cert.evaluate("v1", np.zeros(2)) <= 0
    assert cert.evaluate("v1", np.array([1.8, 0.0])) > 0
    restored = load_certificate(cert.to_json())
    assert restored.evaluate("v1", np.array([1.8, 0.0])) == pytest.approx(cert.evaluate("v1", np.array([1.8, 0.0])))


def test_projected_grams_reproduce_the_coefficients(static_system, zero_gain, graph_1_1, static_sets):
    problem, encoding = encode_sos(GbfVariant.of("1dgbf", "zero"), static_system, zero_gain, graph_1_1, static_sets, n_p=2)
    outcome = conic_utils.solve(problem)
    assert outcome.feasible
    assignment = dict(outcome.assignment)
    encoding.project_grams(problem, assignment)
    assert gram_reconstruction_residual(encoding, problem, assignment) < 1e-9


@pytest.mark.slow
def test_platoon_is_certified_with_cubic_barriers(case_study_3):
    p = case_study_3
    report = verify_sos(GbfVariant.of("1dgbf", p.strategy), p.system, p.controller, p.graph, p.sets, n_p=3)
    assert report.certified, report.diagnostics
    assert report.certificate.n_p == 3
    matching = [value for key, value in report.residuals.items() if key.startswith("match[")]
    assert matching and max(matching) < 1e-9
    falsified = falsify(p.system, p.controller, p.strategy, p.graph, p.sets, horizon=12, n_samples=2000)
    assert falsified.exhaustive
    assert not falsified.found
