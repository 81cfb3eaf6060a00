# Copyright (c) 2024 The wh-cert-lib authors
# SPDX-License-Identifier: AGPL-3.0

import dataclasses

import numpy as np
import pytest

from wh_cert_lib.classes.certificate import CertStatus, GbfCertificate, GbfVariant, load_certificate
from wh_cert_lib.classes.conic_problem import SolveOutcome, SolveStatus
from wh_cert_lib.classes.problem import ProblemSets, Schedule
from wh_cert_lib.classes.system import LinearController
from wh_cert_lib.exceptions import DimensionError, EncodingError
from wh_cert_lib.utils import conic_utils
from wh_cert_lib.utils.lmi_utils import encode, synthesize, verify
from wh_cert_lib.utils.set_utils import sample_box
from wh_cert_lib.utils.simulation_utils import falsify


def constraint_names(problem):
    return {c.name for c in problem.constraints}


def test_loss_free_graph_collapses_to_three_conditions(contractive_system, zero_gain, contractive_sets, graph_1_1):
    for kind in ("gbf", "dgbf"):
        problem = encode(GbfVariant.of(kind, "zero"), contractive_system, zero_gain, graph_1_1, contractive_sets)
        names = constraint_names(problem) - {"bound.lo[v1]", "bound.hi[v1]"}
        assert names == {"init[v1]", "unsafe[v1]", "edge[v1,0,v1].m0"}


def test_gbf_encoding_has_one_condition_per_edge_and_loss_count(academic_system, academic_controller, graph_2_4, case_study_1):
    problem = encode(GbfVariant.of("gbf", "hold"), academic_system, academic_controller, graph_2_4, case_study_1.sets)
    transitions = [name for name in constraint_names(problem) if name.startswith("edge[")]
    assert len(transitions) == sum(label + 1 for _, label, _ in graph_2_4.edges)
    assert "edge[v1,2,v3].m2" in transitions
    assert problem.metadata["bilinear_group"]
    assert problem.metadata["gamma"]["edge[v1,2,v3].m2"] == 1.0


def test_one_step_hold_encoding_lives_on_the_augmented_state(academic_system, academic_controller, graph_2_4, case_study_1):
    problem = encode(GbfVariant.of("1dgbf", "hold"), academic_system, academic_controller, graph_2_4, case_study_1.sets)
    assert problem.matrices["P[v1]"].shape == (4, 4)
    assert "increase[v2]" in constraint_names(problem)
    assert "increase[v1]" not in constraint_names(problem)
    assert problem.metadata["bilinear_group"] == []


def test_augmented_encoding_needs_an_input_set(academic_system, academic_controller, graph_2_4, contractive_sets):
    sets = dataclasses.replace(contractive_sets, U=None)
    with pytest.raises(EncodingError):
        encode(GbfVariant.of("1dgbf", "hold"), academic_system, academic_controller, graph_2_4, sets)


def test_gain_shape_is_checked(academic_system, graph_2_4, contractive_sets):
    with pytest.raises(DimensionError):
        encode(GbfVariant.of("gbf", "zero"), academic_system, LinearController(np.zeros((1, 3))), graph_2_4, contractive_sets)


@pytest.mark.parametrize("kind", ["gbf", "dgbf", "1gbf", "1dgbf"])
def test_contractive_system_is_certified_by_every_variant(
    kind, contractive_system, zero_gain, graph_2_4, contractive_sets, fast_schedule
):
    report = verify(GbfVariant.of(kind, "zero"), contractive_system, zero_gain, graph_2_4, contractive_sets, fast_schedule)
    assert report.status == CertStatus.CERTIFIED, report.diagnostics
    cert = report.certificate
    assert set(cert.P) == {"v1", "v2", "v3"}
    assert report.validation["passed"]
    assert all(cert.evaluate(v, np.zeros(2)) <= 0 for v in cert.graph.nodes)
    assert all(cert.evaluate(v, np.array([1.8, 0.0])) > 0 for v in cert.graph.nodes)


def test_certificate_json_round_trip(contractive_system, zero_gain, graph_2_4, contractive_sets, fast_schedule):
    report = verify(GbfVariant.of("dgbf", "zero"), contractive_system, zero_gain, graph_2_4, contractive_sets, fast_schedule)
    restored = load_certificate(report.to_json())
    assert isinstance(restored, GbfCertificate)
    points = sample_box([-2, -2], [2, 2], 50)
    for v in graph_2_4.nodes:
        np.testing.assert_allclose(restored.evaluate(v, points), report.certificate.evaluate(v, points))


def test_overlapping_initial_and_unsafe_sets_are_infeasible(contractive_system, zero_gain, graph_2_4, contractive_sets):
    sets = ProblemSets(contractive_sets.X, contractive_sets.X0, contractive_sets.X0, contractive_sets.U)
    schedule = Schedule.from_dict({"eta": 1e-2, "validation_samples": 2000})
    report = verify(GbfVariant.of("dgbf", "zero"), contractive_system, zero_gain, graph_2_4, sets, schedule)
    assert report.status == CertStatus.INFEASIBLE
    assert report.certificate is None


def test_synthesis_keeps_a_certified_initial_gain(contractive_system, graph_2_4, contractive_sets, fast_schedule):
    controller, report = synthesize(
        GbfVariant.of("gbf", "zero"), contractive_system, graph_2_4, contractive_sets, fast_schedule, np.zeros((1, 2))
    )
    assert report.certified
    np.testing.assert_allclose(controller.K, np.zeros((1, 2)))


def test_synthesis_is_limited_to_the_gbf_variant(contractive_system, graph_2_4, contractive_sets):
    with pytest.raises(EncodingError):
        synthesize(GbfVariant.of("dgbf", "zero"), contractive_system, graph_2_4, contractive_sets)


def test_synthesis_continues_after_an_inconclusive_gain_step(
    contractive_system, graph_2_4, contractive_sets, monkeypatch
):
    solve = conic_utils.solve
    gain_steps = []

    def solve_with_one_stalled_gain_step(problem, *args, **kwargs):
        if problem.name == "gbf-gain":
            gain_steps.append(problem.name)
            if len(gain_steps) == 1:
                return SolveOutcome(SolveStatus.UNKNOWN, solver="CLARABEL", diagnostic="numerical trouble")
        return solve(problem, *args, **kwargs)

    monkeypatch.setattr(conic_utils, "solve", solve_with_one_stalled_gain_step)
    schedule = Schedule.from_dict({"validation_samples": 2000, "gamma_grid": {"points": 8}, "synthesis_rounds": 3})
    # u = 1.5 x1 doubles x1 on every success, so the initial gain is unsafe
    synthesize(
        GbfVariant.of("gbf", "zero"), contractive_system, graph_2_4, contractive_sets, schedule, np.array([[1.5, 0.0]])
    )
    assert len(gain_steps) >= 2


@pytest.mark.slow
@pytest.mark.parametrize("kind", ["gbf", "dgbf"])
def test_case_study_1_is_certified(kind, case_study_1):
    p = case_study_1
    report = verify(GbfVariant.of(kind, p.strategy), p.system, p.controller, p.graph, p.sets)
    assert report.status == CertStatus.CERTIFIED, report.diagnostics
    assert report.validation is not None
    falsified = falsify(p.system, p.controller, p.strategy, p.graph, p.sets, horizon=12, n_samples=2000)
    assert falsified.exhaustive
    assert not falsified.found


@pytest.mark.slow
def test_case_study_1_has_no_one_step_decrease_certificate(case_study_1):
    p = case_study_1
    report = verify(GbfVariant.of("1dgbf", p.strategy), p.system, p.controller, p.graph, p.sets)
    assert report.status == CertStatus.INFEASIBLE


@pytest.mark.slow
def test_case_study_2_is_certified(case_study_2):
    p = case_study_2
    for kind in ("gbf", "dgbf"):
        report = verify(GbfVariant.of(kind, p.strategy), p.system, p.controller, p.graph, p.sets)
        assert report.certified, report.diagnostics
    falsified = falsify(p.system, p.controller, p.strategy, p.graph, p.sets, horizon=12, n_samples=2000)
    assert falsified.exhaustive
    assert not falsified.found


@pytest.mark.slow
def test_case_study_2_has_no_one_step_zero_certificate(case_study_2):
    p = case_study_2
    report = verify(GbfVariant.of("1dgbf", p.strategy), p.system, p.controller, p.graph, p.sets)
    assert report.status == CertStatus.INFEASIBLE, report.diagnostics


@pytest.mark.slow
def test_case_study_4_gain_is_repaired_by_synthesis(case_study_4):
    p = case_study_4
    variant = GbfVariant.of("gbf", p.strategy)
    before = verify(variant, p.system, p.controller, p.graph, p.sets)
    assert not before.certified
    controller, report = synthesize(variant, p.system, p.graph, p.sets, K_init=p.controller.K)
    assert report.certified, report.diagnostics
    assert not falsify(p.system, controller, p.strategy, p.graph, p.sets, horizon=12, n_samples=10000).found
