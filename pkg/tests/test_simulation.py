# Copyright (c) 2024 The wh-cert-lib authors
# SPDX-License-Identifier: AGPL-3.0

import numpy as np
import pytest

from wh_cert_lib.classes.certificate import GbfCertificate, GbfVariant
from wh_cert_lib.classes.system import LinearSystem, Strategy
from wh_cert_lib.classes.wh_constraint import LossWord
from wh_cert_lib.exceptions import CertificateMismatchError, HorizonError, LossWordError, MonitorError
from wh_cert_lib.utils.graph_utils import sample_paths
from wh_cert_lib.utils.lmi_utils import verify
from wh_cert_lib.utils.set_utils import sample_set
from wh_cert_lib.utils.simulation_utils import align, falsify, monitor, rollout
from wh_cert_lib.utils.sos_utils import verify_sos


def word(text):
    return LossWord.from_string(text)


def disc_certificate(graph, eps):
    P = np.diag([1.0, 1.0, -0.25])
    return GbfCertificate(GbfVariant.of("gbf", "zero"), graph, {v: P for v in graph.nodes}, {v: eps for v in graph.nodes}, 2, 1)


def test_all_success_word_follows_the_closed_loop(academic_system, academic_controller):
    x0 = np.array([0.3, -0.2])
    traj = rollout(academic_system, academic_controller, "hold", x0, word("1111"))
    closed = academic_system.A + academic_system.B @ academic_controller.K
    expected = x0
    for t in range(1, 5):
        expected = closed @ expected
        np.testing.assert_allclose(traj.states[t], expected, atol=1e-12)
    assert traj.states.shape == (5, 2)
    assert traj.inputs.shape == (4, 1)


def test_hold_strategy_reapplies_the_last_input(academic_system, academic_controller):
    traj = rollout(academic_system, academic_controller, Strategy.HOLD, [0.4, 0.0], word("100"))
    np.testing.assert_allclose(traj.states[1:], [[-0.2, 0.2], [0.0, -0.2], [-0.4, -0.4]], atol=1e-12)
    np.testing.assert_allclose(traj.inputs.ravel(), [-0.2, -0.2, -0.2])


def test_zero_strategy_runs_open_loop_after_a_loss(academic_system, academic_controller):
    x0 = np.array([0.4, 0.1])
    traj = rollout(academic_system, academic_controller, "zero", x0, word("10"))
    closed = academic_system.A + academic_system.B @ academic_controller.K
    np.testing.assert_allclose(traj.states[2], academic_system.A @ closed @ x0, atol=1e-12)
    np.testing.assert_allclose(traj.inputs[1], [0.0])


def test_strategies_coincide_for_a_zero_gain(academic_system, zero_gain):
    x0 = [0.5, -0.5]
    held = rollout(academic_system, zero_gain, "hold", x0, word("1001101"))
    zeroed = rollout(academic_system, zero_gain, "zero", x0, word("1001101"))
    np.testing.assert_allclose(held.states, zeroed.states)


def test_rollout_rejects_a_leading_loss(academic_system, academic_controller):
    with pytest.raises(LossWordError):
        rollout(academic_system, academic_controller, "hold", [0, 0], word("011"))


def test_trajectory_frame(academic_system, academic_controller, graph_2_4):
    traj = rollout(academic_system, academic_controller, "hold", [0.4, 0.0], word("1101"), graph=graph_2_4)
    frame = traj.to_frame()
    assert list(frame.columns) == ["t", "x1", "x2", "u1", "mu", "node"]
    assert len(frame) == 5
    assert frame["mu"].tolist()[:4] == [1, 1, 0, 1]
    assert frame["node"].tolist() == ["v1", "v1", None, "v2", None]
    assert np.isnan(frame["u1"].iloc[-1])


def test_align_marks_loss_instants(academic_system, academic_controller, graph_2_4):
    traj = rollout(academic_system, academic_controller, "hold", [0.1, 0.1], word("10011"))
    assert align(traj, graph_2_4) == ["v1", None, None, "v3", "v1"]


def test_no_counterexample_without_an_unsafe_set(contractive_system, zero_gain, graph_2_4, empty_unsafe_sets):
    report = falsify(contractive_system, zero_gain, "zero", graph_2_4, empty_unsafe_sets, horizon=8, n_samples=200)
    assert not report.found
    assert report.exhaustive
    assert report.n_paths > 0


def test_contractive_system_is_not_falsified(contractive_system, zero_gain, graph_2_4, contractive_sets):
    report = falsify(contractive_system, zero_gain, "zero", graph_2_4, contractive_sets, horizon=10, n_samples=500)
    assert not report.found
    assert report.to_dict()["counterexample"] is None


def test_falsify_needs_a_positive_horizon(contractive_system, zero_gain, graph_2_4, contractive_sets):
    with pytest.raises(HorizonError):
        falsify(contractive_system, zero_gain, "zero", graph_2_4, contractive_sets, horizon=0, n_samples=10)


def test_counterexample_is_replayable(zero_gain, graph_2_4, contractive_sets):
    # x1 grows by 1.5 per step, so x0 = (0.5, 0) reaches x1 >= 1.5 by t = 3
    expanding = LinearSystem(np.diag([1.5, 0.5]), np.array([[1.0], [0.0]]))
    report = falsify(expanding, zero_gain, "zero", graph_2_4, contractive_sets, horizon=6, n_samples=200)
    assert report.found
    ce = report.counterexample
    assert 1 <= ce.t_hit <= 3
    assert len(ce.word) == ce.t_hit
    assert graph_2_4.accepts(ce.word)
    traj = rollout(expanding, zero_gain, "zero", ce.x0, ce.word)
    np.testing.assert_allclose(traj.states[-1], ce.state)
    assert contractive_sets.Xu.contains(ce.state)


def test_long_horizons_sample_paths(zero_gain, graph_2_4, contractive_sets):
    expanding = LinearSystem(np.diag([1.5, 0.5]), np.array([[1.0], [0.0]]))
    report = falsify(expanding, zero_gain, "zero", graph_2_4, contractive_sets, horizon=30, n_samples=50, path_budget=20)
    assert not report.exhaustive
    assert report.n_paths == 20
    assert report.found


@pytest.mark.slow
def test_case_study_2_has_no_counterexample(case_study_2):
    p = case_study_2
    report = falsify(p.system, p.controller, p.strategy, p.graph, p.sets, horizon=12, n_samples=2000)
    assert not report.found


def test_monitor_passes_a_valid_certificate(contractive_system, zero_gain, graph_1_1):
    traj = rollout(contractive_system, zero_gain, "zero", [0.4, 0.0], word("1111"))
    ledger = monitor(traj, disc_certificate(graph_1_1, 0.01), graph_1_1)
    assert ledger.passed
    assert len(ledger.entries) == traj.horizon + 1
    assert ledger.entries[0].edge == "start"


def test_monitor_reports_the_first_violated_bound(contractive_system, zero_gain, graph_2_4):
    traj = rollout(contractive_system, zero_gain, "zero", [0.4, 0.0], word("100"))
    cert = disc_certificate(graph_2_4, 0.1)
    ledger = monitor(traj, cert, graph_2_4)
    assert ledger.passed
    assert [e.bound for e in ledger.entries] == pytest.approx([0.0, -0.2, -0.1, 0.0])
    assert ledger.entries[1].psi == pytest.approx(0.2**2 - 0.25)

    strict = monitor(traj, cert.scaled(2.0), graph_2_4)
    assert not strict.passed
    assert strict.first_violation.t == 1
    assert strict.to_frame()["ok"].tolist() == [True, False, True, True]


def test_monitor_rejects_a_certificate_on_another_graph(contractive_system, zero_gain, graph_1_1, graph_2_4):
    traj = rollout(contractive_system, zero_gain, "zero", [0.4, 0.0], word("10"))
    with pytest.raises(CertificateMismatchError):
        monitor(traj, disc_certificate(graph_1_1, 0.01), graph_2_4)


def test_monitor_rejects_an_inadmissible_word(contractive_system, zero_gain, graph_2_4):
    traj = rollout(contractive_system, zero_gain, "zero", [0.4, 0.0], word("1000"))
    with pytest.raises(MonitorError):
        monitor(traj, disc_certificate(graph_2_4, 0.01), graph_2_4)


@pytest.mark.slow
def test_case_study_4_gain_is_falsified(case_study_4):
    p = case_study_4
    report = falsify(p.system, p.controller, p.strategy, p.graph, p.sets, horizon=10)
    assert report.found
    ce = report.counterexample
    traj = rollout(p.system, p.controller, p.strategy, ce.x0, ce.word)
    assert p.sets.Xu.contains(traj.states[-1])


@pytest.mark.slow
@pytest.mark.parametrize(
    "case, kind",
    [
        ("case_study_1", "gbf"),
        ("case_study_1", "dgbf"),
        ("case_study_2", "gbf"),
        ("case_study_2", "dgbf"),
        ("case_study_3", "1dgbf"),
    ],
)
def test_monitor_passes_random_admissible_trajectories_of_a_certified_loop(case, kind, request):
    p = request.getfixturevalue(case)
    variant = GbfVariant.of(kind, p.strategy)
    if isinstance(p.system, LinearSystem):
        report = verify(variant, p.system, p.controller, p.graph, p.sets)
    else:
        report = verify_sos(variant, p.system, p.controller, p.graph, p.sets, n_p=3)
    assert report.certified, report.diagnostics
    starts = sample_set(p.sets.X0, 100, seed=3)
    for path, x0 in zip(sample_paths(p.graph, 20, 100, seed=3), starts):
        traj = rollout(p.system, p.controller, p.strategy, x0, path.loss_word)
        ledger = monitor(traj, report.certificate, p.graph, tol=1e-5)
        assert ledger.passed, ledger.first_violation
