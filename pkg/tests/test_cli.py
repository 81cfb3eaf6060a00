# Copyright (c) 2024 The wh-cert-lib authors
# SPDX-License-Identifier: AGPL-3.0

import io
import json

import numpy as np
import pandas as pd
import pytest
from typer.testing import CliRunner

from wh_cert_lib.classes.certificate import GbfCertificate, GbfVariant
from wh_cert_lib.classes.wh_constraint import WhConstraint
from wh_cert_lib.cli.main import app
from wh_cert_lib.utils.graph_utils import build_graph

runner = CliRunner()


@pytest.fixture
def fast_schedule_file(tmp_path):
    path = tmp_path / "schedule.json"
    path.write_text(json.dumps({"validation_samples": 2000, "gamma_grid": {"points": 8}}))
    return str(path)


def write_certificate(tmp_path, P, eps=0.01):
    graph = build_graph(WhConstraint(2, 4))
    cert = GbfCertificate(
        GbfVariant.of("gbf", "zero"),
        graph,
        {v: np.array(P) for v in graph.nodes},
        {v: eps for v in graph.nodes},
        2,
        1,
        controller={"K": [[0.0, 0.0]]},
    )
    path = tmp_path / "cert.json"
    path.write_text(cert.to_json())
    return str(path)


def test_graph_summary_and_language_check(tmp_path):
    dot = tmp_path / "k24.dot"
    result = runner.invoke(app, ["graph", "--r", "2", "--s", "4", "--check-len", "12", "--dot", str(dot)])
    assert result.exit_code == 0, result.output
    assert "3 nodes, 6 edges, language check OK" in result.output
    assert dot.read_text().startswith('digraph "K(2,4)"')


def test_graph_rejects_an_invalid_constraint():
    result = runner.invoke(app, ["graph", "--r", "5", "--s", "4"])
    assert result.exit_code == 2


def test_simulate_writes_a_trajectory_csv(contractive_problem_file):
    result = runner.invoke(app, ["simulate", "--problem", contractive_problem_file, "--word", "111", "--x0", "0.4,0"])
    assert result.exit_code == 0, result.output
    frame = pd.read_csv(io.StringIO(result.stdout))
    assert len(frame) == 4
    np.testing.assert_allclose(frame["x1"], [0.4, 0.2, 0.1, 0.05])


def test_simulate_with_a_certificate_adds_psi(contractive_problem_file, tmp_path):
    cert = write_certificate(tmp_path, np.diag([1.0, 1.0, -0.25]))
    ledger = tmp_path / "ledger.csv"
    result = runner.invoke(
        app,
        ["simulate", "--problem", contractive_problem_file, "--word", "100", "--x0", "0.4,0", "--cert", cert, "--ledger", str(ledger)],
    )
    assert result.exit_code == 0, result.output
    frame = pd.read_csv(io.StringIO(result.stdout))
    assert frame["psi"].iloc[0] == pytest.approx(0.16 - 0.25)
    assert pd.read_csv(ledger)["ok"].all()


def test_simulate_rejects_a_malformed_word(contractive_problem_file):
    result = runner.invoke(app, ["simulate", "--problem", contractive_problem_file, "--word", "1x0", "--x0", "0,0"])
    assert result.exit_code == 2


def test_falsify_finds_nothing_on_a_contractive_system(contractive_problem_file):
    result = runner.invoke(app, ["falsify", "--problem", contractive_problem_file, "--horizon", "8", "--samples", "200"])
    assert result.exit_code == 0, result.output
    assert json.loads(result.stdout)["found"] is False


def test_falsify_reports_a_counterexample_for_a_destabilizing_gain(contractive_problem_file):
    # u = 2 x1 turns the first coordinate into x1 -> 2.5 x1
    result = runner.invoke(
        app, ["falsify", "--problem", contractive_problem_file, "--horizon", "6", "--samples", "200", "--k", "2,0"]
    )
    assert result.exit_code == 5
    assert json.loads(result.stdout)["counterexample"]["t_hit"] >= 1


def test_verify_reports_config_errors(tmp_path, contractive_config):
    contractive_config["constraint"] = {"r": 5, "s": 4}
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(contractive_config))
    result = runner.invoke(app, ["verify", "--problem", str(path), "--variant", "dgbf"])
    assert result.exit_code == 2
    assert "configuration error at $.constraint" in result.output


def test_verify_unknown_variant_is_a_config_error(contractive_problem_file):
    result = runner.invoke(app, ["verify", "--problem", contractive_problem_file, "--variant", "hgbf"])
    assert result.exit_code == 2


def test_verify_certifies_the_contractive_problem(contractive_problem_file, fast_schedule_file, tmp_path):
    out = tmp_path / "report.json"
    result = runner.invoke(
        app,
        ["verify", "--problem", contractive_problem_file, "--variant", "dgbf", "--schedule", fast_schedule_file, "--output", str(out)],
    )
    assert result.exit_code == 0, result.output
    report = json.loads(out.read_text())
    assert report["status"] == "certified"


def test_validate_exit_codes(contractive_problem_file, tmp_path):
    good = write_certificate(tmp_path, np.diag([1.0, 1.0, -0.25]))
    result = runner.invoke(app, ["validate", "--problem", contractive_problem_file, "--cert", good, "--samples", "1000"])
    assert result.exit_code == 0, result.output

    bad = write_certificate(tmp_path, np.zeros((3, 3)))
    result = runner.invoke(app, ["validate", "--problem", contractive_problem_file, "--cert", bad, "--samples", "1000"])
    assert result.exit_code == 6


def test_levelset_writes_one_row_per_grid_point(tmp_path):
    cert = write_certificate(tmp_path, np.diag([1.0, 1.0, -0.25]))
    plot = tmp_path / "levelsets.png"
    result = runner.invoke(
        app, ["levelset", "--cert", cert, "--node", "v2", "--grid", "x1:-1:1:5,x2:-1:1:5", "--plot", str(plot)]
    )
    assert result.exit_code == 0, result.output
    frame = pd.read_csv(io.StringIO(result.stdout))
    assert len(frame) == 25
    assert {-1, 1} <= set(frame["sign"])
    assert plot.exists()


def test_get_configs_copies_the_bundled_problems(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    result = runner.invoke(app, ["get-configs"])
    assert result.exit_code == 0, result.output
    assert (tmp_path / "configs" / "case_study_1.json").exists()
