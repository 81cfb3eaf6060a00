# Copyright (c) 2024 The wh-cert-lib authors
# SPDX-License-Identifier: AGPL-3.0

import copy
import json

import numpy as np
import pytest

from wh_cert_lib.classes.problem import Schedule, WhProblem, bundled_problems
from wh_cert_lib.classes.sets import QuadraticForm, SemiAlgebraicSet
from wh_cert_lib.classes.system import LinearController, PolynomialController, PolynomialSystem, Strategy
from wh_cert_lib.classes.wh_constraint import WhConstraint
from wh_cert_lib.exceptions import ProblemConfigError


def broken(config, **changes):
    d = copy.deepcopy(config)
    for path, value in changes.items():
        *parents, key = path.split("__")
        node = d
        for p in parents:
            node = node[p]
        if value is None:
            node.pop(key)
        else:
            node[key] = value
    return d


def test_bundled_problems_are_listed():
    assert {"case_study_1", "case_study_2", "case_study_3", "case_study_4"} <= set(bundled_problems())


def test_case_study_1_is_parsed(case_study_1):
    assert case_study_1.constraint == WhConstraint(2, 4)
    assert case_study_1.strategy == Strategy.HOLD
    assert isinstance(case_study_1.controller, LinearController)
    assert isinstance(case_study_1.sets.Xu, QuadraticForm)
    assert case_study_1.graph.n_nodes == 3


def test_case_study_3_is_a_polynomial_problem(case_study_3):
    assert isinstance(case_study_3.system, PolynomialSystem)
    assert isinstance(case_study_3.controller, PolynomialController)
    assert isinstance(case_study_3.sets.X0, SemiAlgebraicSet)
    assert case_study_3.graph.n_nodes == 6


def test_printed_platoon_orientation_is_rejected():
    with pytest.raises(ProblemConfigError) as info:
        WhProblem.from_file("case_study_3_printed")
    assert info.value.path == "$.sets.Xu"
    assert "intersect" in info.value.message


def test_unchecked_parse_keeps_the_printed_platoon():
    problem = WhProblem.from_file("case_study_3_printed", check=False)
    assert problem.constraint == WhConstraint(3, 5)


@pytest.mark.parametrize(
    "changes, path",
    [
        ({"constraint": None}, "$.constraint"),
        ({"constraint__r": 5}, "$.constraint"),
        ({"constraint__s": "4"}, "$.constraint.s"),
        ({"strategy": "repeat"}, "$.strategy"),
        ({"system__A": [[1, 0]]}, "$.system.A"),
        ({"system__type": "hybrid"}, "$.system.type"),
        ({"controller": {"K": [[1, 2, 3]]}}, "$.controller.K"),
        ({"controller": {"gain": 1}}, "$.controller"),
        ({"sets__X0__semi_axes": [0.5, -1]}, "$.sets.X0.semi_axes[1]"),
        ({"sets__X__hi": [2, -3]}, "$.sets.X.hi[1]"),
        ({"sets__Xu__type": "polytope"}, "$.sets.Xu.type"),
        ({"sets__X": {"type": "quadratic", "S": [[1, 0, 0], [0, 1, 0], [0, 0, 1]]}}, "$.sets.X"),
    ],
)
def test_config_errors_name_the_offending_field(contractive_config, changes, path):
    with pytest.raises(ProblemConfigError) as info:
        WhProblem.from_dict(broken(contractive_config, **changes))
    assert info.value.path == path


def test_hold_strategy_needs_an_input_set(contractive_config):
    with pytest.raises(ProblemConfigError) as info:
        WhProblem.from_dict(broken(contractive_config, strategy="hold", sets__U=None))
    assert info.value.path == "$.sets.U"


def test_overlapping_initial_and_unsafe_sets_are_rejected(contractive_config):
    d = broken(contractive_config, sets__Xu={"type": "ellipsoid", "center": [0.4, 0], "semi_axes": [0.2, 0.2]})
    with pytest.raises(ProblemConfigError) as info:
        WhProblem.from_dict(d)
    assert info.value.path == "$.sets.Xu"


def test_missing_problem_file():
    with pytest.raises(ProblemConfigError):
        WhProblem.from_file("no_such_problem")


def test_invalid_json_is_a_config_error(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(ProblemConfigError):
        WhProblem.from_file(str(path))


def test_with_controller_updates_the_source(contractive_problem):
    updated = contractive_problem.with_controller(LinearController(np.array([[-0.1, 0.2]])))
    assert updated.source["controller"] == {"K": [[-0.1, 0.2]]}
    assert contractive_problem.source["controller"] == {"K": [[0, 0]]}


def test_schedule_overrides(tmp_path):
    path = tmp_path / "schedule.json"
    path.write_text(json.dumps({"eta": 0.01, "gamma_grid": {"points": 5}}))
    schedule = Schedule.from_file(str(path))
    assert schedule.eta == 0.01
    assert len(schedule.gamma_values()) == 5
    assert schedule.rho == Schedule().rho


@pytest.mark.parametrize(
    "overrides, path",
    [
        ({"etta": 1}, "$.etta"),
        ({"rho": 0}, "$.rho"),
        ({"gamma_grid": {"base": 1.0}}, "$.gamma_grid.base"),
        ({"gamma_grid": {"step": 2}}, "$.gamma_grid.step"),
        ({"sos_degree": 0}, "$.sos_degree"),
    ],
)
def test_schedule_errors(overrides, path):
    with pytest.raises(ProblemConfigError) as info:
        Schedule.from_dict(overrides)
    assert info.value.path == path
