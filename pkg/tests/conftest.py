# Copyright (c) 2024 The wh-cert-lib authors
# SPDX-License-Identifier: AGPL-3.0

import copy
import json

import numpy as np
import pytest

from wh_cert_lib.classes.problem import ProblemSets, Schedule, WhProblem
from wh_cert_lib.classes.sets import QuadraticForm, SemiAlgebraicSet
from wh_cert_lib.classes.system import LinearController, LinearSystem
from wh_cert_lib.classes.wh_constraint import WhConstraint
from wh_cert_lib.utils.graph_utils import build_graph
from wh_cert_lib.utils.set_utils import box, ellipsoid

# x1 >= 1.5, restricted to the right edge of X
UNSAFE_RIGHT = np.array([[0.0, 0.0, 0.5], [0.0, 0.0, 0.0], [0.5, 0.0, -1.5]])

CONTRACTIVE_PROBLEM = {
    "name": "contractive",
    "system": {"type": "linear", "A": [[0.5, 0], [0, 0.5]], "B": [[1], [0]]},
    "controller": {"K": [[0, 0]]},
    "constraint": {"r": 2, "s": 4},
    "strategy": "zero",
    "sets": {
        "X": {"type": "box", "lo": [-2, -2], "hi": [2, 2]},
        "X0": {"type": "ellipsoid", "center": [0, 0], "semi_axes": [0.5, 0.5]},
        "Xu": {"type": "quadratic", "S": UNSAFE_RIGHT.tolist(), "bounds": [[1.5, 2], [-2, 2]]},
        "U": {"type": "box", "lo": [-1], "hi": [1]},
    },
}


@pytest.fixture
def graph_1_1():
    return build_graph(WhConstraint(1, 1))


@pytest.fixture
def graph_2_4():
    return build_graph(WhConstraint(2, 4))


@pytest.fixture
def academic_system():
    return LinearSystem(np.array([[0.0, 1.0], [1.0, 1.0]]), np.array([[1.0], [1.0]]))


@pytest.fixture
def academic_controller():
    return LinearController(np.array([[-0.5, -0.7]]))


@pytest.fixture
def contractive_system():
    return LinearSystem(0.5 * np.eye(2), np.array([[1.0], [0.0]]))


@pytest.fixture
def zero_gain():
    return LinearController(np.zeros((1, 2)))


@pytest.fixture
def contractive_sets():
    return ProblemSets(
        X=box([-2, -2], [2, 2]),
        X0=ellipsoid([0, 0], [0.5, 0.5]),
        Xu=QuadraticForm(UNSAFE_RIGHT, ([1.5, -2.0], [2.0, 2.0])),
        U=box([-1], [1]),
    )


@pytest.fixture
def empty_unsafe_sets(contractive_sets):
    return ProblemSets(contractive_sets.X, contractive_sets.X0, SemiAlgebraicSet.empty_set(2), contractive_sets.U)


@pytest.fixture
def fast_schedule():
    return Schedule.from_dict({"validation_samples": 2000, "gamma_grid": {"points": 8}})


@pytest.fixture
def contractive_config():
    return copy.deepcopy(CONTRACTIVE_PROBLEM)


@pytest.fixture
def contractive_problem_file(tmp_path):
    path = tmp_path / "contractive.json"
    path.write_text(json.dumps(CONTRACTIVE_PROBLEM))
    return str(path)


@pytest.fixture
def contractive_problem():
    return WhProblem.from_dict(CONTRACTIVE_PROBLEM)


@pytest.fixture
def case_study_1():
    return WhProblem.from_file("case_study_1")


@pytest.fixture
def case_study_2():
    return WhProblem.from_file("case_study_2")


@pytest.fixture
def case_study_3():
    return WhProblem.from_file("case_study_3")


@pytest.fixture
def case_study_4():
    return WhProblem.from_file("case_study_4")
