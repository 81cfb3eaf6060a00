# Copyright (c) 2024 The wh-cert-lib authors
# SPDX-License-Identifier: AGPL-3.0

from __future__ import annotations

import copy
import json
import os
from dataclasses import dataclass, field, fields
from typing import Any, Dict, Optional

import numpy as np

from ..exceptions import ProblemConfigError
from ..utils import problem_validation_utils as pv
from ..utils.graph_utils import build_graph
from ..utils.set_utils import AnySet
from .system import Controller, Strategy, System
from .wh_constraint import WhConstraint
from .wh_graph import WhGraph

CONFIGS_DIR = os.path.join(os.path.dirname(__file__), "..", "configs")

DEFAULT_SCHEDULE: Dict[str, Any] = {
    "gamma_grid": {"base": 2.0, "lo": -6, "hi": 3, "points": 20},
    "alternation_rounds": 30,
    "synthesis_rounds": 20,
    "eps_min": 1e-3,
    "eps_min_decrease": 0.0,
    "eta": 1e-6,
    "rho": 100.0,
    "feas_tol": 1e-7,
    "lmi_margin": 1e-9,
    "validation_samples": 100000,
    "validation_tol": 1e-6,
    "p1_min": 1e-3,
    "k_bound": 10.0,
    "slack_tol": 1e-7,
    "solver": None,
    "seed": 0,
    "sos_degree": 3,
    "multiplier_degree": None,
    "sos_eta": 1e-4,
    "degree_cap": 12,
}


@dataclass
class Schedule:
    """
    Numerical knobs of the encoders, the BMI schedule and the validation hook.
    """

    gamma_grid: Dict[str, float] = field(default_factory=lambda: dict(DEFAULT_SCHEDULE["gamma_grid"]))
    alternation_rounds: int = DEFAULT_SCHEDULE["alternation_rounds"]
    synthesis_rounds: int = DEFAULT_SCHEDULE["synthesis_rounds"]
    eps_min: float = DEFAULT_SCHEDULE["eps_min"]
    eps_min_decrease: float = DEFAULT_SCHEDULE["eps_min_decrease"]
    eta: float = DEFAULT_SCHEDULE["eta"]
    rho: float = DEFAULT_SCHEDULE["rho"]
    feas_tol: float = DEFAULT_SCHEDULE["feas_tol"]
    lmi_margin: float = DEFAULT_SCHEDULE["lmi_margin"]
    validation_samples: int = DEFAULT_SCHEDULE["validation_samples"]
    validation_tol: float = DEFAULT_SCHEDULE["validation_tol"]
    p1_min: float = DEFAULT_SCHEDULE["p1_min"]
    k_bound: float = DEFAULT_SCHEDULE["k_bound"]
    slack_tol: float = DEFAULT_SCHEDULE["slack_tol"]
    solver: Optional[str] = DEFAULT_SCHEDULE["solver"]
    seed: int = DEFAULT_SCHEDULE["seed"]
    sos_degree: int = DEFAULT_SCHEDULE["sos_degree"]
    multiplier_degree: Optional[int] = DEFAULT_SCHEDULE["multiplier_degree"]
    sos_eta: float = DEFAULT_SCHEDULE["sos_eta"]
    degree_cap: int = DEFAULT_SCHEDULE["degree_cap"]

    @classmethod
    def from_dict(cls, overrides: Optional[Dict[str, Any]] = None) -> Schedule:
        overrides = dict(overrides or {})
        known = {f.name for f in fields(cls)}
        for key in overrides:
            if key not in known:
                raise ProblemConfigError(f"$.{key}", f"unknown schedule key, expected one of {sorted(known)}")
        values = copy.deepcopy(DEFAULT_SCHEDULE)
        if "gamma_grid" in overrides:
            grid = overrides.pop("gamma_grid")
            if not isinstance(grid, dict):
                raise ProblemConfigError("$.gamma_grid", "expected an object")
            for key in grid:
                if key not in values["gamma_grid"]:
                    raise ProblemConfigError(f"$.gamma_grid.{key}", "unknown key, expected base, lo, hi or points")
            values["gamma_grid"].update(grid)
        values.update(overrides)
        schedule = cls(**values)
        schedule._check()
        return schedule

    @classmethod
    def from_file(cls, path: str) -> Schedule:
        try:
            with open(path) as f:
                data = json.load(f)
        except json.JSONDecodeError as err:
            raise ProblemConfigError("$", f"{path} is not valid JSON: {err}") from None
        if not isinstance(data, dict):
            raise ProblemConfigError("$", "schedule file must hold a JSON object")
        return cls.from_dict(data)

    def _check(self):
        positive = ("eps_min", "rho", "feas_tol", "validation_tol", "p1_min", "k_bound", "sos_eta")
        for key in positive:
            if not getattr(self, key) > 0:
                raise ProblemConfigError(f"$.{key}", "must be positive")
        for key in ("eps_min_decrease", "eta", "lmi_margin", "slack_tol"):
            if getattr(self, key) < 0:
                raise ProblemConfigError(f"$.{key}", "must be non-negative")
        for key in ("alternation_rounds", "synthesis_rounds", "validation_samples", "sos_degree", "degree_cap"):
            value = getattr(self, key)
            if not isinstance(value, int) or value < 1:
                raise ProblemConfigError(f"$.{key}", "must be a positive integer")
        grid = self.gamma_grid
        if not isinstance(grid["points"], int) or grid["points"] < 1:
            raise ProblemConfigError("$.gamma_grid.points", "must be a positive integer")
        if grid["hi"] < grid["lo"]:
            raise ProblemConfigError("$.gamma_grid.hi", "must not be below lo")
        if grid["base"] <= 1:
            raise ProblemConfigError("$.gamma_grid.base", "must exceed 1")

    def gamma_values(self) -> np.ndarray:
        grid = self.gamma_grid
        return np.logspace(grid["lo"], grid["hi"], int(grid["points"]), base=grid["base"])

    def to_dict(self) -> Dict[str, Any]:
        return {f.name: copy.deepcopy(getattr(self, f.name)) for f in fields(self)}


@dataclass
class ProblemSets:
    X: AnySet
    X0: AnySet
    Xu: AnySet
    U: Optional[AnySet] = None


def resolve_problem_path(name_or_path: str) -> str:
    """A path to an existing file, or the name of a bundled problem such as case_study_1."""
    if os.path.isfile(name_or_path):
        return name_or_path
    candidate = os.path.join(CONFIGS_DIR, f"{name_or_path}.json")
    if os.path.isfile(candidate):
        return candidate
    raise ProblemConfigError("$", f"{name_or_path} is neither a file nor a bundled problem ({bundled_problems()})")


def bundled_problems():
    return sorted(f[:-5] for f in os.listdir(CONFIGS_DIR) if f.endswith(".json"))


class WhProblem:
    """
    A WH control system with its sets, WH constraint and actuator strategy, as read from a problem file.
    """

    def __init__(
        self,
        system: System,
        controller: Optional[Controller],
        sets: ProblemSets,
        constraint: WhConstraint,
        strategy: Strategy,
        name: str = "problem",
        source: Optional[Dict[str, Any]] = None,
    ):
        if controller is not None:
            controller.check_against(system)
        self.system = system
        self.controller = controller
        self.sets = sets
        self.constraint = constraint
        self.strategy = Strategy(strategy)
        self.name = name
        self.source = copy.deepcopy(source) if source is not None else None  # original JSON, carried through
        self._graph: Optional[WhGraph] = None

    @classmethod
    def from_dict(cls, d: Dict[str, Any], check: bool = True, seed: int = 0) -> WhProblem:
        """
        Parses and checks a problem description.
        Args:
            d: problem description, see the problem file schema
            check: run the semantic set checks (boundedness, disjoint X0 and Xu)
            seed: seed of the sampling used by the disjointness check

        Returns:
            WhProblem: parsed problem
        """
        if not isinstance(d, dict):
            raise ProblemConfigError("$", "problem file must hold a JSON object")
        system = pv.parse_system(pv.require(d, "system", "$"), "$.system")
        params = d["system"].get("params", {})
        controller = pv.parse_controller(d.get("controller"), system, "$.controller", params)
        constraint = pv.parse_constraint(pv.require(d, "constraint", "$"), "$.constraint")
        strategy = pv.parse_strategy(d.get("strategy", "zero"), "$.strategy")

        set_specs = pv.require(d, "sets", "$")
        n, m = system.n_states, system.n_inputs
        X = pv.parse_set(pv.require(set_specs, "X", "$.sets"), n, "$.sets.X", params)
        X0 = pv.parse_set(pv.require(set_specs, "X0", "$.sets"), n, "$.sets.X0", params)
        Xu = pv.parse_set(pv.require(set_specs, "Xu", "$.sets"), n, "$.sets.Xu", params)
        U = pv.parse_set(set_specs["U"], m, "$.sets.U", params) if set_specs.get("U") is not None else None
        if check:
            pv.check_sets(X, X0, Xu, U, strategy, seed=seed)
        return cls(system, controller, ProblemSets(X, X0, Xu, U), constraint, strategy, d.get("name", "problem"), d)

    @classmethod
    def from_file(cls, path: str, check: bool = True, seed: int = 0) -> WhProblem:
        path = resolve_problem_path(path)
        try:
            with open(path) as f:
                data = json.load(f)
        except json.JSONDecodeError as err:
            raise ProblemConfigError("$", f"{path} is not valid JSON: {err}") from None
        return cls.from_dict(data, check=check, seed=seed)

    @property
    def graph(self) -> WhGraph:
        if self._graph is None:
            self._graph = build_graph(self.constraint)
        return self._graph

    def with_controller(self, controller: Controller) -> WhProblem:
        source = copy.deepcopy(self.source) if self.source is not None else None
        if source is not None:
            source["controller"] = controller.to_dict()
        problem = WhProblem(self.system, controller, self.sets, self.constraint, self.strategy, self.name, source)
        problem._graph = self._graph
        return problem

    def __repr__(self) -> str:
        return f"WhProblem({self.name!r}, {self.constraint}, {self.strategy.value})"
