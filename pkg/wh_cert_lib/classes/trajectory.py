# Copyright (c) 2024 The wh-cert-lib authors
# SPDX-License-Identifier: AGPL-3.0

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import pandas as pd

from .system import Strategy, input_variables, state_variables
from .wh_constraint import LossWord


@dataclass
class Trajectory:
    """
    States x(0..T) of a WH control system under a loss word of length T.
    inputs[t] is the input applied between t and t+1; nodes[t] is the graph node reached at
    success instant t (None at loss instants or when the trajectory was not aligned to a graph).
    """

    states: np.ndarray
    inputs: np.ndarray
    word: LossWord
    strategy: Strategy
    nodes: List[Optional[str]] = field(default_factory=list)

    @property
    def horizon(self) -> int:
        return len(self.word)

    @property
    def n_states(self) -> int:
        return self.states.shape[1]

    @property
    def n_inputs(self) -> int:
        return self.inputs.shape[1]

    def held_inputs(self) -> np.ndarray:
        """Actuator memory at each instant: the input applied just before t, g(x(0)) at t = 0."""
        first = self.inputs[:1]
        return np.concatenate([first, self.inputs], axis=0)

    def to_frame(self, psi: Optional[np.ndarray] = None) -> pd.DataFrame:
        """One row per instant t = 0..T; the input and loss columns are empty on the final row."""
        T = self.horizon
        frame = pd.DataFrame(self.states, columns=state_variables(self.n_states))
        frame.insert(0, "t", np.arange(T + 1))
        for j, name in enumerate(input_variables(self.n_inputs)):
            frame[name] = np.append(self.inputs[:, j], np.nan)
        frame["mu"] = pd.array(list(self.word.bits) + [None], dtype="Int64")
        nodes = list(self.nodes) + [None] * (T + 1 - len(self.nodes))
        frame["node"] = nodes
        if psi is not None:
            frame["psi"] = psi
        return frame


@dataclass
class Counterexample:
    x0: np.ndarray
    word: LossWord
    t_hit: int
    state: np.ndarray

    def to_dict(self) -> dict:
        return {"x0": self.x0.tolist(), "word": str(self.word), "t_hit": self.t_hit, "state": self.state.tolist()}


@dataclass
class FalsificationReport:
    horizon: int
    n_paths: int
    n_samples: int
    exhaustive: bool
    counterexample: Optional[Counterexample] = None

    @property
    def found(self) -> bool:
        return self.counterexample is not None

    def to_dict(self) -> dict:
        return {
            "horizon": self.horizon,
            "n_paths": self.n_paths,
            "n_samples": self.n_samples,
            "exhaustive": self.exhaustive,
            "found": self.found,
            "counterexample": self.counterexample.to_dict() if self.found else None,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


@dataclass
class LedgerEntry:
    t: int
    node: str
    edge: str
    m: int
    psi: float
    bound: float

    @property
    def ok(self) -> bool:
        return self.psi <= self.bound

    def to_dict(self) -> dict:
        return {"t": self.t, "node": self.node, "edge": self.edge, "m": self.m, "psi": self.psi, "bound": self.bound, "ok": self.ok}


@dataclass
class MonitorLedger:
    """Barrier values along a trajectory against the bounds the certificate promises."""

    tol: float
    entries: List[LedgerEntry] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(e.psi <= e.bound + self.tol for e in self.entries)

    def violations(self) -> List[LedgerEntry]:
        return [e for e in self.entries if e.psi > e.bound + self.tol]

    @property
    def first_violation(self) -> Optional[LedgerEntry]:
        bad = self.violations()
        return bad[0] if bad else None

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([e.to_dict() for e in self.entries], columns=["t", "node", "edge", "m", "psi", "bound", "ok"])
