# Copyright (c) 2024 The wh-cert-lib authors
# SPDX-License-Identifier: AGPL-3.0

"""Rollouts under loss words, adversarial falsification over graph paths, and runtime barrier monitoring."""

import logging
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from ..classes.certificate import AnyCertificate
from ..classes.problem import ProblemSets
from ..classes.system import Controller, Strategy, System
from ..classes.trajectory import Counterexample, FalsificationReport, LedgerEntry, MonitorLedger, Trajectory
from ..classes.wh_constraint import LabelWord, LossWord
from ..classes.wh_graph import GraphPath, WhGraph
from ..exceptions import CertificateMismatchError, HorizonError, LossWordError, MonitorError
from .graph_utils import MAX_EXHAUSTIVE_HORIZON, sample_paths
from .parallel_utils import parallel_map
from .set_utils import AnySet, boundary_points, sample_set
from .validation_utils import DEFAULT_TOL
from .wh_utils import split_blocks

logger = logging.getLogger(__name__)

DEFAULT_PATH_BUDGET = 2000

# (x0 index, time of entry, state at entry)
_Hit = Tuple[int, int, np.ndarray]


def rollout(
    system: System,
    controller: Controller,
    strategy: Union[Strategy, str],
    x0: Sequence[float],
    word: LossWord,
    graph: Optional[WhGraph] = None,
) -> Trajectory:
    """
    Simulates x(t+1) = f(x(t), u(t)) where u(t) = g(x(t)) on success and 0 (zero) or the last applied
    input (hold) on loss.
    Args:
        system: plant
        controller: state feedback
        strategy: actuator strategy on losses
        x0: initial state
        word: loss word, must start with a success
        graph: when given, the trajectory is aligned to the graph path generating the word

    Returns:
        Trajectory: states x(0..T) and applied inputs u(0..T-1)
    """
    if not word.starts_with_success:
        raise LossWordError(f"loss word {word} must start with a success")
    strategy = Strategy(strategy)
    x = np.asarray(x0, dtype=float).reshape(system.n_states)
    states = [x]
    inputs = []
    u = np.zeros(system.n_inputs)
    for bit in word:
        if bit:
            u = np.asarray(controller(x), dtype=float).reshape(system.n_inputs)
        elif strategy == Strategy.ZERO:
            u = np.zeros(system.n_inputs)
        inputs.append(u)
        x = np.asarray(system.step(x, u), dtype=float).reshape(system.n_states)
        states.append(x)
    traj = Trajectory(np.array(states), np.array(inputs).reshape(len(word), system.n_inputs), word, strategy)
    if graph is not None:
        traj.nodes = align(traj, graph)
    return traj


def align(traj: Trajectory, graph: WhGraph) -> List[Optional[str]]:
    """Node of the graph path at every success instant of the trajectory, None at loss instants."""
    path = graph.path_of(split_blocks(traj.word))
    nodes: List[Optional[str]] = []
    for node, label in zip(path.nodes, path.labels):
        nodes.append(node)
        nodes.extend([None] * label)
    return nodes


def _initial_states(X0: AnySet, n_samples: int, seed: int) -> np.ndarray:
    samples = sample_set(X0, n_samples, seed)
    if len(samples) == 0:
        return samples
    return np.concatenate([boundary_points(X0, seed=seed), samples])


def _first_hit(Xu: AnySet, states: np.ndarray, t: int) -> Optional[_Hit]:
    with np.errstate(all="ignore"):
        inside = np.atleast_1d(Xu.contains(states, tol=0.0))
    if not np.any(inside):
        return None
    i = int(np.argmax(inside))
    return i, t, states[i].copy()


def _block(
    system: System, controller: Controller, strategy: Strategy, x: np.ndarray, label: int, t: int, Xu: AnySet
) -> Tuple[np.ndarray, Optional[_Hit]]:
    """Simulates one block 1 0^label for a batch of states starting at time t."""
    with np.errstate(all="ignore"):
        u = controller(x)
        for m in range(label + 1):
            if m and strategy == Strategy.ZERO:
                u = np.zeros_like(u)
            x = system.step(x, u)
            hit = _first_hit(Xu, x, t + m + 1)
            if hit is not None:
                return x, hit
    return x, None


class _Search:
    """Depth-first traversal of the graph, rolling all initial states forward together."""

    def __init__(self, system, controller, strategy, graph, Xu, horizon):
        self.system = system
        self.controller = controller
        self.strategy = strategy
        self.graph = graph
        self.Xu = Xu
        self.horizon = horizon
        self.leaves = 0

    def run(self, node: str, labels: Tuple[int, ...], x: np.ndarray, t: int) -> Optional[Tuple[Tuple[int, ...], _Hit]]:
        fitting = [(label, w) for _, label, w in self.graph.out_edges(node) if t + label + 1 <= self.horizon]
        if not fitting:
            self.leaves += 1
            return None
        for label, w in fitting:
            found = self.edge(node, label, w, labels, x, t)
            if found is not None:
                return found
        return None

    def edge(self, node: str, label: int, w: str, labels: Tuple[int, ...], x: np.ndarray, t: int):
        x_next, hit = _block(self.system, self.controller, self.strategy, x, label, t, self.Xu)
        if hit is not None:
            self.leaves += 1
            return labels + (label,), hit
        return self.run(w, labels + (label,), x_next, t + label + 1)


def _counterexample(labels: Tuple[int, ...], hit: _Hit, x0: np.ndarray) -> Counterexample:
    i, t_hit, state = hit
    word = LossWord(LabelWord(labels).expand().bits[:t_hit])
    return Counterexample(x0[i].copy(), word, t_hit, state)


def _simulate_path(system, controller, strategy, Xu, path: GraphPath, x0: np.ndarray) -> Optional[_Hit]:
    x, t = x0, 0
    for label in path.labels:
        x, hit = _block(system, controller, strategy, x, label, t, Xu)
        if hit is not None:
            return hit
        t += label + 1
    return None


def falsify(
    system: System,
    controller: Controller,
    strategy: Union[Strategy, str],
    graph: WhGraph,
    sets: ProblemSets,
    horizon: int,
    n_samples: int = 10000,
    seed: int = 0,
    path_budget: int = DEFAULT_PATH_BUDGET,
) -> FalsificationReport:
    """
    Searches for an admissible loss word and an initial state in X0 whose trajectory enters Xu.
    Paths are enumerated exhaustively up to horizon 20, longer horizons draw `path_budget` random complete paths.
    Args:
        system: plant
        controller: state feedback
        strategy: actuator strategy on losses
        graph: WH graph generating the admissible words
        sets: problem sets
        horizon: number of time steps
        n_samples: initial states sampled in X0, on top of its axis extremes
        seed: sampling seed
        path_budget: random paths beyond the exhaustive horizon

    Returns:
        FalsificationReport: the first counterexample found, replayable with rollout
    """
    strategy = Strategy(strategy)
    x0 = _initial_states(sets.X0, n_samples, seed)
    exhaustive = horizon <= MAX_EXHAUSTIVE_HORIZON
    report = FalsificationReport(horizon, 0, len(x0), exhaustive)
    if len(x0) == 0:
        return report
    hit0 = _first_hit(sets.Xu, x0, 0)
    if hit0 is not None:
        i, _, state = hit0
        report.counterexample = Counterexample(x0[i].copy(), LossWord(()), 0, state)
        return report

    if exhaustive:
        if horizon < 1:
            raise HorizonError(f"horizon {horizon} must be positive")
        first_edges = [(label, w) for _, label, w in graph.out_edges(graph.initial) if label + 1 <= horizon]

        def _subtree(edge):
            search = _Search(system, controller, strategy, graph, sets.Xu, horizon)
            found = search.edge(graph.initial, edge[0], edge[1], (), x0, 0)
            return found, search.leaves

        results = parallel_map(_subtree, first_edges)
        report.n_paths = sum(leaves for _, leaves in results)
        for found, _ in results:
            if found is not None:
                report.counterexample = _counterexample(found[0], found[1], x0)
                break
    else:
        paths = sample_paths(graph, horizon, path_budget, seed)
        hits = parallel_map(lambda p: _simulate_path(system, controller, strategy, sets.Xu, p, x0), paths)
        report.n_paths = len(paths)
        for path, hit in zip(paths, hits):
            if hit is not None:
                report.counterexample = _counterexample(path.labels, hit, x0)
                break

    if report.found:
        ce = report.counterexample
        logger.info("counterexample: x0 = %s, word %s enters Xu at t = %d", ce.x0.tolist(), ce.word, ce.t_hit)
    else:
        logger.info("no counterexample over %d paths and %d initial states (horizon %d)", report.n_paths, len(x0), horizon)
    return report


def monitor(traj: Trajectory, cert: AnyCertificate, graph: WhGraph, tol: float = DEFAULT_TOL) -> MonitorLedger:
    """
    Checks the barrier bounds along a trajectory: Psi_v0 <= 0 at the start and, after each success instant
    on edge (v, l, w), Psi_w <= -(l - m) eps_w at the m-th following instant.
    One-step hold certificates are evaluated on the state paired with the actuator memory.
    Args:
        traj: trajectory to check
        cert: certificate
        graph: WH graph the trajectory is aligned to
        tol: allowed excess over each bound

    Returns:
        MonitorLedger: one entry per checked instant
    """
    if not cert.graph.same_structure(graph):
        raise CertificateMismatchError(f"certificate graph {cert.graph!r} differs from {graph!r}")
    if traj.n_states != cert.n_states:
        raise CertificateMismatchError(f"trajectory has {traj.n_states} states, certificate has {cert.n_states}")
    try:
        path = graph.path_of(split_blocks(traj.word))
    except LossWordError as err:
        raise MonitorError(str(err)) from None

    z = traj.states
    if cert.variant.augmented:
        z = np.concatenate([traj.states, traj.held_inputs()], axis=1)

    def _psi(node: str, t: int) -> float:
        return float(cert.evaluate(node, z[t]))

    ledger = MonitorLedger(tol)
    ledger.entries.append(LedgerEntry(0, path.nodes[0], "start", 0, _psi(path.nodes[0], 0), 0.0))
    t = 0
    for v, label, w in path.edges():
        for m in range(label + 1):
            instant = t + m + 1
            if instant > traj.horizon:
                break
            bound = -(label - m) * cert.eps[w]
            ledger.entries.append(LedgerEntry(instant, w, f"{v}-{label}->{w}", m, _psi(w, instant), bound))
        t += label + 1
    if not ledger.passed:
        bad = ledger.first_violation
        logger.info("monitor: Psi_%s = %.3e above bound %.3e at t = %d", bad.node, bad.psi, bad.bound, bad.t)
    return ledger
