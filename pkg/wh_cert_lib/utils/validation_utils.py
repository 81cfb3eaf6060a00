# Copyright (c) 2024 The wh-cert-lib authors
# SPDX-License-Identifier: AGPL-3.0

"""Encoder-independent validation of certificates by dense sampling of the barrier conditions."""

import logging
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from ..classes.certificate import AnyCertificate, VariantKind
from ..classes.problem import ProblemSets
from ..classes.system import Controller, System, controller_from_dict, state_variables
from ..classes.validation_report import ConditionCheck, ValidationReport
from ..classes.wh_graph import WhGraph
from ..exceptions import CertificateMismatchError, DimensionError
from .dynamics_utils import iterate_open, step_closed, step_open_zero
from .set_utils import boundary_points, sample_set

logger = logging.getLogger(__name__)

DEFAULT_SAMPLES = 100000
DEFAULT_TOL = 1e-6

Map = Callable[[np.ndarray], np.ndarray]


def _violation(values: np.ndarray) -> float:
    return max(0.0, float(np.max(values))) if values.size else 0.0


def _check(name: str, kind: str, values: np.ndarray, tol: float) -> ConditionCheck:
    worst = _violation(values)
    return ConditionCheck(name, kind, int(values.size), worst, satisfied=worst <= tol)


def _implication(
    name: str, antecedent: np.ndarray, consequent: np.ndarray, bound: float, tol: float
) -> ConditionCheck:
    """antecedent <= 0 implies consequent <= bound"""
    mask = antecedent <= 0
    return _check(name, "transition", consequent[mask] - bound, tol)


def _augment(x: np.ndarray, u: Optional[np.ndarray]) -> np.ndarray:
    if u is None:
        return x
    return np.concatenate([x, u], axis=-1)


def _paired_inputs(sets: ProblemSets, count: int, seed: int) -> np.ndarray:
    if sets.U is None:
        raise CertificateMismatchError("certificates on the augmented state need an input set U")
    u = sample_set(sets.U, count, seed + 1)
    if len(u) < count:
        raise CertificateMismatchError(f"could only sample {len(u)} of {count} inputs from U")
    return u


def _one_step_maps(system: System, controller: Controller, augmented: bool) -> Tuple[Map, Map]:
    n = system.n_states
    if not augmented:
        return (lambda x: step_closed(system, controller, x)), (lambda x: step_open_zero(system, x))

    def closed(z: np.ndarray) -> np.ndarray:
        x = z[..., :n]
        return np.concatenate([step_closed(system, controller, x), controller(x)], axis=-1)

    def opened(z: np.ndarray) -> np.ndarray:
        x, u = z[..., :n], z[..., n:]
        return np.concatenate([system.step(x, u), u], axis=-1)

    return closed, opened


def validate_cert(
    cert: AnyCertificate,
    system: System,
    controller: Optional[Controller],
    graph: WhGraph,
    sets: ProblemSets,
    n_samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
    tol: float = DEFAULT_TOL,
) -> ValidationReport:
    """
    Evaluates every condition of the certificate's variant on samples of X0, Xu and X (times U on the
    augmented state), using only the step maps of the system.
    Args:
        cert: quadratic or polynomial certificate
        system: plant
        controller: state feedback, read from the certificate when None
        graph: graph the certificate must be defined on
        sets: problem sets
        n_samples: samples per set
        seed: sampling seed
        tol: allowed violation of the non-strict conditions

    Returns:
        ValidationReport: one check per condition
    """
    if not cert.graph.same_structure(graph):
        raise CertificateMismatchError(f"certificate graph {cert.graph!r} differs from {graph!r}")
    if cert.n_states != system.n_states:
        raise CertificateMismatchError(f"certificate has {cert.n_states} states, system has {system.n_states}")
    if controller is None:
        controller = controller_from_dict(cert.controller, system.n_states, system.n_inputs)
        if controller is None:
            raise CertificateMismatchError("no controller given and none stored in the certificate")

    variant = cert.variant
    augmented = variant.augmented
    report = ValidationReport(str(variant), n_samples, tol)
    psi: Callable[[str, np.ndarray], np.ndarray] = lambda v, z: np.atleast_1d(cert.evaluate(v, z))

    x0 = sample_set(sets.X0, n_samples, seed)
    if len(x0):
        x0 = np.concatenate([boundary_points(sets.X0, seed=seed), x0])
    if augmented:
        z0 = np.concatenate([x0, controller(x0)], axis=-1) if len(x0) else np.zeros((0, cert.dim))
    else:
        z0 = x0

    xu = sample_set(sets.Xu, n_samples, seed, bounds=sets.X.bounds)
    xu = xu[np.atleast_1d(sets.X.contains(xu))] if len(xu) else xu
    zu = _augment(xu, _paired_inputs(sets, len(xu), seed) if augmented else None)

    x = sample_set(sets.X, n_samples, seed)
    z = _augment(x, _paired_inputs(sets, len(x), seed) if augmented else None)

    for v in graph.nodes:
        report.checks.append(_check(f"init[{v}]", "initial", psi(v, z0) if len(z0) else np.zeros(0), tol))
        values = psi(v, zu) if len(zu) else np.zeros(0)
        smallest = float(np.min(values)) if values.size else float("inf")
        report.checks.append(ConditionCheck(f"unsafe[{v}]", "unsafe", int(values.size), smallest, True, smallest > 0))

    current = {v: psi(v, z) for v in graph.nodes}
    strategy = variant.strategy
    if variant.kind in (VariantKind.GBF, VariantKind.DGBF):
        for v, label, w in graph.edges:
            for m in range(label + 1):
                after = psi(w, iterate_open(system, controller, strategy, z, m))
                name = f"edge[{v},{label},{w}].m{m}"
                bound = -(label - m) * cert.eps[w]
                if variant.kind == VariantKind.GBF:
                    report.checks.append(_implication(name, current[v], after, bound, tol))
                else:
                    report.checks.append(_check(name, "transition", after - current[v] - bound, tol))
    else:
        closed, opened = _one_step_maps(system, controller, augmented)
        z_closed, z_open = closed(z), opened(z)
        longest: Dict[str, int] = {}
        for v, label, w in graph.edges:
            longest[w] = max(longest.get(w, 0), label)
            after = psi(w, z_closed)
            name = f"switch[{v},{label},{w}]"
            bound = -label * cert.eps[w]
            if variant.kind == VariantKind.ONE_GBF:
                report.checks.append(_implication(name, current[v], after, bound, tol))
            else:
                report.checks.append(_check(name, "switching", after - current[v] - bound, tol))
        for w in graph.nodes:
            if longest.get(w, 0) < 1:
                continue
            after = psi(w, z_open)
            if variant.kind == VariantKind.ONE_GBF:
                for k in range(1, longest[w] + 1):
                    eps = cert.eps[w]
                    check = _implication(f"increase[{w}].m{k}", current[w] + k * eps, after, -(k - 1) * eps, tol)
                    check.kind = "increase"
                    report.checks.append(check)
            else:
                report.checks.append(_check(f"increase[{w}]", "increase", after - current[w] - cert.eps[w], tol))

    logger.info("validation of %s: %s", variant, report.summary())
    return report


def containment(
    inner: AnyCertificate, outer: AnyCertificate, points: np.ndarray, nodes: Optional[Sequence[str]] = None
) -> Dict[str, int]:
    """
    Counts, per node, the points inside the zero sublevel set of `inner` but outside that of `outer`.
    Returns:
        Dict[str, int]: 0 for every node whose sublevel set is contained at the sampled points
    """
    nodes = list(nodes) if nodes is not None else list(inner.graph.nodes)
    counts = {}
    for v in nodes:
        a = np.atleast_1d(inner.evaluate(v, points))
        b = np.atleast_1d(outer.evaluate(v, points))
        counts[v] = int(np.count_nonzero((a <= 0) & (b > 0)))
    return counts


def levelset_sample(cert: AnyCertificate, node: str, grid: List[Tuple[float, float, int]]) -> pd.DataFrame:
    """
    Barrier values of one node on a rectangular grid.
    Args:
        cert: certificate
        node: graph node
        grid: (lo, hi, points) per coordinate

    Returns:
        pd.DataFrame: one row per grid point with the coordinates, psi and its sign
    """
    if len(grid) != cert.dim:
        raise DimensionError(f"grid has {len(grid)} axes, the certificate lives in dimension {cert.dim}")
    if node not in cert.graph.nodes:
        raise CertificateMismatchError(f"unknown node {node}, expected one of {cert.graph.nodes}")
    axes = [np.linspace(lo, hi, int(count)) for lo, hi, count in grid]
    mesh = np.stack([a.ravel() for a in np.meshgrid(*axes, indexing="ij")], axis=-1)
    values = np.atleast_1d(cert.evaluate(node, mesh))
    names = state_variables(cert.n_states) + [f"u{i + 1}" for i in range(cert.dim - cert.n_states)]
    frame = pd.DataFrame(mesh, columns=names)
    frame["psi"] = values
    frame["sign"] = np.sign(values).astype(int)
    return frame
