# Copyright (c) 2024 The wh-cert-lib authors
# SPDX-License-Identifier: AGPL-3.0

"""S-procedure encodings of quadratic graph-based barrier functions for linear systems with quadratic sets."""

import itertools
import logging
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.linalg import matrix_power
from scipy.linalg import block_diag, inv

from ..classes.certificate import CertReport, CertStatus, GbfCertificate, GbfVariant, VariantKind
from ..classes.conic_problem import ConicProblem, MatrixTerm, PsdConstraint, ScalarTerm, SolveOutcome, SolveStatus
from ..classes.problem import ProblemSets, Schedule
from ..classes.system import Controller, LinearController, LinearSystem, Strategy, System
from ..classes.wh_graph import WhGraph
from ..exceptions import DimensionError, EncodingError
from . import conic_utils
from .problem_validation_utils import is_bounded
from .set_utils import AnySet
from .validation_utils import validate_cert

logger = logging.getLogger(__name__)

SLACK = "t"
SLACK_FLOOR = -1.0
STAGNATION_TOL = 1e-6
# synthesis: slack below which a gain is handed to the full verification
CANDIDATE_SLACK = 1e-3
FALLBACK_TRIES = 2
P1_RELAX = 0.1


def p_name(node: str) -> str:
    return f"P[{node}]"


def eps_name(node: str) -> str:
    return f"eps[{node}]"


def gamma_name(key: str) -> str:
    return f"gamma[{key}]"


def edge_name(v: str, label: int, w: str, m: int) -> str:
    return f"edge[{v},{label},{w}].m{m}"


def corner(dim: int) -> np.ndarray:
    """E = e e^T with e the homogenizing coordinate, so [z; 1]^T E [z; 1] = 1."""
    E = np.zeros((dim, dim))
    E[-1, -1] = 1.0
    return E


def homogenize(M: np.ndarray) -> np.ndarray:
    return block_diag(M, 1.0)


@dataclass
class LmiCondition:
    """
    Matrix inequality over the homogenized vector:
        sum c F^T P_v F + sum k eps_w E + gamma (P_a + k_a eps_a E) - sum lambda_j S_j + C >= margin I
    The gamma part only exists for implication conditions (antecedent a with eps coefficient k_a).
    """

    name: str
    kind: str
    dim: int
    barrier: List[Tuple[str, np.ndarray, float]] = field(default_factory=list)
    eps: List[Tuple[str, float]] = field(default_factory=list)
    forms: List[np.ndarray] = field(default_factory=list)
    constant: Optional[np.ndarray] = None
    margin: float = 0.0
    antecedent: Optional[Tuple[str, float]] = None
    slack: bool = True

    def multiplier(self, j: int) -> str:
        return f"{self.name}.{j}"

    def fixed_part(self, P: Dict[str, np.ndarray], eps: Dict[str, float]) -> np.ndarray:
        """Value of every barrier, margin and constant term for fixed P and eps."""
        value = np.zeros((self.dim, self.dim)) if self.constant is None else self.constant.copy()
        E = corner(self.dim)
        for node, F, coeff in self.barrier:
            value = value + coeff * F.T @ P[node] @ F
        for node, coeff in self.eps:
            value = value + coeff * eps[node] * E
        return (value + value.T) / 2


def set_forms(s: AnySet, n: int, where: str) -> List[np.ndarray]:
    """Homogenized matrices S_j with s = {x : [x; 1]^T S_j [x; 1] >= 0 for all j}."""
    forms = [s.S] if hasattr(s, "S") else [q.S for q in s.quadratic_forms()]
    for S in forms:
        if S.shape != (n + 1, n + 1):
            raise DimensionError(f"{where} lives in dimension {S.shape[0] - 1}, expected {n}")
    return forms


def plant_matrices(system: System) -> Tuple[np.ndarray, np.ndarray]:
    if not isinstance(system, LinearSystem):
        raise EncodingError("the LMI encoder needs a linear system, use the SOS encoder for polynomial dynamics")
    return system.A, system.B


def controller_gain(controller: Optional[Controller], system: System) -> np.ndarray:
    if controller is None:
        raise EncodingError("verification needs a controller")
    if not isinstance(controller, LinearController):
        raise EncodingError("the LMI encoder needs a linear state feedback u = Kx")
    controller.check_against(system)
    return controller.K


def gain_map(A: np.ndarray, B: np.ndarray, strategy: Strategy, m: int) -> np.ndarray:
    """G with f_o^m(f_c(x)) = (A^{m+1} + G K) x."""
    G = matrix_power(A, m)
    if strategy == Strategy.HOLD:
        G = G + sum((matrix_power(A, j) for j in range(m)), np.zeros_like(A))
    return G @ B


def transition_matrix(A: np.ndarray, B: np.ndarray, K: np.ndarray, strategy: Strategy, m: int) -> np.ndarray:
    return matrix_power(A, m + 1) + gain_map(A, B, strategy, m) @ K


class LmiEncoding:
    """
    Conditions of one variant for a fixed controller, plus the conic problems built from them:
    barrier mode (P and eps variable, gamma fixed) and multiplier mode (P and eps fixed, gamma variable).
    """

    def __init__(
        self,
        variant: GbfVariant,
        graph: WhGraph,
        conditions: List[LmiCondition],
        n_states: int,
        n_inputs: int,
        schedule: Schedule,
    ):
        self.variant = variant
        self.graph = graph
        self.conditions = conditions
        self.n_states = n_states
        self.n_inputs = n_inputs
        self.schedule = schedule
        self.dim = n_states + (n_inputs if variant.augmented else 0) + 1

    @property
    def eps_floor(self) -> float:
        return self.schedule.eps_min_decrease if self.variant.is_decrease else self.schedule.eps_min

    @property
    def gamma_keys(self) -> List[str]:
        return [c.name for c in self.conditions if c.antecedent is not None]

    def shared_gammas(self, value: float) -> Dict[str, float]:
        return {key: float(value) for key in self.gamma_keys}

    def _declare_barrier(self, problem: ConicProblem):
        for v in self.graph.nodes:
            problem.add_matrix(p_name(v), self.dim)
            problem.add_scalar(eps_name(v), lower=self.eps_floor, upper=self.schedule.rho)

    def problem(
        self,
        gammas: Optional[Dict[str, float]] = None,
        slack: bool = False,
        p1_min: Optional[float] = None,
        kinds: Optional[Sequence[str]] = None,
        name: Optional[str] = None,
    ) -> ConicProblem:
        """
        Barrier-mode problem.
        Args:
            gammas: value of the antecedent weight per implication condition
            slack: relax every condition by t I and minimize t
            p1_min: also require the state block of every P_v to be >= p1_min I
            kinds: restrict to conditions of these kinds
            name: problem name

        Returns:
            ConicProblem: problem over P[v], eps[v] and the S-procedure multipliers
        """
        gammas = gammas or {}
        problem = ConicProblem(name or f"{self.variant.kind.value}-barrier")
        self._declare_barrier(problem)
        if slack:
            problem.add_scalar(SLACK, lower=SLACK_FLOOR)
            problem.set_objective(SLACK, 1.0)
        for c in self.conditions:
            if kinds is not None and c.kind not in kinds:
                continue
            E = corner(c.dim)
            terms = [MatrixTerm(p_name(v), coeff * F.T, F) for v, F, coeff in c.barrier]
            terms += [ScalarTerm(eps_name(w), k * E) for w, k in c.eps]
            if c.antecedent is not None:
                if c.name not in gammas:
                    raise EncodingError(f"no multiplier value given for the implication condition {c.name}")
                node, k = c.antecedent
                g = float(gammas[c.name])
                terms.append(MatrixTerm(p_name(node), g * np.eye(c.dim), np.eye(c.dim)))
                if k:
                    terms.append(ScalarTerm(eps_name(node), g * k * E))
            for j, S in enumerate(c.forms):
                problem.add_scalar(c.multiplier(j), lower=0.0)
                terms.append(ScalarTerm(c.multiplier(j), -S))
            if slack and c.slack:
                terms.append(ScalarTerm(SLACK, np.eye(c.dim)))
            problem.add_constraint(PsdConstraint(c.name, c.dim, terms, c.constant, margin=c.margin))
        if p1_min is not None:
            n = self.n_states
            select = np.hstack([np.eye(n), np.zeros((n, self.dim - n))])
            for v in self.graph.nodes:
                problem.add_constraint(
                    PsdConstraint(f"p1[{v}]", n, [MatrixTerm(p_name(v), select, select.T)], margin=p1_min)
                )
        problem.metadata = {
            "variant": self.variant.to_dict(),
            "mode": "barrier",
            "bilinear_group": self.gamma_keys,
            "gamma": {k: float(g) for k, g in gammas.items()},
        }
        return problem

    def multiplier_problem(self, P: Dict[str, np.ndarray], eps: Dict[str, float], name: Optional[str] = None):
        """Multiplier-mode problem: P and eps fixed, one gamma per implication condition, slack minimized."""
        problem = ConicProblem(name or f"{self.variant.kind.value}-multiplier")
        problem.add_scalar(SLACK, lower=SLACK_FLOOR)
        problem.set_objective(SLACK, 1.0)
        for c in self.conditions:
            terms = []
            if c.antecedent is not None:
                node, k = c.antecedent
                problem.add_scalar(gamma_name(c.name), lower=0.0)
                terms.append(ScalarTerm(gamma_name(c.name), P[node] + k * eps[node] * corner(c.dim)))
            for j, S in enumerate(c.forms):
                problem.add_scalar(c.multiplier(j), lower=0.0)
                terms.append(ScalarTerm(c.multiplier(j), -S))
            if not terms:
                continue
            if c.slack:
                terms.append(ScalarTerm(SLACK, np.eye(c.dim)))
            problem.add_constraint(PsdConstraint(c.name, c.dim, terms, c.fixed_part(P, eps), margin=c.margin))
        problem.metadata = {"variant": self.variant.to_dict(), "mode": "multiplier"}
        return problem

    def barrier_values(self, assignment: Dict[str, np.ndarray]) -> Tuple[Dict[str, np.ndarray], Dict[str, float]]:
        P = {v: np.asarray(assignment[p_name(v)]) for v in self.graph.nodes}
        eps = {v: float(assignment[eps_name(v)]) for v in self.graph.nodes}
        return P, eps

    def check(self, gammas: Dict[str, float], assignment: Dict[str, np.ndarray]) -> Tuple[Dict[str, float], float]:
        """Residuals and worst violation of the unrelaxed problem under an assignment."""
        problem = self.problem(gammas)
        return conic_utils.residuals(problem, assignment), conic_utils.max_violation(problem, assignment)

    def certificate(
        self,
        assignment: Dict[str, np.ndarray],
        gammas: Dict[str, float],
        controller: Optional[Controller],
        residuals: Dict[str, float],
    ) -> GbfCertificate:
        P, eps = self.barrier_values(assignment)
        multipliers = {
            name: float(value)
            for name, value in assignment.items()
            if name != SLACK and not name.startswith(("P[", "eps[", "gamma["))
        }
        multipliers.update({gamma_name(k): float(g) for k, g in gammas.items()})
        return GbfCertificate(
            self.variant,
            self.graph,
            P,
            eps,
            self.n_states,
            self.n_inputs,
            multipliers,
            controller.to_dict() if controller is not None else None,
            residuals,
        )


def _initial_and_unsafe(
    variant: GbfVariant, K: np.ndarray, graph: WhGraph, sets: ProblemSets, schedule: Schedule, n: int, m: int
) -> Tuple[List[LmiCondition], List[np.ndarray]]:
    """Initial, unsafe and bound conditions, plus the forms describing the transition domain."""
    aug = variant.augmented
    dim = n + (m if aug else 0) + 1
    X = set_forms(sets.X, n, "X")
    X0 = set_forms(sets.X0, n, "X0")
    Xu = set_forms(sets.Xu, n, "Xu")
    if aug:
        if sets.U is None or not is_bounded(sets.U):
            raise EncodingError(f"{variant} needs a bounded input set U")
        U = set_forms(sets.U, m, "U")
        lift_x = np.zeros((n + 1, dim))
        lift_x[:n, :n] = np.eye(n)
        lift_x[n, -1] = 1.0
        lift_u = np.zeros((m + 1, dim))
        lift_u[:m, n : n + m] = np.eye(m)
        lift_u[m, -1] = 1.0
        domain = [lift_x.T @ S @ lift_x for S in X] + [lift_u.T @ S @ lift_u for S in U]
        unsafe = [lift_x.T @ S @ lift_x for S in Xu] + domain
        # initial states sit on the manifold u = Kx
        manifold = np.zeros((dim, n + 1))
        manifold[:n, :n] = np.eye(n)
        manifold[n : n + m, :n] = K
        manifold[-1, -1] = 1.0
        initial_map, initial_dim = manifold, n + 1
    else:
        domain = list(X)
        unsafe = Xu + domain
        initial_map, initial_dim = np.eye(dim), dim

    rho = schedule.rho
    conditions = []
    for v in graph.nodes:
        conditions.append(
            LmiCondition(
                f"init[{v}]", "initial", initial_dim, [(v, initial_map, -1.0)], forms=X0 + X, margin=schedule.lmi_margin
            )
        )
        conditions.append(LmiCondition(f"unsafe[{v}]", "unsafe", dim, [(v, np.eye(dim), 1.0)], forms=unsafe, margin=schedule.eta))
        conditions.append(
            LmiCondition(f"bound.lo[{v}]", "bounds", dim, [(v, np.eye(dim), 1.0)], constant=rho * np.eye(dim), slack=False)
        )
        conditions.append(
            LmiCondition(f"bound.hi[{v}]", "bounds", dim, [(v, np.eye(dim), -1.0)], constant=rho * np.eye(dim), slack=False)
        )
    return conditions, domain


def lmi_conditions(
    variant: GbfVariant,
    A: np.ndarray,
    B: np.ndarray,
    K: np.ndarray,
    graph: WhGraph,
    sets: ProblemSets,
    schedule: Schedule,
) -> List[LmiCondition]:
    """
    All matrix inequalities of a variant for the gain K.
    Args:
        variant: barrier-function variant and strategy
        A: state matrix
        B: input matrix
        K: feedback gain, u = Kx
        graph: WH graph
        sets: state, initial, unsafe and input sets as quadratic forms
        schedule: margins and bounds

    Returns:
        List[LmiCondition]: initial, unsafe, bound and transition conditions
    """
    n, m = A.shape[0], B.shape[1]
    if K.shape != (m, n):
        raise DimensionError(f"gain must be {m} x {n}, got {K.shape}")
    strategy = variant.strategy
    conditions, domain = _initial_and_unsafe(variant, K, graph, sets, schedule, n, m)
    dim = n + (m if variant.augmented else 0) + 1
    implication_margin = schedule.lmi_margin

    if variant.kind in (VariantKind.GBF, VariantKind.DGBF):
        for v, label, w in graph.edges:
            for k in range(label + 1):
                F = homogenize(transition_matrix(A, B, K, strategy, k))
                c = LmiCondition(edge_name(v, label, w, k), "transition", dim, [(w, F, -1.0)], forms=list(domain))
                if variant.kind == VariantKind.GBF:
                    c.eps = [(w, -(label - k))]
                    c.antecedent = (v, 0.0)
                    c.margin = implication_margin
                else:
                    c.barrier.append((v, np.eye(dim), 1.0))
                    c.eps = [(w, -(label - k))]
                conditions.append(c)
        return conditions

    if variant.augmented:
        closed = np.zeros((dim, dim))
        closed[:n, :n] = A + B @ K
        closed[n : n + m, :n] = K
        closed[-1, -1] = 1.0
        opened = block_diag(np.block([[A, B], [np.zeros((m, n)), np.eye(m)]]), 1.0)
    else:
        closed = homogenize(A + B @ K)
        opened = homogenize(A)

    longest: Dict[str, int] = {}
    for v, label, w in graph.edges:
        longest[w] = max(longest.get(w, 0), label)
        c = LmiCondition(f"switch[{v},{label},{w}]", "switching", dim, [(w, closed, -1.0)], forms=list(domain))
        if variant.kind == VariantKind.ONE_GBF:
            c.eps = [(w, -float(label))]
            c.antecedent = (v, 0.0)
            c.margin = implication_margin
        else:
            c.barrier.append((v, np.eye(dim), 1.0))
            c.eps = [(w, -float(label))]
        conditions.append(c)

    for w in graph.nodes:
        if longest.get(w, 0) < 1:
            continue
        if variant.kind == VariantKind.ONE_GBF:
            for k in range(1, longest[w] + 1):
                c = LmiCondition(
                    f"increase[{w}].m{k}",
                    "increase",
                    dim,
                    [(w, opened, -1.0)],
                    eps=[(w, -(k - 1.0))],
                    forms=list(domain),
                    margin=implication_margin,
                    antecedent=(w, float(k)),
                )
                conditions.append(c)
        else:
            conditions.append(
                LmiCondition(
                    f"increase[{w}]",
                    "increase",
                    dim,
                    [(w, np.eye(dim), 1.0), (w, opened, -1.0)],
                    eps=[(w, 1.0)],
                    forms=list(domain),
                )
            )
    return conditions


def build_encoding(
    variant: GbfVariant,
    system: System,
    controller: Optional[Controller],
    graph: WhGraph,
    sets: ProblemSets,
    schedule: Optional[Schedule] = None,
) -> LmiEncoding:
    schedule = schedule or Schedule()
    A, B = plant_matrices(system)
    K = controller_gain(controller, system)
    conditions = lmi_conditions(variant, A, B, K, graph, sets, schedule)
    return LmiEncoding(variant, graph, conditions, system.n_states, system.n_inputs, schedule)


def encode(
    variant: GbfVariant,
    system: System,
    controller: Optional[Controller],
    graph: WhGraph,
    sets: ProblemSets,
    schedule: Optional[Schedule] = None,
    gamma: float = 1.0,
) -> ConicProblem:
    """
    Conic problem of a variant. Decrease variants give an LMI; implication variants a BMI whose
    antecedent weights (listed in metadata["bilinear_group"]) are fixed to `gamma`.
    """
    encoding = build_encoding(variant, system, controller, graph, sets, schedule)
    gammas = encoding.shared_gammas(gamma)
    return encoding.problem(gammas, name=f"{variant.kind.value}-{variant.strategy.value}")


@dataclass
class _Attempt:
    certificate: Optional[GbfCertificate] = None
    residuals: Dict[str, float] = field(default_factory=dict)
    solves: int = 0
    best_slack: float = np.inf
    diagnostics: List[str] = field(default_factory=list)
    infeasible: bool = False


def _accept(
    encoding: LmiEncoding, gammas: Dict[str, float], assignment: Dict[str, np.ndarray], attempt: _Attempt, controller
) -> bool:
    """Turns a relaxed solution with t <= slack_tol into a certificate, re-solving without slack when needed."""
    res, violation = encoding.check(gammas, assignment)
    if violation > encoding.schedule.feas_tol:
        outcome = conic_utils.solve(encoding.problem(gammas), encoding.schedule.feas_tol, encoding.schedule.solver)
        attempt.solves += 1
        if not outcome.feasible:
            attempt.diagnostics.append(f"re-solve without slack: {outcome.status.value} {outcome.diagnostic}".strip())
            return False
        assignment, res = outcome.assignment, outcome.residuals
    attempt.residuals = res
    attempt.certificate = encoding.certificate(assignment, gammas, controller, res)
    return True


def _solve_decrease(encoding: LmiEncoding, controller: Controller) -> _Attempt:
    attempt = _Attempt()
    outcome = conic_utils.solve(encoding.problem(), encoding.schedule.feas_tol, encoding.schedule.solver)
    attempt.solves = 1
    logger.info("%s: %s (%s)", encoding.variant, outcome.status.value, outcome.solver)
    if outcome.feasible:
        attempt.residuals = outcome.residuals
        attempt.certificate = encoding.certificate(outcome.assignment, {}, controller, outcome.residuals)
    elif outcome.status == SolveStatus.INFEASIBLE:
        attempt.infeasible = True
        attempt.diagnostics.append(f"{outcome.solver} certified the encoding infeasible")
    else:
        attempt.diagnostics.append(outcome.diagnostic)
    return attempt


def _best(outcomes: Sequence[SolveOutcome]) -> Optional[int]:
    feasible = [i for i, o in enumerate(outcomes) if o.feasible and o.objective is not None]
    return min(feasible, key=lambda i: outcomes[i].objective) if feasible else None


def _solve_bilinear(
    encoding: LmiEncoding, controller: Controller, hint: Optional[Dict[str, float]] = None
) -> _Attempt:
    schedule = encoding.schedule
    attempt = _Attempt()

    if hint:
        outcome = conic_utils.solve(encoding.problem(hint, slack=True), schedule.feas_tol, schedule.solver)
        attempt.solves += 1
        if outcome.feasible and outcome.objective <= schedule.slack_tol:
            if _accept(encoding, hint, outcome.assignment, attempt, controller):
                return attempt

    grid = schedule.gamma_values()
    problems = [encoding.problem(encoding.shared_gammas(g), slack=True, name=f"sweep[{g:.4g}]") for g in grid]
    outcomes = conic_utils.solve_all(problems, schedule.feas_tol, schedule.solver)
    attempt.solves += len(problems)
    best = _best(outcomes)
    if best is None:
        attempt.diagnostics.append("no gamma of the sweep gave a solver answer")
    else:
        gammas = encoding.shared_gammas(grid[best])
        slack = outcomes[best].objective
        attempt.best_slack = slack
        logger.info("%s: best sweep gamma %.4g with slack %.3e", encoding.variant, grid[best], slack)
        if slack <= schedule.slack_tol and _accept(encoding, gammas, outcomes[best].assignment, attempt, controller):
            return attempt
        P, eps = encoding.barrier_values(outcomes[best].assignment)
        for round_ in range(schedule.alternation_rounds):
            outcome = conic_utils.solve(encoding.multiplier_problem(P, eps), schedule.feas_tol, schedule.solver)
            attempt.solves += 1
            if not outcome.feasible:
                attempt.diagnostics.append(f"multiplier step {round_}: {outcome.status.value}")
                break
            gammas = {k: max(0.0, float(outcome.assignment[gamma_name(k)])) for k in encoding.gamma_keys}
            if outcome.objective <= schedule.slack_tol:
                merged = dict(outcome.assignment)
                merged.update({p_name(v): P[v] for v in P})
                merged.update({eps_name(v): eps[v] for v in eps})
                if _accept(encoding, gammas, merged, attempt, controller):
                    return attempt

            outcome = conic_utils.solve(encoding.problem(gammas, slack=True), schedule.feas_tol, schedule.solver)
            attempt.solves += 1
            if not outcome.feasible:
                attempt.diagnostics.append(f"barrier step {round_}: {outcome.status.value}")
                break
            slack = outcome.objective
            logger.info("%s: alternation round %d, slack %.3e", encoding.variant, round_ + 1, slack)
            if slack <= schedule.slack_tol and _accept(encoding, gammas, outcome.assignment, attempt, controller):
                return attempt
            improved = attempt.best_slack - slack > STAGNATION_TOL * max(1.0, abs(attempt.best_slack))
            attempt.best_slack = min(attempt.best_slack, slack)
            P, eps = encoding.barrier_values(outcome.assignment)
            if not improved:
                attempt.diagnostics.append(f"alternation stalled at slack {slack:.3e} after {round_ + 1} rounds")
                break
        else:
            attempt.diagnostics.append(f"alternation budget of {schedule.alternation_rounds} rounds exhausted")

    # gamma-free part: initial, unsafe and bound conditions
    outcome = conic_utils.solve(
        encoding.problem(kinds=("initial", "unsafe", "bounds")), schedule.feas_tol, schedule.solver
    )
    attempt.solves += 1
    if outcome.status == SolveStatus.INFEASIBLE:
        attempt.infeasible = True
        attempt.diagnostics.append("initial and unsafe conditions alone are infeasible")
    return attempt


def verify(
    variant: GbfVariant,
    system: System,
    controller: Optional[Controller],
    graph: WhGraph,
    sets: ProblemSets,
    schedule: Optional[Schedule] = None,
    gammas: Optional[Dict[str, float]] = None,
    validate: bool = True,
) -> CertReport:
    """
    Searches for a quadratic certificate of a variant.
    Args:
        variant: barrier-function variant and strategy
        system: linear plant
        controller: linear state feedback
        graph: WH graph
        sets: problem sets
        schedule: numerical schedule
        gammas: antecedent weights to try before the sweep (implication variants)
        validate: run the sampling validation hook on a candidate certificate

    Returns:
        CertReport: Certified only after the residual check and the validation hook pass
    """
    schedule = schedule or Schedule()
    start = time.perf_counter()
    encoding = build_encoding(variant, system, controller, graph, sets, schedule)
    if variant.is_decrease:
        attempt = _solve_decrease(encoding, controller)
    else:
        attempt = _solve_bilinear(encoding, controller, gammas)

    report = CertReport(
        CertStatus.UNKNOWN,
        variant,
        residuals=attempt.residuals,
        diagnostics=list(attempt.diagnostics),
        controller=controller.to_dict(),
        solves=attempt.solves,
    )
    if attempt.certificate is not None:
        if validate:
            validation = validate_cert(
                attempt.certificate,
                system,
                controller,
                graph,
                sets,
                n_samples=schedule.validation_samples,
                seed=schedule.seed,
                tol=schedule.validation_tol,
            )
            report.validation = validation.to_dict()
            if not validation.passed:
                report.diagnostics.append(f"sampling validation failed: {validation.summary()}")
                report.wall_time = time.perf_counter() - start
                return report
        report.status = CertStatus.CERTIFIED
        report.certificate = attempt.certificate
    elif attempt.infeasible:
        report.status = CertStatus.INFEASIBLE
    report.wall_time = time.perf_counter() - start
    logger.info("%s: %s after %d solves in %.2fs", variant, report.status.value, report.solves, report.wall_time)
    return report


def schur_problem(
    variant: GbfVariant,
    A: np.ndarray,
    B: np.ndarray,
    P: Dict[str, np.ndarray],
    graph: WhGraph,
    sets: ProblemSets,
    schedule: Schedule,
) -> ConicProblem:
    """
    Gain step of the synthesis: with every P_v fixed, each GBF transition condition
        gamma P_v - sum delta S - F_m(K)^T P_w F_m(K) - (l-m) eps_w E >= 0
    is written through the Schur complement of the state block p1 of P_w, which is affine in K.
    """
    n, m = A.shape[0], B.shape[1]
    d = n + 1
    problem = ConicProblem(f"{variant.kind.value}-gain")
    problem.add_matrix("K", (m, n), symmetric=False, lower=-schedule.k_bound, upper=schedule.k_bound)
    for v in graph.nodes:
        problem.add_scalar(eps_name(v), lower=schedule.eps_min, upper=schedule.rho)
    problem.add_scalar(SLACK, lower=SLACK_FLOOR)
    problem.set_objective(SLACK, 1.0)

    X = set_forms(sets.X, n, "X")
    E = corner(d)
    last = E[-1:, :]
    upper = np.vstack([np.eye(n), np.zeros((d, n))])
    lower = np.vstack([np.zeros((n, d)), np.eye(d)])
    select = np.hstack([np.eye(n), np.zeros((n, 1))])
    for v, label, w in graph.edges:
        Pw = P[w]
        p1, p2, p3 = Pw[:n, :n], Pw[:n, n:], Pw[n:, n:]
        p1_inv = inv(p1)
        p1_inv = (p1_inv + p1_inv.T) / 2
        for k in range(label + 1):
            name = edge_name(v, label, w, k)
            G = gain_map(A, B, variant.strategy, k)
            W0 = np.hstack([matrix_power(A, k + 1), np.zeros((n, 1))])
            inner = last.T @ p3 @ last + W0.T @ p2 @ last + last.T @ p2.T @ W0
            constant = upper @ p1_inv @ upper.T + upper @ W0 @ lower.T + lower @ W0.T @ upper.T - lower @ inner @ lower.T
            terms = [
                MatrixTerm("K", upper @ G, select @ lower.T),
                MatrixTerm("K", lower @ select.T, G.T @ upper.T, transpose=True),
                MatrixTerm("K", -lower @ select.T, G.T @ p2 @ last @ lower.T, transpose=True),
                MatrixTerm("K", -lower @ last.T @ p2.T @ G, select @ lower.T),
                ScalarTerm(eps_name(w), -(label - k) * lower @ E @ lower.T),
                ScalarTerm(SLACK, lower @ lower.T),
            ]
            problem.add_scalar(gamma_name(name), lower=0.0)
            terms.append(ScalarTerm(gamma_name(name), lower @ P[v] @ lower.T))
            for j, S in enumerate(X):
                problem.add_scalar(f"{name}.{j}", lower=0.0)
                terms.append(ScalarTerm(f"{name}.{j}", -lower @ S @ lower.T))
            problem.add_constraint(
                PsdConstraint(name, n + d, terms, (constant + constant.T) / 2, margin=schedule.lmi_margin)
            )
    problem.metadata = {"variant": variant.to_dict(), "mode": "gain"}
    return problem


def synthesize(
    variant: GbfVariant,
    system: System,
    graph: WhGraph,
    sets: ProblemSets,
    schedule: Optional[Schedule] = None,
    K_init: Optional[np.ndarray] = None,
) -> Tuple[LinearController, CertReport]:
    """
    Alternates between the barrier step (K and gamma fixed) and the gain step (P fixed) until
    some gain passes verification. An inconclusive step keeps the previous iterate; only a step the solver
    proves infeasible or the round budget ends the loop.
    Args:
        variant: GBF variant with its strategy
        system: linear plant
        graph: WH graph
        sets: problem sets
        schedule: numerical schedule
        K_init: starting gain, zero when omitted

    Returns:
        Tuple[LinearController, CertReport]: the final gain and its report (Unknown with the best iterate on failure)
    """
    schedule = schedule or Schedule()
    start = time.perf_counter()
    if variant.kind != VariantKind.GBF:
        raise EncodingError(f"controller synthesis is implemented for the GBF variant only, got {variant}")
    A, B = plant_matrices(system)
    n, m = system.n_states, system.n_inputs
    K = np.zeros((m, n)) if K_init is None else np.atleast_2d(np.asarray(K_init, dtype=float))
    if K.shape != (m, n):
        raise DimensionError(f"initial gain must be {m} x {n}, got {K.shape}")

    solves = 0
    tried = set()

    def _verify(gain: np.ndarray, gammas: Optional[Dict[str, float]] = None) -> CertReport:
        nonlocal solves
        tried.add(tuple(np.round(gain, 12).ravel()))
        rep = verify(variant, system, LinearController(gain), graph, sets, schedule, gammas)
        solves += rep.solves
        return rep

    def _finish(rep: CertReport, gain: np.ndarray) -> Tuple[LinearController, CertReport]:
        rep.solves = solves
        rep.wall_time = time.perf_counter() - start
        rep.controller = LinearController(gain).to_dict()
        return LinearController(gain), rep

    report = _verify(K)
    if report.certified:
        logger.info("initial gain %s already certified", K.tolist())
        return _finish(report, K)

    diagnostics = [f"initial gain: {report.status.value}"]
    encoding = build_encoding(variant, system, LinearController(K), graph, sets, schedule)
    grid = schedule.gamma_values()
    problems = [
        encoding.problem(encoding.shared_gammas(g), slack=True, p1_min=schedule.p1_min, name=f"synth-sweep[{g:.4g}]")
        for g in grid
    ]
    outcomes = conic_utils.solve_all(problems, schedule.feas_tol, schedule.solver)
    solves += len(problems)
    answered = [i for i, o in enumerate(outcomes) if o.feasible and o.objective is not None]
    ranked = sorted(answered, key=lambda i: outcomes[i].objective)
    if not ranked:
        diagnostics.append("barrier sweep with p1 > 0 gave no solver answer")
        return _finish(CertReport(CertStatus.UNKNOWN, variant, diagnostics=diagnostics), K)

    # sweep values still unused, in order of increasing slack
    fallback = iter([grid[i] for i in ranked[1:]])

    def _barrier_step(
        gain: np.ndarray, gammas: Dict[str, float], round_: int, retry: bool
    ) -> Tuple[Optional[SolveOutcome], Optional[Dict[str, float]]]:
        nonlocal solves
        enc = build_encoding(variant, system, LinearController(gain), graph, sets, schedule)
        relaxed = schedule.p1_min * P1_RELAX
        outcome = None
        trials = itertools.chain(
            [] if retry else [(gammas, schedule.p1_min)],
            ((enc.shared_gammas(g), relaxed) for g in itertools.islice(fallback, FALLBACK_TRIES)),
        )
        for trial_gammas, p1_min in trials:
            outcome = conic_utils.solve(
                enc.problem(trial_gammas, slack=True, p1_min=p1_min), schedule.feas_tol, schedule.solver
            )
            solves += 1
            if outcome.feasible:
                return outcome, trial_gammas
            diagnostics.append(f"barrier step {round_}: {outcome.status.value} {outcome.diagnostic}".strip())
            if outcome.status == SolveStatus.INFEASIBLE:
                break
        return outcome, None

    def _candidate(gain: np.ndarray, gammas: Dict[str, float], slack: float) -> Optional[CertReport]:
        if slack > CANDIDATE_SLACK or tuple(np.round(gain, 12).ravel()) in tried:
            return None
        rep = _verify(gain, gammas)
        return rep if rep.certified else None

    gammas = encoding.shared_gammas(grid[ranked[0]])
    P, _ = encoding.barrier_values(outcomes[ranked[0]].assignment)
    best_gain, best_slack = K, outcomes[ranked[0]].objective
    for round_ in range(schedule.synthesis_rounds):
        gain_problem = schur_problem(variant, A, B, P, graph, sets, schedule)
        outcome = conic_utils.solve(gain_problem, schedule.feas_tol, schedule.solver)
        solves += 1
        gain_moved = outcome.feasible
        if outcome.status == SolveStatus.INFEASIBLE:
            diagnostics.append(f"gain step {round_}: infeasible {outcome.diagnostic}".strip())
            break
        if outcome.feasible:
            K = np.atleast_2d(outcome.assignment["K"])
            gammas = {key: max(0.0, float(outcome.assignment[gamma_name(key)])) for key in encoding.gamma_keys}
            logger.info(
                "synthesis round %d: gain %s, slack %.3e", round_ + 1, np.round(K, 5).tolist(), outcome.objective
            )
            if outcome.objective < best_slack:
                best_gain, best_slack = K, outcome.objective
            certified = _candidate(K, gammas, outcome.objective)
            if certified is not None:
                return _finish(certified, K)
        else:
            diagnostics.append(f"gain step {round_}: {outcome.status.value}, keeping the previous gain")

        outcome, step_gammas = _barrier_step(K, gammas, round_, retry=not gain_moved)
        if step_gammas is None:
            if outcome is not None and outcome.status == SolveStatus.INFEASIBLE:
                break
            if not gain_moved:
                diagnostics.append(f"round {round_}: neither step made progress")
                break
            diagnostics[-1] += ", keeping the previous barrier"
            continue
        gammas = step_gammas
        P, _ = encoding.barrier_values(outcome.assignment)
        if outcome.objective < best_slack:
            best_gain, best_slack = K, outcome.objective
        certified = _candidate(K, gammas, outcome.objective)
        if certified is not None:
            return _finish(certified, K)
    else:
        diagnostics.append(f"synthesis budget of {schedule.synthesis_rounds} rounds exhausted")

    for gain in (best_gain, K):
        if tuple(np.round(gain, 12).ravel()) not in tried:
            final = _verify(gain, gammas)
            if final.certified:
                return _finish(final, gain)
    diagnostics.append(f"best iterate {np.round(best_gain, 6).tolist()} with slack {best_slack:.3e}")
    return _finish(CertReport(CertStatus.UNKNOWN, variant, diagnostics=diagnostics), best_gain)
