# Copyright (c) 2024 The wh-cert-lib authors
# SPDX-License-Identifier: AGPL-3.0

"""Sum-of-squares encodings of the decrease-form barrier conditions for polynomial systems."""

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import lstsq

from ..classes.certificate import CertReport, CertStatus, GbfVariant, PolyGbf, SosConstraint, VariantKind
from ..classes.conic_problem import AffineEquality, ConicProblem, MatrixTerm, PsdConstraint, SolveStatus
from ..classes.polynomial import Monomial, Polynomial, monomial_basis, to_rational
from ..classes.problem import ProblemSets, Schedule
from ..classes.system import Controller, Strategy, System, input_variables, state_variables
from ..classes.wh_graph import WhGraph
from ..exceptions import DegreeError, EncodingError
from . import conic_utils
from .polynomial_utils import poly_compose
from .problem_validation_utils import is_bounded
from .set_utils import AnySet, as_semialgebraic
from .validation_utils import validate_cert

logger = logging.getLogger(__name__)

GRAM_EIG_TOL = 1e-7


def coeff_name(node: str) -> str:
    return f"c[{node}]"


def eps_name(node: str) -> str:
    return f"eps[{node}]"


def gram_name(condition: str, j: Optional[int] = None) -> str:
    return f"Q[{condition}]" if j is None else f"Q[{condition}].{j}"


@dataclass
class Normalization:
    """Affine change of coordinates y = (x - center) / half_width onto [-1, 1] per axis."""

    center: np.ndarray
    half_width: np.ndarray

    @classmethod
    def of(cls, s: AnySet, where: str) -> "Normalization":
        if not is_bounded(s) or s.bounds is None:
            raise EncodingError(f"{where} needs a bounding box for the SOS encoding")
        lo, hi = s.bounds
        return cls((lo + hi) / 2, (hi - lo) / 2)

    def to_physical(self, ring: Sequence[str], offset: int = 0) -> List[Polynomial]:
        """x_i = c_i + h_i y_i as polynomials over the ring, for the coordinates starting at `offset`."""
        return [
            Polynomial.variable(ring[offset + i], ring) * to_rational(h) + to_rational(c)
            for i, (c, h) in enumerate(zip(self.center, self.half_width))
        ]

    def to_normalized(self, physical: Sequence[Polynomial]) -> List[Polynomial]:
        return [(p - to_rational(c)) * (1 / to_rational(h)) for p, c, h in zip(physical, self.center, self.half_width)]


@dataclass
class _Piece:
    node: str
    maps: List[Polynomial]
    sign: float


@dataclass
class SosCondition:
    """
    target(z) - sum_j lambda_j(z) g_j(z) is SOS and every lambda_j is SOS, where
    target = sum sign Psi_node(maps(z)) + sum k eps_w + constant, over the ring of the condition.
    """

    name: str
    kind: str
    ring: List[str]
    pieces: List[_Piece] = field(default_factory=list)
    eps: List[Tuple[str, float]] = field(default_factory=list)
    constant: float = 0.0
    inequalities: List[Polynomial] = field(default_factory=list)


class SosEncoding:
    """SOS conditions of one decrease variant plus the conic problem built from them."""

    def __init__(
        self,
        variant: GbfVariant,
        graph: WhGraph,
        n_states: int,
        n_inputs: int,
        n_p: int,
        psi_ring: List[str],
        normalization: List[Normalization],
        conditions: List[SosCondition],
        schedule: Schedule,
    ):
        self.variant = variant
        self.graph = graph
        self.n_states = n_states
        self.n_inputs = n_inputs
        self.n_p = n_p
        self.psi_ring = psi_ring
        self.psi_basis = monomial_basis(len(psi_ring), n_p)
        self.normalization = normalization
        self.conditions = conditions
        self.schedule = schedule
        self.records: List[SosConstraint] = []
        self._equalities: Dict[str, Tuple[np.ndarray, List[Monomial]]] = {}

    def multiplier_degree(self, g: Polynomial) -> int:
        configured = self.schedule.multiplier_degree
        if configured is not None:
            if configured < 0 or configured % 2:
                raise DegreeError(f"multiplier degree must be even and non-negative, got {configured}")
            return configured
        raw = max(self.n_p - g.degree, 0)
        return raw + raw % 2

    def _composed(self, maps: List[Polynomial]) -> List[Polynomial]:
        """Psi basis monomials composed with the maps."""
        composed = []
        for mono in self.psi_basis:
            p = Polynomial.from_terms({mono: 1}, self.psi_ring)
            composed.append(poly_compose(p, maps, self.schedule.degree_cap))
        return composed

    def build(self) -> ConicProblem:
        problem = ConicProblem(f"sos-{self.variant.kind.value}-{self.variant.strategy.value}")
        rho = self.schedule.rho
        size = len(self.psi_basis)
        for v in self.graph.nodes:
            problem.add_matrix(coeff_name(v), (size, 1), symmetric=False, lower=-rho, upper=rho)
            problem.add_scalar(eps_name(v), lower=self.schedule.eps_min_decrease, upper=rho)

        for c in self.conditions:
            r = len(c.ring)
            compositions = [(piece, self._composed(piece.maps)) for piece in c.pieces]
            target_degree = max([p.degree for _, polys in compositions for p in polys], default=0)
            lam_degrees = [self.multiplier_degree(g) for g in c.inequalities]
            degree = max([target_degree] + [d + g.degree for d, g in zip(lam_degrees, c.inequalities)])
            half = math.ceil(degree / 2)
            if half > self.schedule.degree_cap:
                raise DegreeError(f"{c.name}: Gram basis degree {half} exceeds the cap {self.schedule.degree_cap}")
            full = monomial_basis(r, 2 * half)
            index = {m: i for i, m in enumerate(full)}
            rows = len(full)

            terms: List[Tuple[str, np.ndarray]] = []
            for piece, polys in compositions:
                A = np.zeros((rows, size))
                for col, p in enumerate(polys):
                    for mono, coeff in p.terms().items():
                        A[index[mono], col] += piece.sign * coeff
                terms.append((coeff_name(piece.node), A))
            constant = np.zeros(rows)
            constant[index[(0,) * r]] = c.constant
            for w, k in c.eps:
                A = np.zeros((rows, 1))
                A[index[(0,) * r], 0] = k
                terms.append((eps_name(w), A))

            basis = monomial_basis(r, half)
            gram = gram_name(c.name)
            problem.add_matrix(gram, len(basis))
            A_gram = self._gram_matrix(basis, index, rows)
            terms.append((gram, -A_gram))
            problem.add_constraint(PsdConstraint(gram, len(basis), [MatrixTerm(gram, np.eye(len(basis)), np.eye(len(basis)))]))
            record = SosConstraint(c.name, gram, basis, equality=f"match[{c.name}]")

            for j, (g, lam_degree) in enumerate(zip(c.inequalities, lam_degrees)):
                lam_basis = monomial_basis(r, lam_degree // 2)
                name = gram_name(c.name, j)
                problem.add_matrix(name, len(lam_basis))
                terms.append((name, -self._multiplier_matrix(lam_basis, g, index, rows)))
                n_lam = len(lam_basis)
                problem.add_constraint(PsdConstraint(name, n_lam, [MatrixTerm(name, np.eye(n_lam), np.eye(n_lam))]))
                record.multipliers.append((name, lam_basis))

            merged: Dict[str, np.ndarray] = {}
            for var, A in terms:
                merged[var] = merged[var] + A if var in merged else A
            problem.add_equality(AffineEquality(record.equality, list(merged.items()), constant))
            self._equalities[c.name] = (A_gram, basis)
            self.records.append(record)

        problem.metadata = {"variant": self.variant.to_dict(), "n_p": self.n_p, "mode": "sos"}
        return problem

    @staticmethod
    def _gram_matrix(basis: List[Monomial], index: Dict[Monomial, int], rows: int) -> np.ndarray:
        """Coefficients of z^T Q z as a linear map of the row-major vec(Q)."""
        N = len(basis)
        A = np.zeros((rows, N * N))
        for i, bi in enumerate(basis):
            for k, bk in enumerate(basis):
                A[index[tuple(a + b for a, b in zip(bi, bk))], i * N + k] = 1.0
        return A

    @staticmethod
    def _multiplier_matrix(
        basis: List[Monomial], g: Polynomial, index: Dict[Monomial, int], rows: int
    ) -> np.ndarray:
        """Coefficients of (z^T Q z) g as a linear map of vec(Q)."""
        N = len(basis)
        A = np.zeros((rows, N * N))
        g_terms = g.terms()
        for i, bi in enumerate(basis):
            for k, bk in enumerate(basis):
                for mono, coeff in g_terms.items():
                    A[index[tuple(a + b + e for a, b, e in zip(bi, bk, mono))], i * N + k] += coeff
        return A

    def project_grams(self, problem: ConicProblem, assignment: Dict[str, np.ndarray]) -> Dict[str, float]:
        """
        Minimum-norm symmetric correction of every Gram matrix so its coefficient matching holds exactly.
        Returns:
            Dict[str, float]: coefficient residual after projection and eig_min per Gram matrix
        """
        stats: Dict[str, float] = {}
        by_name = {e.name: e for e in problem.equalities}
        for record in self.records:
            A_gram, basis = self._equalities[record.name]
            N = len(basis)
            equality = by_name[record.equality]
            residual = problem.evaluate_equality(equality, assignment)
            pairs = [(i, k) for i in range(N) for k in range(i, N)]
            A_sym = np.stack(
                [A_gram[:, i * N + k] + (A_gram[:, k * N + i] if i != k else 0.0) for i, k in pairs], axis=1
            )
            delta, *_ = lstsq(A_sym, residual)
            Q = np.array(assignment[record.gram], dtype=float)
            for (i, k), d in zip(pairs, delta):
                Q[i, k] += d
                if i != k:
                    Q[k, i] += d
            assignment[record.gram] = Q
            stats[f"match[{record.name}]"] = float(np.abs(problem.evaluate_equality(equality, assignment)).max())
            stats[f"gram[{record.name}]"] = conic_utils.eig_min(Q)
            for name, _ in record.multipliers:
                stats[f"gram[{name}]"] = conic_utils.eig_min(np.asarray(assignment[name]))
        return stats

    def certificate(self, assignment: Dict[str, np.ndarray], controller, residuals: Dict[str, float]) -> PolyGbf:
        """Barrier polynomials mapped back from normalized to physical coordinates."""
        to_normalized: List[Polynomial] = []
        offset = 0
        for norm in self.normalization:
            identity = [Polynomial.variable(self.psi_ring[offset + i], self.psi_ring) for i in range(norm.center.size)]
            to_normalized += norm.to_normalized(identity)
            offset += norm.center.size
        polys, eps = {}, {}
        for v in self.graph.nodes:
            coeffs = np.asarray(assignment[coeff_name(v)], dtype=float).reshape(-1)
            normalized = Polynomial.from_dense(coeffs, self.psi_ring, self.n_p)
            polys[v] = poly_compose(normalized, to_normalized, self.schedule.degree_cap)
            eps[v] = float(assignment[eps_name(v)])
        return PolyGbf(
            self.variant,
            self.graph,
            polys,
            eps,
            self.n_p,
            self.n_states,
            self.n_inputs,
            controller.to_dict() if controller is not None else None,
            residuals,
        )


def _set_polys(s: AnySet, maps: List[Polynomial], degree_cap: int) -> List[Polynomial]:
    """Defining inequalities of a set, re-expressed over a ring through the maps x_i = maps[i]."""
    semi = as_semialgebraic(s)
    return [poly_compose(g, maps, degree_cap) for g in semi.polys]


def encode_sos(
    variant: GbfVariant,
    system: System,
    controller: Optional[Controller],
    graph: WhGraph,
    sets: ProblemSets,
    n_p: Optional[int] = None,
    schedule: Optional[Schedule] = None,
) -> Tuple[ConicProblem, SosEncoding]:
    """
    Builds the SOS program of a decrease variant in coordinates normalized to the bounding box of X (and U).
    Args:
        variant: 1dGBF (zero or hold) or dGBF
        system: polynomial (or linear) plant
        controller: state feedback
        graph: WH graph
        sets: problem sets
        n_p: degree of the barrier polynomials, schedule.sos_degree when omitted
        schedule: numerical schedule

    Returns:
        Tuple[ConicProblem, SosEncoding]: the conic problem and the encoding needed to read it back
    """
    schedule = schedule or Schedule()
    n_p = schedule.sos_degree if n_p is None else n_p
    if not variant.is_decrease:
        raise EncodingError(
            f"{variant} is an implication condition; SOS programs need the set constraints in conjunctive form, "
            "use a decrease variant (1dgbf or dgbf)"
        )
    if n_p < 1:
        raise DegreeError(f"barrier polynomials need degree >= 1, got {n_p}")
    if controller is None:
        raise EncodingError("verification needs a controller")
    controller.check_against(system)

    n, m = system.n_states, system.n_inputs
    cap = schedule.degree_cap
    aug = variant.augmented
    norm_x = Normalization.of(sets.X, "X")
    norms = [norm_x]
    psi_ring = state_variables(n)
    if aug:
        if sets.U is None:
            raise EncodingError(f"{variant} needs a bounded input set U")
        norm_u = Normalization.of(sets.U, "U")
        norms.append(norm_u)
        psi_ring = psi_ring + input_variables(m)
    ring = list(psi_ring)
    dynamics = system.as_polynomials()
    feedback = controller.as_polynomials()

    x_phys = norm_x.to_physical(ring)
    identity = [Polynomial.variable(v, ring) for v in ring]
    u_feedback = [poly_compose(g, x_phys, cap) for g in feedback]
    zero_u = [Polynomial.constant(0, ring)] * m
    x_closed = [poly_compose(f, x_phys + u_feedback, cap) for f in dynamics]

    domain = _set_polys(sets.X, x_phys, cap)
    if aug:
        u_phys = norm_u.to_physical(ring, offset=n)
        domain += _set_polys(sets.U, u_phys, cap)

    conditions: List[SosCondition] = []
    # initial states, on the manifold u = g(x) for the augmented state
    if aug:
        x_ring = state_variables(n)
        x_only = norm_x.to_physical(x_ring)
        u_init = norm_u.to_normalized([poly_compose(g, x_only, cap) for g in feedback])
        init_maps = [Polynomial.variable(v, x_ring) for v in x_ring] + u_init
        init_ring, init_domain = x_ring, _set_polys(sets.X0, x_only, cap) + _set_polys(sets.X, x_only, cap)
    else:
        init_maps, init_ring = identity, ring
        init_domain = _set_polys(sets.X0, x_phys, cap) + domain
    unsafe_domain = _set_polys(sets.Xu, x_phys, cap) + domain

    for v in graph.nodes:
        conditions.append(SosCondition(f"init[{v}]", "initial", init_ring, [_Piece(v, init_maps, -1.0)], inequalities=init_domain))
        conditions.append(
            SosCondition(
                f"unsafe[{v}]", "unsafe", ring, [_Piece(v, identity, 1.0)], constant=-schedule.sos_eta, inequalities=unsafe_domain
            )
        )

    if variant.kind == VariantKind.DGBF:
        held = u_feedback if variant.strategy == Strategy.HOLD else zero_u
        for v, label, w in graph.edges:
            state = x_closed
            for k in range(label + 1):
                if k:
                    state = [poly_compose(f, state + held, cap) for f in dynamics]
                conditions.append(
                    SosCondition(
                        f"edge[{v},{label},{w}].m{k}",
                        "transition",
                        ring,
                        [_Piece(v, identity, 1.0), _Piece(w, norm_x.to_normalized(state), -1.0)],
                        eps=[(w, -float(label - k))],
                        inequalities=domain,
                    )
                )
    else:
        if aug:
            u_own = [Polynomial.variable(u, ring) for u in input_variables(m)]
            closed = norm_x.to_normalized(x_closed) + norm_u.to_normalized(u_feedback)
            x_open = [poly_compose(f, x_phys + u_phys, cap) for f in dynamics]
            opened = norm_x.to_normalized(x_open) + u_own
        else:
            closed = norm_x.to_normalized(x_closed)
            opened = norm_x.to_normalized([poly_compose(f, x_phys + zero_u, cap) for f in dynamics])
        longest: Dict[str, int] = {}
        for v, label, w in graph.edges:
            longest[w] = max(longest.get(w, 0), label)
            conditions.append(
                SosCondition(
                    f"switch[{v},{label},{w}]",
                    "switching",
                    ring,
                    [_Piece(v, identity, 1.0), _Piece(w, closed, -1.0)],
                    eps=[(w, -float(label))],
                    inequalities=domain,
                )
            )
        for w in graph.nodes:
            if longest.get(w, 0) >= 1:
                conditions.append(
                    SosCondition(
                        f"increase[{w}]",
                        "increase",
                        ring,
                        [_Piece(w, identity, 1.0), _Piece(w, opened, -1.0)],
                        eps=[(w, 1.0)],
                        inequalities=domain,
                    )
                )

    encoding = SosEncoding(variant, graph, n, m if aug else 0, n_p, psi_ring, norms, conditions, schedule)
    problem = encoding.build()
    logger.info(
        "SOS encoding of %s: %d conditions, %d variables, %d equalities",
        variant,
        len(conditions),
        problem.n_variables,
        len(problem.equalities),
    )
    return problem, encoding


def verify_sos(
    variant: GbfVariant,
    system: System,
    controller: Optional[Controller],
    graph: WhGraph,
    sets: ProblemSets,
    schedule: Optional[Schedule] = None,
    n_p: Optional[int] = None,
    validate: bool = True,
) -> CertReport:
    """
    Solves the SOS program of a decrease variant, projects the Gram matrices, and validates the result.
    Returns:
        CertReport: Certified only when every Gram matrix stays PSD after projection and sampling passes
    """
    schedule = schedule or Schedule()
    start = time.perf_counter()
    problem, encoding = encode_sos(variant, system, controller, graph, sets, n_p, schedule)
    outcome = conic_utils.solve(problem, schedule.feas_tol, schedule.solver)
    report = CertReport(CertStatus.UNKNOWN, variant, controller=controller.to_dict(), solves=1)
    logger.info("%s (SOS): %s (%s)", variant, outcome.status.value, outcome.solver)

    if outcome.status == SolveStatus.INFEASIBLE:
        report.status = CertStatus.INFEASIBLE
        report.diagnostics.append(f"{outcome.solver} certified the SOS program infeasible")
    elif outcome.feasible:
        assignment = dict(outcome.assignment)
        stats = encoding.project_grams(problem, assignment)
        report.residuals = stats
        worst_gram = min(value for key, value in stats.items() if key.startswith("gram["))
        if worst_gram < -GRAM_EIG_TOL:
            report.diagnostics.append(f"a Gram matrix lost positive semidefiniteness after projection ({worst_gram:.3e})")
        else:
            cert = encoding.certificate(assignment, controller, stats)
            passed = True
            if validate:
                validation = validate_cert(
                    cert,
                    system,
                    controller,
                    graph,
                    sets,
                    n_samples=schedule.validation_samples,
                    seed=schedule.seed,
                    tol=schedule.validation_tol,
                )
                report.validation = validation.to_dict()
                passed = validation.passed
                if not passed:
                    report.diagnostics.append(f"sampling validation failed: {validation.summary()}")
            if passed:
                report.status = CertStatus.CERTIFIED
                report.certificate = cert
    else:
        report.diagnostics.append(outcome.diagnostic)
    report.wall_time = time.perf_counter() - start
    return report


def gram_reconstruction_residual(encoding: SosEncoding, problem: ConicProblem, assignment: Dict[str, np.ndarray]) -> float:
    """Largest coefficient mismatch of target - sum lambda_j g_j - z^T Q z over all conditions."""
    return max(
        (float(np.abs(problem.evaluate_equality(e, assignment)).max(initial=0.0)) for e in problem.equalities),
        default=0.0,
    )
