# Copyright (c) 2024 The wh-cert-lib authors
# SPDX-License-Identifier: AGPL-3.0

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

from ..exceptions import CertificateMismatchError
from .polynomial import Polynomial
from .system import Strategy
from .wh_graph import WhGraph


class VariantKind(str, Enum):
    GBF = "gbf"
    DGBF = "dgbf"
    ONE_GBF = "1gbf"
    ONE_DGBF = "1dgbf"


@dataclass(frozen=True)
class GbfVariant:
    """
    Barrier-function variant and actuator strategy.
    One-step variants under the hold strategy live on the augmented state (x, held input).
    """

    kind: VariantKind
    strategy: Strategy

    @classmethod
    def of(cls, kind: Union[str, VariantKind], strategy: Union[str, Strategy]) -> GbfVariant:
        return cls(VariantKind(str(kind).lower() if not isinstance(kind, VariantKind) else kind), Strategy(strategy))

    @property
    def is_decrease(self) -> bool:
        return self.kind in (VariantKind.DGBF, VariantKind.ONE_DGBF)

    @property
    def is_one_step(self) -> bool:
        return self.kind in (VariantKind.ONE_GBF, VariantKind.ONE_DGBF)

    @property
    def is_bilinear(self) -> bool:
        return not self.is_decrease

    @property
    def augmented(self) -> bool:
        return self.is_one_step and self.strategy == Strategy.HOLD

    @property
    def tag(self) -> str:
        return {"gbf": "GBF", "dgbf": "d-GBF", "1gbf": "1-GBF", "1dgbf": "1d-GBF"}[self.kind.value]

    def __str__(self) -> str:
        if self.is_one_step:
            return f"{self.tag}-{self.strategy.value}"
        return f"{self.tag} ({self.strategy.value})"

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "strategy": self.strategy.value}

    @classmethod
    def from_dict(cls, d: dict) -> GbfVariant:
        return cls.of(d["kind"], d["strategy"])


class CertStatus(str, Enum):
    CERTIFIED = "certified"
    INFEASIBLE = "infeasible"
    UNKNOWN = "unknown"


def _node_order(graph: WhGraph, keys) -> List[str]:
    keys = set(keys)
    if keys != set(graph.nodes):
        raise CertificateMismatchError(f"certificate nodes {sorted(keys)} do not match graph nodes {graph.nodes}")
    return list(graph.nodes)


class GbfCertificate:
    """
    Quadratic graph-based barrier function: Psi_v(z) = [z; 1]^T P_v [z; 1] per node, where z is the state,
    or the augmented state (x, held input) for one-step hold variants.
    """

    kind = "quadratic"

    def __init__(
        self,
        variant: GbfVariant,
        graph: WhGraph,
        P: Dict[str, np.ndarray],
        eps: Dict[str, float],
        n_states: int,
        n_inputs: int = 0,
        multipliers: Optional[Dict[str, float]] = None,
        controller: Optional[Dict[str, Any]] = None,
        residuals: Optional[Dict[str, float]] = None,
    ):
        order = _node_order(graph, P)
        _node_order(graph, eps)
        self.variant = variant
        self.graph = graph
        self.n_states = n_states
        self.n_inputs = n_inputs
        dim = self.dim + 1
        self.P = {}
        for v in order:
            M = np.atleast_2d(np.asarray(P[v], dtype=float))
            if M.shape != (dim, dim):
                raise CertificateMismatchError(f"P[{v}] has shape {M.shape}, expected {(dim, dim)}")
            self.P[v] = (M + M.T) / 2
        self.eps = {v: float(eps[v]) for v in order}
        self.multipliers = dict(sorted((multipliers or {}).items()))
        self.controller = controller
        self.residuals = dict(residuals or {})

    @property
    def dim(self) -> int:
        """Dimension of the space Psi is defined on."""
        return self.n_states + (self.n_inputs if self.variant.augmented else 0)

    def evaluate(self, node: str, z: np.ndarray) -> Union[float, np.ndarray]:
        """
        Args:
            node: graph node
            z: point(s) of shape (dim,) or (N, dim)

        Returns:
            float or np.ndarray: Psi_node(z)
        """
        z = np.asarray(z, dtype=float)
        if z.shape[-1] != self.dim:
            raise CertificateMismatchError(f"expected points with {self.dim} coordinates, got shape {z.shape}")
        h = np.concatenate([z, np.ones(z.shape[:-1] + (1,))], axis=-1)
        values = np.einsum("...i,ij,...j->...", h, self.P[node], h)
        return float(values) if np.ndim(values) == 0 else values

    def scaled(self, eps_factor: float) -> GbfCertificate:
        """Copy with every margin multiplied by eps_factor."""
        return GbfCertificate(
            self.variant,
            self.graph,
            self.P,
            {v: e * eps_factor for v, e in self.eps.items()},
            self.n_states,
            self.n_inputs,
            self.multipliers,
            self.controller,
            self.residuals,
        )

    def with_variant(self, variant: GbfVariant) -> GbfCertificate:
        """
        Same barriers and margins read as a certificate of another variant, e.g. to check the weaker conditions
        a one-step decrease certificate implies.
        Args:
            variant: variant whose conditions the copy claims

        Returns:
            GbfCertificate: relabelled copy
        """
        if variant.augmented != self.variant.augmented:
            raise CertificateMismatchError(f"{variant} and {self.variant} live on different state spaces")
        return GbfCertificate(
            variant,
            self.graph,
            self.P,
            self.eps,
            self.n_states,
            self.n_inputs,
            self.multipliers,
            self.controller,
            self.residuals,
        )

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "variant": self.variant.to_dict(),
            "graph": self.graph.to_dict(),
            "n_states": self.n_states,
            "n_inputs": self.n_inputs,
            "eps": dict(self.eps),
            "P": {v: self.P[v].tolist() for v in self.graph.nodes},
            "multipliers": dict(self.multipliers),
            "controller": self.controller,
            "residuals": dict(sorted(self.residuals.items())),
        }

    @classmethod
    def from_dict(cls, d: dict) -> GbfCertificate:
        return cls(
            GbfVariant.from_dict(d["variant"]),
            WhGraph.from_dict(d["graph"]),
            {v: np.array(M) for v, M in d["P"].items()},
            d["eps"],
            d["n_states"],
            d.get("n_inputs", 0),
            d.get("multipliers"),
            d.get("controller"),
            d.get("residuals"),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def __repr__(self) -> str:
        return f"GbfCertificate({self.variant}, {self.graph.n_nodes} nodes)"


class PolyGbf:
    """Polynomial graph-based barrier function, one polynomial per node over x1..xn (and u1..um when augmented)."""

    kind = "polynomial"

    def __init__(
        self,
        variant: GbfVariant,
        graph: WhGraph,
        polys: Dict[str, Polynomial],
        eps: Dict[str, float],
        n_p: int,
        n_states: int,
        n_inputs: int = 0,
        controller: Optional[Dict[str, Any]] = None,
        residuals: Optional[Dict[str, float]] = None,
    ):
        order = _node_order(graph, polys)
        _node_order(graph, eps)
        self.variant = variant
        self.graph = graph
        self.n_p = n_p
        self.n_states = n_states
        self.n_inputs = n_inputs
        self.polys = {v: polys[v] for v in order}
        for v, p in self.polys.items():
            if p.n_vars != self.dim:
                raise CertificateMismatchError(f"Psi[{v}] has {p.n_vars} variables, expected {self.dim}")
            if p.degree > n_p:
                raise CertificateMismatchError(f"Psi[{v}] has degree {p.degree} above n_p = {n_p}")
        self.eps = {v: float(eps[v]) for v in order}
        self.controller = controller
        self.residuals = dict(residuals or {})

    @property
    def dim(self) -> int:
        return self.n_states + (self.n_inputs if self.variant.augmented else 0)

    def evaluate(self, node: str, z: np.ndarray) -> Union[float, np.ndarray]:
        z = np.asarray(z, dtype=float)
        if z.shape[-1] != self.dim:
            raise CertificateMismatchError(f"expected points with {self.dim} coordinates, got shape {z.shape}")
        return self.polys[node].evaluate(z)

    def scaled(self, eps_factor: float) -> PolyGbf:
        return PolyGbf(
            self.variant,
            self.graph,
            self.polys,
            {v: e * eps_factor for v, e in self.eps.items()},
            self.n_p,
            self.n_states,
            self.n_inputs,
            self.controller,
            self.residuals,
        )

    def to_dict(self) -> dict:
        nodes = {}
        for v in self.graph.nodes:
            d = self.polys[v].to_dict()
            nodes[v] = {"variables": d["variables"], "monomials": d["monomials"], "coeffs": d["coeffs"]}
        return {
            "kind": self.kind,
            "variant": self.variant.to_dict(),
            "graph": self.graph.to_dict(),
            "n_p": self.n_p,
            "n_states": self.n_states,
            "n_inputs": self.n_inputs,
            "eps": dict(self.eps),
            "nodes": nodes,
            "controller": self.controller,
            "residuals": dict(sorted(self.residuals.items())),
        }

    @classmethod
    def from_dict(cls, d: dict) -> PolyGbf:
        return cls(
            GbfVariant.from_dict(d["variant"]),
            WhGraph.from_dict(d["graph"]),
            {v: Polynomial.from_dict(p) for v, p in d["nodes"].items()},
            d["eps"],
            d["n_p"],
            d["n_states"],
            d.get("n_inputs", 0),
            d.get("controller"),
            d.get("residuals"),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def __repr__(self) -> str:
        return f"PolyGbf({self.variant}, n_p={self.n_p}, {self.graph.n_nodes} nodes)"


AnyCertificate = Union[GbfCertificate, PolyGbf]


def load_certificate(data: Union[str, dict]) -> AnyCertificate:
    """Certificate from its JSON text, a parsed dict, or a CertReport dict holding one."""
    d = json.loads(data) if isinstance(data, str) else data
    if "certificate" in d and "kind" not in d:
        d = d["certificate"]
        if d is None:
            raise CertificateMismatchError("the report holds no certificate")
    kind = d.get("kind")
    if kind == GbfCertificate.kind:
        return GbfCertificate.from_dict(d)
    if kind == PolyGbf.kind:
        return PolyGbf.from_dict(d)
    raise CertificateMismatchError(f"unknown certificate kind {kind!r}")


@dataclass
class SosConstraint:
    """
    One SOS condition: target - sum_j lambda_j g_j = z^T Q z with lambda_j themselves SOS.
    Records the variable names the encoder used so the Gram reconstruction can be checked afterwards.
    """

    name: str
    gram: str
    basis: List[Tuple[int, ...]]
    multipliers: List[Tuple[str, List[Tuple[int, ...]]]] = field(default_factory=list)  # (Gram variable, basis)
    equality: str = ""


@dataclass
class CertReport:
    status: CertStatus
    variant: GbfVariant
    certificate: Optional[AnyCertificate] = None
    residuals: Dict[str, float] = field(default_factory=dict)
    wall_time: float = 0.0
    diagnostics: List[str] = field(default_factory=list)
    validation: Optional[Dict[str, Any]] = None
    controller: Optional[Dict[str, Any]] = None
    solves: int = 0

    @property
    def certified(self) -> bool:
        return self.status == CertStatus.CERTIFIED

    def to_dict(self) -> dict:
        return {
            "status": self.status.value,
            "variant": self.variant.to_dict(),
            "wall_time": self.wall_time,
            "solves": self.solves,
            "residuals": dict(sorted(self.residuals.items())),
            "diagnostics": list(self.diagnostics),
            "validation": self.validation,
            "controller": self.controller,
            "certificate": self.certificate.to_dict() if self.certificate is not None else None,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)
