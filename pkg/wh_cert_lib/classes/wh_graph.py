# Copyright (c) 2024 The wh-cert-lib authors
# SPDX-License-Identifier: AGPL-3.0

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from ..exceptions import MonitorError
from ..utils.wh_utils import split_blocks
from .wh_constraint import LabelWord, LossWord, WhConstraint

Edge = Tuple[str, int, str]


@dataclass(frozen=True)
class GraphPath:
    """Alternating node/label sequence v0 l0 v1 l1 ... starting at the initial node."""

    nodes: Tuple[str, ...]
    labels: Tuple[int, ...]

    def __post_init__(self):
        if len(self.nodes) != len(self.labels) + 1:
            raise ValueError("a path holds exactly one more node than labels")

    @property
    def label_word(self) -> LabelWord:
        return LabelWord(self.labels)

    @property
    def loss_word(self) -> LossWord:
        return self.label_word.expand()

    @property
    def expanded_length(self) -> int:
        return sum(label + 1 for label in self.labels)

    def edges(self) -> List[Edge]:
        return [(self.nodes[i], self.labels[i], self.nodes[i + 1]) for i in range(len(self.labels))]

    def __str__(self) -> str:
        parts = [self.nodes[0]]
        for label, node in zip(self.labels, self.nodes[1:]):
            parts.extend([str(label), node])
        return " ".join(parts)


class WhGraph:
    """
    Labeled graph whose paths from the initial node, with label l expanded to 1 0^l,
    generate the admissible loss words of a weakly-hard constraint.

    Construction only rejects label non-determinism; the remaining invariants are reported by
    check_invariants() so that deliberately corrupted graphs can be built.
    """

    def __init__(
        self,
        constraint: WhConstraint,
        nodes: Sequence[str],
        initial: str,
        edges: Iterable[Edge],
        histories: Optional[Dict[str, Tuple[int, ...]]] = None,
    ):
        self.constraint = constraint
        self.nodes = list(nodes)
        self.initial = initial
        self.histories = dict(histories or {})  # representative history (last s-1 bits) per node

        if initial not in self.nodes:
            raise ValueError(f"initial node {initial} is not a node of the graph")
        self._index = {node: i for i, node in enumerate(self.nodes)}
        self._successors: Dict[Tuple[str, int], str] = {}
        for v, label, w in edges:
            label = int(label)
            if v not in self._index or w not in self._index:
                raise ValueError(f"edge ({v},{label},{w}) refers to an unknown node")
            if (v, label) in self._successors and self._successors[(v, label)] != w:
                raise ValueError(f"graph is not deterministic: node {v} has two edges labeled {label}")
            self._successors[(v, label)] = w

        self.edges: List[Edge] = sorted(
            ((v, label, w) for (v, label), w in self._successors.items()),
            key=lambda e: (self._index[e[0]], e[1], self._index[e[2]]),
        )

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def successor(self, node: str, label: int) -> Optional[str]:
        return self._successors.get((node, label))

    def out_edges(self, node: str) -> List[Edge]:
        return [e for e in self.edges if e[0] == node]

    def in_edges(self, node: str) -> List[Edge]:
        return [e for e in self.edges if e[2] == node]

    def path_of(self, labels: LabelWord) -> GraphPath:
        """
        Follows a label word from the initial node.
        Args:
            labels: label word to follow

        Returns:
            GraphPath: the unique path generating the word
        """
        nodes = [self.initial]
        for label in labels:
            nxt = self.successor(nodes[-1], label)
            if nxt is None:
                raise MonitorError(f"no edge labeled {label} leaves {nodes[-1]} on the way along {list(labels)}")
            nodes.append(nxt)
        return GraphPath(tuple(nodes), tuple(labels))

    def accepts(self, word: LossWord) -> bool:
        if not word.starts_with_success:
            return False
        try:
            self.path_of(split_blocks(word))
        except MonitorError:
            return False
        return True

    def check_invariants(self) -> List[str]:
        """
        Returns:
            List[str]: human-readable descriptions of violated graph invariants, empty for a valid WH graph
        """
        problems = []
        for v, label, w in self.edges:
            if label not in self.constraint.alphabet:
                problems.append(f"edge ({v},{label},{w}) uses a label outside 0..{self.constraint.max_losses}")

        reached = {self.initial}
        frontier = [self.initial]
        while frontier:
            v = frontier.pop()
            for _, _, w in self.out_edges(v):
                if w not in reached:
                    reached.add(w)
                    frontier.append(w)
        for v in self.nodes:
            if v not in reached:
                problems.append(f"node {v} is not reachable from {self.initial}")
            if not self.out_edges(v):
                problems.append(f"node {v} has no outgoing edge")
        return problems

    def to_dict(self) -> dict:
        return {
            "constraint": self.constraint.to_dict(),
            "nodes": list(self.nodes),
            "initial": self.initial,
            "edges": [[v, label, w] for v, label, w in self.edges],
        }

    @classmethod
    def from_dict(cls, d: dict) -> WhGraph:
        return cls(
            WhConstraint.from_dict(d["constraint"]),
            d["nodes"],
            d["initial"],
            [(v, int(label), w) for v, label, w in d["edges"]],
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> WhGraph:
        return cls.from_dict(json.loads(text))

    def same_structure(self, other: WhGraph) -> bool:
        return (
            self.constraint == other.constraint
            and self.nodes == other.nodes
            and self.initial == other.initial
            and self.edges == other.edges
        )

    def __repr__(self) -> str:
        return f"WhGraph({self.constraint}, {self.n_nodes} nodes, {self.n_edges} edges)"
