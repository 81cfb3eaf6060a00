# Copyright (c) 2024 The wh-cert-lib authors
# SPDX-License-Identifier: AGPL-3.0

"""Construction, checking, traversal and export of WH graphs."""

import logging
import re
from collections import deque
from typing import Dict, Iterator, List, NamedTuple, Optional, Tuple

import numpy as np

from ..classes.wh_constraint import LossWord, WhConstraint
from ..classes.wh_graph import GraphPath, WhGraph
from ..exceptions import HorizonError
from .wh_utils import extends

logger = logging.getLogger(__name__)

MAX_EXHAUSTIVE_HORIZON = 20

History = Tuple[int, ...]


class HistoryAutomaton(NamedTuple):
    """Binary safety automaton whose states are the last s-1 bits of an admissible word."""

    constraint: WhConstraint
    initial: History
    states: List[History]
    transitions: Dict[Tuple[History, int], History]

    def run_block(self, history: History, label: int) -> Optional[History]:
        """Feeds the block 1 0^label, returns None if some bit is not admissible."""
        state = self.transitions.get((history, 1))
        for _ in range(label):
            if state is None:
                return None
            state = self.transitions.get((state, 0))
        return state


def history_automaton(c: WhConstraint) -> HistoryAutomaton:
    """
    Builds the reachable part of the binary safety automaton of K(r, s).
    Args:
        c: weakly-hard constraint

    Returns:
        HistoryAutomaton: states reachable from the all-success history
    """
    width = c.s - 1
    initial: History = (1,) * width
    states = [initial]
    transitions: Dict[Tuple[History, int], History] = {}
    queue = deque([initial])
    seen = {initial}
    while queue:
        history = queue.popleft()
        for bit in (0, 1):
            if not extends(history, bit, c):
                continue
            nxt = (history + (bit,))[len(history) + 1 - width :] if width else ()
            transitions[(history, bit)] = nxt
            if nxt not in seen:
                seen.add(nxt)
                states.append(nxt)
                queue.append(nxt)
    return HistoryAutomaton(c, initial, states, transitions)


def _success_instant_states(automaton: HistoryAutomaton) -> Tuple[List[History], Dict[Tuple[History, int], History]]:
    """Histories reachable at success instants, connected by label edges."""
    labels = automaton.constraint.alphabet
    states = [automaton.initial]
    edges: Dict[Tuple[History, int], History] = {}
    queue = deque([automaton.initial])
    seen = {automaton.initial}
    while queue:
        history = queue.popleft()
        for label in labels:
            nxt = automaton.run_block(history, label)
            if nxt is None:
                continue
            edges[(history, label)] = nxt
            if nxt not in seen:
                seen.add(nxt)
                states.append(nxt)
                queue.append(nxt)
    return states, edges


def _refine(states: List[History], edges: Dict[Tuple[History, int], History], labels: range) -> Dict[History, int]:
    """Partition refinement on outgoing behavior until the block assignment reaches a fixpoint."""
    signature = {h: tuple(label for label in labels if (h, label) in edges) for h in states}
    block_ids = {sig: i for i, sig in enumerate(sorted(set(signature.values())))}
    block = {h: block_ids[signature[h]] for h in states}
    while True:
        refined_sig = {
            h: (block[h],) + tuple(block[edges[(h, label)]] if (h, label) in edges else -1 for label in labels)
            for h in states
        }
        ids = {sig: i for i, sig in enumerate(sorted(set(refined_sig.values())))}
        refined = {h: ids[refined_sig[h]] for h in states}
        if len(ids) == len(set(block.values())):
            return refined
        block = refined


def build_graph(c: WhConstraint) -> WhGraph:
    """
    Builds the minimal WH graph of a weakly-hard constraint.
    The binary history automaton is sampled at success instants, every run 1 0^l becomes an edge labeled l,
    and equivalent histories are merged by partition refinement. Nodes are named v1..vn breadth-first from
    the class of the all-success history, exploring labels in increasing order.
    Args:
        c: weakly-hard constraint

    Returns:
        WhGraph: deterministic, non-blocking, minimal graph
    """
    automaton = history_automaton(c)
    states, label_edges = _success_instant_states(automaton)
    block = _refine(states, label_edges, c.alphabet)

    representative: Dict[int, History] = {}
    for h in states:
        representative.setdefault(block[h], h)

    names: Dict[int, str] = {}
    order = deque([block[automaton.initial]])
    names[block[automaton.initial]] = "v1"
    edges = []
    while order:
        current = order.popleft()
        history = representative[current]
        for label in c.alphabet:
            if (history, label) not in label_edges:
                continue
            target = block[label_edges[(history, label)]]
            if target not in names:
                names[target] = f"v{len(names) + 1}"
                order.append(target)
            edges.append((names[current], label, names[target]))

    nodes = sorted(names.values(), key=lambda name: int(name[1:]))
    histories = {names[b]: representative[b] for b in names}
    graph = WhGraph(c, nodes, "v1", edges, histories)
    logger.info("built WH graph of %s: %d nodes, %d edges", c, graph.n_nodes, graph.n_edges)
    return graph


def language_equiv_check(
    g: WhGraph, c: WhConstraint, max_len: int, max_horizon: int = MAX_EXHAUSTIVE_HORIZON
) -> Tuple[bool, Optional[LossWord]]:
    """
    Compares graph acceptance with the window semantics on every word of length <= max_len starting with 1.
    Args:
        g: graph to check
        c: constraint providing the window oracle
        max_len: longest word length
        max_horizon: enumeration guard

    Returns:
        Tuple[bool, Optional[LossWord]]: equivalence flag and the shortest (then lexicographically first) counterexample
    """
    if max_len > max_horizon:
        raise HorizonError(f"max_len {max_len} exceeds the enumeration guard {max_horizon}")

    mismatches: List[Tuple[int, ...]] = []

    def _walk(bits: Tuple[int, ...], node: Optional[str], zeros: int, sat: bool):
        accepted = node is not None and g.successor(node, zeros) is not None
        if accepted != sat:
            mismatches.append(bits)
        if len(bits) == max_len or (node is None and not sat):
            return
        tail = bits[-(c.s - 1) :] if c.s > 1 else ()
        _walk(bits + (0,), node, zeros + 1, sat and extends(tail, 0, c))
        closed = g.successor(node, zeros) if node is not None else None
        _walk(bits + (1,), closed, 0, sat and extends(tail, 1, c))

    _walk((1,), g.initial, 0, True)
    if not mismatches:
        return True, None
    first = min(mismatches, key=lambda bits: (len(bits), bits))
    return False, LossWord(first)


def enumerate_paths(
    g: WhGraph, horizon: int, complete_only: bool = False, max_horizon: int = MAX_EXHAUSTIVE_HORIZON
) -> Iterator[GraphPath]:
    """
    Streams the paths from the initial node whose expansion has at most `horizon` bits, each exactly once.
    Args:
        g: WH graph
        horizon: maximal expanded length
        complete_only: only yield paths whose expansion has exactly `horizon` bits
        max_horizon: enumeration guard

    Returns:
        Iterator[GraphPath]: paths in depth-first order with increasing labels
    """
    if horizon < 1 or horizon > max_horizon:
        raise HorizonError(f"horizon {horizon} outside 1..{max_horizon}")

    def _walk(nodes: Tuple[str, ...], labels: Tuple[int, ...], length: int) -> Iterator[GraphPath]:
        if labels and (not complete_only or length == horizon):
            yield GraphPath(nodes, labels)
        for _, label, target in g.out_edges(nodes[-1]):
            if length + label + 1 <= horizon:
                yield from _walk(nodes + (target,), labels + (label,), length + label + 1)

    yield from _walk((g.initial,), (), 0)


def sample_paths(g: WhGraph, horizon: int, n: int, seed: int = 0) -> List[GraphPath]:
    """
    Draws random complete paths (expansion of exactly `horizon` bits) by uniform choice among fitting edges.
    """
    rng = np.random.default_rng(seed)
    paths = []
    for _ in range(n):
        nodes, labels, length = [g.initial], [], 0
        while length < horizon:
            choices = [e for e in g.out_edges(nodes[-1]) if length + e[1] + 1 <= horizon]
            _, label, target = choices[rng.integers(len(choices))]
            nodes.append(target)
            labels.append(label)
            length += label + 1
        paths.append(GraphPath(tuple(nodes), tuple(labels)))
    return paths


def export_dot(g: WhGraph) -> str:
    lines = [f'digraph "{g.constraint}" {{', "  rankdir=LR;"]
    for node in g.nodes:
        shape = "doublecircle" if node == g.initial else "circle"
        lines.append(f"  {node} [shape={shape}];")
    for v, label, w in g.edges:
        lines.append(f'  {v} -> {w} [label="{label}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


_DOT_TITLE = re.compile(r'digraph\s+"K\((\d+),(\d+)\)"')
_DOT_NODE = re.compile(r"^\s*(\w+)\s*\[shape=(\w+)\];", re.MULTILINE)
_DOT_EDGE = re.compile(r'^\s*(\w+)\s*->\s*(\w+)\s*\[label="(\d+)"\];', re.MULTILINE)


def parse_dot(text: str) -> WhGraph:
    """
    Parses the DOT dialect written by export_dot back into a graph.
    Args:
        text: DOT text

    Returns:
        WhGraph: graph with the same nodes, initial node and edges
    """
    title = _DOT_TITLE.search(text)
    if title is None:
        raise ValueError("DOT text carries no K(r,s) title")
    constraint = WhConstraint(int(title.group(1)), int(title.group(2)))
    nodes, initial = [], None
    for name, shape in _DOT_NODE.findall(text):
        nodes.append(name)
        if shape == "doublecircle":
            initial = name
    if not nodes:
        raise ValueError("DOT text declares no nodes")
    edges = [(v, int(label), w) for v, w, label in _DOT_EDGE.findall(text)]
    return WhGraph(constraint, nodes, initial or nodes[0], edges)
