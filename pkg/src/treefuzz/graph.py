"""API dependency graph for the baseline generation strategies.

Edges connect a producer operation to a consumer when some field of the
producer's success response matches (by the same name folding used
everywhere else) a required parameter of the consumer. This is the classic
graph model the tree traversal is compared against; it is deliberately
dense and includes fake producers.
"""

import logging
from collections import deque
from dataclasses import dataclass, field

from .matching import AnnotationTable, MatchScoreStore, normalize
from .openapi import ApiSpec

log = logging.getLogger(__name__)

OpKey = tuple[str, str]


@dataclass(frozen=True)
class DepEdge:
    producer: OpKey
    consumer: OpKey
    field: str  # producer response field (dot-path)
    param: str  # consumer required parameter


@dataclass
class DependencyGraph:
    ops: list[OpKey] = field(default_factory=list)
    edges: list[DepEdge] = field(default_factory=list)

    def in_edges(self, op: OpKey) -> list[DepEdge]:
        return [e for e in self.edges if e.consumer == op]

    def producers(self, op: OpKey) -> list[DepEdge]:
        return self.in_edges(op)


def _leaf(field_name: str) -> str:
    return field_name.rsplit(".", 1)[-1]


def build_dependency_graph(spec: ApiSpec, table: AnnotationTable | None = None) -> DependencyGraph:
    """Match every response field against every required parameter.

    Both sides are first resolved through the annotation table, then folded
    with the standard normalization, so the graph and the tree strategy use
    identical matching. Self-edges are dropped.
    """
    table = table or AnnotationTable()
    graph = DependencyGraph(ops=[op.key for op in spec.operations])
    produced: list[tuple[OpKey, str, str]] = []
    for op in spec.operations:
        for field_name, _type in op.response_fields:
            identity = normalize(table.resolve(_leaf(field_name)))
            produced.append((op.key, field_name, identity))

    for op in spec.operations:
        for param in op.required_params:
            want = normalize(table.resolve(param.name))
            for producer, field_name, identity in produced:
                if producer == op.key:
                    continue
                if identity == want:
                    graph.edges.append(DepEdge(producer, op.key, field_name, param.name))
    return graph


def topological_order(
    graph: DependencyGraph, scores: MatchScoreStore | None = None
) -> tuple[list[OpKey], list[DepEdge]]:
    """Kahn's algorithm over the dependency graph.

    Cycles are broken by repeatedly dropping the lowest-score edge inside
    the stuck remainder (deterministic tie-break on the edge tuple); all
    dropped edges are returned and logged as a warning.
    """
    ops = list(graph.ops)
    edges = set(graph.edges)
    dropped: list[DepEdge] = []
    order: list[OpKey] = []
    remaining = set(ops)

    def edge_score(edge: DepEdge) -> float:
        if scores is None:
            return 0.5
        return scores.score(edge.param, edge.field)

    while remaining:
        indegree = {op: 0 for op in remaining}
        for e in edges:
            if e.consumer in remaining and e.producer in remaining:
                indegree[e.consumer] += 1
        ready = [op for op in ops if op in remaining and indegree[op] == 0]
        if not ready:
            stuck = [e for e in edges if e.consumer in remaining and e.producer in remaining]
            victim = min(stuck, key=lambda e: (edge_score(e), e.producer, e.consumer, e.param, e.field))
            edges.discard(victim)
            dropped.append(victim)
            continue
        for op in ready:
            order.append(op)
            remaining.discard(op)

    if dropped:
        listing = "; ".join(f"{e.producer}->{e.consumer} ({e.field}/{e.param})" for e in dropped)
        log.warning("cyclic dependencies, dropped edges: %s", listing)
    return order, dropped


def bfs_order(graph: DependencyGraph) -> list[OpKey]:
    """Breadth-first order from the zero-in-degree operations.

    Operations never discovered (stuck in cycles) are appended last in
    declaration order so every operation is still attempted.
    """
    indegree = {op: 0 for op in graph.ops}
    for e in graph.edges:
        if e.consumer in indegree and e.producer in indegree:
            indegree[e.consumer] += 1
    queue = deque(op for op in graph.ops if indegree[op] == 0)
    seen = set(queue)
    order = []
    consumers: dict[OpKey, list[OpKey]] = {op: [] for op in graph.ops}
    for e in graph.edges:
        consumers.setdefault(e.producer, []).append(e.consumer)
    while queue:
        op = queue.popleft()
        order.append(op)
        for nxt in consumers.get(op, []):
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    order.extend(op for op in graph.ops if op not in seen)
    return order
