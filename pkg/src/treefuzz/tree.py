"""Endpoint forest construction and traversal.

Splitting every operation path on "/" yields a forest: token nodes carry a
fixed segment, parameter nodes carry an argument name, and each operation
lives as a method attribute on the terminal node of its path. Visiting the
forest in pre-order visits producers before the consumers below them.
"""

import logging
from dataclasses import dataclass, field

from .openapi import ApiOperation, ApiSpec

log = logging.getLogger(__name__)

TOKEN = "token"
PARAM = "param"


@dataclass(eq=False)
class TreeNode:
    kind: str  # TOKEN or PARAM
    label: str  # fixed segment text, or the argument name
    node_id: int = -1
    parent: "TreeNode | None" = None
    methods: dict[str, ApiOperation] = field(default_factory=dict)
    token_children: list["TreeNode"] = field(default_factory=list)
    param_children: list["TreeNode"] = field(default_factory=list)

    @property
    def children(self) -> list["TreeNode"]:
        # token siblings are visited before parameter siblings
        return self.token_children + self.param_children

    @property
    def segment(self) -> str:
        return self.label if self.kind == TOKEN else "{" + self.label + "}"

    def __repr__(self) -> str:
        return f"TreeNode({self.segment}, id={self.node_id})"


@dataclass
class ApiForest:
    roots: list[TreeNode] = field(default_factory=list)
    conflicts: list[str] = field(default_factory=list)

    def nodes(self) -> list[TreeNode]:
        return dfs_order(self)

    def node_for(self, op: ApiOperation) -> TreeNode:
        """The node whose methods include this operation."""
        for node in dfs_order(self):
            if node.methods.get(op.method) == op:
                return node
        raise KeyError(op.key)

    def operation_nodes(self) -> dict[tuple[str, str], TreeNode]:
        out = {}
        for node in dfs_order(self):
            for method, op in node.methods.items():
                out[(op.path, method)] = node
        return out


def _segment_parts(segment: str) -> tuple[str, str]:
    if segment.startswith("{") and segment.endswith("}"):
        return PARAM, segment[1:-1]
    return TOKEN, segment


def build_forest(spec: ApiSpec) -> ApiForest:
    """Organize all operations of a spec into an endpoint forest.

    An edge exists iff the segment adjacency appears in some path; the
    method set of each operation is attached to the terminal node of its
    path. Ambiguous sibling positions (several distinct parameter names
    under one parent) are reported but all siblings are kept.
    """
    forest = ApiForest()
    counter = 0

    def child_for(parent_list: list[TreeNode], roots: list[TreeNode] | None,
                  kind: str, label: str, parent: TreeNode | None) -> TreeNode:
        nonlocal counter
        pool = parent_list if roots is None else roots
        for child in pool:
            if child.kind == kind and child.label == label:
                return child
        node = TreeNode(kind=kind, label=label, node_id=counter, parent=parent)
        counter += 1
        pool.append(node)
        return node

    for op in spec.operations:
        current: TreeNode | None = None
        for segment in op.segments:
            kind, label = _segment_parts(segment)
            if current is None:
                current = child_for([], forest.roots, kind, label, None)
            else:
                target = current.token_children if kind == TOKEN else current.param_children
                current = child_for(target, None, kind, label, current)
        assert current is not None
        current.methods[op.method] = op

    for node in dfs_order(forest):
        if len(node.param_children) > 1:
            labels = ", ".join("{" + c.label + "}" for c in node.param_children)
            message = f"ambiguous parameter position under {endpoint_of(node)}: {labels}"
            forest.conflicts.append(message)
            log.warning("%s", message)

    return forest


def dfs_order(forest: ApiForest) -> list[TreeNode]:
    """Pre-order walk: roots in insertion order, every node after its ancestors."""
    out: list[TreeNode] = []

    def visit(node: TreeNode) -> None:
        out.append(node)
        for child in node.children:
            visit(child)

    for root in forest.roots:
        visit(root)
    return out


def endpoint_of(node: TreeNode) -> str:
    """Reconstruct the endpoint path from the root down to this node."""
    segments = []
    current: TreeNode | None = node
    while current is not None:
        segments.append(current.segment)
        current = current.parent
    return "/" + "/".join(reversed(segments))


def nearest_token_ancestor(node: TreeNode) -> TreeNode:
    """The node itself if it is a token node, else its closest token ancestor."""
    current = node
    while current.kind != TOKEN:
        if current.parent is None:
            log.warning("parameter node %s has no token ancestor", endpoint_of(current))
            return current
        current = current.parent
    return current


def token_chain(node: TreeNode) -> list[TreeNode]:
    """Token nodes from the nearest token ancestor outward to the root."""
    chain = []
    current: TreeNode | None = nearest_token_ancestor(node)
    while current is not None:
        if current.kind == TOKEN or not chain:
            chain.append(current)
        current = current.parent
    return chain


def to_outline(forest: ApiForest) -> str:
    """Plain-text indented rendering of the forest, for debugging."""
    lines = []

    def visit(node: TreeNode, depth: int) -> None:
        methods = ",".join(sorted(node.methods)) if node.methods else ""
        suffix = f"  [{methods}]" if methods else ""
        lines.append("  " * depth + node.segment + suffix)
        for child in node.children:
            visit(child, depth + 1)

    for root in forest.roots:
        visit(root, 0)
    return "\n".join(lines) + ("\n" if lines else "")


def to_dot(forest: ApiForest) -> str:
    """GraphViz DOT rendering of the forest."""
    lines = ["digraph endpoints {", "  node [shape=box];"]
    for node in dfs_order(forest):
        methods = ",".join(sorted(node.methods))
        label = node.segment + (f"\\n{methods}" if methods else "")
        shape = ' shape=ellipse' if node.kind == PARAM else ""
        lines.append(f'  n{node.node_id} [label="{label}"{shape}];')
        if node.parent is not None:
            lines.append(f"  n{node.parent.node_id} -> n{node.node_id};")
    lines.append("}")
    return "\n".join(lines) + "\n"
