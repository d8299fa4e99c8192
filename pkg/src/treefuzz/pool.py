"""Hierarchical resource pool mirroring the endpoint forest.

Values harvested from successful requests are kept together as tuples
(only the combination is known-valid) in one sub-pool per token node.
Retrieval walks the requesting node's token-ancestor chain outward, so the
nearest resources win, and prefers values produced by POST/PUT over values
merely echoed by GET.
"""

from dataclasses import dataclass, field
from random import Random
from typing import Any

from .matching import names_match, normalize
from .tree import TreeNode, token_chain

Scalar = str | int | float | bool

CREATING_METHODS = ("POST", "PUT")

DEFAULT_CAPACITY = 128


@dataclass
class ResourceTuple:
    """Fields from one successful request/response, stored together."""

    fields: dict[str, Scalar]
    origin_method: str
    origin_node: int
    sequence_no: int = 0
    live: bool = True


@dataclass
class ResourcePool:
    capacity: int = DEFAULT_CAPACITY
    sub_pools: dict[int, list[ResourceTuple]] = field(default_factory=dict)
    _nodes: dict[int, TreeNode] = field(default_factory=dict)
    _sequence: int = 0

    def add(self, node: TreeNode, tup: ResourceTuple) -> None:
        """Append a tuple to the sub-pool of the node's nearest token ancestor.

        Oldest tuples are evicted once a sub-pool exceeds its capacity.
        """
        if not tup.fields:
            return
        owner = token_chain(node)[0]
        self._nodes[owner.node_id] = owner
        self._sequence += 1
        tup.sequence_no = self._sequence
        bucket = self.sub_pools.setdefault(owner.node_id, [])
        bucket.append(tup)
        if len(bucket) > self.capacity:
            oldest = min(range(len(bucket)), key=lambda i: bucket[i].sequence_no)
            bucket.pop(oldest)

    def search_chain(self, node: TreeNode) -> list[TreeNode]:
        return token_chain(node)

    def tuples_at(self, node: TreeNode) -> list[ResourceTuple]:
        return self.sub_pools.get(node.node_id, [])

    def retrieve(self, resource_id: str, node: TreeNode, rng: Random) -> Scalar | None:
        """A random live value for the resource, nearest sub-pool first.

        Within the nearest sub-pool holding a match, values from tuples of
        POST/PUT origin are preferred over GET/DELETE-origin ones.
        """
        entry = self.retrieve_entry(resource_id, node, rng)
        return entry[0] if entry is not None else None

    def retrieve_entry(
        self,
        resource_id: str,
        node: TreeNode,
        rng: Random,
        prefer: tuple[ResourceTuple, ...] = (),
    ) -> tuple[Scalar, ResourceTuple] | None:
        """Like retrieve, but returns the owning tuple as well.

        `prefer` biases the draw toward tuples already used for earlier
        parameters of the same request, so several values bound together
        come from one known-valid combination when possible.
        """
        want = normalize(resource_id)
        prefer_ids = {id(t) for t in prefer}
        for level_node in self.search_chain(node):
            matches: list[tuple[ResourceTuple, str]] = []
            for tup in self.tuples_at(level_node):
                if not tup.live:
                    continue
                for field_name in tup.fields:
                    if normalize(field_name) == want:
                        matches.append((tup, field_name))
            if matches:
                familiar = [m for m in matches if id(m[0]) in prefer_ids]
                if familiar:
                    matches = familiar
                created = [m for m in matches if m[0].origin_method in CREATING_METHODS]
                tup, field_name = rng.choice(created or matches)
                return tup.fields[field_name], tup
        return None

    def invalidate(self, node: TreeNode, field_name: str, value: Any, cascade: bool = True) -> None:
        """Mark dead every tuple in the node's sub-pool carrying field=value.

        With `cascade`, descendant sub-pools are swept too: resources below
        a deleted parent are gone with it, even where they reference the
        parent under a nested name (leaf-name match).
        """
        owner = token_chain(node)[0]
        targets = [owner]
        if cascade:
            stack = list(owner.children)
            while stack:
                child = stack.pop()
                if child.kind == "token":
                    targets.append(child)
                stack.extend(child.children)
        for target in targets:
            for tup in self.tuples_at(target):
                for name, held in tup.fields.items():
                    if names_match(name, field_name) and held == value:
                        tup.live = False
                        break

    def snapshot(self) -> dict:
        """JSON-ready dump of the pool contents, for debugging."""
        out: dict[str, list[dict]] = {}
        for node_id, bucket in self.sub_pools.items():
            node = self._nodes.get(node_id)
            key = f"{node_id}"
            if node is not None:
                from .tree import endpoint_of

                key = endpoint_of(node)
            out[key] = [
                {
                    "fields": dict(t.fields),
                    "origin_method": t.origin_method,
                    "sequence_no": t.sequence_no,
                    "live": t.live,
                }
                for t in bucket
            ]
        return out
