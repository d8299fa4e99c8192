"""Resource-name resolution: annotation table, fuzzy matching, pair scores.

Arbitrary parameter and field names are folded onto unified resource
identities two ways: an optional user-supplied annotation table maps alias
sets onto a canonical id, and a normalization rule (case, spaces,
underscores and hyphens ignored) matches the rest. Every (parameter,
matched resource) pair carries an adaptive score that rises on success and
falls on client errors, so falsely matched pairs get abandoned.
"""

import json
import re
from dataclasses import dataclass, field
from random import Random
from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from .pool import ResourcePool
    from .tree import TreeNode

_FOLDED = re.compile(r"[ _\-]+")


def normalize(name: str) -> str:
    """Lowercase and drop spaces, underscores and hyphens."""
    return _FOLDED.sub("", name.strip().lower())


def names_match(field_name: str, resource_id: str) -> bool:
    """True when a pool field name denotes the requested resource.

    Dot-paths from nested extraction also match on their leaf segment.
    """
    want = normalize(resource_id)
    if normalize(field_name) == want:
        return True
    if "." in field_name:
        return normalize(field_name.rsplit(".", 1)[1]) == want
    return False


@dataclass
class ResourceIdentity:
    canonical_id: str
    names: set[str]


class AnnotationTable:
    """User-supplied alias sets mapping arbitrary names to canonical ids."""

    def __init__(self, entries: list[ResourceIdentity] | None = None):
        self.entries: list[ResourceIdentity] = []
        self._index: dict[str, str] = {}
        for entry in entries or []:
            self.add(entry.canonical_id, entry.names)

    def add(self, canonical_id: str, names: set[str]) -> None:
        names = set(names) | {canonical_id}
        folded = {normalize(n) for n in names}
        clash = folded & set(self._index)
        if clash:
            raise ValueError(f"alias set overlaps an existing entry: {sorted(clash)}")
        self.entries.append(ResourceIdentity(canonical_id, names))
        for key in folded:
            self._index[key] = canonical_id

    def resolve(self, param_name: str) -> str:
        """Canonical id for the name, or the name unchanged if unannotated."""
        return self._index.get(normalize(param_name), param_name)


def load_annotations(path: str) -> AnnotationTable:
    """Load an annotation file: a JSON list of {"id": ..., "names": [...]}."""
    with open(path, encoding="utf-8") as handle:
        raw = json.load(handle)
    if not isinstance(raw, list):
        raise ValueError("annotation file must be a JSON list")
    table = AnnotationTable()
    for item in raw:
        if not isinstance(item, dict) or "id" not in item:
            raise ValueError(f"bad annotation entry: {item!r}")
        table.add(str(item["id"]), {str(n) for n in item.get("names", [])})
    return table


@dataclass
class MatchConfig:
    initial_score: float = 0.5
    delta_up: float = 0.1
    delta_down: float = 0.2
    threshold: float = 0.2
    epsilon: float = 0.1  # chance fuzzy matching abstains even on a hit


@dataclass
class MatchPair:
    param_name: str
    resource_id: str
    score: float
    uses: int = 0
    successes: int = 0

    @property
    def key(self) -> tuple[str, str]:
        return (self.param_name, self.resource_id)


class MatchScoreStore:
    """All pairs ever used, with their adaptive scores."""

    def __init__(self, config: MatchConfig | None = None):
        self.config = config or MatchConfig()
        self.pairs: dict[tuple[str, str], MatchPair] = {}

    def get_or_create(self, param_name: str, resource_id: str) -> MatchPair:
        key = (param_name, resource_id)
        pair = self.pairs.get(key)
        if pair is None:
            pair = MatchPair(param_name, resource_id, self.config.initial_score)
            self.pairs[key] = pair
        return pair

    def score(self, param_name: str, resource_id: str) -> float:
        pair = self.pairs.get((param_name, resource_id))
        return pair.score if pair is not None else self.config.initial_score

    def increase_score(self, pair: MatchPair) -> MatchPair:
        # rounded so repeated float steps cannot drift across the threshold
        pair.score = round(min(1.0, pair.score + self.config.delta_up), 9)
        pair.uses += 1
        pair.successes += 1
        return pair

    def decrease_score(self, pair: MatchPair) -> MatchPair:
        pair.score = round(max(0.0, pair.score - self.config.delta_down), 9)
        pair.uses += 1
        return pair

    def snapshot(self) -> list[dict]:
        return [
            {
                "param": p.param_name,
                "resource": p.resource_id,
                "score": round(p.score, 6),
                "uses": p.uses,
                "successes": p.successes,
            }
            for p in self.pairs.values()
        ]


def fuzzy_match(
    resource_id: str,
    node: "TreeNode",
    pool: "ResourcePool",
    scores: MatchScoreStore,
    rng: Random,
    param_name: str | None = None,
) -> str | None:
    """Find a pool field name denoting `resource_id` along the ancestor chain.

    Walks the node's token-ancestor chain outward; at the nearest level
    holding any match, returns a uniformly random candidate field whose
    pair score clears the threshold. Independently abstains (returns None)
    with probability epsilon so plain fuzzed values stay in play. None is
    an ordinary outcome, not an error.
    """
    config = scores.config
    if config.epsilon > 0 and rng.random() < config.epsilon:
        return None
    if param_name is None:
        param_name = resource_id
    for level_node in pool.search_chain(node):
        candidates: list[str] = []
        for tup in pool.tuples_at(level_node):
            if not tup.live:
                continue
            for field_name in tup.fields:
                if field_name in candidates:
                    continue
                if not names_match(field_name, resource_id):
                    continue
                if scores.score(param_name, field_name) >= config.threshold:
                    candidates.append(field_name)
        if candidates:
            return rng.choice(candidates)
    return None
