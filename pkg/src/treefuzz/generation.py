"""Test-case generation strategies.

The tree strategy walks the endpoint forest in pre-order and exercises
each node's methods through a fixed template: one GET first, a handful of
POSTs so created resources survive the later destructive calls, then PUT,
then DELETE. Parameter values come from the resource pool via name
matching when possible and from a small fuzz engine otherwise. Optional
parameters are escalated level by level, keeping only combinations built
from previously successful ones.

Two graph-based baselines (breadth-first sequences and a topological pass
with a flat value buffer) share the same matching rules so comparisons
isolate the traversal strategy.
"""

import string
from dataclasses import dataclass, field
from random import Random
from typing import Any, Iterator

from .graph import DepEdge, OpKey, bfs_order, build_dependency_graph, topological_order
from .matching import AnnotationTable, MatchScoreStore, fuzzy_match, normalize
from .openapi import ApiOperation, ApiSpec, ParamSpec
from .pool import ResourcePool
from .tree import ApiForest, TreeNode, dfs_order

SOURCE_POOL = "pool"
SOURCE_FUZZ = "fuzz"
SOURCE_CONSTANT = "constant"

DEFAULT_UNIQUENESS = ("name", "path", "title", "slug", "username", "email")


@dataclass
class GenerationConfig:
    k_min: int = 2
    k_max: int = 5
    include_patch: bool = False
    int_low: int = -(2**31)
    int_high: int = 2**31  # exclusive
    uniqueness_params: tuple[str, ...] = DEFAULT_UNIQUENESS
    unique_suffix_prob: float = 0.8
    default_value_prob: float = 0.5
    ordered_pairs: bool = False  # emit both orderings of level-2 optional pairs


@dataclass
class Binding:
    value: Any
    source: str  # pool | fuzz | constant
    pair: tuple[str, str] | None = None  # (param name, matched resource id)


@dataclass
class TestCase:
    operation: ApiOperation
    node_id: int
    bindings: dict[str, Binding]
    optional_set: frozenset[str] = frozenset()
    round_no: int = 0

    def to_dict(self) -> dict:
        return {
            "path": self.operation.path,
            "method": self.operation.method,
            "round": self.round_no,
            "optional": sorted(self.optional_set),
            "bindings": {
                name: {"value": b.value, "source": b.source}
                for name, b in self.bindings.items()
            },
        }


class LastResult:
    """Mutable handle through which strategies observe execution outcomes."""

    def __init__(self):
        self.value = None  # ExecutionResult of the most recent case


class MethodTemplate:
    """Per-node method order: GET, then POSTs, then PUT (PATCH), DELETE."""

    def __init__(self, include_patch: bool = False):
        self.sequence = ["GET", "POST", "PUT"]
        if include_patch:
            self.sequence.append("PATCH")
        self.sequence.append("DELETE")

    def order(self, methods) -> list[str]:
        return [m for m in self.sequence if m in methods]


def draw_post_count(rng: Random, config: GenerationConfig) -> int:
    """The number of POSTs per node this round; at least two so one
    resource survives a DELETE."""
    return rng.randint(config.k_min, config.k_max)


_ASCII = string.ascii_letters + string.digits
_UNICODE_RANGES = ((0x00C0, 0x024F), (0x0391, 0x03C9), (0x4E00, 0x4FFF))


def fuzz_value(spec: ParamSpec, rng: Random, config: GenerationConfig | None = None) -> Any:
    """A random value matching the parameter's declared type."""
    config = config or GenerationConfig()
    kind = spec.value_type
    if kind == "integer":
        return rng.randrange(config.int_low, config.int_high)
    if kind == "number":
        return round(rng.uniform(config.int_low, config.int_high), 6)
    if kind == "boolean":
        return rng.random() < 0.5
    if kind == "object":
        return {_random_text(rng, 1, 8, unicode_ok=False): _random_text(rng, 1, 8)}
    return _random_text(rng, 1, 32)


def _random_text(rng: Random, low: int, high: int, unicode_ok: bool = True) -> str:
    length = rng.randint(low, high)
    if unicode_ok and rng.random() < 0.15:
        lo, hi = rng.choice(_UNICODE_RANGES)
        return "".join(chr(rng.randint(lo, hi)) for _ in range(length))
    return "".join(rng.choice(_ASCII) for _ in range(length))


class EscalationState:
    """Optional-parameter escalation for one operation.

    Level 1 tries each optional parameter alone; level L+1 tries every
    size-(L+1) union of the level-L successes. Escalation stops for good
    once a level yields no successes or no candidate sets can be formed.
    """

    def __init__(self, optional_names, ordered_pairs: bool = False):
        self.optional_names = tuple(optional_names)
        self.ordered_pairs = ordered_pairs
        self.level = 1
        self.successful_singletons: set[str] = set()
        self.successes_by_level: dict[int, list[frozenset]] = {}
        self.exhausted = not self.optional_names
        self._pending: list[frozenset] = [frozenset({n}) for n in self.optional_names]
        self._results: dict[frozenset, bool] = {}

    def current_sets(self) -> list[frozenset]:
        if self.exhausted:
            return []
        if self.level == 2 and self.ordered_pairs:
            return [s for s in self._pending for _ in range(2)]
        return list(self._pending)

    def record(self, optional_set: frozenset, success: bool) -> None:
        if self.exhausted or optional_set not in self._pending:
            return
        self._results[optional_set] = self._results.get(optional_set, False) or success

    def advance(self) -> None:
        """Move to the next level once every pending set has a result."""
        if self.exhausted:
            return
        if any(s not in self._results for s in self._pending):
            return
        successes = [s for s in self._pending if self._results[s]]
        self.successes_by_level[self.level] = successes
        if self.level == 1:
            self.successful_singletons = {next(iter(s)) for s in successes}
        if not successes:
            self.exhausted = True
            return
        self._pending = _next_level_sets(successes, self.level + 1)
        self._results = {}
        if not self._pending:
            self.exhausted = True
            return
        self.level += 1


def _next_level_sets(successes: list[frozenset], size: int) -> list[frozenset]:
    out = []
    for i, a in enumerate(successes):
        for b in successes[i + 1:]:
            union = a | b
            if len(union) == size and union not in out:
                out.append(union)
    out.sort(key=lambda s: tuple(sorted(s)))
    return out


def _is_unique_sensitive(param: ParamSpec, config: GenerationConfig) -> bool:
    wanted = {normalize(n) for n in config.uniqueness_params}
    return normalize(param.name) in wanted


def bind_param(
    param: ParamSpec,
    node: TreeNode,
    method: str,
    pool: ResourcePool,
    table: AnnotationTable,
    scores: MatchScoreStore,
    rng: Random,
    config: GenerationConfig,
    used_tuples: list | None = None,
) -> Binding:
    """Resolve one parameter: annotation lookup, fuzzy pool match, then
    documented default or fuzzed value as fallbacks.

    `used_tuples` carries the pool tuples already drawn for this request,
    so related values (say an owner id and a child name) stay consistent.
    """
    resource_id = table.resolve(param.name)
    matched = fuzzy_match(resource_id, node, pool, scores, rng, param_name=param.name)
    if matched is not None:
        entry = pool.retrieve_entry(matched, node, rng, prefer=tuple(used_tuples or ()))
        if entry is not None:
            value, owner = entry
            if used_tuples is not None:
                used_tuples.append(owner)
            scores.get_or_create(param.name, matched)
            if method == "POST" and _is_unique_sensitive(param, config):
                # reusing e.g. an existing name mostly trips duplicate checks;
                # suffix it usually, keep it verbatim sometimes
                if rng.random() < config.unique_suffix_prob:
                    value = f"{value}-{_random_text(rng, 4, 4, unicode_ok=False)}"
            return Binding(value, SOURCE_POOL, (param.name, matched))
    if param.default is not None and rng.random() < config.default_value_prob:
        return Binding(param.default, SOURCE_CONSTANT)
    return Binding(fuzz_value(param, rng, config), SOURCE_FUZZ)


class Strategy:
    name = "base"

    def generate_round(self, round_no: int) -> Iterator[TestCase]:
        raise NotImplementedError

    def finish_round(self) -> None:
        pass

    def escalation_levels(self) -> dict[int, int]:
        """Operations per current escalation level, for reporting."""
        return {}


class TreeStrategy(Strategy):
    name = "tree"

    def __init__(
        self,
        spec: ApiSpec,
        forest: ApiForest,
        table: AnnotationTable,
        pool: ResourcePool,
        scores: MatchScoreStore,
        config: GenerationConfig,
        rng: Random,
        feedback: LastResult,
    ):
        self.spec = spec
        self.forest = forest
        self.table = table
        self.pool = pool
        self.scores = scores
        self.config = config
        self.rng = rng
        self.feedback = feedback
        self.template = MethodTemplate(include_patch=config.include_patch)
        self.escalation: dict[OpKey, EscalationState] = {}

    def _state(self, op: ApiOperation) -> EscalationState:
        state = self.escalation.get(op.key)
        if state is None:
            state = EscalationState(
                [p.name for p in op.optional_params],
                ordered_pairs=self.config.ordered_pairs,
            )
            self.escalation[op.key] = state
        return state

    def _case(self, op: ApiOperation, node: TreeNode, optional_set: frozenset, round_no: int) -> TestCase:
        bindings: dict[str, Binding] = {}
        used_tuples: list = []
        for param in op.required_params:
            bindings[param.name] = bind_param(
                param, node, op.method, self.pool, self.table, self.scores,
                self.rng, self.config, used_tuples,
            )
        for param in op.optional_params:
            if param.name in optional_set:
                bindings[param.name] = bind_param(
                    param, node, op.method, self.pool, self.table, self.scores,
                    self.rng, self.config, used_tuples,
                )
        return TestCase(op, node.node_id, bindings, optional_set, round_no)

    def generate_round(self, round_no: int, include_optionals: bool = True) -> Iterator[TestCase]:
        for node in dfs_order(self.forest):
            methods = self.template.order(node.methods)
            if not methods:
                continue
            post_count = draw_post_count(self.rng, self.config)
            for method in methods:
                op = node.methods[method]
                repeats = post_count if method == "POST" else 1
                for _ in range(repeats):
                    yield self._case(op, node, frozenset(), round_no)
                if not include_optionals:
                    continue
                state = self._state(op)
                for optional_set in state.current_sets():
                    yield self._case(op, node, optional_set, round_no)
                    self._observe(state, optional_set)

    def generate_basic_round(self, round_no: int) -> Iterator[TestCase]:
        """Required parameters only: at most (post_count + 3) cases per API."""
        return self.generate_round(round_no, include_optionals=False)

    def _observe(self, state: EscalationState, optional_set: frozenset) -> None:
        result = self.feedback.value
        if result is None or result.status_code is None:
            return
        state.record(optional_set, result.succeeded)

    def finish_round(self) -> None:
        for state in self.escalation.values():
            state.advance()

    def escalation_levels(self) -> dict[int, int]:
        levels: dict[int, int] = {}
        for state in self.escalation.values():
            if not state.exhausted:
                levels[state.level] = levels.get(state.level, 0) + 1
        return levels


class _GraphStrategy(Strategy):
    def __init__(
        self,
        spec: ApiSpec,
        forest: ApiForest,
        table: AnnotationTable,
        scores: MatchScoreStore,
        config: GenerationConfig,
        rng: Random,
        feedback: LastResult,
    ):
        self.spec = spec
        self.table = table
        self.config = config
        self.rng = rng
        self.feedback = feedback
        self.ops = {op.key: op for op in spec.operations}
        self.op_nodes = forest.operation_nodes()
        self.graph = build_dependency_graph(spec, table)
        self.scores = scores

    def _matches(self, field_name: str, want: str) -> bool:
        leaf = field_name.rsplit(".", 1)[-1]
        return normalize(self.table.resolve(leaf)) == want

    def _bind_from(self, op: ApiOperation, values: dict[str, list], round_no: int) -> TestCase:
        bindings: dict[str, Binding] = {}
        for param in op.required_params:
            want = normalize(self.table.resolve(param.name))
            candidates = [
                v
                for name, held in values.items()
                if self._matches(name, want)
                for v in held
            ]
            if candidates:
                bindings[param.name] = Binding(self.rng.choice(candidates), SOURCE_POOL)
            else:
                bindings[param.name] = Binding(fuzz_value(param, self.rng, self.config), SOURCE_FUZZ)
        node = self.op_nodes[op.key]
        return TestCase(op, node.node_id, bindings, frozenset(), round_no)

    def _harvest(self, values: dict[str, list], limit: int = 64) -> None:
        result = self.feedback.value
        if result is None or not result.succeeded:
            return
        for tup in result.extracted:
            for name, value in tup.items():
                bucket = values.setdefault(name, [])
                bucket.append(value)
                if len(bucket) > limit:
                    bucket.pop(0)


class BfsStrategy(_GraphStrategy):
    """Breadth-first request sequences over the dependency graph.

    Each target operation gets one sequence per round: a producer chain
    walked backward through randomly chosen in-edges, replayed from the
    root. Values only flow within a sequence, never across them.
    """

    name = "bfs"
    MAX_CHAIN = 8

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.order = bfs_order(self.graph)
        self._in_edges: dict[OpKey, list[DepEdge]] = {}
        for edge in self.graph.edges:
            self._in_edges.setdefault(edge.consumer, []).append(edge)

    def _chain_for(self, key: OpKey) -> list[OpKey]:
        chain = [key]
        seen = {key}
        current = key
        while len(chain) < self.MAX_CHAIN:
            producers = [e for e in self._in_edges.get(current, []) if e.producer not in seen]
            if not producers:
                break
            edge = self.rng.choice(producers)
            current = edge.producer
            seen.add(current)
            chain.append(current)
        chain.reverse()
        return chain

    def generate_round(self, round_no: int) -> Iterator[TestCase]:
        for key in self.order:
            scratch: dict[str, list] = {}
            for step in self._chain_for(key):
                yield self._bind_from(self.ops[step], scratch, round_no)
                self._harvest(scratch)


class TopoStrategy(_GraphStrategy):
    """One topological pass per round, with a flat value buffer.

    Values extracted from successful responses accumulate in a single
    name-keyed buffer reused by every later request.
    """

    name = "topo"

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.order, self.dropped_edges = topological_order(self.graph, self.scores)
        self.buffer: dict[str, list] = {}

    def generate_round(self, round_no: int) -> Iterator[TestCase]:
        for key in self.order:
            yield self._bind_from(self.ops[key], self.buffer, round_no)
            self._harvest(self.buffer)
