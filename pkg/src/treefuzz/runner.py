"""Campaign orchestration: preparation, the fuzzing loop, and metrics.

A run parses the spec, builds the endpoint forest and annotation table,
then alternates strictly between generating one test case and executing
it until the time budget (or an explicit round/request cap) is reached.
Everything random flows through one seeded generator, so a seed plus a
config reproduces the exact request stream against a deterministic target.
"""

import json
import logging
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from random import Random

from .execution import (
    BugReporter,
    ExecutionResult,
    HttpRequest,
    RequestsClient,
    ResultProcessor,
    TokenBucket,
    compose_request,
    execute_and_classify,
)
from .generation import (
    BfsStrategy,
    GenerationConfig,
    LastResult,
    Strategy,
    TestCase,
    TopoStrategy,
    TreeStrategy,
)
from .matching import AnnotationTable, MatchConfig, MatchScoreStore, load_annotations
from .mockservice import MockClient, ProjectService
from .openapi import ApiSpec, parse_spec
from .pool import DEFAULT_CAPACITY, ResourcePool
from .tree import ApiForest, build_forest, to_dot, to_outline

log = logging.getLogger(__name__)

STRATEGIES = ("tree", "bfs", "topo")

WALL_SAMPLE_SECONDS = 5.0


class ConfigError(Exception):
    """The run configuration cannot be executed."""


@dataclass
class RunConfig:
    spec_path: str | None = None
    base_url: str = "http://mock.local"
    strategy: str = "tree"
    duration: float = 60.0
    rate_per_minute: float = 300.0
    seed: int = 0
    k_min: int = 2
    k_max: int = 5
    delta_up: float = 0.1
    delta_down: float = 0.2
    threshold: float = 0.2
    epsilon: float = 0.1
    initial_score: float = 0.5
    annotations_path: str | None = None
    uniqueness_params: tuple[str, ...] = GenerationConfig.uniqueness_params
    report_dir: str | None = None
    auth_env: str | None = None
    use_mock: bool = False
    format_hint: str = "auto"
    timeout: float = 10.0
    pool_capacity: int = DEFAULT_CAPACITY
    include_patch: bool = False
    ordered_pairs: bool = False
    timeseries: bool = False
    dump_pool: bool = False
    export_tree: bool = False
    cases_path: str | None = None
    max_rounds: int | None = None
    max_requests: int | None = None
    stop_on_full_activation: bool = False


def _validate(config: RunConfig) -> None:
    if config.duration <= 0:
        raise ConfigError("duration must be positive")
    if config.rate_per_minute <= 0:
        raise ConfigError("rate must be positive")
    if not (1 <= config.k_min <= config.k_max <= 16):
        raise ConfigError("k range must satisfy 1 <= k_min <= k_max <= 16")
    if config.strategy not in STRATEGIES:
        raise ConfigError(f"unknown strategy {config.strategy!r}")
    if not config.use_mock and not config.spec_path:
        raise ConfigError("a spec file is required unless the embedded mock is used")


@dataclass
class RunMetrics:
    strategy: str
    seed: int
    total_operations: int
    requests_sent: int = 0
    status_counts: dict[str, int] = field(default_factory=dict)
    activated: set = field(default_factory=set)
    attempted: set = field(default_factory=set)
    bugs_total: int = 0
    bugs_unique: int = 0
    rounds_completed: int = 0
    rounds: list[dict] = field(default_factory=list)
    activation_by_request: list[tuple[int, int]] = field(default_factory=list)
    requests_to_full_activation: int | None = None
    wall_series: list[tuple[float, int, int]] = field(default_factory=list)
    config_echo: dict = field(default_factory=dict)

    def observe(self, case: TestCase, result: ExecutionResult) -> None:
        self.requests_sent += 1
        self.status_counts[result.status_class] = self.status_counts.get(result.status_class, 0) + 1
        key = case.operation.key
        self.attempted.add(key)
        if result.status_class == "2xx" and key not in self.activated:
            self.activated.add(key)
            self.activation_by_request.append((self.requests_sent, len(self.activated)))
            if len(self.activated) == self.total_operations and self.requests_to_full_activation is None:
                self.requests_to_full_activation = self.requests_sent

    @property
    def fully_activated(self) -> bool:
        return len(self.activated) == self.total_operations

    def to_json_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "seed": self.seed,
            "total_operations": self.total_operations,
            "requests_sent": self.requests_sent,
            "status_counts": dict(sorted(self.status_counts.items())),
            "activated": len(self.activated),
            "attempted": len(self.attempted),
            "activated_operations": sorted(f"{m} {p}" for p, m in self.activated),
            "bugs_total": self.bugs_total,
            "bugs_unique": self.bugs_unique,
            "rounds_completed": self.rounds_completed,
            "rounds": self.rounds,
            "activation_by_request": [list(point) for point in self.activation_by_request],
            "requests_to_full_activation": self.requests_to_full_activation,
            "config": self.config_echo,
        }


@dataclass
class RunResult:
    metrics: RunMetrics
    reporter: BugReporter
    scores: MatchScoreStore
    pool: ResourcePool
    strategy: Strategy
    forest: ApiForest
    spec: ApiSpec


def _config_echo(config: RunConfig) -> dict:
    return {
        "strategy": config.strategy,
        "seed": config.seed,
        "duration": config.duration,
        "rate_per_minute": config.rate_per_minute,
        "k_min": config.k_min,
        "k_max": config.k_max,
        "delta_up": config.delta_up,
        "delta_down": config.delta_down,
        "threshold": config.threshold,
        "epsilon": config.epsilon,
    }


def _make_strategy(config: RunConfig, spec, forest, table, pool, scores, rng, feedback) -> Strategy:
    gen_config = GenerationConfig(
        k_min=config.k_min,
        k_max=config.k_max,
        include_patch=config.include_patch,
        uniqueness_params=tuple(config.uniqueness_params),
        ordered_pairs=config.ordered_pairs,
    )
    if config.strategy == "tree":
        return TreeStrategy(spec, forest, table, pool, scores, gen_config, rng, feedback)
    if config.strategy == "bfs":
        return BfsStrategy(spec, forest, table, scores, gen_config, rng, feedback)
    return TopoStrategy(spec, forest, table, scores, gen_config, rng, feedback)


def _probe(client, base_url: str) -> None:
    import requests

    try:
        client.send(HttpRequest(method="GET", url=base_url))
    except requests.RequestException as exc:
        raise ConfigError(f"target {base_url} unreachable: {exc}") from exc


def run(config: RunConfig, service=None) -> RunResult:
    """Execute one fuzzing campaign and write the configured reports.

    `service` optionally injects a mock service instance (faults and all);
    when omitted and `use_mock` is set, a fresh ProjectService is used.
    """
    _validate(config)

    if config.use_mock or service is not None:
        service = service or ProjectService()
        document = json.dumps(service.document())
        client = MockClient(service)
    else:
        document = Path(config.spec_path).read_text(encoding="utf-8")
        client = RequestsClient(timeout=config.timeout)

    spec = parse_spec(document, config.format_hint)
    forest = build_forest(spec)
    table = load_annotations(config.annotations_path) if config.annotations_path else AnnotationTable()
    match_config = MatchConfig(
        initial_score=config.initial_score,
        delta_up=config.delta_up,
        delta_down=config.delta_down,
        threshold=config.threshold,
        epsilon=config.epsilon,
    )
    scores = MatchScoreStore(match_config)
    pool = ResourcePool(capacity=config.pool_capacity)
    rng = Random(config.seed)
    feedback = LastResult()
    strategy = _make_strategy(config, spec, forest, table, pool, scores, rng, feedback)

    if not isinstance(client, MockClient):
        _probe(client, config.base_url)

    report_dir = Path(config.report_dir) if config.report_dir else None
    bug_sink = None
    if report_dir is not None:
        report_dir.mkdir(parents=True, exist_ok=True)
        bug_sink = str(report_dir / "bugs.jsonl")
        Path(bug_sink).write_text("", encoding="utf-8")
    reporter = BugReporter(seed=config.seed, sink_path=bug_sink)
    processor = ResultProcessor(pool, scores, reporter, forest.operation_nodes())
    limiter = TokenBucket(config.rate_per_minute)
    metrics = RunMetrics(
        strategy=config.strategy,
        seed=config.seed,
        total_operations=len(spec.operations),
        config_echo=_config_echo(config),
    )

    auth_token = os.environ.get(config.auth_env) if config.auth_env else None
    cases_sink = open(config.cases_path, "w", encoding="utf-8") if config.cases_path else None

    if report_dir is not None and config.export_tree:
        (report_dir / "tree.txt").write_text(to_outline(forest), encoding="utf-8")
        (report_dir / "tree.dot").write_text(to_dot(forest), encoding="utf-8")

    started = time.monotonic()
    deadline = started + config.duration
    last_sample = started
    stop = False
    round_no = 0

    def sample_wall(force: bool = False) -> None:
        nonlocal last_sample
        now = time.monotonic()
        if force or now - last_sample >= WALL_SAMPLE_SECONDS:
            metrics.wall_series.append(
                (round(now - started, 3), metrics.requests_sent, len(metrics.activated))
            )
            last_sample = now

    sample_wall(force=True)
    try:
        while not stop and time.monotonic() < deadline:
            if config.max_rounds is not None and round_no >= config.max_rounds:
                break
            round_no += 1
            requests_before = metrics.requests_sent
            activated_before = len(metrics.activated)
            for case in strategy.generate_round(round_no):
                if time.monotonic() >= deadline:
                    stop = True
                    break
                if config.max_requests is not None and metrics.requests_sent >= config.max_requests:
                    stop = True
                    break
                request = compose_request(case, config.base_url, spec.base_path, auth_token)
                result = execute_and_classify(request, client, limiter, case)
                processor.process(case, request, result)
                feedback.value = result
                activated_snapshot = len(metrics.activated)
                metrics.observe(case, result)
                if cases_sink is not None:
                    cases_sink.write(json.dumps(case.to_dict(), sort_keys=True) + "\n")
                sample_wall(force=len(metrics.activated) > activated_snapshot)
                if config.stop_on_full_activation and metrics.fully_activated:
                    stop = True
                    break
            strategy.finish_round()
            metrics.rounds_completed = round_no
            metrics.rounds.append(
                {
                    "round": round_no,
                    "requests": metrics.requests_sent - requests_before,
                    "new_activations": len(metrics.activated) - activated_before,
                    "escalation_levels": {
                        str(k): v for k, v in sorted(strategy.escalation_levels().items())
                    },
                }
            )
    finally:
        if cases_sink is not None:
            cases_sink.close()

    sample_wall(force=True)
    metrics.bugs_total = reporter.total
    metrics.bugs_unique = reporter.unique

    if report_dir is not None:
        from . import report

        report.write_metrics(metrics, report_dir / "metrics.json")
        if config.timeseries:
            report.write_timeseries_csv(metrics, report_dir / "timeseries.csv")
            report.render_activation_plot(metrics, report_dir / "activation.png")
        if config.dump_pool:
            (report_dir / "pool.json").write_text(
                json.dumps(pool.snapshot(), indent=2, sort_keys=True, default=str),
                encoding="utf-8",
            )

    return RunResult(metrics, reporter, scores, pool, strategy, forest, spec)
