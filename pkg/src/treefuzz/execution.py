"""Request composition, execution, response analysis and bug recording.

Requests are sent strictly one at a time through a token-bucket rate
limiter. Successful responses feed the resource pool and raise the scores
of the name-match pairs that produced them; client errors lower those
scores; every 5XX becomes a bug report with enough context to replay it.
Transport failures are results, never bugs and never exceptions.
"""

import json
import logging
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any
from urllib.parse import quote

import requests

from .generation import SOURCE_FUZZ, SOURCE_POOL, TestCase
from .matching import MatchScoreStore
from .pool import ResourcePool, ResourceTuple, Scalar
from .tree import TreeNode

log = logging.getLogger(__name__)

MAX_ARRAY_TUPLES = 8
EXCERPT_BYTES = 4096
REDACTED_HEADERS = ("authorization", "private-token", "cookie")


class MissingBinding(Exception):
    """A required parameter reached composition without a bound value."""


@dataclass
class HttpRequest:
    method: str
    url: str
    query: dict[str, str] = field(default_factory=dict)
    body: dict[str, Any] | None = None
    headers: dict[str, str] = field(default_factory=dict)


@dataclass
class HttpResponse:
    status_code: int
    body: bytes = b""
    headers: dict[str, str] = field(default_factory=dict)


class RequestsClient:
    """Plain HTTP/1.1 client for real targets; redirects are not followed."""

    def __init__(self, timeout: float = 10.0):
        self.timeout = timeout
        self.session = requests.Session()

    def send(self, request: HttpRequest) -> HttpResponse:
        response = self.session.request(
            request.method,
            request.url,
            params=request.query or None,
            json=request.body,
            headers=request.headers or None,
            timeout=self.timeout,
            allow_redirects=False,
        )
        return HttpResponse(response.status_code, response.content, dict(response.headers))


class TokenBucket:
    """Blocking token bucket; `rate_per_minute` tokens refill per minute."""

    def __init__(self, rate_per_minute: float, capacity: float | None = None,
                 clock=time.monotonic, sleeper=time.sleep):
        if rate_per_minute <= 0:
            raise ValueError("rate must be positive")
        self.rate = rate_per_minute / 60.0
        self.capacity = capacity if capacity is not None else max(1.0, self.rate)
        self.tokens = self.capacity
        self.clock = clock
        self.sleeper = sleeper
        self._last = clock()

    def _refill(self) -> None:
        now = self.clock()
        self.tokens = min(self.capacity, self.tokens + (now - self._last) * self.rate)
        self._last = now

    def acquire(self) -> None:
        self._refill()
        if self.tokens < 1.0:
            self.sleeper((1.0 - self.tokens) / self.rate)
            self._refill()
            self.tokens = max(self.tokens, 1.0)
        self.tokens -= 1.0


def compose_request(case: TestCase, base_url: str, base_path: str = "",
                    auth_token: str | None = None) -> HttpRequest:
    """Build the HTTP request for a test case.

    Path parameters are substituted into the URL template (percent-encoded
    so hostile values cannot change the route), query parameters travel as
    the query string, body parameters as a JSON object.
    """
    locations = {p.name: p.location for p in case.operation.params}
    path = case.operation.path
    query: dict[str, str] = {}
    body: dict[str, Any] = {}
    for name, binding in case.bindings.items():
        where = locations.get(name, "query")
        if where == "path":
            path = path.replace("{" + name + "}", quote(str(binding.value), safe=""))
        elif where == "query":
            query[name] = _query_text(binding.value)
        else:
            body[name] = binding.value
    if "{" in path:
        missing = [p.name for p in case.operation.required_params
                   if p.location == "path" and p.name not in case.bindings]
        raise MissingBinding(f"{case.operation.method} {case.operation.path}: {missing}")
    headers = {}
    if auth_token:
        headers["Authorization"] = f"Bearer {auth_token}"
    send_body: dict[str, Any] | None = None
    if body or case.operation.method in ("POST", "PUT", "PATCH"):
        send_body = body
    return HttpRequest(
        method=case.operation.method,
        url=base_url.rstrip("/") + base_path + path,
        query=query,
        body=send_body,
        headers=headers,
    )


def _query_text(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (dict, list)):
        return json.dumps(value)
    return str(value)


@dataclass
class ExecutionResult:
    status_class: str  # 2xx | 3xx | 4xx | 5xx | transport_error
    status_code: int | None
    latency: float
    body: bytes = b""
    json_body: Any = None
    test_case: TestCase | None = None
    error: str | None = None
    extracted: list[dict[str, Scalar]] = field(default_factory=list)

    @property
    def succeeded(self) -> bool:
        return self.status_class in ("2xx", "3xx")


def classify_status(status_code: int) -> str:
    family = status_code // 100
    if family in (2, 3, 4, 5):
        return f"{family}xx"
    return "other"


def execute_and_classify(request: HttpRequest, client, limiter: TokenBucket | None = None,
                         case: TestCase | None = None) -> ExecutionResult:
    """Send one request and fold every outcome into an ExecutionResult.

    Connection failures and timeouts come back as transport_error results;
    nothing escapes as an exception.
    """
    if limiter is not None:
        limiter.acquire()
    started = time.monotonic()
    try:
        response = client.send(request)
    except requests.RequestException as exc:
        return ExecutionResult(
            status_class="transport_error",
            status_code=None,
            latency=time.monotonic() - started,
            test_case=case,
            error=str(exc) or exc.__class__.__name__,
        )
    latency = time.monotonic() - started
    parsed: Any = None
    if response.body:
        try:
            parsed = json.loads(response.body)
        except (ValueError, UnicodeDecodeError):
            parsed = None
    return ExecutionResult(
        status_class=classify_status(response.status_code),
        status_code=response.status_code,
        latency=latency,
        body=response.body,
        json_body=parsed,
        test_case=case,
    )


def _dig(data: Any, dot_path: str) -> Any:
    current = data
    for part in dot_path.split("."):
        if isinstance(current, list):
            current = current[0] if current else None
        if not isinstance(current, dict):
            return None
        current = current.get(part)
    if isinstance(current, list):
        current = current[0] if current else None
    return current


def _is_scalar(value: Any) -> bool:
    return isinstance(value, (str, int, float, bool))


def extract_tuples(case: TestCase, result: ExecutionResult) -> list[dict[str, Scalar]]:
    """Resource tuples from a successful result.

    Extraction follows the operation's flattened response schema; array
    responses yield one tuple per element (first few elements only). For
    POST/PUT the request's own body values are folded in: the server holds
    them now, so they are resources too.
    """
    op = case.operation
    body_fields: dict[str, Scalar] = {}
    if op.method in ("POST", "PUT", "PATCH"):
        locations = {p.name: p.location for p in op.params}
        for name, binding in case.bindings.items():
            if locations.get(name) == "body" and _is_scalar(binding.value):
                body_fields[name] = binding.value

    elements: list[Any] = []
    if isinstance(result.json_body, list):
        elements = result.json_body[:MAX_ARRAY_TUPLES]
    elif result.json_body is not None:
        elements = [result.json_body]

    tuples: list[dict[str, Scalar]] = []
    for element in elements:
        fields: dict[str, Scalar] = {}
        if isinstance(element, dict):
            for dot_path, _type in op.response_fields:
                value = _dig(element, dot_path)
                if _is_scalar(value):
                    fields[dot_path] = value
        merged = dict(body_fields)
        merged.update(fields)
        if merged:
            tuples.append(merged)
    if not tuples and body_fields:
        tuples.append(dict(body_fields))
    return tuples


@dataclass
class BugReport:
    timestamp: str
    path: str
    method: str
    url: str
    headers: dict[str, str]
    query: dict[str, str]
    body: Any
    status_code: int
    response_excerpt: str
    seed: int
    round_no: int
    duplicate: bool = False

    def to_dict(self) -> dict:
        return {
            "timestamp": self.timestamp,
            "operation": {"path": self.path, "method": self.method},
            "request": {
                "url": self.url,
                "headers": self.headers,
                "query": self.query,
                "body": self.body,
            },
            "status_code": self.status_code,
            "response_excerpt": self.response_excerpt,
            "seed": self.seed,
            "round": self.round_no,
            "duplicate": self.duplicate,
        }


class BugReporter:
    """Collects 5XX findings, deduplicated by (path, method, status)."""

    def __init__(self, seed: int = 0, sink_path: str | None = None):
        self.seed = seed
        self.reports: list[BugReport] = []
        self._seen: set[tuple[str, str, int]] = set()
        self._sink_path = sink_path

    @property
    def total(self) -> int:
        return len(self.reports)

    @property
    def unique(self) -> int:
        return len(self._seen)

    def record(self, case: TestCase, request: HttpRequest, result: ExecutionResult) -> BugReport:
        assert result.status_code is not None and result.status_code >= 500
        key = (case.operation.path, case.operation.method, result.status_code)
        report = BugReport(
            timestamp=datetime.now(timezone.utc).isoformat(),
            path=case.operation.path,
            method=case.operation.method,
            url=request.url,
            headers={k: v for k, v in request.headers.items() if k.lower() not in REDACTED_HEADERS},
            query=dict(request.query),
            body=request.body,
            status_code=result.status_code,
            response_excerpt=result.body[:EXCERPT_BYTES].decode("utf-8", errors="replace"),
            seed=self.seed,
            round_no=case.round_no,
            duplicate=key in self._seen,
        )
        self._seen.add(key)
        self.reports.append(report)
        if self._sink_path:
            with open(self._sink_path, "a", encoding="utf-8") as handle:
                handle.write(json.dumps(report.to_dict(), sort_keys=True) + "\n")
        return report


class ResultProcessor:
    """Applies one execution result to the pool, the scores and the bug log."""

    def __init__(
        self,
        pool: ResourcePool,
        scores: MatchScoreStore,
        reporter: BugReporter,
        op_nodes: dict[tuple[str, str], TreeNode],
    ):
        self.pool = pool
        self.scores = scores
        self.reporter = reporter
        self.op_nodes = op_nodes

    def process(self, case: TestCase, request: HttpRequest, result: ExecutionResult) -> None:
        node = self.op_nodes.get(case.operation.key)
        if result.succeeded:
            result.extracted = extract_tuples(case, result)
            if node is not None:
                for fields in result.extracted:
                    self.pool.add(node, ResourceTuple(
                        fields=fields,
                        origin_method=case.operation.method,
                        origin_node=node.node_id,
                    ))
                if case.operation.method == "DELETE":
                    self._invalidate_deleted(case, node)
            for binding in case.bindings.values():
                if binding.pair is not None:
                    self.scores.increase_score(self.scores.get_or_create(*binding.pair))
        elif result.status_class == "4xx":
            # a rejection only incriminates the matched pairs when no
            # deliberately random value was along for the ride
            bindings = case.bindings.values()
            if not any(b.source == SOURCE_FUZZ for b in bindings):
                for binding in bindings:
                    if binding.pair is not None:
                        self.scores.decrease_score(self.scores.get_or_create(*binding.pair))
        elif result.status_class == "5xx":
            self.reporter.record(case, request, result)

    def _invalidate_deleted(self, case: TestCase, node: TreeNode) -> None:
        # the last path argument names the resource the DELETE removed;
        # invalidating ancestor ids too would kill still-valid siblings
        leaf = None
        for segment in case.operation.segments:
            if segment.startswith("{"):
                leaf = segment[1:-1]
        if leaf is None:
            return
        binding = case.bindings.get(leaf)
        if binding is None:
            return
        field_name = binding.pair[1] if binding.source == SOURCE_POOL and binding.pair else leaf
        self.pool.invalidate(node, field_name, binding.value)
