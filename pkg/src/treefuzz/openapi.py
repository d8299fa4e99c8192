"""Swagger 2.0 / OpenAPI 3.0 document parsing.

Turns a raw JSON or YAML document into a normalized in-memory API model:
one :class:`ApiOperation` per (path, method) pair, with parameters split
into required/optional and the success-response schema flattened into
(dot-path, type) pairs for later resource extraction.
"""

import json
import re
from dataclasses import dataclass, field
from typing import Any
from urllib.parse import urlsplit

import yaml

METHODS = ("GET", "POST", "PUT", "PATCH", "DELETE")

SCALAR_TYPES = ("string", "integer", "number", "boolean", "object")

MAX_SCHEMA_DEPTH = 8
MAX_ARRAY_NESTING = 1

_SEGMENT_RE = re.compile(r"^(\{[A-Za-z0-9_.-]+\}|[^/{}]+)$")


class SpecError(Exception):
    """Base class for document parsing failures."""


class MalformedDocument(SpecError):
    """The input is not a parseable API description."""


class UnresolvedReference(SpecError):
    """A $ref points at nothing inside the document."""


class DuplicateOperation(SpecError):
    """Two operations normalize to the same (path, method)."""


class SchemaTooDeep(SpecError):
    """Non-cyclic schema nesting exceeds the flattening depth cap."""


@dataclass(frozen=True)
class ParamSpec:
    """One request parameter: where it goes and what type it carries."""

    name: str
    location: str  # path | query | body
    value_type: str = "string"
    required: bool = False
    default: Any = None


@dataclass(eq=False)
class ApiOperation:
    """A single (path, method) pair, the unit of fuzzing.

    Two operations compare equal iff their (path, method) are equal.
    """

    path: str
    method: str
    required_params: tuple[ParamSpec, ...] = ()
    optional_params: tuple[ParamSpec, ...] = ()
    response_fields: tuple[tuple[str, str], ...] = ()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ApiOperation):
            return NotImplemented
        return (self.path, self.method) == (other.path, other.method)

    def __hash__(self) -> int:
        return hash((self.path, self.method))

    @property
    def key(self) -> tuple[str, str]:
        return (self.path, self.method)

    @property
    def segments(self) -> tuple[str, ...]:
        return tuple(self.path.strip("/").split("/"))

    @property
    def params(self) -> tuple[ParamSpec, ...]:
        return self.required_params + self.optional_params

    def __repr__(self) -> str:
        return f"ApiOperation({self.method} {self.path})"


@dataclass
class ApiSpec:
    """A parsed API description."""

    title: str = ""
    base_path: str = ""
    operations: list[ApiOperation] = field(default_factory=list)
    schemas: dict[str, Any] = field(default_factory=dict)

    def operation(self, path: str, method: str) -> ApiOperation:
        for op in self.operations:
            if op.path == path and op.method == method.upper():
                return op
        raise KeyError(f"{method} {path}")


def normalize_path(raw: str) -> str:
    """Canonicalize an endpoint path.

    Ensures a leading slash, strips the trailing slash, collapses duplicate
    slashes, and rewrites ``:arg`` segments to ``{arg}``. Raises
    MalformedDocument when the result does not match ``("/" segment)+``.
    """
    if not isinstance(raw, str) or not raw.strip():
        raise MalformedDocument(f"invalid path: {raw!r}")
    text = raw.strip()
    segments = [s for s in text.split("/") if s != ""]
    if not segments:
        raise MalformedDocument(f"path has no segments: {raw!r}")
    normalized = []
    for seg in segments:
        if seg.startswith(":"):
            seg = "{" + seg[1:] + "}"
        if not _SEGMENT_RE.match(seg):
            raise MalformedDocument(f"invalid path segment {seg!r} in {raw!r}")
        normalized.append(seg)
    return "/" + "/".join(normalized)


def path_arguments(path: str) -> list[str]:
    """Names of the ``{arg}`` segments of a normalized path, in order."""
    return [seg[1:-1] for seg in path.strip("/").split("/") if seg.startswith("{")]


def _load_data(document: str | bytes) -> Any:
    if isinstance(document, bytes):
        try:
            document = document.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedDocument(f"not UTF-8 text: {exc}") from exc
    try:
        return json.loads(document)
    except ValueError:
        pass
    try:
        return yaml.safe_load(document)
    except Exception as exc:  # yaml raises a zoo of types on hostile input
        raise MalformedDocument(f"neither JSON nor YAML: {exc}") from exc


def _resolver(root: Any):
    """Returns a function resolving internal ``#/...`` references."""

    def resolve(ref: str) -> Any:
        if not isinstance(ref, str) or not ref.startswith("#/"):
            raise UnresolvedReference(f"unsupported reference {ref!r}")
        node = root
        for part in ref[2:].split("/"):
            part = part.replace("~1", "/").replace("~0", "~")
            if not isinstance(node, dict) or part not in node:
                raise UnresolvedReference(ref)
            node = node[part]
        return node

    return resolve


def _map_type(raw: Any) -> str:
    return raw if raw in SCALAR_TYPES else "string"


def flatten_schema(schema: Any, resolve, max_depth: int = MAX_SCHEMA_DEPTH) -> list[tuple[str, str]]:
    """Flatten a schema into (dot-path, type) leaf pairs.

    Nested objects contribute dot-separated paths; arrays are traversed one
    level deep and contribute their element's paths. Reference cycles are
    cut silently; plain nesting beyond `max_depth` raises SchemaTooDeep.
    """
    out: list[tuple[str, str]] = []

    def walk(node: Any, prefix: str, depth: int, seen: frozenset, arrays: int) -> None:
        if depth > max_depth:
            raise SchemaTooDeep(prefix or "<root>")
        if not isinstance(node, dict):
            return
        while "$ref" in node:
            ref = node["$ref"]
            if ref in seen:
                return
            seen = seen | {ref}
            node = resolve(ref)
            if not isinstance(node, dict):
                return
        kind = node.get("type")
        if kind == "object" or "properties" in node:
            props = node.get("properties")
            if isinstance(props, dict):
                for name, sub in props.items():
                    child = f"{prefix}.{name}" if prefix else str(name)
                    walk(sub, child, depth + 1, seen, arrays)
            elif prefix:
                out.append((prefix, "object"))
        elif kind == "array" or "items" in node:
            if arrays >= MAX_ARRAY_NESTING:
                return
            walk(node.get("items", {}), prefix, depth + 1, seen, arrays + 1)
        elif prefix:
            out.append((prefix, _map_type(kind)))

    walk(schema, "", 0, frozenset(), 0)
    return out


def _success_schema(responses: Any, resolve, dialect: str) -> Any:
    if not isinstance(responses, dict):
        return None
    codes = []
    for key in responses:
        text = str(key)
        if text.isdigit() and 200 <= int(text) < 300:
            codes.append((int(text), key))
    if not codes:
        return None
    _, key = min(codes)
    resp = responses[key]
    if isinstance(resp, dict) and "$ref" in resp:
        resp = resolve(resp["$ref"])
    if not isinstance(resp, dict):
        return None
    if dialect == "swagger2":
        return resp.get("schema")
    content = resp.get("content")
    if not isinstance(content, dict):
        return None
    media = content.get("application/json")
    if media is None and content:
        media = next(iter(content.values()))
    if isinstance(media, dict):
        return media.get("schema")
    return None


def _resolve_param(raw: Any, resolve) -> Any:
    if isinstance(raw, dict) and "$ref" in raw:
        return resolve(raw["$ref"])
    return raw


def _body_params(schema: Any, resolve, body_required: bool) -> list[ParamSpec]:
    if isinstance(schema, dict) and "$ref" in schema:
        schema = resolve(schema["$ref"])
    if not isinstance(schema, dict):
        return []
    props = schema.get("properties")
    if not isinstance(props, dict):
        return []
    required_names = set(schema.get("required") or [])
    params = []
    for name, sub in props.items():
        if isinstance(sub, dict) and "$ref" in sub:
            sub = resolve(sub["$ref"])
        sub = sub if isinstance(sub, dict) else {}
        params.append(
            ParamSpec(
                name=str(name),
                location="body",
                value_type=_map_type(sub.get("type")),
                required=body_required and name in required_names,
                default=sub.get("default"),
            )
        )
    return params


def _collect_params(path_item: Any, op_item: Any, dialect: str, resolve) -> list[ParamSpec]:
    merged: dict[tuple[str, str], ParamSpec] = {}

    def add(spec: ParamSpec) -> None:
        merged[(spec.location, spec.name)] = spec

    raw_params = []
    if isinstance(path_item, dict):
        raw_params += path_item.get("parameters") or []
    raw_params += op_item.get("parameters") or []

    for raw in raw_params:
        raw = _resolve_param(raw, resolve)
        if not isinstance(raw, dict):
            continue
        loc = raw.get("in")
        name = raw.get("name")
        if not name:
            continue
        if loc == "body" and dialect == "swagger2":
            body_required = bool(raw.get("required", False))
            for spec in _body_params(raw.get("schema"), resolve, body_required):
                add(spec)
            continue
        if loc == "formData":
            loc = "body"
        if loc not in ("path", "query", "body"):
            continue  # header/cookie parameters are out of scope
        if dialect == "swagger2":
            value_type = _map_type(raw.get("type"))
            default = raw.get("default")
        else:
            schema = raw.get("schema")
            if isinstance(schema, dict) and "$ref" in schema:
                schema = resolve(schema["$ref"])
            schema = schema if isinstance(schema, dict) else {}
            value_type = _map_type(schema.get("type"))
            default = schema.get("default")
        required = bool(raw.get("required", False)) or loc == "path"
        add(ParamSpec(str(name), loc, value_type, required, default))

    if dialect == "openapi3" and isinstance(op_item.get("requestBody"), dict):
        body = op_item["requestBody"]
        if "$ref" in body:
            body = resolve(body["$ref"])
        content = body.get("content") if isinstance(body, dict) else None
        media = None
        if isinstance(content, dict):
            media = content.get("application/json")
            if media is None and content:
                media = next(iter(content.values()))
        if isinstance(media, dict):
            body_required = bool(body.get("required", False))
            for spec in _body_params(media.get("schema"), resolve, body_required):
                add(spec)

    return list(merged.values())


def _base_path(data: dict, dialect: str) -> str:
    if dialect == "swagger2":
        raw = data.get("basePath") or ""
    else:
        servers = data.get("servers") or []
        raw = ""
        if servers and isinstance(servers[0], dict):
            raw = urlsplit(str(servers[0].get("url") or "")).path
    raw = str(raw).rstrip("/")
    if raw and not raw.startswith("/"):
        raw = "/" + raw
    return raw


def parse_spec(document: str | bytes, format_hint: str = "auto") -> ApiSpec:
    """Parse a raw Swagger 2.0 / OpenAPI 3.0 document.

    `format_hint` selects the dialect (``swagger2`` or ``openapi3``);
    ``auto`` detects it from the version key. JSON is tried first, then
    YAML. Raises MalformedDocument, UnresolvedReference, DuplicateOperation
    or SchemaTooDeep; never anything else, whatever the input bytes.
    """
    data = _load_data(document)
    if not isinstance(data, dict):
        raise MalformedDocument("document root is not a mapping")

    if format_hint == "swagger2":
        dialect = "swagger2"
    elif format_hint == "openapi3":
        dialect = "openapi3"
    elif format_hint == "auto":
        if str(data.get("swagger", "")).startswith("2"):
            dialect = "swagger2"
        elif str(data.get("openapi", "")).startswith("3"):
            dialect = "openapi3"
        else:
            raise MalformedDocument("no swagger 2.x / openapi 3.x version key")
    else:
        raise ValueError(f"unknown format_hint {format_hint!r}")

    resolve = _resolver(data)
    info = data.get("info") if isinstance(data.get("info"), dict) else {}
    title = str(info.get("title", ""))

    if dialect == "swagger2":
        schemas = dict(data.get("definitions") or {})
    else:
        components = data.get("components") or {}
        schemas = dict(components.get("schemas") or {}) if isinstance(components, dict) else {}

    paths = data.get("paths")
    if paths is None:
        paths = {}
    if not isinstance(paths, dict):
        raise MalformedDocument("'paths' is not a mapping")

    operations: list[ApiOperation] = []
    seen: set[tuple[str, str]] = set()
    for raw_path, path_item in paths.items():
        norm = normalize_path(str(raw_path))
        if not isinstance(path_item, dict):
            continue
        if "$ref" in path_item:
            path_item = resolve(path_item["$ref"])
            if not isinstance(path_item, dict):
                continue
        for raw_method, op_item in path_item.items():
            method = str(raw_method).upper()
            if method not in METHODS or not isinstance(op_item, dict):
                continue
            if (norm, method) in seen:
                raise DuplicateOperation(f"{method} {norm}")
            seen.add((norm, method))

            params = _collect_params(path_item, op_item, dialect, resolve)
            declared_path = {p.name for p in params if p.location == "path"}
            args = path_arguments(norm)
            params = [p for p in params if p.location != "path" or p.name in args]
            for arg in args:
                if arg not in declared_path:
                    params.append(ParamSpec(arg, "path", "string", True))

            schema = _success_schema(op_item.get("responses"), resolve, dialect)
            fields = tuple(flatten_schema(schema, resolve)) if schema is not None else ()

            operations.append(
                ApiOperation(
                    path=norm,
                    method=method,
                    required_params=tuple(p for p in params if p.required),
                    optional_params=tuple(p for p in params if not p.required),
                    response_fields=fields,
                )
            )

    return ApiSpec(
        title=title,
        base_path=_base_path(data, dialect),
        operations=operations,
        schemas=schemas,
    )
