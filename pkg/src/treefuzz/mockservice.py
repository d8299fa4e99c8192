"""Deterministic in-process REST services used as fuzzing targets.

Two fixtures live here: a project/branch/user service with full CRUD
semantics (duplicate checks, type-validated ids, nested resources that
require their parents), and a deeper chain service whose operations only
become reachable once the whole ancestry has been created. Both run behind
the same client interface as real targets, so end-to-end runs need no
network. Fault rules can inject 5XX responses, optionally only on requests
that would otherwise have succeeded.
"""

import copy
import json
from dataclasses import dataclass, field
from typing import Any, Callable
from urllib.parse import unquote, urlsplit

from .execution import HttpRequest, HttpResponse

Handler = Callable[[dict, dict, Any], tuple[int, Any]]


@dataclass
class FaultRule:
    """Inject `status` on (path, method), `max_fires` times at most.

    trigger="resolved" fires only when the real handler would have
    succeeded, so the fault hides behind the resource dependencies;
    trigger="always" fires unconditionally.
    """

    path: str
    method: str
    trigger: str = "resolved"
    status: int = 500
    max_fires: int | None = None
    fires: int = 0

    def active(self) -> bool:
        return self.max_fires is None or self.fires < self.max_fires


@dataclass
class Route:
    method: str
    segments: tuple[str, ...]
    handler: Handler

    def match(self, method: str, parts: list[str]) -> dict[str, str] | None:
        if method != self.method or len(parts) != len(self.segments):
            return None
        captured: dict[str, str] = {}
        for pattern, actual in zip(self.segments, parts):
            if pattern.startswith("{"):
                captured[pattern[1:-1]] = actual
            elif pattern != actual:
                return None
        return captured


class MockService:
    """Router plus fault injection; subclasses register routes and state."""

    state_attrs: tuple[str, ...] = ()

    def __init__(self, faults: list[FaultRule] | None = None):
        self.routes: list[Route] = []
        self.faults: list[FaultRule] = list(faults or [])

    def route(self, method: str, path: str, handler: Handler) -> None:
        self.routes.append(Route(method, tuple(path.strip("/").split("/")), handler))

    def handle(self, method: str, path: str, query: dict[str, Any] | None = None,
               body: Any = None) -> tuple[int, Any]:
        parts = [unquote(p) for p in path.strip("/").split("/")] if path.strip("/") else []
        query = query or {}
        for route in self.routes:
            captured = route.match(method, parts)
            if captured is None:
                continue
            template = "/" + "/".join(route.segments)
            fault = self._fault_for(template, method)
            if fault is not None and fault.trigger == "always":
                fault.fires += 1
                return fault.status, {"error": "injected fault"}
            snapshot = None
            if fault is not None and fault.trigger == "resolved":
                snapshot = copy.deepcopy({name: getattr(self, name) for name in self.state_attrs})
            status, payload = route.handler(captured, query, body)
            if fault is not None and fault.trigger == "resolved" and 200 <= status < 300:
                # the failing request must not leave its side effects behind
                if snapshot is not None:
                    for name, value in snapshot.items():
                        setattr(self, name, value)
                fault.fires += 1
                return fault.status, {"error": "injected fault"}
            return status, payload
        return 404, {"error": "no such route"}

    def _fault_for(self, template: str, method: str) -> FaultRule | None:
        for fault in self.faults:
            if fault.path == template and fault.method == method and fault.active():
                return fault
        return None

    def document(self) -> dict:
        """The OpenAPI document describing this service."""
        raise NotImplementedError


class MockClient:
    """Adapts a MockService to the HTTP client interface."""

    def __init__(self, service: MockService):
        self.service = service

    def send(self, request: HttpRequest) -> HttpResponse:
        path = urlsplit(request.url).path
        status, payload = self.service.handle(
            request.method, path, dict(request.query), request.body
        )
        body = b"" if payload is None else json.dumps(payload).encode("utf-8")
        return HttpResponse(status_code=status, body=body)


def _as_int(text: str) -> int | None:
    try:
        return int(text)
    except (TypeError, ValueError):
        return None


def _body_str(body: Any, key: str) -> str | None:
    if not isinstance(body, dict):
        return None
    value = body.get(key)
    if isinstance(value, (int, float, bool)):
        value = json.dumps(value) if isinstance(value, bool) else str(value)
    if isinstance(value, str) and value:
        return value
    return None


class ProjectService(MockService):
    """Projects with nested branches plus a flat user collection.

    Listing projects rejects the retired `legacy` query parameter, project
    creation enforces unique names and paths, and every id-typed path
    argument must be an integer. Branch routes require their project.
    """

    state_attrs = ("projects", "branches", "users", "next_id")

    def __init__(self, faults: list[FaultRule] | None = None):
        super().__init__(faults)
        self.projects: dict[int, dict] = {}
        self.branches: dict[tuple[int, str], dict] = {}
        self.users: dict[int, dict] = {}
        self.next_id = 1

        self.route("GET", "/projects", self.list_projects)
        self.route("POST", "/projects", self.create_project)
        self.route("GET", "/projects/{id}", self.get_project)
        self.route("PUT", "/projects/{id}", self.update_project)
        self.route("DELETE", "/projects/{id}", self.delete_project)
        self.route("GET", "/projects/{id}/branches", self.list_branches)
        self.route("POST", "/projects/{id}/branches", self.create_branch)
        self.route("GET", "/projects/{id}/branches/{branch}", self.get_branch)
        self.route("DELETE", "/projects/{id}/branches/{branch}", self.delete_branch)
        self.route("GET", "/users", self.list_users)
        self.route("POST", "/users", self.create_user)
        self.route("GET", "/users/{uid}", self.get_user)

    def document(self) -> dict:
        return openapi_document()

    def _take_id(self) -> int:
        value = self.next_id
        self.next_id += 1
        return value

    def _project(self, captured: dict) -> tuple[int | None, tuple[int, Any] | None]:
        pid = _as_int(captured["id"])
        if pid is None:
            return None, (400, {"error": "id must be an integer"})
        if pid not in self.projects:
            return None, (404, {"error": "project not found"})
        return pid, None

    def list_projects(self, captured: dict, query: dict, body: Any) -> tuple[int, Any]:
        if "legacy" in query:
            return 400, {"error": "legacy is no longer supported"}
        items = list(self.projects.values())
        search = query.get("search")
        if isinstance(search, str) and search:
            items = [p for p in items if search in p["name"]]
        order_by = query.get("order_by")
        if order_by in ("name", "path"):
            items = sorted(items, key=lambda p: p[order_by])
        return 200, items

    def create_project(self, captured: dict, query: dict, body: Any) -> tuple[int, Any]:
        name = _body_str(body, "name")
        path = _body_str(body, "path")
        if name is None or path is None:
            return 400, {"error": "name and path are required"}
        for project in self.projects.values():
            if project["name"] == name or project["path"] == path:
                return 409, {"error": "name or path already taken"}
        pid = self._take_id()
        description = _body_str(body, "description") or ""
        project = {"id": pid, "name": name, "path": path, "description": description}
        self.projects[pid] = project
        return 201, project

    def get_project(self, captured: dict, query: dict, body: Any) -> tuple[int, Any]:
        pid, error = self._project(captured)
        if error:
            return error
        return 200, self.projects[pid]

    def update_project(self, captured: dict, query: dict, body: Any) -> tuple[int, Any]:
        pid, error = self._project(captured)
        if error:
            return error
        project = self.projects[pid]
        name = _body_str(body, "name")
        if name is not None:
            for other_id, other in self.projects.items():
                if other_id != pid and other["name"] == name:
                    return 409, {"error": "name already taken"}
            project["name"] = name
        description = _body_str(body, "description")
        if description is not None:
            project["description"] = description
        return 200, project

    def delete_project(self, captured: dict, query: dict, body: Any) -> tuple[int, Any]:
        pid, error = self._project(captured)
        if error:
            return error
        del self.projects[pid]
        self.branches = {k: v for k, v in self.branches.items() if k[0] != pid}
        return 204, None

    def list_branches(self, captured: dict, query: dict, body: Any) -> tuple[int, Any]:
        pid, error = self._project(captured)
        if error:
            return error
        return 200, [b for (bpid, _), b in self.branches.items() if bpid == pid]

    def create_branch(self, captured: dict, query: dict, body: Any) -> tuple[int, Any]:
        pid, error = self._project(captured)
        if error:
            return error
        name = _body_str(body, "name")
        if name is None:
            return 400, {"error": "branch name is required"}
        if (pid, name) in self.branches:
            return 409, {"error": "branch already exists"}
        branch = {"branch": name, "project": {"id": pid}}
        self.branches[(pid, name)] = branch
        return 201, branch

    def get_branch(self, captured: dict, query: dict, body: Any) -> tuple[int, Any]:
        pid, error = self._project(captured)
        if error:
            return error
        branch = self.branches.get((pid, captured["branch"]))
        if branch is None:
            return 404, {"error": "branch not found"}
        return 200, branch

    def delete_branch(self, captured: dict, query: dict, body: Any) -> tuple[int, Any]:
        pid, error = self._project(captured)
        if error:
            return error
        branch = self.branches.pop((pid, captured["branch"]), None)
        if branch is None:
            return 404, {"error": "branch not found"}
        return 204, None

    def list_users(self, captured: dict, query: dict, body: Any) -> tuple[int, Any]:
        return 200, list(self.users.values())

    def create_user(self, captured: dict, query: dict, body: Any) -> tuple[int, Any]:
        username = _body_str(body, "username")
        if username is None:
            return 400, {"error": "username is required"}
        for user in self.users.values():
            if user["username"] == username:
                return 409, {"error": "username already taken"}
        uid = self._take_id()
        user = {"uid": uid, "username": username}
        self.users[uid] = user
        return 201, user

    def get_user(self, captured: dict, query: dict, body: Any) -> tuple[int, Any]:
        uid = _as_int(captured["uid"])
        if uid is None:
            return 400, {"error": "uid must be an integer"}
        user = self.users.get(uid)
        if user is None:
            return 404, {"error": "user not found"}
        return 200, user


def openapi_document() -> dict:
    """The OpenAPI 3.0 description of ProjectService: 12 operations."""

    def ref(name: str) -> dict:
        return {"$ref": f"#/components/schemas/{name}"}

    def array_of(name: str) -> dict:
        return {"type": "array", "items": ref(name)}

    def response(status: int, schema: dict | None) -> dict:
        body: dict[str, Any] = {"description": "result"}
        if schema is not None:
            body["content"] = {"application/json": {"schema": schema}}
        return {str(status): body}

    def query_param(name: str, default: str | None = None) -> dict:
        schema: dict[str, Any] = {"type": "string"}
        if default is not None:
            schema["default"] = default
        return {"name": name, "in": "query", "required": False, "schema": schema}

    def path_param(name: str, kind: str = "integer") -> dict:
        return {"name": name, "in": "path", "required": True, "schema": {"type": kind}}

    def body_of(required: list[str], props: dict[str, str], body_required: bool = True) -> dict:
        schema: dict[str, Any] = {
            "type": "object",
            "properties": {k: {"type": v} for k, v in props.items()},
        }
        if required:
            schema["required"] = required
        return {
            "required": body_required,
            "content": {"application/json": {"schema": schema}},
        }

    return {
        "openapi": "3.0.3",
        "info": {"title": "Project Service Fixture", "version": "1.0.0"},
        "paths": {
            "/projects": {
                "get": {
                    "parameters": [
                        query_param("order_by", default="created_at"),
                        query_param("search"),
                        query_param("legacy"),
                    ],
                    "responses": response(200, array_of("Project")),
                },
                "post": {
                    "requestBody": body_of(
                        ["name", "path"],
                        {"name": "string", "path": "string", "description": "string"},
                    ),
                    "responses": response(201, ref("Project")),
                },
            },
            "/projects/{id}": {
                "get": {
                    "parameters": [path_param("id")],
                    "responses": response(200, ref("Project")),
                },
                "put": {
                    "parameters": [path_param("id")],
                    "requestBody": body_of(
                        [], {"name": "string", "description": "string"}, body_required=False
                    ),
                    "responses": response(200, ref("Project")),
                },
                "delete": {
                    "parameters": [path_param("id")],
                    "responses": response(204, None),
                },
            },
            "/projects/{id}/branches": {
                "get": {
                    "parameters": [path_param("id")],
                    "responses": response(200, array_of("Branch")),
                },
                "post": {
                    "parameters": [path_param("id")],
                    "requestBody": body_of(["name"], {"name": "string"}),
                    "responses": response(201, ref("Branch")),
                },
            },
            "/projects/{id}/branches/{branch}": {
                "get": {
                    "parameters": [path_param("id"), path_param("branch", "string")],
                    "responses": response(200, ref("Branch")),
                },
                "delete": {
                    "parameters": [path_param("id"), path_param("branch", "string")],
                    "responses": response(204, None),
                },
            },
            "/users": {
                "get": {"responses": response(200, array_of("User"))},
                "post": {
                    "requestBody": body_of(["username"], {"username": "string"}),
                    "responses": response(201, ref("User")),
                },
            },
            "/users/{uid}": {
                "get": {
                    "parameters": [path_param("uid")],
                    "responses": response(200, ref("User")),
                },
            },
        },
        "components": {
            "schemas": {
                "Project": {
                    "type": "object",
                    "properties": {
                        "id": {"type": "integer"},
                        "name": {"type": "string"},
                        "path": {"type": "string"},
                        "description": {"type": "string"},
                    },
                },
                "Branch": {
                    "type": "object",
                    "properties": {
                        "branch": {"type": "string"},
                        "project": {
                            "type": "object",
                            "properties": {"id": {"type": "integer"}},
                        },
                    },
                },
                "User": {
                    "type": "object",
                    "properties": {
                        "uid": {"type": "integer"},
                        "username": {"type": "string"},
                    },
                },
            }
        },
    }


CHAIN_LEVELS = ("org", "team", "board", "card")
CHAIN_COLLECTIONS = ("orgs", "teams", "boards", "cards")
DISTRACTOR_COUNT = 10


class ChainService(MockService):
    """A four-level creation chain plus distractor endpoints.

    Every level's item routes 404 unless the whole ancestry exists, and
    every response echoes the ancestor ids, which makes the classic
    dependency graph of this service dense while the endpoint hierarchy
    stays trivial. Distractor endpoints return plausible but useless ids.
    """

    state_attrs = ("items", "counters")

    def __init__(self, faults: list[FaultRule] | None = None):
        super().__init__(faults)
        # keyed by the full ancestor id tuple
        self.items: dict[int, dict[tuple, dict]] = {i: {} for i in range(len(CHAIN_LEVELS))}
        self.counters = [0] * len(CHAIN_LEVELS)

        prefix = ""
        for level, (collection, id_name) in enumerate(zip(CHAIN_COLLECTIONS, CHAIN_LEVELS)):
            collection_path = f"{prefix}/{collection}"
            item_path = collection_path + "/{" + id_name + "}"
            self.route("GET", collection_path, self._lister(level))
            self.route("POST", collection_path, self._creator(level))
            self.route("GET", item_path, self._getter(level))
            prefix = item_path
        for index in range(DISTRACTOR_COUNT):
            self.route("GET", f"/metrics{index}", self._distractor(index))

    def document(self) -> dict:
        return chain_openapi_document()

    def _ancestors(self, captured: dict, level: int) -> tuple | None:
        ids = []
        for id_name in CHAIN_LEVELS[:level]:
            value = _as_int(captured[id_name])
            if value is None:
                return None
            ids.append(value)
        key = tuple(ids)
        if level > 0 and key not in self.items[level - 1]:
            return None
        return key

    def _record(self, key: tuple, level: int) -> dict:
        body = {"name": self.items[level][key]["name"]}
        for id_name, value in zip(CHAIN_LEVELS, key):
            body[id_name] = value
        return body

    def _lister(self, level: int) -> Handler:
        def handler(captured: dict, query: dict, body: Any) -> tuple[int, Any]:
            parents = self._ancestors(captured, level)
            if parents is None:
                return 404, {"error": "missing ancestor"}
            listing = [
                self._record(key, level)
                for key in self.items[level]
                if key[:level] == parents
            ]
            return 200, listing

        return handler

    def _creator(self, level: int) -> Handler:
        def handler(captured: dict, query: dict, body: Any) -> tuple[int, Any]:
            parents = self._ancestors(captured, level)
            if parents is None:
                return 404, {"error": "missing ancestor"}
            name = _body_str(body, "name")
            if name is None:
                return 400, {"error": "name is required"}
            self.counters[level] += 1
            key = parents + (self.counters[level],)
            self.items[level][key] = {"name": name}
            return 201, self._record(key, level)

        return handler

    def _getter(self, level: int) -> Handler:
        def handler(captured: dict, query: dict, body: Any) -> tuple[int, Any]:
            key = self._ancestors(captured, level + 1)
            if key is None or key not in self.items[level]:
                return 404, {"error": "not found"}
            return 200, self._record(key, level)

        return handler

    def _distractor(self, index: int) -> Handler:
        def handler(captured: dict, query: dict, body: Any) -> tuple[int, Any]:
            fake = 900000 + index
            return 200, {
                "org": fake,
                "team": fake,
                "board": fake,
                "card": fake,
                "name": f"metric{index}",
            }

        return handler


def chain_openapi_document() -> dict:
    """OpenAPI 3.0 description of ChainService."""
    schemas: dict[str, Any] = {}
    paths: dict[str, Any] = {}

    def response(status: int, schema: dict) -> dict:
        return {str(status): {
            "description": "result",
            "content": {"application/json": {"schema": schema}},
        }}

    prefix = ""
    parent_params: list[dict] = []
    for level, (collection, id_name) in enumerate(zip(CHAIN_COLLECTIONS, CHAIN_LEVELS)):
        schema_name = id_name.capitalize()
        props: dict[str, Any] = {"name": {"type": "string"}}
        for ancestor in CHAIN_LEVELS[: level + 1]:
            props[ancestor] = {"type": "integer"}
        schemas[schema_name] = {"type": "object", "properties": props}
        item_ref = {"$ref": f"#/components/schemas/{schema_name}"}

        collection_path = f"{prefix}/{collection}"
        item_param = {
            "name": id_name, "in": "path", "required": True,
            "schema": {"type": "integer"},
        }
        paths[collection_path] = {
            "get": {
                "parameters": list(parent_params),
                "responses": response(200, {"type": "array", "items": item_ref}),
            },
            "post": {
                "parameters": list(parent_params),
                "requestBody": {
                    "required": True,
                    "content": {"application/json": {"schema": {
                        "type": "object",
                        "required": ["name"],
                        "properties": {"name": {"type": "string"}},
                    }}},
                },
                "responses": response(201, item_ref),
            },
        }
        item_path = collection_path + "/{" + id_name + "}"
        paths[item_path] = {
            "get": {
                "parameters": list(parent_params) + [item_param],
                "responses": response(200, item_ref),
            },
        }
        parent_params = list(parent_params) + [item_param]
        prefix = item_path

    schemas["Metric"] = {
        "type": "object",
        "properties": {
            "org": {"type": "integer"},
            "team": {"type": "integer"},
            "board": {"type": "integer"},
            "card": {"type": "integer"},
            "name": {"type": "string"},
        },
    }
    for index in range(DISTRACTOR_COUNT):
        paths[f"/metrics{index}"] = {
            "get": {"responses": response(200, {"$ref": "#/components/schemas/Metric"})}
        }

    return {
        "openapi": "3.0.3",
        "info": {"title": "Chain Service Fixture", "version": "1.0.0"},
        "paths": paths,
        "components": {"schemas": schemas},
    }
