"""Shared fixtures and generators for the test suite."""

import json
from pathlib import Path
from random import Random

import pytest

from treefuzz.openapi import ApiSpec, parse_spec

ASSETS = Path(__file__).parent / "assets"

WORDS = (
    "projects", "users", "groups", "repos", "issues", "commits", "branches",
    "labels", "notes", "keys", "hooks", "tags", "members", "files", "jobs",
)
ARGS = ("id", "name", "key", "ref", "slug", "uid", "item", "number")
ALL_METHODS = ("GET", "POST", "PUT", "DELETE")


def make_spec_document(rng: Random, max_operations: int = 100) -> dict:
    """A random but well-formed OpenAPI 3.0 document.

    Paths form a random forest: each new path either starts a root or
    extends an existing path with a token or `{arg}` segment, so the
    resulting endpoint set exercises shared prefixes and both node kinds.
    """
    paths: list[str] = []
    target = rng.randint(1, max(1, max_operations // 2))
    while len(paths) < target:
        if not paths or rng.random() < 0.3:
            base = ""
        else:
            base = rng.choice(paths)
        if base.count("/") >= 6:
            base = ""
        if rng.random() < 0.4 and base:
            arg = rng.choice(ARGS)
            if not base.endswith("}") or rng.random() < 0.5:
                candidate = f"{base}/{{{arg}}}"
            else:
                candidate = f"{base}/{rng.choice(WORDS)}"
        else:
            candidate = f"{base}/{rng.choice(WORDS)}"
        if candidate not in paths:
            paths.append(candidate)

    document: dict = {
        "openapi": "3.0.3",
        "info": {"title": "generated", "version": "0.0.1"},
        "paths": {},
    }
    operation_budget = max_operations
    for path in paths:
        methods = rng.sample(ALL_METHODS, rng.randint(1, len(ALL_METHODS)))
        item = {}
        for method in methods:
            if operation_budget == 0:
                break
            operation_budget -= 1
            entry: dict = {"responses": {"200": {"description": "ok"}}}
            params = []
            for segment in path.strip("/").split("/"):
                if segment.startswith("{"):
                    params.append({
                        "name": segment[1:-1],
                        "in": "path",
                        "required": True,
                        "schema": {"type": "string"},
                    })
            if rng.random() < 0.3:
                params.append({
                    "name": rng.choice(("page", "sort", "filter")),
                    "in": "query",
                    "required": False,
                    "schema": {"type": "string"},
                })
            if params:
                entry["parameters"] = params
            item[method.lower()] = entry
        if item:
            document["paths"][path] = item
    return document


def make_random_spec(rng: Random, max_operations: int = 100) -> ApiSpec:
    return parse_spec(json.dumps(make_spec_document(rng, max_operations)))


@pytest.fixture
def rng() -> Random:
    return Random(1234)


@pytest.fixture
def mock_document() -> dict:
    from treefuzz.mockservice import openapi_document

    return openapi_document()


@pytest.fixture
def mock_spec(mock_document) -> ApiSpec:
    return parse_spec(json.dumps(mock_document))
