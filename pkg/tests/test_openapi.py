import json
from random import Random

import pytest

from treefuzz.openapi import (
    ApiOperation,
    DuplicateOperation,
    MalformedDocument,
    SchemaTooDeep,
    SpecError,
    UnresolvedReference,
    flatten_schema,
    normalize_path,
    parse_spec,
)

from conftest import make_random_spec, make_spec_document

PROJECT_LIST_YAML = """
swagger: "2.0"
info:
  title: sample
  version: "1"
basePath: /api/v4
paths:
  /projects:
    get:
      parameters:
        - name: order_by
          in: query
          required: false
          type: string
          default: created_at
      responses:
        "200":
          description: list
          schema:
            type: array
            items:
              $ref: "#/definitions/BasicProjectDetails"
definitions:
  BasicProjectDetails:
    type: object
    properties:
      id:
        type: integer
      name:
        type: string
      path:
        type: string
"""

FIVE_API_DOC = {
    "openapi": "3.0.0",
    "info": {"title": "five", "version": "1"},
    "paths": {
        "/projects": {
            "get": {"responses": {"200": {"description": "ok"}}},
            "post": {"responses": {"201": {"description": "ok"}}},
        },
        "/projects/{id}": {
            "get": {"responses": {"200": {"description": "ok"}}},
            "put": {"responses": {"200": {"description": "ok"}}},
            "delete": {"responses": {"204": {"description": "ok"}}},
        },
    },
}


def test_single_operation_with_optional_query_parameter():
    spec = parse_spec(PROJECT_LIST_YAML)
    assert spec.base_path == "/api/v4"
    assert len(spec.operations) == 1
    op = spec.operations[0]
    assert (op.path, op.method) == ("/projects", "GET")
    assert op.required_params == ()
    assert [p.name for p in op.optional_params] == ["order_by"]
    assert op.optional_params[0].value_type == "string"
    assert op.optional_params[0].default == "created_at"
    assert set(op.response_fields) == {("id", "integer"), ("name", "string"), ("path", "string")}


def test_empty_paths_yields_zero_operations():
    spec = parse_spec(json.dumps({"openapi": "3.0.0", "info": {}, "paths": {}}))
    assert spec.operations == []


def test_two_paths_five_methods_give_five_operations():
    spec = parse_spec(json.dumps(FIVE_API_DOC))
    assert len(spec.operations) == 5
    keys = {op.key for op in spec.operations}
    assert keys == {
        ("/projects", "GET"),
        ("/projects", "POST"),
        ("/projects/{id}", "GET"),
        ("/projects/{id}", "PUT"),
        ("/projects/{id}", "DELETE"),
    }
    # the undeclared path argument is synthesized as a required parameter
    get_item = spec.operation("/projects/{id}", "GET")
    assert [p.name for p in get_item.required_params] == ["id"]


def test_colon_and_brace_argument_spellings_normalize_identically():
    assert normalize_path("/projects/:id") == "/projects/{id}"
    assert normalize_path("/projects/{id}") == "/projects/{id}"
    assert normalize_path("/projects/{id}/") == "/projects/{id}"
    assert normalize_path("//projects///{id}") == "/projects/{id}"


def test_same_normalized_path_twice_is_a_duplicate():
    doc = {
        "openapi": "3.0.0",
        "info": {},
        "paths": {
            "/projects/{id}": {"get": {"responses": {"200": {"description": "ok"}}}},
            "/projects/:id/": {"get": {"responses": {"200": {"description": "ok"}}}},
        },
    }
    with pytest.raises(DuplicateOperation):
        parse_spec(json.dumps(doc))


def test_dangling_reference_is_reported():
    doc = {
        "openapi": "3.0.0",
        "info": {},
        "paths": {
            "/a": {
                "get": {
                    "responses": {
                        "200": {
                            "description": "ok",
                            "content": {"application/json": {
                                "schema": {"$ref": "#/components/schemas/Nope"}
                            }},
                        }
                    }
                }
            }
        },
    }
    with pytest.raises(UnresolvedReference):
        parse_spec(json.dumps(doc))


def test_garbage_inputs_raise_document_errors_only():
    blobs = [b"\x00\xff\xfe", b"{]", b"- : -\n\t", b'{"a": 1}', "{}"]
    rng = Random(7)
    blobs += [bytes(rng.randrange(256) for _ in range(rng.randrange(64))) for _ in range(200)]
    for blob in blobs:
        with pytest.raises(SpecError):
            parse_spec(blob)
    # a bare version key is a valid document with no operations
    assert parse_spec(b"openapi: 3").operations == []


def test_patch_is_parsed_and_kept():
    doc = {
        "openapi": "3.0.0",
        "info": {},
        "paths": {"/a": {"patch": {"responses": {"200": {"description": "ok"}}}}},
    }
    spec = parse_spec(json.dumps(doc))
    assert [op.method for op in spec.operations] == ["PATCH"]


def test_operations_preserve_document_order():
    spec = parse_spec(json.dumps(FIVE_API_DOC))
    assert [op.key for op in spec.operations] == [
        ("/projects", "GET"),
        ("/projects", "POST"),
        ("/projects/{id}", "GET"),
        ("/projects/{id}", "PUT"),
        ("/projects/{id}", "DELETE"),
    ]


def test_operation_identity_is_path_and_method():
    a = ApiOperation("/projects", "GET")
    b = ApiOperation("/projects", "GET", response_fields=(("id", "integer"),))
    c = ApiOperation("/projects", "POST")
    assert a == b
    assert hash(a) == hash(b)
    assert a != c


def test_swagger2_body_parameters_expand_into_properties():
    doc = {
        "swagger": "2.0",
        "info": {},
        "paths": {
            "/projects": {
                "post": {
                    "parameters": [{
                        "name": "body",
                        "in": "body",
                        "required": True,
                        "schema": {
                            "type": "object",
                            "required": ["name"],
                            "properties": {
                                "name": {"type": "string"},
                                "description": {"type": "string"},
                            },
                        },
                    }],
                    "responses": {"201": {"description": "ok"}},
                }
            }
        },
    }
    spec = parse_spec(json.dumps(doc))
    op = spec.operations[0]
    assert [p.name for p in op.required_params] == ["name"]
    assert [p.name for p in op.optional_params] == ["description"]
    assert all(p.location == "body" for p in op.params)


def test_format_hint_auto_tries_json_then_yaml():
    yaml_text = "openapi: '3.0.0'\ninfo: {}\npaths: {}\n"
    assert parse_spec(yaml_text).operations == []
    json_text = json.dumps({"openapi": "3.0.0", "info": {}, "paths": {}})
    assert parse_spec(json_text).operations == []


# --- schema flattening, checked against an independent recursive oracle ---


def oracle_flatten(schema, definitions, prefix="", arrays=0):
    """Straight-line reference flattener used to pin expected values."""
    if "$ref" in schema:
        schema = definitions[schema["$ref"].rsplit("/", 1)[1]]
    out = []
    if schema.get("type") == "object" or "properties" in schema:
        for key, sub in schema.get("properties", {}).items():
            out += oracle_flatten(sub, definitions, f"{prefix}.{key}" if prefix else key, arrays)
    elif schema.get("type") == "array" or "items" in schema:
        if arrays < 1:
            out += oracle_flatten(schema.get("items", {}), definitions, prefix, arrays + 1)
    elif prefix:
        out.append((prefix, schema.get("type", "string")))
    return out


def _resolve_nothing(ref):
    raise AssertionError(f"unexpected ref {ref}")


def test_flatten_flat_object():
    schema = {"type": "object", "properties": {"id": {"type": "integer"}, "name": {"type": "string"}}}
    assert flatten_schema(schema, _resolve_nothing) == [("id", "integer"), ("name", "string")]


def test_flatten_nested_object_uses_dot_paths():
    schema = {"type": "object", "properties": {"owner": {
        "type": "object", "properties": {"id": {"type": "integer"}}
    }}}
    assert oracle_flatten(schema, {}) == [("owner.id", "integer")]
    assert flatten_schema(schema, _resolve_nothing) == [("owner.id", "integer")]


def test_flatten_array_contributes_element_paths():
    schema = {"type": "array", "items": {"type": "object", "properties": {"path": {"type": "string"}}}}
    assert oracle_flatten(schema, {}) == [("path", "string")]
    assert flatten_schema(schema, _resolve_nothing) == [("path", "string")]


def test_flatten_matches_oracle_on_random_schemas():
    rng = Random(99)

    def random_schema(depth):
        roll = rng.random()
        if depth >= 4 or roll < 0.4:
            return {"type": rng.choice(["string", "integer", "number", "boolean"])}
        if roll < 0.8:
            return {
                "type": "object",
                "properties": {
                    f"f{i}": random_schema(depth + 1) for i in range(rng.randint(1, 3))
                },
            }
        return {"type": "array", "items": random_schema(depth + 1)}

    for _ in range(300):
        schema = random_schema(0)
        assert flatten_schema(schema, _resolve_nothing) == oracle_flatten(schema, {})


def test_flatten_depth_cap_raises():
    schema: dict = {"type": "string"}
    for _ in range(9):
        schema = {"type": "object", "properties": {"n": schema}}
    with pytest.raises(SchemaTooDeep):
        flatten_schema(schema, _resolve_nothing)


def test_flatten_cuts_reference_cycles():
    definitions = {
        "Node": {
            "type": "object",
            "properties": {
                "id": {"type": "integer"},
                "next": {"$ref": "#/definitions/Node"},
            },
        }
    }

    def resolve(ref):
        return definitions[ref.rsplit("/", 1)[1]]

    assert flatten_schema({"$ref": "#/definitions/Node"}, resolve) == [("id", "integer")]


# --- whole-spec properties over generated documents ---


def test_round_trip_paths_for_random_specs():
    rng = Random(5)
    for _ in range(25):
        spec = make_random_spec(rng, max_operations=60)
        for op in spec.operations:
            assert "/" + "/".join(op.segments) == op.path


def test_path_parameters_always_appear_as_segments():
    rng = Random(6)
    for _ in range(25):
        spec = make_random_spec(rng, max_operations=60)
        for op in spec.operations:
            args = {seg[1:-1] for seg in op.segments if seg.startswith("{")}
            declared = {p.name for p in op.params if p.location == "path"}
            assert declared == args


def test_generated_documents_have_unique_operation_keys():
    rng = Random(8)
    for _ in range(25):
        doc = make_spec_document(rng, max_operations=60)
        spec = parse_spec(json.dumps(doc))
        keys = [op.key for op in spec.operations]
        assert len(keys) == len(set(keys))
