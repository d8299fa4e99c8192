import json
import re
from random import Random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from treefuzz.matching import (
    AnnotationTable,
    MatchConfig,
    MatchScoreStore,
    fuzzy_match,
    load_annotations,
    names_match,
    normalize,
)
from treefuzz.openapi import parse_spec
from treefuzz.pool import ResourcePool, ResourceTuple
from treefuzz.tree import build_forest, dfs_order


def oracle_normalize(name: str) -> str:
    # independent implementation: strip, lowercase, drop separator chars
    return re.sub(r"[_\- ]", "", name.strip().lower())


def test_normalize_folds_case_and_separators():
    assert normalize("Order_By") == "orderby"
    assert normalize("") == ""
    assert normalize("created at") == normalize("created_at") == "createdat"
    assert normalize("x-ref") == "xref"


def test_normalize_matches_reference_implementation():
    rng = Random(3)
    alphabet = "aBc_- Zz09."
    for _ in range(500):
        name = "".join(rng.choice(alphabet) for _ in range(rng.randrange(12)))
        assert normalize(name) == oracle_normalize(name)


@given(st.text(max_size=40))
def test_normalize_is_idempotent(name):
    assert normalize(normalize(name)) == normalize(name)


def test_names_match_accepts_dot_path_leaves():
    assert names_match("project.id", "id")
    assert names_match("Project_Id", "projectid")
    assert not names_match("id", "project.id")
    assert not names_match("name", "id")


def test_resolve_returns_canonical_id_for_alias():
    table = AnnotationTable()
    table.add("id", {"id", "path"})
    assert table.resolve("path") == "id"
    assert table.resolve("Path") == "id"
    assert table.resolve("id") == "id"


def test_resolve_passes_unknown_names_through_unchanged():
    table = AnnotationTable()
    assert table.resolve("branch") == "branch"
    table.add("id", {"path"})
    assert table.resolve("Branch_Name") == "Branch_Name"


def test_resolve_agrees_with_linear_scan_oracle():
    rng = Random(11)
    words = ["alpha", "beta", "gamma", "delta", "omega", "kappa", "sigma", "theta"]
    for _ in range(50):
        rng.shuffle(words)
        split = rng.randint(1, 3)
        table = AnnotationTable()
        entries = []
        used = 0
        for i in range(split):
            take = rng.randint(1, 2)
            group = words[used:used + take + 1]
            used += take + 1
            if not group:
                continue
            table.add(group[0], set(group))
            entries.append((group[0], {normalize(w) for w in group}))
        for query in words + ["unknown"]:
            expected = query
            for canonical, names in entries:
                if normalize(query) in names:
                    expected = canonical
                    break
            assert table.resolve(query) == expected


def test_overlapping_alias_sets_are_rejected():
    table = AnnotationTable()
    table.add("id", {"id", "path"})
    with pytest.raises(ValueError):
        table.add("name", {"title", "Path"})


def test_annotation_file_round_trip(tmp_path):
    payload = [
        {"id": "id", "names": ["path", "project_id"]},
        {"id": "name", "names": ["title"]},
    ]
    target = tmp_path / "annotations.json"
    target.write_text(json.dumps(payload), encoding="utf-8")
    table = load_annotations(str(target))
    assert table.resolve("Project_ID") == "id"
    assert table.resolve("title") == "name"
    # canonical ids are members of their own name sets
    for entry in table.entries:
        assert entry.canonical_id in entry.names


def test_annotation_file_must_be_a_list(tmp_path):
    target = tmp_path / "bad.json"
    target.write_text('{"id": "x"}', encoding="utf-8")
    with pytest.raises(ValueError):
        load_annotations(str(target))


# --- scores ---


def test_increase_and_decrease_steps():
    store = MatchScoreStore(MatchConfig())
    pair = store.get_or_create("id", "id")
    assert pair.score == 0.5
    store.increase_score(pair)
    assert pair.score == 0.6
    assert (pair.uses, pair.successes) == (1, 1)
    store.decrease_score(pair)
    assert pair.score == 0.4
    assert (pair.uses, pair.successes) == (2, 1)


def test_score_clamps_at_bounds():
    store = MatchScoreStore(MatchConfig())
    low = store.get_or_create("a", "a")
    low.score = 0.0
    store.decrease_score(low)
    assert low.score == 0.0
    high = store.get_or_create("b", "b")
    high.score = 1.0
    store.increase_score(high)
    assert high.score == 1.0


def test_two_decreases_from_initial_cross_the_threshold():
    config = MatchConfig()
    store = MatchScoreStore(config)
    pair = store.get_or_create("id", "id")
    store.decrease_score(pair)
    assert pair.score >= config.threshold
    store.decrease_score(pair)
    assert pair.score < config.threshold


def test_repeated_float_steps_do_not_drift_across_the_threshold():
    store = MatchScoreStore(MatchConfig())
    pair = store.get_or_create("id", "id")
    store.increase_score(pair)  # 0.6
    store.decrease_score(pair)  # 0.4
    store.decrease_score(pair)  # 0.2, exactly at the threshold
    assert pair.score == 0.2
    assert pair.score >= store.config.threshold


# --- fuzzy matching against a pool fixture ---


def branch_fixture():
    doc = {
        "openapi": "3.0.0",
        "info": {},
        "paths": {
            "/projects": {"get": {"responses": {"200": {"description": "ok"}}}},
            "/projects/{id}": {"get": {"responses": {"200": {"description": "ok"}}}},
            "/projects/{id}/branches": {"get": {"responses": {"200": {"description": "ok"}}}},
        },
    }
    spec = parse_spec(json.dumps(doc))
    forest = build_forest(spec)
    projects, param, branches = dfs_order(forest)
    return forest, projects, param, branches


def tuple_of(fields, method="POST", node_id=0):
    return ResourceTuple(fields=dict(fields), origin_method=method, origin_node=node_id)


def test_fuzzy_match_finds_parent_resource():
    _, projects, param, _ = branch_fixture()
    pool = ResourcePool()
    pool.add(projects, tuple_of({"id": 7, "name": "a", "path": "a"}))
    scores = MatchScoreStore(MatchConfig(epsilon=0.0))
    assert fuzzy_match("id", param, pool, scores, Random(0), param_name="id") == "id"


def test_fuzzy_match_empty_pool_returns_none():
    _, _, param, _ = branch_fixture()
    scores = MatchScoreStore(MatchConfig(epsilon=0.0))
    assert fuzzy_match("id", param, ResourcePool(), scores, Random(0)) is None


def test_fuzzy_match_single_candidate_is_deterministic():
    _, projects, param, _ = branch_fixture()
    pool = ResourcePool()
    pool.add(projects, tuple_of({"id": 1, "name": "x", "path": "y"}))
    scores = MatchScoreStore(MatchConfig(epsilon=0.0))
    for seed in range(25):
        assert fuzzy_match("id", param, pool, scores, Random(seed)) == "id"


def test_fuzzy_match_epsilon_one_always_abstains():
    _, projects, param, _ = branch_fixture()
    pool = ResourcePool()
    pool.add(projects, tuple_of({"id": 1}))
    scores = MatchScoreStore(MatchConfig(epsilon=1.0))
    for seed in range(25):
        assert fuzzy_match("id", param, pool, scores, Random(seed)) is None


def test_fuzzy_match_excludes_pairs_below_threshold():
    _, projects, param, _ = branch_fixture()
    pool = ResourcePool()
    pool.add(projects, tuple_of({"id": 1}))
    config = MatchConfig(epsilon=0.0)
    store = MatchScoreStore(config)
    pair = store.get_or_create("id", "id")
    store.decrease_score(pair)
    store.decrease_score(pair)
    assert pair.score < config.threshold
    assert fuzzy_match("id", param, pool, store, Random(0), param_name="id") is None


def test_fuzzy_match_nearest_level_shadows_ancestors():
    _, projects, param, branches = branch_fixture()
    pool = ResourcePool()
    pool.add(projects, tuple_of({"id": 1}))
    pool.add(branches, tuple_of({"project.id": 2}))
    scores = MatchScoreStore(MatchConfig(epsilon=0.0))
    # at the branches node the local sub-pool wins over the projects pool
    for seed in range(25):
        assert fuzzy_match("id", branches, pool, scores, Random(seed)) == "project.id"


def test_fuzzy_match_with_epsilon_zero_none_means_no_candidate():
    _, projects, param, _ = branch_fixture()
    pool = ResourcePool()
    pool.add(projects, tuple_of({"name": "a"}))
    scores = MatchScoreStore(MatchConfig(epsilon=0.0))
    assert fuzzy_match("branch", param, pool, scores, Random(0)) is None
    assert fuzzy_match("name", param, pool, scores, Random(0)) == "name"
