"""treefuzz: black-box stateful REST API fuzzer driven by endpoint trees."""

from .generation import (
    BfsStrategy,
    EscalationState,
    GenerationConfig,
    MethodTemplate,
    TestCase,
    TopoStrategy,
    TreeStrategy,
    fuzz_value,
)
from .matching import AnnotationTable, MatchConfig, MatchPair, MatchScoreStore, fuzzy_match, normalize
from .openapi import (
    ApiOperation,
    ApiSpec,
    DuplicateOperation,
    MalformedDocument,
    ParamSpec,
    SchemaTooDeep,
    SpecError,
    UnresolvedReference,
    flatten_schema,
    parse_spec,
)
from .pool import ResourcePool, ResourceTuple
from .runner import ConfigError, RunConfig, RunMetrics, RunResult, run
from .tree import ApiForest, TreeNode, build_forest, dfs_order, endpoint_of, nearest_token_ancestor

__version__ = "0.1.0"

__all__ = [
    "AnnotationTable",
    "ApiForest",
    "ApiOperation",
    "ApiSpec",
    "BfsStrategy",
    "ConfigError",
    "DuplicateOperation",
    "EscalationState",
    "GenerationConfig",
    "MalformedDocument",
    "MatchConfig",
    "MatchPair",
    "MatchScoreStore",
    "MethodTemplate",
    "ParamSpec",
    "ResourcePool",
    "ResourceTuple",
    "RunConfig",
    "RunMetrics",
    "RunResult",
    "SchemaTooDeep",
    "SpecError",
    "TestCase",
    "TopoStrategy",
    "TreeNode",
    "TreeStrategy",
    "UnresolvedReference",
    "build_forest",
    "dfs_order",
    "endpoint_of",
    "flatten_schema",
    "fuzz_value",
    "fuzzy_match",
    "nearest_token_ancestor",
    "normalize",
    "parse_spec",
    "run",
]
