"""Command-line entry point."""

import argparse
import logging
import sys

from .matching import MatchConfig
from .openapi import SpecError
from .runner import STRATEGIES, ConfigError, RunConfig, run

DEFAULTS = MatchConfig()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="treefuzz",
        description="Black-box stateful REST API fuzzer driven by endpoint trees.",
    )
    parser.add_argument("--spec", help="path to a Swagger 2.0 / OpenAPI 3.0 file (JSON or YAML)")
    parser.add_argument("--base-url", default=None, help="target base URL")
    parser.add_argument("--strategy", choices=STRATEGIES, default="tree")
    parser.add_argument("--duration", type=float, default=60.0, help="time budget, seconds")
    parser.add_argument("--rate", type=float, default=300.0, help="request rate per minute")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--annotations", help="JSON file of resource alias sets")
    parser.add_argument("--report-dir", help="directory for metrics.json / bugs.jsonl / exports")
    parser.add_argument("--mock", action="store_true", help="fuzz the embedded mock service")
    parser.add_argument("--export-tree", action="store_true",
                        help="dump the endpoint forest as outline and DOT into the report dir")
    parser.add_argument("--timeseries", action="store_true",
                        help="write the activation time series (CSV) and its figure (PNG)")
    parser.add_argument("--dump-pool", action="store_true",
                        help="dump the resource pool as JSON at the end of the run")
    parser.add_argument("--cases-log", help="write every generated test case as JSON Lines")
    parser.add_argument("--format", choices=("auto", "swagger2", "openapi3"), default="auto")
    parser.add_argument("--k-min", type=int, default=2, help="min POST repetitions per node")
    parser.add_argument("--k-max", type=int, default=5, help="max POST repetitions per node")
    parser.add_argument("--delta-up", type=float, default=DEFAULTS.delta_up)
    parser.add_argument("--delta-down", type=float, default=DEFAULTS.delta_down)
    parser.add_argument("--threshold", type=float, default=DEFAULTS.threshold)
    parser.add_argument("--epsilon", type=float, default=DEFAULTS.epsilon)
    parser.add_argument("--uniqueness", default=None,
                        help="comma-separated parameter names treated as uniqueness-sensitive")
    parser.add_argument("--auth-env", default=None,
                        help="environment variable holding a bearer token")
    parser.add_argument("--timeout", type=float, default=10.0, help="request timeout, seconds")
    parser.add_argument("--max-rounds", type=int, default=None)
    parser.add_argument("--max-requests", type=int, default=None)
    parser.add_argument("--include-patch", action="store_true",
                        help="include PATCH in the method template")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    config = RunConfig(
        spec_path=args.spec,
        strategy=args.strategy,
        duration=args.duration,
        rate_per_minute=args.rate,
        seed=args.seed,
        k_min=args.k_min,
        k_max=args.k_max,
        delta_up=args.delta_up,
        delta_down=args.delta_down,
        threshold=args.threshold,
        epsilon=args.epsilon,
        annotations_path=args.annotations,
        report_dir=args.report_dir,
        auth_env=args.auth_env,
        use_mock=args.mock,
        format_hint=args.format,
        timeout=args.timeout,
        include_patch=args.include_patch,
        timeseries=args.timeseries,
        dump_pool=args.dump_pool,
        export_tree=args.export_tree,
        cases_path=args.cases_log,
        max_rounds=args.max_rounds,
        max_requests=args.max_requests,
    )
    if args.base_url:
        config.base_url = args.base_url
    if args.uniqueness is not None:
        config.uniqueness_params = tuple(
            name.strip() for name in args.uniqueness.split(",") if name.strip()
        )
    return config


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if not args.mock and not args.base_url:
        print("error: --base-url is required unless --mock is given", file=sys.stderr)
        return 2
    config = config_from_args(args)
    try:
        result = run(config)
    except (ConfigError, SpecError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    metrics = result.metrics
    print(
        f"{metrics.strategy}: {metrics.requests_sent} requests, "
        f"{len(metrics.activated)}/{metrics.total_operations} operations activated, "
        f"{metrics.bugs_unique} unique bugs ({metrics.bugs_total} total 5XX)"
    )
    for status, count in sorted(metrics.status_counts.items()):
        print(f"  {status}: {count}")
    if args.report_dir:
        print(f"reports written to {args.report_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
