"""csl-lab command line: run experiments, list them, run the acceptance suite.

    csl-lab run <config.json | experiment-name> [--set key=value]...
                [--seed N] [--out DIR] [--plot-data] [--no-figures]
    csl-lab list
    csl-lab check [--criteria 1,2,...] [--seed N]

Config precedence: command line --set/--seed/--out beat the config file,
which beats the documented defaults.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import acceptance
from .experiments import (
    EXPERIMENTS,
    ExperimentConfig,
    describe_experiments,
    experiment_names,
    run_experiment,
)

_TOP_LEVEL_KEYS = {"experiment", "parameters", "seed", "output_dir"}


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _load_config(source: str) -> ExperimentConfig:
    path = Path(source)
    if path.suffix == ".json" or path.exists():
        payload = json.loads(path.read_text(encoding="utf-8"))
        unknown = sorted(set(payload) - _TOP_LEVEL_KEYS)
        if unknown:
            raise ValueError(
                f"unknown top-level config key(s): {', '.join(unknown)}; "
                f"allowed: {', '.join(sorted(_TOP_LEVEL_KEYS))}"
            )
        if "experiment" not in payload:
            raise ValueError("config file must name an 'experiment'")
        return ExperimentConfig(
            experiment=payload["experiment"],
            parameters=dict(payload.get("parameters", {})),
            seed=int(payload.get("seed", 1)),
            output_dir=payload.get("output_dir"),
        )
    if source in EXPERIMENTS:
        return ExperimentConfig(experiment=source)
    raise ValueError(
        f"{source!r} is neither a config file nor an experiment name; "
        f"known experiments: {', '.join(experiment_names())}"
    )


def _apply_overrides(config: ExperimentConfig, assignments: list[str]) -> None:
    for item in assignments:
        if "=" not in item:
            raise ValueError(f"--set expects key=value, got {item!r}")
        key, raw = item.split("=", 1)
        key = key.strip()
        value = _parse_value(raw.strip())
        if key.startswith("parameters."):
            config.parameters[key[len("parameters."):]] = value
        elif key == "seed":
            config.seed = int(value)
        elif key == "output_dir":
            config.output_dir = str(value)
        elif key == "experiment":
            config.experiment = str(value)
        else:
            config.parameters[key] = value


def _cmd_run(args) -> int:
    config = _load_config(args.config)
    _apply_overrides(config, args.set or [])
    if args.seed is not None:
        config.seed = args.seed
    if args.out is not None:
        config.output_dir = args.out
    report = run_experiment(
        config, figures=not args.no_figures, plot_data=args.plot_data
    )
    for check in report.checks:
        status = "PASS" if check["passed"] else "FAIL"
        print(f"{status}  {check['name']}: {check['detail']}")
    print(f"outputs: {report.output_dir}  (manifest.json lists {len(report.manifest['outputs'])} files)")
    return 0 if report.all_passed else 2


def _cmd_list(_args) -> int:
    print(describe_experiments())
    return 0


def _cmd_check(args) -> int:
    numbers = None
    if args.criteria:
        numbers = {int(tok) for tok in args.criteria.split(",")}
    results = acceptance.run_all(numbers=numbers, seed=args.seed)
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    return 0 if not failed else 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="csl-lab",
        description="Numerical laboratory for continuous spontaneous localization dynamics",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one experiment")
    run_p.add_argument("config", help="config JSON path or bare experiment name")
    run_p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a parameter (JSON-parsed value); repeatable")
    run_p.add_argument("--seed", type=int, default=None, help="override the seed")
    run_p.add_argument("--out", default=None, help="output directory")
    run_p.add_argument("--plot-data", action="store_true",
                       help="also emit whitespace-delimited .dat variants")
    run_p.add_argument("--no-figures", action="store_true",
                       help="skip figure rendering")
    run_p.set_defaults(fn=_cmd_run)

    list_p = sub.add_parser("list", help="list experiments and their defaults")
    list_p.set_defaults(fn=_cmd_list)

    check_p = sub.add_parser("check", help="run the built-in acceptance suite")
    check_p.add_argument("--criteria", default=None,
                         help="comma-separated criterion numbers (default: all)")
    check_p.add_argument("--seed", type=int, default=20260811)
    check_p.set_defaults(fn=_cmd_check)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
