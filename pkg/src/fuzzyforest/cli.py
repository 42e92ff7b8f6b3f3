"""Command-line interface for fuzzyforest."""

import argparse
import sys
from collections.abc import Callable
from typing import Any

from pydantic import ValidationError

from fuzzyforest.app import Services, create_services
from fuzzyforest.domain.errors import FuzzyForestError
from fuzzyforest.observability import configure_logging
from fuzzyforest.services import CommandOutcome
from fuzzyforest.settings import RunConfig, load_run_config

# argparse destinations that are not RunConfig fields
CONTROL_DESTS = frozenset({"command", "config", "auto_beta"})


def cmd_synth(config: RunConfig, services: Services) -> list[CommandOutcome]:
    """Write a synthetic labeled dataset and its ground truth."""
    return [services.synth.run(config)]


def cmd_ingest(config: RunConfig, services: Services) -> list[CommandOutcome]:
    """Impute and encode the input table; report missingness."""
    return [services.ingest.run(config)]


def cmd_modules(config: RunConfig, services: Services) -> list[CommandOutcome]:
    """Form WGCNA modules over the encoded features."""
    return [services.modules.run(config)]


def cmd_select(config: RunConfig, services: Services) -> list[CommandOutcome]:
    """Run Fuzzy Forests screening and selection."""
    return [services.select.run(config)]


def cmd_evaluate(config: RunConfig, services: Services) -> list[CommandOutcome]:
    """Cross-validate the fuzzy top-k forest, the full forest and the ridge logit."""
    return [services.evaluate.run(config)]


def cmd_crosstab(config: RunConfig, services: Services) -> list[CommandOutcome]:
    """Break the outcome down by categorical variables."""
    return [services.crosstab.run(config)]


def cmd_report(config: RunConfig, services: Services) -> list[CommandOutcome]:
    """Every analysis artifact from one ingest of the input."""
    prepared = services.preparer.prepare(config)
    return [
        services.ingest.run(config, prepared),
        services.modules.run(config, prepared),
        services.select.run(config, prepared),
        services.evaluate.run(config, prepared),
        services.crosstab.run(config, prepared),
    ]


COMMANDS: dict[str, Callable[[RunConfig, Services], list[CommandOutcome]]] = {
    "synth": cmd_synth,
    "ingest": cmd_ingest,
    "modules": cmd_modules,
    "select": cmd_select,
    "evaluate": cmd_evaluate,
    "crosstab": cmd_crosstab,
    "report": cmd_report,
}


def _int_list(text: str) -> list[int]:
    return [int(part) for part in text.split(",") if part.strip()]


def _str_list(text: str) -> list[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


def _flag(parser: argparse.ArgumentParser, name: str, dest: str, help_text: str) -> None:
    parser.add_argument(name, dest=dest, action="store_const", const=True, default=None, help=help_text)


def _global_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="YAML config file")
    common.add_argument("--seed", type=int, default=None, help="Base random seed (required)")
    common.add_argument("--out-dir", dest="out_dir", default=None, help="Artifact directory")
    common.add_argument("--threads", type=int, default=None, help="Worker threads")
    common.add_argument("--log-level", dest="log_level", default=None, help="DEBUG, INFO, WARNING")
    _flag(common, "--json-logs", "json_logs", "Emit JSON log lines on stderr")
    return common


def _input_options() -> argparse.ArgumentParser:
    group = argparse.ArgumentParser(add_help=False)
    group.add_argument("--input", dest="input_path", default=None, help="Input CSV")
    group.add_argument("--label-column", dest="label_column", default=None)
    group.add_argument("--weight-column", dest="weight_column", default=None)
    group.add_argument("--positive-label", dest="positive_label", default=None)
    group.add_argument(
        "--missing-sentinels", dest="missing_sentinels", type=_str_list, default=None,
        help="Comma-separated cell values read as missing",
    )  # fmt: skip
    group.add_argument("--donor-pool-size", dest="donor_pool_size", type=int, default=None)
    return group


def _module_options() -> argparse.ArgumentParser:
    group = argparse.ArgumentParser(add_help=False)
    beta = group.add_mutually_exclusive_group()
    beta.add_argument("--beta", type=int, default=None, help="Soft-threshold power")
    beta.add_argument(
        "--auto-beta", dest="auto_beta", action="store_true", help="Pick the power by scale-free fit"
    )
    group.add_argument("--cut-height", dest="cut_height", type=float, default=None)
    group.add_argument("--min-module-size", dest="min_module_size", type=int, default=None)
    group.add_argument("--truth", dest="truth_path", default=None, help="truth.json of a synth run")
    _flag(group, "--audit-matrices", "audit_matrices", "Also write adjacency and TOM as CSV")
    return group


def _selection_options() -> argparse.ArgumentParser:
    group = argparse.ArgumentParser(add_help=False)
    group.add_argument("--final-k", dest="final_k", type=int, default=None)
    group.add_argument("--drop-fraction", dest="drop_fraction", type=float, default=None)
    group.add_argument("--keep-fraction", dest="keep_fraction", type=float, default=None)
    group.add_argument("--screening-trees", dest="screening_trees", type=int, default=None)
    group.add_argument("--selection-trees", dest="selection_trees", type=int, default=None)
    group.add_argument("--mtry", type=int, default=None)
    _flag(group, "--screen-grey", "screen_grey", "Screen the grey module as one more module")
    return group


def _evaluation_options() -> argparse.ArgumentParser:
    group = argparse.ArgumentParser(add_help=False)
    group.add_argument("--k", type=int, default=None, help="Number of folds")
    group.add_argument("--lambda", dest="ridge_lambda", type=float, default=None)
    group.add_argument(
        "--unstratified", dest="stratified", action="store_const", const=False, default=None
    )
    group.add_argument("--forest", dest="forest_path", default=None, help="forest.json to score")
    return group


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fuzzyforest",
        description="Fuzzy Forests feature selection for correlated survey data",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  fuzzyforest synth --seed 7 --out-dir data --n-samples 2000
  fuzzyforest modules --seed 7 --input data/synthetic.csv --truth data/truth.json
  fuzzyforest select --seed 7 --input data/synthetic.csv --final-k 10
  fuzzyforest report --config run.yaml --threads 8
        """,
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    common = _global_options()
    inputs = _input_options()
    modules = _module_options()
    selection = _selection_options()
    evaluation = _evaluation_options()

    synth = subparsers.add_parser("synth", parents=[common], help="Write a synthetic dataset")
    synth.add_argument("--n-samples", dest="n_samples", type=int, default=None)
    synth.add_argument("--block-sizes", dest="block_sizes", type=_int_list, default=None)
    synth.add_argument("--rho", type=float, default=None)
    synth.add_argument("--n-informative", dest="n_informative", type=int, default=None)
    synth.add_argument("--n-informative-blocks", dest="n_informative_blocks", type=int, default=None)
    synth.add_argument("--signal-strength", dest="signal_strength", type=float, default=None)
    synth.add_argument("--noise-rate", dest="noise_rate", type=float, default=None)
    synth.add_argument("--n-noise", dest="n_noise", type=int, default=None)
    synth.add_argument(
        "--output", dest="synth_output", choices=["continuous", "indicator", "categorical"],
        default=None,
    )  # fmt: skip
    synth.add_argument("--n-levels", dest="n_levels", type=int, default=None)
    synth.add_argument("--mask-fraction", dest="mask_fraction", type=float, default=None)
    synth.add_argument("--label-column", dest="label_column", default=None)

    subparsers.add_parser("ingest", parents=[common, inputs], help="Impute and encode a table")
    subparsers.add_parser(
        "modules", parents=[common, inputs, modules], help="Form correlation modules"
    )
    subparsers.add_parser(
        "select", parents=[common, inputs, modules, selection], help="Select top features"
    )
    subparsers.add_parser(
        "evaluate",
        parents=[common, inputs, modules, selection, evaluation],
        help="Cross-validate three models",
    )
    crosstab = subparsers.add_parser(
        "crosstab", parents=[common, inputs], help="Outcome breakdown tables"
    )
    crosstab.add_argument(
        "--variables", dest="crosstab_variables", type=_str_list, default=None,
        help="Comma-separated variables (default: every categorical column)",
    )  # fmt: skip
    report = subparsers.add_parser(
        "report",
        parents=[common, inputs, modules, selection, evaluation],
        help="Run every analysis and bundle the artifacts",
    )
    report.add_argument(
        "--variables", dest="crosstab_variables", type=_str_list, default=None
    )
    return parser


def _overrides(args: argparse.Namespace) -> dict[str, Any]:
    return {
        key: value
        for key, value in vars(args).items()
        if key not in CONTROL_DESTS and value is not None
    }


def main(argv: list[str] | None = None) -> None:
    """CLI entry point."""
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level or "INFO", bool(args.json_logs))

    try:
        config = load_run_config(args.config, _overrides(args))
        if getattr(args, "auto_beta", False):
            config = config.model_copy(update={"beta": None})
        configure_logging(config.log_level, config.json_logs)
        outcomes = COMMANDS[args.command](config, create_services(config.out_dir))
    except FileNotFoundError as e:
        print(f"Error: File not found: {e.filename}", file=sys.stderr)
        sys.exit(1)
    except ValidationError as e:
        print(f"Error: Invalid configuration: {e}", file=sys.stderr)
        sys.exit(1)
    except FuzzyForestError as e:
        print(f"Error: {e}", file=sys.stderr)
        sys.exit(1)

    for outcome in outcomes:
        for line in outcome.lines:
            print(line)
        for warning in outcome.warnings:
            print(f"Warning: {warning}", file=sys.stderr)
        for path in outcome.artifacts:
            print(f"Wrote {path}", file=sys.stderr)


if __name__ == "__main__":
    main()
