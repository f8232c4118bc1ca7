# src/main.py
"""
Command-line entry point for neutrosophic-eval.
Runs live evaluations, replays archived results into report tables, serves the mock endpoint and
emits plot-ready figure data.

Usage: python -m src.main [global flags] {run,replay,analyze,mock-serve,emit-figures} ...
"""

import argparse
import sys
from pathlib import Path

from src.core.errors import ConfigError, DomainError, SchemaError, StartupError
from src.core.experiment_engine import run_experiment
from src.core.prompt_templates import Strategy
from src.core.stimuli import TAUTOLOGY_IDS
from src.integrations.mock_endpoint import MockEndpoint, load_fixtures
from src.analysis.themes import load_lexicon
from src.reporting.archive import (
    apply_reruns,
    load_column_map,
    load_records,
    transcripts_to_records,
    write_archive_csv,
    write_record_document,
)
from src.reporting.figure_data import emit_figure_data
from src.reporting.report_builder import FLOAT_FORMAT, TABLE_NAMES, ReportBuilder, write_report
from src.utils.config import AppConfig
from src.utils.logger import logger, set_log_level

FIGURE_TABLES = ("paradox_positions", "scalar_vs_jaccard", "mistral_matrix")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="neutrosophic-eval",
        description="Neutrosophic T/I/F evaluation of chat models: live runs, replay and report tables.",
    )
    parser.add_argument("--config", help="YAML document with 'run' and 'analysis' sections")
    parser.add_argument("--seed", type=int, help="seed for permutation tests")
    parser.add_argument("--lexicon", help="theme lexicon YAML")
    parser.add_argument("--out-dir", default="out", help="output directory (default: out)")
    parser.add_argument("--stopwords", action="store_true", help="drop English stopwords when tokenizing losses")
    parser.add_argument("--permutations", type=int, help="permutation count (default 10000)")
    parser.add_argument("--log-level", default="INFO", help="DEBUG, INFO, WARNING or ERROR")

    commands = parser.add_subparsers(dest="command", required=True)

    commands.add_parser("run", help="evaluate the configured grid against the live endpoint")

    def add_inputs(subparser):
        subparser.add_argument("files", nargs="+", help="archive CSV, JSON record documents or NDJSON transcripts")
        subparser.add_argument("--rerun", action="append", default=[],
                               help="records that supersede base records of the same model and strategy")
        subparser.add_argument("--column-map", help="import adapter for published files")

    add_inputs(commands.add_parser("replay", help="compute every report table from archived records"))

    analyze = commands.add_parser("analyze", help="compute a single report table and print it as CSV")
    analyze.add_argument("--table", required=True, choices=TABLE_NAMES)
    add_inputs(analyze)

    mock = commands.add_parser("mock-serve", help="serve canned completions on a local endpoint")
    mock.add_argument("--fixtures", required=True, help="fixture YAML")
    mock.add_argument("--port", type=int, default=8080)
    mock.add_argument("--host", default="localhost")

    add_inputs(commands.add_parser("emit-figures", help="write plot-ready CSVs for the three figures"))
    return parser


def _settings(args, app_config):
    return app_config.analysis.with_overrides(
        seed=args.seed,
        permutations=args.permutations,
        lexicon_path=args.lexicon,
        stopwords=True if args.stopwords else None,
        column_map_path=getattr(args, "column_map", None),
    )


def _load_inputs(args, settings, app_config):
    column_map = load_column_map(settings.column_map_path) if settings.column_map_path else None
    records = load_records(args.files, column_map, app_config.model_manager)
    if args.rerun:
        records = apply_reruns(records, load_records(args.rerun, column_map, app_config.model_manager))
    logger.info(f"Loaded {len(records)} records from {len(args.files)} file(s).")
    return records


def _builder(settings, app_config):
    return ReportBuilder(settings, load_lexicon(settings.lexicon_path), app_config.model_manager)


def _document_kind(run_config):
    if set(run_config.stimuli) <= set(TAUTOLOGY_IDS):
        return "tautology"
    if set(run_config.strategies) == {Strategy.S5_ABLATION}:
        return "ablation"
    return None


def command_run(args, app_config):
    out_dir = Path(args.out_dir)
    label = app_config.run.run_label
    archive = run_experiment(app_config.run, archive_path=out_dir / f"{label}_transcripts.ndjson",
                             api_key=app_config.get_api_key())
    missing = archive.missing_cells(app_config.run)
    records = transcripts_to_records(archive, app_config.model_manager)
    write_archive_csv(records, out_dir / f"{label}_results.csv")
    kind = _document_kind(app_config.run)
    if kind:
        write_record_document(records, out_dir / f"{label}_records.json", kind=kind)
    failures = sum(1 for r in records if not r.is_valid)
    print(f"{len(records)} evaluations archived ({failures} parse failures, {len(missing)} missing cells) in {out_dir}")
    return 0


def command_replay(args, app_config):
    settings = _settings(args, app_config)
    records = _load_inputs(args, settings, app_config)
    report = _builder(settings, app_config).build(records)
    write_report(report, args.out_dir)
    print(f"{len(report.names())} tables written to {Path(args.out_dir) / 'tables'}")
    return 0


def command_analyze(args, app_config):
    settings = _settings(args, app_config)
    records = _load_inputs(args, settings, app_config)
    report = _builder(settings, app_config).build(records, only=[args.table])
    report.table(args.table).to_csv(sys.stdout, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return 0


def command_mock_serve(args, app_config):
    endpoint = MockEndpoint(load_fixtures(args.fixtures), host=args.host, port=args.port).start()
    print(f"Mock endpoint listening at {endpoint.url} (Ctrl+C to stop)")
    endpoint.serve_forever()
    return 0


def command_emit_figures(args, app_config):
    settings = _settings(args, app_config)
    records = _load_inputs(args, settings, app_config)
    report = _builder(settings, app_config).build(records, only=FIGURE_TABLES)
    written = emit_figure_data(report, args.out_dir)
    print(f"{len(written)} figure files written to {Path(args.out_dir) / 'figures'}")
    return 0


COMMANDS = {
    "run": command_run,
    "replay": command_replay,
    "analyze": command_analyze,
    "mock-serve": command_mock_serve,
    "emit-figures": command_emit_figures,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        set_log_level(args.log_level)
        app_config = AppConfig(args.config)
        return COMMANDS[args.command](args, app_config)
    except (ConfigError, SchemaError, StartupError, DomainError) as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return 2
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except Exception as e:
        logger.exception(f"Unexpected error in {args.command}: {e}")
        print(f"unexpected error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
