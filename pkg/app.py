"""dfml command line: validate, inspect, read and generate readers from DFML descriptions.

    python app.py validate corpus/shapefile_point.dfml
    python app.py inspect --dfml corpus/shapefile_point.dfml
    python app.py read --dfml corpus/shapefile_point.dfml --data points3.shp --format json
    python app.py read --dfml corpus/shapefile_point.dfml --data points3.shp --mode random --select "Point/X#3"
    python app.py gen --dfml corpus/shapefile_point.dfml --out reader.py
"""

import argparse
import json
import logging
import os
import sys

import pandas as pd

from codegen import DEFAULT_TARGET, TARGETS, generate_random, generate_sequential, write_program
from dfml_model import Severity, ValidationReport, load_document, serialize_document, validate_document
from errors import DfmlError, DfmlParseError, SelectionError
from linearizer import linearize, sequence_summary
from read_engine import (
    ByteSource,
    ValueKind,
    parse_selection,
    read_random,
    read_sequential,
    render_csv,
    render_json,
    render_text,
    render_values,
)

logger = logging.getLogger("dfml")

# === CONFIG ===
LOG_FORMAT = "%(levelname)s %(name)s: %(message)s"
LOG_LEVEL_ENV = "DFML_LOG_LEVEL"
DEFAULT_LOG_LEVEL = "WARNING"
EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


class CommandFailed(Exception):
    """Outcome-level failure: reported as `error: ...`, exit 1."""


# === LOGGING ===
def configure_logging(verbose=False):
    name = "DEBUG" if verbose else os.environ.get(LOG_LEVEL_ENV, DEFAULT_LOG_LEVEL).upper()
    level = getattr(logging, name, None)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(format=LOG_FORMAT, stream=sys.stderr)
    logging.getLogger().setLevel(level)


# === PIPELINE HELPERS ===
def _load_valid(path):
    """Parse and validate; errors in the report stop the command."""
    doc = load_document(path)
    report = validate_document(doc)
    for issue in report.warnings:
        logger.warning("%s", issue.to_text())
    if not report.ok:
        sys.stderr.write(report.to_text())
        raise CommandFailed(f"{path}: description has {len(report.errors)} error(s)")
    return doc


def _values_json(values):
    rows = [{"path": v.source_path, "value": None if v.kind is ValueKind.SEPARATOR else v.data} for v in values]
    return json.dumps(rows, indent=2) + "\n"


def _values_csv(values):
    df = pd.DataFrame([{"path": v.source_path, "value": v.to_text()} for v in values], columns=["path", "value"])
    return df.to_csv(index=False, lineterminator="\n")


# === COMMANDS ===
def cmd_validate(args):
    try:
        report = validate_document(load_document(args.dfml))
    except DfmlParseError as exc:
        report = ValidationReport()
        report.add(Severity.ERROR, "", str(exc))
    sys.stdout.write(report.to_text())
    return EXIT_OK if report.ok else EXIT_FAILURE


def cmd_inspect(args):
    doc = _load_valid(args.dfml)
    if args.xml:
        sys.stdout.write(serialize_document(doc))
    else:
        sys.stdout.write(sequence_summary(linearize(doc)))
    return EXIT_OK


def cmd_read(args):
    seq = linearize(_load_valid(args.dfml))
    with ByteSource.from_path(args.data) as source:
        if args.mode == "random":
            values = read_random(source, seq, args.selection)
        else:
            result = read_sequential(source, seq)

    if args.mode == "random":
        renderers = {"text": render_values, "json": _values_json, "csv": _values_csv}
        sys.stdout.write(renderers[args.format](values))
        return EXIT_OK

    renderers = {"text": render_text, "json": render_json, "csv": render_csv}
    sys.stdout.write(renderers[args.format](result))
    if result.issues:
        for issue in result.issues:
            sys.stderr.write(issue.to_text() + "\n")
        raise CommandFailed(f"{len(result.issues)} value(s) differ from their expected constants")
    return EXIT_OK


def cmd_gen(args):
    seq = linearize(_load_valid(args.dfml))
    if args.mode == "random":
        program = generate_random(seq, args.selection, args.target)
    else:
        program = generate_sequential(seq, args.target)
    if args.out is None:
        sys.stdout.write(program.source_text)
    else:
        path = write_program(program, args.out)
        sys.stdout.write(f"{path}\n")
    logger.info("entry contract: %s", program.entry_contract)
    return EXIT_OK


# === ARGUMENTS ===
def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--verbose", "-v", action="store_true", help="log at DEBUG level")

    parser = argparse.ArgumentParser(prog="dfml", description="DFML description toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", parents=[common], help="parse and validate a description")
    p.add_argument("dfml_pos", nargs="?", metavar="DFML")
    p.add_argument("--dfml")
    p.set_defaults(handler=cmd_validate)

    p = sub.add_parser("inspect", parents=[common], help="print the linear read plan")
    p.add_argument("--dfml", required=True)
    p.add_argument("--xml", action="store_true", help="print the re-serialized description instead")
    p.set_defaults(handler=cmd_inspect)

    for name, handler, help_text in (
        ("read", cmd_read, "read a data file with a description"),
        ("gen", cmd_gen, "generate a standalone reader program"),
    ):
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.add_argument("--dfml", required=True)
        p.add_argument("--mode", choices=["sequential", "random"], default="sequential")
        p.add_argument("--select", help='leaf or group occurrence to read in random mode, e.g. "Point/X#3", "Point#3" or "Point/X#*"')
        p.set_defaults(handler=handler)
    read_parser = sub.choices["read"]
    read_parser.add_argument("--data", required=True)
    read_parser.add_argument("--format", choices=["text", "json", "csv"], default="text")
    gen_parser = sub.choices["gen"]
    gen_parser.add_argument("--target", default=DEFAULT_TARGET, help=f"one of {sorted(TARGETS)}")
    gen_parser.add_argument("--out", help="file or directory for the program; stdout when omitted")
    return parser


def _check_usage(parser, args):
    if args.command == "validate":
        if (args.dfml is None) == (args.dfml_pos is None):
            parser.error("validate needs exactly one DFML path (positional or --dfml)")
        args.dfml = args.dfml or args.dfml_pos
    mode = getattr(args, "mode", None)
    if mode == "random" and not args.select:
        parser.error("--mode random requires --select")
    if mode is not None and mode != "random" and args.select:
        parser.error("--select only applies to --mode random")
    if mode == "random":
        try:
            args.selection = parse_selection(args.select)
        except SelectionError as exc:
            parser.error(f"--select: {exc}")


# === ENTRY POINT ===
def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _check_usage(parser, args)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE

    configure_logging(args.verbose)
    try:
        return args.handler(args)
    except (DfmlError, CommandFailed, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_FAILURE


def main():
    sys.exit(run_cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
