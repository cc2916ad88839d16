"""Command line entry point.

Subcommands: synth, cluster, predict, report. All take --config (TOML)
and --out; exit code 0 on success, 2 on validation problems (bad config,
missing/malformed inputs), 1 on internal errors.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import load_config
from .errors import PipelineError
from .pipeline import run_cluster, run_predict, run_report
from .synth import SynthSpec, generate_corpus, write_corpus

log = logging.getLogger("tonemine")

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_VALIDATION = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tonemine",
        description="Mine tone-contour shape types and predict them from "
        "linguistic features.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a synthetic corpus")
    p_synth.add_argument("--config", required=True, help="pipeline TOML config")
    p_synth.add_argument("--spec", required=True, help="synth spec JSON")
    p_synth.add_argument("--out", required=True, help="output directory")

    for name, help_text in (
        ("cluster", "derive shape types per tone n-gram category"),
        ("predict", "train/evaluate shape-type predictors"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True)
        p.add_argument("--out", required=True)
        p.add_argument("--jobs", type=int, default=1, help="parallel category workers")

    p_report = sub.add_parser("report", help="summarize prediction results")
    p_report.add_argument("--config", required=True)
    p_report.add_argument("--out", required=True)
    return parser


def _cmd_synth(args: argparse.Namespace) -> int:
    import json

    cfg = load_config(args.config)
    try:
        raw = json.loads(Path(args.spec).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise PipelineError(f"{args.spec}: {exc}") from exc
    raw.setdefault("seed", cfg.seed)
    try:
        spec = SynthSpec.from_dict(raw)
    except (KeyError, TypeError) as exc:
        raise PipelineError(f"{args.spec}: bad synth spec ({exc})") from exc
    result = generate_corpus(spec)
    paths = write_corpus(result, args.out)
    log.info(
        "wrote %d utterances, %d syllables -> %s",
        len(result.tracks), len(result.syllables), args.out,
    )
    for name, p in paths.items():
        print(f"{name}: {p}")
    return EXIT_OK


def _cmd_cluster(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    summary = run_cluster(cfg, args.out, jobs=args.jobs)
    for key, count in summary["categories"].items():
        print(f"{key}: {count} shape types")
    return EXIT_OK


def _cmd_predict(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    results = run_predict(cfg, args.out, jobs=args.jobs)
    print(f"{len(results)} experiment cells -> {Path(args.out) / 'results.csv'}")
    return EXIT_OK


def _cmd_report(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    run_report(cfg, args.out)
    print(f"summary -> {Path(args.out) / 'summary.json'}")
    return EXIT_OK


_COMMANDS = {
    "synth": _cmd_synth,
    "cluster": _cmd_cluster,
    "predict": _cmd_predict,
    "report": _cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return _COMMANDS[args.command](args)
    except (PipelineError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception:  # noqa: BLE001 - internal failure path
        logging.exception("internal error")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
