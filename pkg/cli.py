#!/usr/bin/env python3
"""
Batch command line for the QSL toolkit.

    python cli.py scan --config sample_job_scan_atoms_cz.json --out runs/cz
    python cli.py report --config sample_job_report.json

Exit status: 0 on success, 2 on invalid configuration, 1 on runtime failure
(for example a missing gate time or unpaired sweep results).
"""
from __future__ import annotations

import argparse
import logging
import sys
from typing import List, Optional

from pydantic import ValidationError

from errors import ConfigurationError, GateModelMismatchError
from jobs import JobConfig, ReductionRow, format_reduction_table, load_config, run_job

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s [%(levelname)s] %(name)s: %(message)s"

VERB_KINDS = {
    "optimize": "optimize",
    "scan": "qsl_scan",
    "circuits": "circuit_sweep",
    "epower": "entangling_power",
    "report": "report",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qslkit", description="Quantum speed limits and circuit run-time analysis")
    parser.add_argument("-v", "--verbose", action="store_true", help="log at DEBUG level")
    verbs = parser.add_subparsers(dest="verb", required=True)
    for verb in VERB_KINDS:
        sub = verbs.add_parser(verb)
        sub.add_argument("--config", required=True, help="job configuration (JSON)")
        sub.add_argument("--out", default=None, help="output directory")
        sub.add_argument("--seed", type=int, default=None, help="override the config seed")
        sub.add_argument("--threads", type=int, default=None, help="override the config thread count")
    return parser


def _config_for(args: argparse.Namespace) -> JobConfig:
    config = load_config(args.config, seed=args.seed, threads=args.threads)
    expected = VERB_KINDS[args.verb]
    if config.kind != expected:
        raise ValueError(f"Verb '{args.verb}' runs '{expected}' jobs, config has kind '{config.kind}'")
    return config


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format=LOG_FORMAT)
    try:
        config = _config_for(args)
    except (ValidationError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        logger.debug("Validation failure", exc_info=True)
        return 2
    try:
        outcome = run_job(config, args.out)
    except (ConfigurationError, GateModelMismatchError) as e:
        # settings that only fail once the model or gate is built
        print(f"error: {e}", file=sys.stderr)
        logger.debug("Validation failure", exc_info=True)
        return 2
    except Exception as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        logger.debug("Runtime failure", exc_info=True)
        return 1

    if config.kind in ("circuit_sweep", "report") and outcome.result.get("reductions"):
        rows = [ReductionRow(**r) for r in outcome.result["reductions"]]
        print(format_reduction_table(rows))
    print(f"Results written to {outcome.out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
