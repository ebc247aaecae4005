"""Command line entry point: ``stochpec run`` and ``stochpec report``."""

from __future__ import annotations

import argparse
import sys

from .config import STAGES, PipelineConfig
from .errors import NumericalError, ValidationError

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stochpec", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="execute pipeline stages")
    run.add_argument("--config", required=True, help="INI configuration file")
    run.add_argument("--stages", default=",".join(STAGES),
                     help=f"comma-separated subset of {','.join(STAGES)}")
    run.add_argument("--out", default=None, help="output directory (overrides [output] dir)")
    rep = sub.add_parser("report", help="write figure data from a finished run")
    rep.add_argument("--bundle", required=True, help="output directory of a run")
    rep.add_argument("--figure", required=True, choices=["joint_dist", "chunk_hist", "cq_vs_p"])
    return parser


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    from .pipeline import emit_figure_data, run_pipeline
    try:
        if args.command == "run":
            cfg = PipelineConfig.load(args.config, args.out)
            stages = [s.strip() for s in args.stages.split(",") if s.strip()]
            run_pipeline(cfg, stages)
            print(f"wrote stage outputs to {cfg.output_dir}")
        else:
            print(emit_figure_data(args.bundle, args.figure))
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (NumericalError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
