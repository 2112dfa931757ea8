"""Command-line front end: one subcommand per pipeline stage.

Exit codes: 0 success, 1 usage error (bad flags, bad config, stages run
out of order), 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import pipeline
from .config import PipelineConfig, load_config
from .errors import DataError, NumericalError, UsageError

log = logging.getLogger("taglink.cli")

_COMMANDS = (
    ("synth", "generate a paired synthetic corpus with ground truth"),
    ("preprocess", "normalize and tokenize both corpora"),
    ("annotate", "derive the automatic hashtag sets"),
    ("build-graph", "assemble the per-platform interaction graphs"),
    ("align", "merge the graphs on shared hashtags and find communities"),
    ("score", "build matching trials and score their features"),
    ("train", "fit the score-fusion forest on the training split"),
    ("eval-er", "report equal error rates on the held-out split"),
    ("eval-hashtags", "score automatic hashtags against user ones"),
    ("run-all", "run every stage in order"),
)


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on bad usage; the contract here says 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", metavar="FILE", help="sectioned key=value file")
    common.add_argument("--out-dir", metavar="DIR", help="workspace directory")
    common.add_argument("--seed", type=int, metavar="N", help="global run seed")
    common.add_argument(
        "--threads", type=int, metavar="N", help="worker processes for scoring"
    )
    common.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="SECTION.KEY=VALUE",
        help="override one config value (repeatable)",
    )
    common.add_argument(
        "--quiet", action="store_true", help="only warnings and errors"
    )

    parser = _Parser(prog="taglink", description=__doc__.splitlines()[0])
    subparsers = parser.add_subparsers(dest="command", metavar="command")
    subparsers.required = True
    for name, help_text in _COMMANDS:
        sub = subparsers.add_parser(name, parents=[common], help=help_text)
        if name == "annotate":
            sub.add_argument(
                "--method",
                choices=("topic", "community"),
                help="override the configured annotator",
            )
    return parser


def _build_config(args: argparse.Namespace) -> PipelineConfig:
    overrides = list(args.overrides)
    if args.out_dir is not None:
        overrides.append(f"run.out_dir={args.out_dir}")
    if args.seed is not None:
        overrides.append(f"run.seed={args.seed}")
    if args.threads is not None:
        overrides.append(f"run.threads={args.threads}")
    return load_config(args.config, tuple(overrides))


_DISPATCH = {
    "synth": pipeline.stage_synth,
    "preprocess": pipeline.stage_preprocess,
    "build-graph": pipeline.stage_build_graph,
    "align": pipeline.stage_align,
    "score": pipeline.stage_score,
    "train": pipeline.stage_train,
    "eval-er": pipeline.stage_eval_er,
    "eval-hashtags": pipeline.stage_eval_hashtags,
    "run-all": pipeline.run_all,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        config = _build_config(args)
        if args.command == "annotate":
            pipeline.stage_annotate(config, method=args.method)
        else:
            _DISPATCH[args.command](config)
    except UsageError as exc:
        log.error("%s", exc)
        return 1
    except DataError as exc:
        log.error("%s", exc)
        return 2
    except NumericalError as exc:
        log.error("%s", exc)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
