#!/usr/bin/env python3
"""
citedrift command-line entry point.
Each subcommand runs one pipeline stage over the work directory.
"""

import argparse
import logging
import sys
from typing import List, Optional

from config import Config, config_keys, load_pipeline_config
from errors import ConfigError, DataError
from logger import setup_logger
from models import TokenKind
from pipeline_service import PipelineService
from query import format_role_report

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2

EXIT_CODES_HELP = """every config file key is also accepted as --KEY VALUE (e.g. --dim 50, --center false)

exit codes:
  0  success
  1  usage or configuration error: bad flag or config key, missing corpus dir,
     missing span file, fewer than two trained models, no aligned models
  2  data error: empty corpus or vocabulary, no negative pool, period gap,
     dimension mismatch, no shared tokens between two periods (names the pair),
     unknown token or publication, unreadable model file
"""


class CliParser(argparse.ArgumentParser):
    """Usage errors exit with code 1 instead of argparse's 2"""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = CliParser(
        prog="citedrift",
        description="Citation embedding change pipeline",
        epilog=EXIT_CODES_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
        allow_abbrev=False,
    )
    parser.add_argument("--config", help="key=value config file")
    # every config key is also a flag; flags win over the file
    for key in config_keys():
        flags = [f"--{key}"]
        if "_" in key:
            flags.append(f"--{key.replace('_', '-')}")
        shown = key in ("workdir", "seed", "workers")
        parser.add_argument(*flags, dest=key, metavar=key.upper(),
                            help=f"override '{key}'" if shown else argparse.SUPPRESS)

    subparsers = parser.add_subparsers(dest="command", help="Pipeline stages")

    subparsers.add_parser("extract", help="Parse the corpus into per-year citing spans")

    train_parser = subparsers.add_parser("train", help="Train one year's embeddings")
    train_parser.add_argument("--year", type=int, required=True)

    subparsers.add_parser("train-all", help="Train every year that has a span file")
    subparsers.add_parser("align", help="Rotate all models into the latest year's frame")
    subparsers.add_parser("score", help="Write per-publication change scores")
    subparsers.add_parser("stats", help="Mean/SD/N of change scores per year and threshold")

    rank_parser = subparsers.add_parser("rank", help="Top publications by average change score")
    rank_parser.add_argument("--from", dest="start", type=int)
    rank_parser.add_argument("--to", dest="end", type=int)
    rank_parser.add_argument("--top", type=int)

    hist_parser = subparsers.add_parser("hist", help="Change score histogram")
    hist_parser.add_argument("--bin", dest="bin_w", type=float)
    hist_parser.add_argument("--threshold", type=int,
                             help="only publications with more than THRESHOLD citations in the year")

    export_parser = subparsers.add_parser("export", help="Write one year's vectors as word2vec text")
    export_parser.add_argument("--year", type=int, required=True)

    neighbors_parser = subparsers.add_parser("neighbors", help="Nearest neighbours of a token")
    neighbors_parser.add_argument("--token", required=True)
    neighbors_parser.add_argument("--year", type=int, required=True)
    neighbors_parser.add_argument("--k", type=int)
    neighbors_parser.add_argument("--kind", choices=[k.value for k in TokenKind])

    report_parser = subparsers.add_parser("report", help="Per-year role report of one publication")
    report_parser.add_argument("--pub", required=True)
    report_parser.add_argument("--from", dest="start", type=int)
    report_parser.add_argument("--to", dest="end", type=int)

    return parser


def run_command(service: PipelineService, args: argparse.Namespace) -> None:
    if args.command == "extract":
        rows = service.extract()
        print("year\tpublications\tpublications_with_citations")
        for row in rows:
            print(f"{row.year}\t{row.publications}\t{row.publications_with_citations}")
        print(f"skipped\t{service.skipped}")

    elif args.command == "train":
        model = service.train(args.year)
        print(f"{args.year}: |V|={len(model.vocab)} -> {service.model_path(args.year)}")

    elif args.command == "train-all":
        for year in service.train_all():
            print(f"{year}: {service.model_path(year)}")

    elif args.command == "align":
        series = service.align()
        for year, rotation in zip(series.periods, series.rotations):
            residual = "NA" if rotation.residual is None else f"{rotation.residual:.6g}"
            print(f"{year}\tresidual={residual}\trank_deficient={rotation.rank_deficient}")

    elif args.command == "score":
        records = service.score()
        print(f"{len(records)} change scores -> {service.workdir / 'scores.csv'}")

    elif args.command == "stats":
        service.stats()
        print((service.workdir / "stats.csv").read_text(encoding="utf-8"), end="")

    elif args.command == "rank":
        service.rank(args.start, args.end, args.top)
        print((service.workdir / "rank.csv").read_text(encoding="utf-8"), end="")

    elif args.command == "hist":
        service.hist(args.bin_w, args.threshold)
        print(service.hist_path(args.threshold).read_text(encoding="utf-8"), end="")

    elif args.command == "export":
        print(f"{args.year}: {service.export(args.year)}")

    elif args.command == "neighbors":
        kind = TokenKind(args.kind) if args.kind else None
        for neighbor in service.neighbors(args.token, args.year, args.k, kind):
            print(f"{neighbor.label}\t{neighbor.similarity:.6g}")

    elif args.command == "report":
        print(format_role_report(service.report(args.pub, args.start, args.end)), end="")


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.command:
        parser.print_help()
        return EXIT_CONFIG

    overrides = {key: getattr(args, key) for key in config_keys()}
    try:
        Config.validate()
        config = load_pipeline_config(args.config, overrides)
        setup_logger(Config.get_log_file(config.workdir))
        run_command(PipelineService(config), args)
    except ConfigError as e:
        logger.error(str(e))
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as e:
        logger.error(f"{type(e).__name__}: {e}")
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
