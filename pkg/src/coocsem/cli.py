"""Command-line front end: ``coocsem <subcommand> [options]``."""

from __future__ import annotations

import argparse
import contextlib
import logging
import os
import sys

from . import pipeline
from .config import load_config
from .errors import (ConfigError, CoocsemError, EmptyCorpusError, InfeasibleSelectionError,
                     ListConstraintError, NotInVocabularyError)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_MISSING_INPUT = 3
EXIT_CONFIG = 4
EXIT_INFEASIBLE = 5
EXIT_UNBALANCED = 6
EXIT_DATA = 7

SUBCOMMANDS = ("index", "pairs", "associates", "ca", "stimgen", "lists", "measures", "analyze", "report")


class UsageError(Exception):
    pass


def _key_value(text):
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {text!r}")
    k, v = text.split("=", 1)
    return k.strip(), v.strip()


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value config file")
    common.add_argument("-O", "--option", action="append", type=_key_value, default=[],
                        metavar="KEY=VALUE", help="override one config key (repeatable)")
    common.add_argument("--threads", type=int, help="worker processes for counting")
    common.add_argument("--seed", type=int, help="seed for randomized steps")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = argparse.ArgumentParser(prog="coocsem", description=__doc__)
    sub = parser.add_subparsers(dest="command", metavar="SUBCOMMAND")
    sub.required = True

    def add(name, help_text):
        return sub.add_parser(name, parents=[common], help=help_text)

    corpus_help = "sentence-per-line corpus (default: config key corpus)"

    p = add("index", "word frequencies and frequency classes")
    p.add_argument("--corpus", help=corpus_help)
    p.add_argument("--out", default="-")

    p = add("pairs", "pair counts with G2 and association strength")
    p.add_argument("--corpus", help=corpus_help)
    p.add_argument("--out", default="-")

    p = add("associates", "ranked associate set per cue")
    p.add_argument("--corpus", help=corpus_help)
    p.add_argument("--cues", help="file with one cue per line")
    p.add_argument("--cue", action="append", default=[], help="cue word (repeatable)")
    p.add_argument("--out-dir", required=True)

    p = add("ca", "common-associate counts for word pairs")
    p.add_argument("--corpus", help=corpus_help)
    p.add_argument("--pairs", required=True, help="TSV with columns word_a, word_b")
    p.add_argument("--out", default="-")

    p = add("stimgen", "annotate candidates and select a balanced set")
    p.add_argument("--corpus", help=corpus_help)
    p.add_argument("--pool", required=True, help="candidate pool TSV")
    p.add_argument("--out-set", required=True)
    p.add_argument("--out-report", required=True)

    p = add("lists", "pseudorandomized presentation lists")
    p.add_argument("--set", dest="set_path", required=True, help="selected-set TSV")
    p.add_argument("--fillers", help="filler item ids, one per line")
    p.add_argument("--out", default="-")

    p = add("measures", "reading-time measures from fixation logs")
    p.add_argument("--fixations", required=True)
    p.add_argument("--regions", help="TSV item_id, word_index, role")
    p.add_argument("--out", default="-")

    p = add("analyze", "trimming, cell summaries and contrast fits")
    p.add_argument("--measures", required=True)
    p.add_argument("--out-summary", required=True)
    p.add_argument("--out-fit", required=True)
    p.add_argument("--by-subject", action="store_true", help="fit subject-by-cell means")

    p = add("report", "concatenate balance, summary and fit tables")
    p.add_argument("--balance")
    p.add_argument("--summary")
    p.add_argument("--fit")
    p.add_argument("--out", default="-")
    return parser


@contextlib.contextmanager
def _output(path):
    if path in (None, "-"):
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            yield fh


def _need_file(path, what):
    if not path:
        raise UsageError(f"missing {what}")
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    return path


def dispatch(args, cfg) -> int:
    cmd = args.command
    if cmd in ("index", "pairs", "associates", "ca", "stimgen"):
        corpus = _need_file(args.corpus or cfg.corpus, "--corpus")
    if cmd == "index":
        with _output(args.out) as out:
            pipeline.run_index(cfg, corpus, out)
    elif cmd == "pairs":
        with _output(args.out) as out:
            pipeline.run_pairs(cfg, corpus, out)
    elif cmd == "associates":
        cues = list(args.cue)
        if args.cues:
            with open(_need_file(args.cues, "--cues"), encoding="utf-8") as fh:
                cues += [l.strip() for l in fh if l.strip()]
        if not cues:
            raise UsageError("no cues given (--cue or --cues)")
        pipeline.run_associates(cfg, corpus, cues, args.out_dir)
    elif cmd == "ca":
        with _output(args.out) as out:
            result = pipeline.run_ca(cfg, corpus, _need_file(args.pairs, "--pairs"), out)
        if result.errors:
            logging.getLogger("coocsem").warning("%d pairs could not be scored", len(result.errors))
    elif cmd == "stimgen":
        pool = _need_file(args.pool, "--pool")
        with _output(args.out_set) as set_out, _output(args.out_report) as rep_out:
            selection = pipeline.run_stimgen(cfg, corpus, pool, set_out, rep_out)
        if not selection.report.passed:
            print(f"coocsem: error[unbalanced]: controls with F >= 1: "
                  f"{','.join(selection.report.offending)}", file=sys.stderr)
            return EXIT_UNBALANCED
    elif cmd == "lists":
        with _output(args.out) as out:
            pipeline.run_lists(cfg, _need_file(args.set_path, "--set"),
                               _need_file(args.fillers, "--fillers") if args.fillers else None, out)
    elif cmd == "measures":
        with _output(args.out) as out:
            pipeline.run_measures(cfg, _need_file(args.fixations, "--fixations"),
                                  _need_file(args.regions, "--regions") if args.regions else None, out)
    elif cmd == "analyze":
        with _output(args.out_summary) as s_out, _output(args.out_fit) as f_out:
            pipeline.run_analyze(cfg, _need_file(args.measures, "--measures"), s_out, f_out,
                                 by_subject=args.by_subject)
    elif cmd == "report":
        sections = [(name, _need_file(path, f"--{name}")) for name, path in
                    (("balance", args.balance), ("summary", args.summary), ("fit", args.fit)) if path]
        if not sections:
            raise UsageError("report needs at least one of --balance, --summary, --fit")
        with _output(args.out) as out:
            pipeline.run_report(sections, out)
    return EXIT_OK


def _fail(code, kind, message) -> int:
    print(f"coocsem: error[{kind}]: {' '.join(str(message).split())}", file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(format="%(levelname)s: %(message)s",
                        level=logging.WARNING - 10 * min(args.verbose, 2))
    try:
        overrides = dict(args.option)
        if args.threads is not None:
            overrides["threads"] = str(args.threads)
        if args.seed is not None:
            overrides["seed"] = str(args.seed)
        if args.config:
            _need_file(args.config, "--config")
        cfg = load_config(args.config, overrides)
        return dispatch(args, cfg)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        return _fail(EXIT_USAGE, "usage", exc)
    except FileNotFoundError as exc:
        return _fail(EXIT_MISSING_INPUT, "missing-input", exc.filename or exc)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, "config", exc)
    except InfeasibleSelectionError as exc:
        return _fail(EXIT_INFEASIBLE, "infeasible", exc)
    except ListConstraintError as exc:
        return _fail(EXIT_INFEASIBLE, "list-constraint", exc)
    except (EmptyCorpusError, NotInVocabularyError) as exc:
        return _fail(EXIT_DATA, "data", exc)
    except (CoocsemError, ValueError) as exc:
        return _fail(EXIT_ERROR, type(exc).__name__, exc)


if __name__ == "__main__":
    sys.exit(main())
