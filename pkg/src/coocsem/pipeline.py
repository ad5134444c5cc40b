"""Library entry points behind each CLI subcommand.

Each function reads its inputs from paths and writes its TSV output to an
open text handle, so the CLI and direct library use produce identical
bytes.
"""

from __future__ import annotations

import logging
import os
from dataclasses import replace
from typing import Iterable, TextIO
from urllib.parse import quote

from .analysis import analyze_measure, write_fit_tsv, write_summary_tsv
from .assoc import AssociateStore, batch_ca, write_associates_tsv, write_ca_tsv
from .config import PipelineConfig
from .cooc import PairStats, count_pairs_path, write_pairs_tsv
from .corpus import CorpusIndex, ingest_path, top_frequent, write_index_tsv
from .errors import AnnotationError
from .eyemeasures import (MEASURES, read_fixations_tsv, read_measures_tsv, read_regions_tsv,
                          reduce_trials, write_measures_tsv)
from .lexstats import Lexicon
from .stimgen import (Engines, Selection, annotate, assign_condition, randomize_lists,
                      read_pool_tsv, read_set_tsv, select_set, write_balance_tsv,
                      write_lists_tsv, write_set_tsv)

logger = logging.getLogger(__name__)


def build_index(cfg: PipelineConfig, corpus: str) -> CorpusIndex:
    return ingest_path(corpus, cfg.tokenizer(), threads=cfg.threads, frequency_mode=cfg.frequency_mode)


def build_pair_stats(cfg: PipelineConfig, corpus: str, index: CorpusIndex | None = None) -> PairStats:
    index = index or build_index(cfg, corpus)
    return count_pairs_path(corpus, index, cfg.tokenizer(), min_freq=cfg.min_pair_freq, threads=cfg.threads)


def build_store(cfg: PipelineConfig, pair_stats: PairStats) -> AssociateStore:
    return AssociateStore(pair_stats=pair_stats,
                          stoplist=top_frequent(pair_stats.index, cfg.stoplist_size),
                          cap=cfg.associate_cap, config=cfg.association(),
                          stoplist_before_cap=cfg.stoplist_before_cap)


def build_engines(cfg: PipelineConfig, corpus: str) -> Engines:
    index = build_index(cfg, corpus)
    pair_stats = build_pair_stats(cfg, corpus, index)
    lexicon = Lexicon.from_index(index, cfg.on_min_freq, cfg.on_case_sensitive)
    return Engines(index, pair_stats, build_store(cfg, pair_stats), lexicon, cfg.association(), cfg.bands())


def run_index(cfg: PipelineConfig, corpus: str, out: TextIO) -> CorpusIndex:
    index = build_index(cfg, corpus)
    write_index_tsv(index, out)
    return index


def run_pairs(cfg: PipelineConfig, corpus: str, out: TextIO) -> PairStats:
    stats = build_pair_stats(cfg, corpus)
    write_pairs_tsv(stats, out, cfg.association())
    return stats


def run_associates(cfg: PipelineConfig, corpus: str, cues: Iterable[str], out_dir) -> list:
    """One ``<cue>.tsv`` per cue (file name percent-encoded)."""
    store = build_store(cfg, build_pair_stats(cfg, corpus))
    cues = list(dict.fromkeys(cues))
    store.build(cues, threads=cfg.threads)
    os.makedirs(out_dir, exist_ok=True)
    written = []
    for cue in cues:
        path = os.path.join(out_dir, quote(cue, safe="") + ".tsv")
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            write_associates_tsv(store.get(cue), fh)
        written.append(path)
    return written


def read_pair_list(path: str) -> list[tuple[str, str]]:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split("\t")
        if header[:2] != ["word_a", "word_b"]:
            raise ValueError("pair list must start with columns word_a, word_b")
        return [tuple(line.rstrip("\n").split("\t")[:2]) for line in fh if line.strip()]


def run_ca(cfg: PipelineConfig, corpus: str, pairs_path: str, out: TextIO):
    store = build_store(cfg, build_pair_stats(cfg, corpus))
    pairs = read_pair_list(pairs_path)
    result = batch_ca(pairs, store, cfg.bands())
    for i, exc in sorted(result.errors.items()):
        logger.warning("pair %d %s: %s", i + 1, pairs[i], exc)
    write_ca_tsv(result.results, out)
    return result


def run_stimgen(cfg: PipelineConfig, corpus: str, pool_path: str, set_out: TextIO,
                report_out: TextIO) -> Selection:
    engines = build_engines(cfg, corpus)
    with open(pool_path, encoding="utf-8") as fh:
        raw_items = read_pool_tsv(fh)
    labeled = []
    for raw in raw_items:
        try:
            item = annotate(raw, engines, cfg.check_length)
        except AnnotationError as exc:
            logger.warning("rejected: %s", exc)
            continue
        a = assign_condition(item, engines.bands, require_zero_prime_as=cfg.require_zero_prime_as,
                             prime_as_tolerance=cfg.prime_as_tolerance)
        if a.accepted:
            labeled.append(replace(item, condition=a.label))
        else:
            logger.info("item %s rejected: %s", item.item_id, a.reason)
    selection = select_set(labeled, cfg.n_per_cell, max_iters=cfg.max_iters, restarts=cfg.restarts,
                           seed=cfg.seed, comma_balance=cfg.comma_balance)
    write_set_tsv(selection.items, set_out)
    write_balance_tsv(selection.report, report_out)
    return selection


def read_fillers(path: str) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        lines = [l.rstrip("\n").split("\t")[0] for l in fh if l.strip()]
    return lines[1:] if lines and lines[0] == "item_id" else lines


def run_lists(cfg: PipelineConfig, set_path: str, fillers_path: str | None, out: TextIO):
    with open(set_path, encoding="utf-8") as fh:
        items = [(it.item_id, it.condition) for it in read_set_tsv(fh)]
    fillers = read_fillers(fillers_path) if fillers_path else []
    lists = randomize_lists(items, cfg.seed, fillers)
    write_lists_tsv(lists, out)
    return lists


def run_measures(cfg: PipelineConfig, fixations_path: str, regions_path: str | None, out: TextIO):
    regions = None
    if regions_path:
        with open(regions_path, encoding="utf-8") as fh:
            regions = read_regions_tsv(fh)
    with open(fixations_path, encoding="utf-8") as fh:
        trials = read_fixations_tsv(fh, regions)
    reduced = reduce_trials(trials, eye=cfg.eye, min_fixation_ms=cfg.min_fixation_ms, cutoffs=cfg.cutoffs())
    write_measures_tsv(reduced, out)
    return reduced


def run_analyze(cfg: PipelineConfig, measures_path: str, summary_out: TextIO, fit_out: TextIO,
                by_subject: bool = False) -> list:
    with open(measures_path, encoding="utf-8") as fh:
        rows = read_measures_tsv(fh)
    results = []
    for m in MEASURES:
        sel = [r for r in rows if r["measure"] == m and r["value"] is not None and r["value"] > 0]
        if not sel:
            continue
        results.append(analyze_measure(m, [r["value"] for r in sel], [r["condition"] for r in sel],
                                       [r["subject_id"] for r in sel], trim_k=cfg.trim_k,
                                       by_subject=by_subject))
    write_summary_tsv(results, summary_out)
    write_fit_tsv(results, fit_out)
    return results


def run_report(sections: Iterable[tuple[str, str]], out: TextIO) -> None:
    for name, path in sections:
        out.write(f"## {name}\n")
        with open(path, encoding="utf-8") as fh:
            out.write(fh.read())
        out.write("\n")
