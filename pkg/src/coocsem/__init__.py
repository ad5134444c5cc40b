"""Sentence co-occurrence association, common-associate overlap, stimulus
balancing and eye-movement reading measures."""

from .analysis import (CellSummary, FitResult, KSResult, design_matrix, fit_by_subject,
                       fit_contrasts, ks_normality, summarize_cells)
from .assoc import (AssociateSet, AssociateStore, CABands, OverlapResult, batch_ca,
                    build_associates, common_associates)
from .config import PipelineConfig, load_config
from .cooc import (AssociationConfig, AssociationRecord, ContingencyTable, PairStats,
                   association_strength, contingency, count_pairs, log_likelihood)
from .corpus import (CorpusIndex, SentenceRecord, TokenizerConfig, VocabEntry, frequency_class,
                     ingest, top_frequent)
from .eyemeasures import (FixationEvent, MeasureSet, TrialRecord, apply_cutoffs, compute_measures,
                          trim_outliers, validate_trial)
from .lexstats import LexProfile, Lexicon, orthographic_neighbors, profile
from .stimgen import (BalanceReport, RawItem, StimulusItem, annotate, anova_f, assign_condition,
                      randomize_lists, select_set)

__version__ = "0.1.0"
