"""
Corpus Service Module

This module turns parsed corpora into per-predicate training instances and
computes the sentence/predicate statistics reported for each training set.
"""

import logging
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Union

import pandas as pd

from app.models.conll_models import Corpus, CorpusStats, PredicateInstance
from app.repositories.conll_repository import ConllRepository
from app.repositories.report_repository import ReportRepository

logger = logging.getLogger(__name__)

STATS_COLUMNS = ["sentences", "sentences_with_predicates", "predicates"]

# Official CoNLL 2009 training-set counts, used by ``stats --check``.
REFERENCE_TRAIN_STATS: Dict[str, CorpusStats] = {
    "cat": CorpusStats(n_sentences=13200, n_sentences_with_pred=12876, n_predicates=37444),
    "ces": CorpusStats(n_sentences=38727, n_sentences_with_pred=38579, n_predicates=414133),
    "deu": CorpusStats(n_sentences=36020, n_sentences_with_pred=14282, n_predicates=17400),
    "eng": CorpusStats(n_sentences=39279, n_sentences_with_pred=37847, n_predicates=179014),
    "jpn": CorpusStats(n_sentences=4393, n_sentences_with_pred=4344, n_predicates=25712),
    "spa": CorpusStats(n_sentences=14329, n_sentences_with_pred=13836, n_predicates=43828),
    "zho": CorpusStats(n_sentences=22277, n_sentences_with_pred=21073, n_predicates=102827),
}


def extract_instances(corpus: Corpus) -> List[PredicateInstance]:
    """
    Extract one instance per marked predicate.

    The k-th predicate of a sentence (in token order) reads its arguments
    from the k-th APRED column.

    Args:
        corpus: Parsed corpus

    Returns:
        List[PredicateInstance]: Instances in sentence, then predicate order
    """
    instances: List[PredicateInstance] = []
    for sentence_index, sentence in enumerate(corpus.sentences):
        forms = sentence.forms
        for column, position in enumerate(sentence.predicate_positions):
            predicate = sentence.tokens[position - 1]
            gold_args = {
                token.id: token.apreds[column]
                for token in sentence.tokens
                if token.apreds[column] is not None
            }
            instances.append(PredicateInstance.model_construct(
                sentence_ref=sentence_index,
                predicate_index=position,
                gold_sense=predicate.pred_sense,
                gold_args=gold_args,
                language=corpus.language,
                lemma=predicate.lemma,
                forms=forms,
            ))
    logger.debug(f"Extracted {len(instances)} {corpus.language} instances")
    return instances


def corpus_stats(corpus: Corpus) -> CorpusStats:
    """
    Count sentences, sentences with predicates and predicates.

    Args:
        corpus: Parsed corpus

    Returns:
        CorpusStats: Direct counts
    """
    counts = [sentence.predicate_count for sentence in corpus.sentences]
    return CorpusStats(
        n_sentences=len(counts),
        n_sentences_with_pred=sum(1 for count in counts if count > 0),
        n_predicates=sum(counts),
    )


def stats_table(stats: Mapping[str, CorpusStats]) -> pd.DataFrame:
    """
    Lay out statistics one row per language, as in the training-data table.

    Args:
        stats: Statistics keyed by language code

    Returns:
        pd.DataFrame: Index ``language``; columns sentences,
            sentences_with_predicates, predicates
    """
    frame = pd.DataFrame(
        [stats[language].as_tuple() for language in stats],
        index=pd.Index(list(stats), name="language"),
        columns=STATS_COLUMNS,
    )
    return frame


def check_reference_stats(language: str, stats: CorpusStats) -> List[str]:
    """
    Compare computed statistics with the official training-set counts.

    Args:
        language: ISO 639-3 code
        stats: Computed statistics

    Returns:
        List[str]: Mismatch descriptions; empty when the counts agree

    Raises:
        ValueError: If no reference counts exist for the language
    """
    if language not in REFERENCE_TRAIN_STATS:
        raise ValueError(f"No reference statistics for language '{language}'")
    expected = REFERENCE_TRAIN_STATS[language]
    mismatches = [
        f"{column}: expected {want}, got {got}"
        for column, want, got in zip(STATS_COLUMNS, expected.as_tuple(), stats.as_tuple())
        if want != got
    ]
    if mismatches:
        logger.warning(f"{language} statistics differ from reference: {'; '.join(mismatches)}")
    return mismatches


class CorpusService:
    """
    Service class for corpus statistics.

    Reads CoNLL 2009 files through the repository and reports their
    sentence and predicate counts.
    """

    def __init__(self,
                 conll_repository: Optional[ConllRepository] = None,
                 report_repository: Optional[ReportRepository] = None):
        self.conll_repository = conll_repository or ConllRepository()
        self.report_repository = report_repository or ReportRepository()

    def file_stats(self, paths: Mapping[str, Union[str, Path]]) -> Dict[str, CorpusStats]:
        """
        Statistics of one file per language.

        Args:
            paths: CoNLL 2009 file by language code

        Returns:
            Dict[str, CorpusStats]: Statistics in the order of ``paths``
        """
        stats = {}
        for language, path in paths.items():
            try:
                stats[language] = corpus_stats(self.conll_repository.read(path, language))
            except Exception as e:
                logger.error(f"Failed to compute {language} statistics for {path}: {e}")
                raise
        return stats

    def save_stats(self, path: Union[str, Path], stats: Mapping[str, CorpusStats]) -> Path:
        return self.report_repository.save_table(path, stats_table(stats), index=True)

    def check(self, stats: Mapping[str, CorpusStats]) -> Dict[str, List[str]]:
        """Reference mismatches per language; languages that match are left out."""
        mismatches = {}
        for language, language_stats in stats.items():
            found = check_reference_stats(language, language_stats)
            if found:
                mismatches[language] = found
        return mismatches
