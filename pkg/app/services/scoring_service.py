"""
Scoring Service Module

Semantic evaluation of predicted against gold CoNLL 2009 annotations.

Scored items:
    - one sense item per predicate; labeled-correct when the predicted sense
      string equals the gold one, unlabeled-correct always (predicates are given)
    - one argument item per non-empty APRED cell; labeled-correct when
      (predicate, position, label) matches, unlabeled-correct when
      (predicate, position) matches

Precision is correct over predicted items, recall correct over gold items,
both in percent. The per-label breakdown covers argument labels only.
"""

import logging
from collections import Counter
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import pandas as pd

from app.exceptions import ScoringError
from app.models.conll_models import Corpus
from app.models.pydantic_models import PRF, EvalReport, LabelScore
from app.repositories.conll_repository import ConllRepository
from app.repositories.report_repository import ReportRepository
from app.services.corpus_service import extract_instances

logger = logging.getLogger(__name__)

PER_LABEL_COLUMNS = ["label", "gold_count", "P", "R", "F1"]
COMPARE_COLUMNS = ["label", "gold_count", "f1_a", "f1_b", "delta_f1"]
OVERALL_LABELED = "overall"
OVERALL_UNLABELED = "overall_unlabeled"


def prf(correct: int, predicted: int, gold: int) -> PRF:
    """Precision, recall and F1 in percent; zero wherever a denominator is zero."""
    precision = 100.0 * correct / predicted if predicted else 0.0
    recall = 100.0 * correct / gold if gold else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return PRF(correct=correct, predicted=predicted, gold=gold, precision=precision, recall=recall, f1=f1)


def check_alignment(gold: Corpus, predicted: Corpus) -> None:
    """
    Require both corpora to hold the same sentences and predicates.

    Raises:
        ScoringError: Naming the first divergent sentence
    """
    if len(gold.sentences) != len(predicted.sentences):
        first = min(len(gold.sentences), len(predicted.sentences))
        raise ScoringError(
            f"sentence {first}: gold has {len(gold.sentences)} sentences, "
            f"prediction has {len(predicted.sentences)}"
        )
    for index, (gold_sentence, predicted_sentence) in enumerate(zip(gold.sentences, predicted.sentences)):
        if len(gold_sentence) != len(predicted_sentence):
            raise ScoringError(
                f"sentence {index}: {len(gold_sentence)} gold tokens, {len(predicted_sentence)} predicted"
            )
        if gold_sentence.forms != predicted_sentence.forms:
            raise ScoringError(f"sentence {index}: token forms differ")
        if gold_sentence.predicate_positions != predicted_sentence.predicate_positions:
            raise ScoringError(
                f"sentence {index}: predicates at {list(gold_sentence.predicate_positions)} in gold, "
                f"{list(predicted_sentence.predicate_positions)} in prediction"
            )


def score(gold: Corpus, predicted: Corpus) -> EvalReport:
    """
    Score a predicted corpus against gold.

    Args:
        gold: Gold corpus
        predicted: Predicted corpus over the same sentences and predicates

    Returns:
        EvalReport: Labeled, unlabeled and per-label scores

    Raises:
        ScoringError: If the corpora are misaligned
    """
    check_alignment(gold, predicted)
    gold_instances = extract_instances(gold)
    predicted_instances = extract_instances(predicted)

    n_predicates = len(gold_instances)
    sense_correct = 0
    gold_labels: Counter = Counter()
    predicted_labels: Counter = Counter()
    correct_labels: Counter = Counter()
    n_gold_args = n_predicted_args = unlabeled_arg_correct = 0

    for gold_instance, predicted_instance in zip(gold_instances, predicted_instances):
        if gold_instance.gold_sense.strip() == predicted_instance.gold_sense.strip():
            sense_correct += 1
        gold_args = gold_instance.gold_args
        predicted_args = predicted_instance.gold_args
        n_gold_args += len(gold_args)
        n_predicted_args += len(predicted_args)
        gold_labels.update(gold_args.values())
        predicted_labels.update(predicted_args.values())
        for position, label in predicted_args.items():
            if position in gold_args:
                unlabeled_arg_correct += 1
                if gold_args[position] == label:
                    correct_labels[label] += 1

    labeled = prf(
        correct=sense_correct + sum(correct_labels.values()),
        predicted=n_predicates + n_predicted_args,
        gold=n_predicates + n_gold_args,
    )
    unlabeled = prf(
        correct=n_predicates + unlabeled_arg_correct,
        predicted=n_predicates + n_predicted_args,
        gold=n_predicates + n_gold_args,
    )
    per_label: Dict[str, LabelScore] = {}
    for label in sorted(set(gold_labels) | set(predicted_labels)):
        scores = prf(correct_labels[label], predicted_labels[label], gold_labels[label])
        per_label[label] = LabelScore(label=label, **scores.model_dump())

    report = EvalReport(
        language=gold.language,
        labeled=labeled,
        unlabeled=unlabeled,
        per_label=per_label,
        sense_accuracy=100.0 * sense_correct / n_predicates if n_predicates else 0.0,
        n_predicates=n_predicates,
    )
    logger.info(
        f"Scored {gold.language}: labeled F1 {labeled.f1:.2f}, unlabeled F1 {unlabeled.f1:.2f} "
        f"over {n_predicates} predicates"
    )
    return report


def per_label_table(report: EvalReport) -> pd.DataFrame:
    """
    Per-label breakdown, most frequent gold label first.

    Returns:
        pd.DataFrame: Columns label, gold_count, P, R, F1; ties broken by label
    """
    rows = [
        (label, scores.gold, scores.precision, scores.recall, scores.f1)
        for label, scores in report.per_label.items()
    ]
    frame = pd.DataFrame(rows, columns=PER_LABEL_COLUMNS)
    if frame.empty:
        return frame
    return frame.sort_values(["gold_count", "label"], ascending=[False, True], kind="mergesort").reset_index(drop=True)


def compare(report_a: EvalReport, report_b: EvalReport) -> pd.DataFrame:
    """
    F1 differences (B minus A), overall and per label.

    The first two rows hold the overall labeled and unlabeled scores; label
    rows follow in order of gold count in report A (then B), and a label
    missing from one report counts as F1 0 there.

    Raises:
        ScoringError: If the reports are for different languages
    """
    if report_a.language != report_b.language:
        raise ScoringError(
            f"cannot compare a {report_a.language} report with a {report_b.language} report"
        )
    rows: List[Tuple] = [
        (OVERALL_LABELED, report_a.labeled.gold, report_a.labeled.f1, report_b.labeled.f1,
         report_b.labeled.f1 - report_a.labeled.f1),
        (OVERALL_UNLABELED, report_a.unlabeled.gold, report_a.unlabeled.f1, report_b.unlabeled.f1,
         report_b.unlabeled.f1 - report_a.unlabeled.f1),
    ]
    labels = sorted(
        set(report_a.per_label) | set(report_b.per_label),
        key=lambda label: (-_gold_count(report_a, label), -_gold_count(report_b, label), label),
    )
    for label in labels:
        f1_a = report_a.per_label[label].f1 if label in report_a.per_label else 0.0
        f1_b = report_b.per_label[label].f1 if label in report_b.per_label else 0.0
        gold_count = _gold_count(report_a, label) or _gold_count(report_b, label)
        rows.append((label, gold_count, f1_a, f1_b, f1_b - f1_a))
    return pd.DataFrame(rows, columns=COMPARE_COLUMNS)


def _gold_count(report: EvalReport, label: str) -> int:
    scores = report.per_label.get(label)
    return scores.gold if scores is not None else 0


def improvement_summary(pairs: Sequence[Tuple[EvalReport, EvalReport]],
                        train_predicates: Optional[Mapping[str, int]] = None) -> pd.DataFrame:
    """
    One row per (baseline, polyglot) report pair with overall F1 gains.

    Rows are ordered by increasing training predicate count when counts are
    known for every language, otherwise kept in input order.

    Args:
        pairs: Report pairs, baseline first
        train_predicates: Training predicate count per language

    Returns:
        pd.DataFrame: Columns language, train_predicates, labeled_delta_f1,
            unlabeled_delta_f1
    """
    rows = []
    for report_a, report_b in pairs:
        if report_a.language != report_b.language:
            raise ScoringError(
                f"cannot compare a {report_a.language} report with a {report_b.language} report"
            )
        count = (train_predicates or {}).get(report_a.language)
        rows.append({
            "language": report_a.language,
            "train_predicates": count,
            "labeled_delta_f1": report_b.labeled.f1 - report_a.labeled.f1,
            "unlabeled_delta_f1": report_b.unlabeled.f1 - report_a.unlabeled.f1,
        })
    frame = pd.DataFrame(rows, columns=["language", "train_predicates", "labeled_delta_f1", "unlabeled_delta_f1"])
    if not frame.empty and frame["train_predicates"].notna().all():
        frame = frame.sort_values("train_predicates", kind="mergesort").reset_index(drop=True)
    return frame


def format_summary(report: EvalReport) -> str:
    """Human-readable summary of a report."""
    lines = [
        f"language: {report.language}",
        f"predicates: {report.n_predicates}",
        _format_prf("labeled", report.labeled),
        _format_prf("unlabeled", report.unlabeled),
        f"sense accuracy: {report.sense_accuracy:.2f}",
    ]
    return "\n".join(lines) + "\n"


def _format_prf(name: str, scores: PRF) -> str:
    return (
        f"{name}: P {scores.precision:.2f} ({scores.correct}/{scores.predicted}) "
        f"R {scores.recall:.2f} ({scores.correct}/{scores.gold}) F1 {scores.f1:.2f}"
    )



class ScoringService:
    """
    Service class for evaluation runs.

    Scores predicted files against gold files and compares stored reports;
    every result is written through the report repository.
    """

    def __init__(self,
                 conll_repository: Optional[ConllRepository] = None,
                 report_repository: Optional[ReportRepository] = None):
        self.conll_repository = conll_repository or ConllRepository()
        self.report_repository = report_repository or ReportRepository()

    def score_files(self, gold_path: Union[str, Path], predicted_path: Union[str, Path], language: str) -> EvalReport:
        """
        Score a predicted CoNLL 2009 file against its gold file.

        Raises:
            ScoringError: If the files are not aligned
        """
        try:
            gold = self.conll_repository.read(gold_path, language)
            predicted = self.conll_repository.read(predicted_path, language)
            return score(gold, predicted)
        except Exception as e:
            logger.error(f"Failed to score {predicted_path} against {gold_path}: {e}")
            raise

    def write_report(self, output_dir: Union[str, Path], report: EvalReport) -> List[Path]:
        """
        Write ``report.json``, ``per_label.csv`` and ``summary.txt``.

        Returns:
            List[Path]: Written paths, report first
        """
        output_dir = Path(output_dir)
        outputs = [
            self.report_repository.save_report(output_dir / "report.json", report),
            self.report_repository.save_table(output_dir / "per_label.csv", per_label_table(report)),
        ]
        summary_path = output_dir / "summary.txt"
        summary_path.write_text(format_summary(report), encoding="utf-8")
        outputs.append(summary_path)
        return outputs

    def analyze(self,
                report_pairs: Sequence[Tuple[Union[str, Path], Union[str, Path]]],
                output_dir: Union[str, Path],
                stats_paths: Optional[Sequence[Union[str, Path]]] = None) -> Tuple[pd.DataFrame, List[Path]]:
        """
        Compare report pairs label by label and summarize the overall gains.

        One ``compare.csv`` is written for a single pair, ``compare.<lang>.csv``
        per pair otherwise, and ``summary.csv`` last.

        Args:
            report_pairs: (baseline, compared) report paths
            output_dir: Destination directory
            stats_paths: ``stats`` CSVs giving training predicate counts

        Returns:
            Tuple of the summary table and the written paths
        """
        output_dir = Path(output_dir)
        pairs = []
        outputs: List[Path] = []
        try:
            for path_a, path_b in report_pairs:
                report_a = self.report_repository.load_report(path_a)
                report_b = self.report_repository.load_report(path_b)
                pairs.append((report_a, report_b))
                name = f"compare.{report_a.language}.csv" if len(report_pairs) > 1 else "compare.csv"
                outputs.append(self.report_repository.save_table(output_dir / name, compare(report_a, report_b)))
            train_predicates = self.report_repository.load_train_predicates(stats_paths) if stats_paths else None
            summary = improvement_summary(pairs, train_predicates)
        except Exception as e:
            logger.error(f"Failed to compare evaluation reports: {e}")
            raise
        outputs.append(self.report_repository.save_table(output_dir / "summary.csv", summary))
        return summary, outputs
