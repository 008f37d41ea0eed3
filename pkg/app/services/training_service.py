"""
Training Service Module

This module trains monolingual and polyglot taggers: it draws the
stratified bilingual schedule of each epoch, runs mini-batch Adam updates on
the combined multitask loss, scores every development set after each epoch
and keeps the parameters with the best selection F1 until patience runs out.
"""

import logging
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from app.config.settings import get_settings
from app.exceptions import ModelError, TrainingError
from app.ml.models.srl_tagger import ModelParams, SRLTagger, model_languages
from app.ml.utils.optim import Adam
from app.models.conll_models import Corpus, PredicateInstance
from app.models.embedding_models import EmbeddingTable
from app.models.lexicon_models import SenseLexicon
from app.models.pydantic_models import EpochSchedule, ModelConfig, RunConfig, TrainConfig
from app.repositories.checkpoint_repository import Checkpoint, CheckpointRepository
from app.repositories.conll_repository import ConllRepository
from app.repositories.embedding_repository import EmbeddingRepository
from app.repositories.report_repository import ReportRepository
from app.services.corpus_service import extract_instances
from app.services.prediction_service import PredictionService
from app.services.scoring_service import score
from app.services.sense_service import SenseService

logger = logging.getLogger(__name__)

LOG_COLUMNS = ["epoch", "split", "language", "loss", "P", "R", "F1"]
SCHEDULE_COLUMNS = ["epoch", "position", "language", "instance"]
PERFECT_F1 = 100.0


def stratified_schedule(n_a: int,
                        n_b: int,
                        seed: int,
                        epoch: int,
                        languages: Tuple[str, str] = ("A", "B")) -> EpochSchedule:
    """
    One epoch of bilingual training order with equal weight per dataset.

    The larger dataset contributes each instance once. The smaller one
    contributes each instance once plus ``max // min - 1`` further full
    copies and ``max % min`` distinct instances drawn without replacement,
    so every instance appears at least once and both sides total ``max``.
    Both streams are then interleaved by one seeded shuffle.

    Args:
        n_a: Size of the first dataset
        n_b: Size of the second dataset
        seed: Run seed
        epoch: Epoch number
        languages: Labels of the two datasets in the schedule

    Returns:
        EpochSchedule: ``2 * max(n_a, n_b)`` entries

    Raises:
        TrainingError: If either dataset is empty
    """
    if n_a < 1 or n_b < 1:
        raise TrainingError(f"stratified sampling needs two non-empty datasets, got sizes {n_a} and {n_b}")
    rng = np.random.default_rng([seed, epoch])
    larger = max(n_a, n_b)

    def stream(language: str, size: int) -> List[Tuple[str, int]]:
        indices = list(range(size)) * (larger // size)
        remainder = larger % size
        if remainder:
            indices.extend(int(i) for i in np.sort(rng.choice(size, size=remainder, replace=False)))
        return [(language, index) for index in indices]

    entries = stream(languages[0], n_a) + stream(languages[1], n_b)
    order = rng.permutation(len(entries))
    return EpochSchedule(epoch=epoch, entries=[entries[i] for i in order])


def monolingual_schedule(n: int, seed: int, epoch: int, language: str) -> EpochSchedule:
    """Every instance once, in a seeded order."""
    if n < 1:
        raise TrainingError(f"no {language} training instances")
    rng = np.random.default_rng([seed, epoch])
    return EpochSchedule(epoch=epoch, entries=[(language, int(i)) for i in rng.permutation(n)])


class TrainingResult:
    """Outcome of a training run: the selected checkpoint plus its audit tables."""

    def __init__(self, checkpoint: Checkpoint, log: pd.DataFrame, schedule: pd.DataFrame):
        self.checkpoint = checkpoint
        self.log = log
        self.schedule = schedule

    @property
    def best_epoch(self) -> int:
        return int(self.checkpoint.metadata["best_epoch"])

    @property
    def best_dev_f1(self) -> float:
        return float(self.checkpoint.metadata["best_dev_f1"])


class TrainingService:
    """
    Service class for training runs.

    ``train`` works on in-memory corpora and embeddings; ``run`` reads a run
    configuration's files and writes checkpoint, lexicons, log and schedule.
    """

    def __init__(self,
                 conll_repository: Optional[ConllRepository] = None,
                 embedding_repository: Optional[EmbeddingRepository] = None,
                 checkpoint_repository: Optional[CheckpointRepository] = None,
                 report_repository: Optional[ReportRepository] = None,
                 sense_service: Optional[SenseService] = None):
        self.conll_repository = conll_repository or ConllRepository()
        self.embedding_repository = embedding_repository or EmbeddingRepository()
        self.checkpoint_repository = checkpoint_repository or CheckpointRepository()
        self.report_repository = report_repository or ReportRepository()
        self.settings = get_settings()
        self.sense_service = sense_service or SenseService(identity_languages=self.settings.identity_sense_languages)

    # Validation helpers

    def _check_inputs(self,
                      languages: Sequence[str],
                      config: ModelConfig,
                      train_corpora: Mapping[str, Corpus],
                      dev_corpora: Mapping[str, Corpus],
                      embeddings: Mapping[str, EmbeddingTable]) -> int:
        if config.variant.is_polyglot and self.settings.pivot_language not in languages:
            raise TrainingError(
                f"{config.variant.value} training pairs a language with '{self.settings.pivot_language}', "
                f"got {list(languages)}"
            )
        dims = set()
        for language in languages:
            if language not in train_corpora:
                raise TrainingError(f"no training corpus for language '{language}'")
            if language not in dev_corpora:
                raise TrainingError(f"no development set for language '{language}'")
            if language not in embeddings:
                raise TrainingError(f"no embeddings for language '{language}'")
            dims.add(embeddings[language].dim)
        if len(dims) != 1:
            raise TrainingError(f"embedding dimensions differ across languages: {sorted(dims)}")
        return dims.pop()

    def selection_language(self, config: ModelConfig) -> str:
        """Language whose dev F1 selects the checkpoint: the non-pivot one."""
        languages = model_languages(config)
        if config.variant.is_polyglot:
            return next(language for language in languages if language != self.settings.pivot_language)
        return languages[0]

    # Training

    def _schedule(self, sizes: Mapping[str, int], languages: Sequence[str], seed: int, epoch: int) -> EpochSchedule:
        if len(languages) == 1:
            return monolingual_schedule(sizes[languages[0]], seed, epoch, languages[0])
        first, second = languages
        return stratified_schedule(sizes[first], sizes[second], seed, epoch, languages=(first, second))

    @staticmethod
    def _instance_gradient(tagger: SRLTagger,
                           instance: PredicateInstance,
                           arrays: Mapping[str, np.ndarray],
                           dropout_seed: Sequence[int]) -> Tuple[float, Dict[str, np.ndarray]]:
        graph, loss = tagger.compute_loss(instance, arrays=arrays, rng=np.random.default_rng(dropout_seed))
        return loss.item(), graph.backward(loss)

    def _batch_gradients(self,
                         tagger: SRLTagger,
                         batch: Sequence[Tuple[int, PredicateInstance]],
                         arrays: Mapping[str, np.ndarray],
                         seed: int,
                         epoch: int,
                         n_jobs: int) -> List[Tuple[float, Dict[str, np.ndarray]]]:
        jobs = [
            delayed(self._instance_gradient)(tagger, instance, arrays, [seed, epoch, position])
            for position, instance in batch
        ]
        if n_jobs > 1 and len(jobs) > 1:
            return Parallel(n_jobs=n_jobs, prefer="threads")(jobs)
        return [function(*args, **kwargs) for function, args, kwargs in jobs]

    def evaluate(self, tagger: SRLTagger, dev_corpora: Mapping[str, Corpus], n_jobs: int = 1) -> Dict[str, Tuple[float, float, float]]:
        """Labeled (P, R, F1) of each development set."""
        predictor = PredictionService(tagger, n_jobs=n_jobs)
        results = {}
        for language, corpus in dev_corpora.items():
            report = score(corpus, predictor.predict_corpus(corpus, language=language))
            results[language] = (report.labeled.precision, report.labeled.recall, report.labeled.f1)
        return results

    def train(self,
              train_corpora: Mapping[str, Corpus],
              dev_corpora: Mapping[str, Corpus],
              embeddings: Mapping[str, EmbeddingTable],
              model_config: ModelConfig,
              train_config: TrainConfig,
              embedding_files: Optional[Mapping[str, str]] = None) -> TrainingResult:
        """
        Train a tagger and select the epoch with the best development F1.

        Args:
            train_corpora: Training corpus per language
            dev_corpora: Development corpus per language
            embeddings: Word vectors per language (same dimension)
            model_config: Architecture; MONO uses only its first language
            train_config: Optimization settings
            embedding_files: Embedding paths recorded in the checkpoint

        Returns:
            TrainingResult: Best checkpoint, per-epoch log and schedule audit

        Raises:
            TrainingError: On missing data, empty corpora or a non-finite loss
        """
        languages = model_languages(model_config)
        embedding_dim = self._check_inputs(languages, model_config, train_corpora, dev_corpora, embeddings)
        seed = train_config.seed

        instances = {language: extract_instances(train_corpora[language]) for language in languages}
        for language, items in instances.items():
            if not items:
                raise TrainingError(f"training corpus for '{language}' has no predicates")
        lexicons: Dict[str, SenseLexicon] = self.sense_service.build_all(instances)
        label_sets = {
            language: sorted({label for instance in items for label in instance.gold_args.values()})
            for language, items in instances.items()
        }
        sense_sets = {
            language: [] if lexicon.identity_mode else lexicon.sense_inventory
            for language, lexicon in lexicons.items()
        }

        params = ModelParams.initialize(model_config, embedding_dim, label_sets, sense_sets, seed)
        tagger = SRLTagger(model_config, params, {language: embeddings[language] for language in languages}, lexicons)
        optimizer = Adam(params.arrays, learning_rate=train_config.learning_rate, clip_norm=train_config.clip_norm)
        selection = self.selection_language(model_config)
        dev = {language: dev_corpora[language] for language in languages}
        sizes = {language: len(items) for language, items in instances.items()}

        logger.info(
            f"Training {model_config.variant.value} on {sizes} instances; "
            f"selecting on {selection} dev F1"
        )
        log_rows: List[Dict] = []
        schedule_rows: List[Tuple[int, int, str, int]] = []
        best_params = params.copy()
        best_f1 = -1.0
        best_epoch = 0
        stale_epochs = 0
        epochs_run = 0

        for epoch in range(1, train_config.max_epochs + 1):
            epochs_run = epoch
            schedule = self._schedule(sizes, languages, seed, epoch)
            schedule_rows.extend(
                (epoch, position, language, index) for position, (language, index) in enumerate(schedule.entries)
            )
            loss_sums = {language: 0.0 for language in languages}
            for start in range(0, len(schedule), train_config.batch_size):
                batch = [
                    (position, instances[language][index])
                    for position, (language, index) in enumerate(
                        schedule.entries[start:start + train_config.batch_size], start=start
                    )
                ]
                try:
                    results = self._batch_gradients(tagger, batch, params.arrays, seed, epoch, train_config.n_jobs)
                except ModelError as e:
                    logger.error(f"Loss computation failed in epoch {epoch}: {e}")
                    raise TrainingError(f"epoch {epoch}: {e}")

                totals = {name: np.zeros_like(value) for name, value in params.arrays.items()}
                for (position, instance), (loss_value, grads) in zip(batch, results):
                    if not np.isfinite(loss_value):
                        raise TrainingError(
                            f"non-finite loss {loss_value} in epoch {epoch} at schedule position {position} "
                            f"({instance.language} sentence {instance.sentence_ref}, "
                            f"predicate {instance.predicate_index})"
                        )
                    loss_sums[instance.language] += loss_value
                    for name, grad in grads.items():
                        totals[name] += grad
                optimizer.step({name: total / len(batch) for name, total in totals.items()})

            counts = {language: schedule.counts(language) for language in languages}
            for language in languages:
                n_seen = sum(counts[language].values())
                log_rows.append({
                    "epoch": epoch, "split": "train", "language": language,
                    "loss": loss_sums[language] / n_seen if n_seen else np.nan,
                    "P": np.nan, "R": np.nan, "F1": np.nan,
                })

            dev_scores = self.evaluate(tagger, dev, n_jobs=train_config.n_jobs)
            for language in languages:
                precision, recall, f1 = dev_scores[language]
                log_rows.append({
                    "epoch": epoch, "split": "dev", "language": language,
                    "loss": np.nan, "P": precision, "R": recall, "F1": f1,
                })

            selection_f1 = dev_scores[selection][2]
            logger.info(f"Epoch {epoch}: {selection} dev F1 {selection_f1:.2f} (best {max(best_f1, 0.0):.2f})")
            if selection_f1 > best_f1:
                best_f1 = selection_f1
                best_epoch = epoch
                best_params = params.copy()
                stale_epochs = 0
            else:
                stale_epochs += 1
            if stale_epochs >= train_config.patience:
                logger.info(f"Stopping after epoch {epoch}: no improvement for {stale_epochs} epochs")
                break
            if best_f1 >= PERFECT_F1:
                logger.info(f"Stopping after epoch {epoch}: {selection} dev F1 reached {PERFECT_F1:.0f}")
                break

        checkpoint = Checkpoint(
            config=model_config,
            params=best_params,
            lexicons=lexicons,
            embedding_files=dict(embedding_files or {}),
            training=train_config,
            metadata={
                "best_epoch": best_epoch,
                "best_dev_f1": best_f1,
                "selection_language": selection,
                "epochs_run": epochs_run,
            },
        )
        log = pd.DataFrame(log_rows, columns=LOG_COLUMNS)
        schedule_frame = pd.DataFrame(schedule_rows, columns=SCHEDULE_COLUMNS)
        logger.info(f"Selected epoch {best_epoch} with {selection} dev F1 {best_f1:.2f}")
        return TrainingResult(checkpoint, log, schedule_frame)

    # File-level run

    def run(self, run_config: RunConfig) -> Dict[str, Path]:
        """
        Execute a configured training run and write its artifacts.

        Writes ``model.npz``, ``train_log.csv``, ``schedule.csv`` and one
        ``lexicon.<lang>.tsv`` per language into the output directory.

        Args:
            run_config: Validated run configuration

        Returns:
            Dict[str, Path]: Written artifact paths by kind
        """
        languages = model_languages(run_config.model)
        resolve = self.settings.resolve_path
        embedding_paths = {language: resolve(run_config.embedding_files[language]) for language in languages}
        try:
            train_corpora = {
                language: self.conll_repository.read(resolve(run_config.train_files[language]), language)
                for language in languages
            }
            dev_corpora = {
                language: self.conll_repository.read(resolve(run_config.dev_files[language]), language)
                for language in languages
                if language in run_config.dev_files
            }
            embeddings = {
                language: self.embedding_repository.read_vectors(path) for language, path in embedding_paths.items()
            }
        except Exception as e:
            logger.error(f"Failed to load training inputs: {e}")
            raise

        result = self.train(
            train_corpora,
            dev_corpora,
            embeddings,
            run_config.model,
            run_config.training,
            embedding_files={language: str(path) for language, path in embedding_paths.items()},
        )

        output_dir = resolve(run_config.output_dir)
        outputs = {
            "checkpoint": self.checkpoint_repository.save(output_dir / "model.npz", result.checkpoint),
            "log": self.report_repository.save_table(output_dir / "train_log.csv", result.log),
            "schedule": self.report_repository.save_table(output_dir / "schedule.csv", result.schedule),
        }
        outputs.update(self.sense_service.save_all(output_dir, result.checkpoint.lexicons))
        return outputs
