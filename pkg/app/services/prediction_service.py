"""
Prediction Service Module

Runs a tagger over every predicate of a corpus and writes the predictions
back into the corpus's PRED and APRED cells.
"""

import logging
from typing import Dict, List, Mapping, Optional, Sequence

from joblib import Parallel, delayed

from app.exceptions import ModelError
from app.ml.models.srl_tagger import SRLTagger
from app.models.conll_models import Corpus, InstanceKey, LabeledPrediction, PredicateInstance
from app.models.embedding_models import EmbeddingTable
from app.repositories.checkpoint_repository import Checkpoint
from app.services.corpus_service import extract_instances

logger = logging.getLogger(__name__)


def annotate(corpus: Corpus, predictions: Mapping[InstanceKey, LabeledPrediction]) -> Corpus:
    """
    Copy of a corpus whose PRED and APRED cells carry the given predictions.

    Raises:
        ModelError: If a marked predicate has no prediction
    """
    sentences = []
    for sentence_index, sentence in enumerate(corpus.sentences):
        positions = sentence.predicate_positions
        sentence_predictions: List[LabeledPrediction] = []
        for position in positions:
            prediction = predictions.get((sentence_index, position))
            if prediction is None:
                raise ModelError(f"no prediction for predicate {position} of sentence {sentence_index}")
            sentence_predictions.append(prediction)
        senses = dict(zip(positions, (prediction.sense for prediction in sentence_predictions)))
        tokens = tuple(
            token.model_copy(update={
                "pred_sense": senses.get(token.id),
                "apreds": tuple(prediction.args.get(token.id) for prediction in sentence_predictions),
            })
            for token in sentence.tokens
        )
        sentences.append(sentence.model_copy(update={"tokens": tokens}))
    return corpus.model_copy(update={"sentences": tuple(sentences)})


class PredictionService:
    """
    Prediction with a trained tagger.

    The tagger's parameters are read-only during prediction, so instances
    may be labeled from several threads.
    """

    def __init__(self, tagger: SRLTagger, n_jobs: int = 1):
        self.tagger = tagger
        self.n_jobs = n_jobs

    @classmethod
    def from_checkpoint(cls,
                        checkpoint: Checkpoint,
                        embeddings: Mapping[str, EmbeddingTable],
                        n_jobs: int = 1) -> "PredictionService":
        tagger = SRLTagger(checkpoint.config, checkpoint.params, embeddings, checkpoint.lexicons)
        return cls(tagger, n_jobs=n_jobs)

    def predict_instances(self, instances: Sequence[PredicateInstance]) -> Dict[InstanceKey, LabeledPrediction]:
        """
        Label instances; result order follows the input.

        Args:
            instances: Instances of a configured language

        Returns:
            Dict: Prediction per instance key
        """
        if self.n_jobs > 1 and len(instances) > 1:
            results = Parallel(n_jobs=self.n_jobs, prefer="threads")(
                delayed(self.tagger.predict)(instance) for instance in instances
            )
        else:
            results = [self.tagger.predict(instance) for instance in instances]
        return {instance.key: prediction for instance, prediction in zip(instances, results)}

    def predict_corpus(self, corpus: Corpus, language: Optional[str] = None) -> Corpus:
        """
        Predict every marked predicate of a corpus.

        Args:
            corpus: Input corpus; gold PRED/APRED values, if any, are ignored
            language: Head to use (default: the corpus language)

        Returns:
            Corpus: The input with predicted senses and arguments
        """
        instances = extract_instances(corpus)
        if language is not None and language != corpus.language:
            instances = [instance.model_copy(update={"language": language}) for instance in instances]
        try:
            predictions = self.predict_instances(instances)
        except Exception as e:
            logger.error(f"Prediction failed for {corpus.language} corpus: {e}")
            raise
        n_args = sum(len(prediction.args) for prediction in predictions.values())
        logger.info(f"Predicted {len(predictions)} predicates and {n_args} arguments")
        return annotate(corpus, predictions)

