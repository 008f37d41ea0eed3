# Data models module

from .conll_models import (
    Corpus, CorpusStats, InstanceKey, LabeledPrediction, PredicateInstance, Sentence, Token,
)
from .embedding_models import BilingualDictionary, CcaProjection, EmbeddingTable
from .lexicon_models import SenseLexicon
from .pydantic_models import (
    # Configuration schemas
    ModelConfig, TrainConfig, RunConfig, EpochSchedule,
    # Evaluation schemas
    PRF, LabelScore, EvalReport,
    # Provenance
    RunManifest,
    # Enums
    Variant,
)

__all__ = [
    # Corpus models
    "Corpus", "CorpusStats", "InstanceKey", "LabeledPrediction", "PredicateInstance", "Sentence", "Token",
    # Embedding models
    "BilingualDictionary", "CcaProjection", "EmbeddingTable",
    "SenseLexicon",
    # Pydantic schemas
    "ModelConfig", "TrainConfig", "RunConfig", "EpochSchedule",
    "PRF", "LabelScore", "EvalReport", "RunManifest", "Variant",
]
