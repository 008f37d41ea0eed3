"""
CoNLL 2009 domain models.

Immutable pydantic schemas for parsed corpora: tokens, sentences, per-predicate
training instances, corpus statistics and model predictions. Token positions
are 1-based throughout, matching the ID column of the file format.
"""

from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator


EMPTY_CELL = "_"

# (sentence index in corpus, 1-based predicate position)
InstanceKey = Tuple[int, int]


class FrozenSchema(BaseModel):
    """Base schema for immutable corpus values."""
    model_config = ConfigDict(frozen=True, protected_namespaces=())


class Token(FrozenSchema):
    """A single token row of a CoNLL 2009 sentence."""
    id: int = Field(..., ge=1)
    form: str
    lemma: str
    pos: str
    fill_pred: bool = False
    pred_sense: Optional[str] = None
    apreds: Tuple[Optional[str], ...] = ()
    # Columns 1-12 exactly as read (ID through PDEPREL); written back verbatim.
    columns: Tuple[str, ...] = ()

    @model_validator(mode="after")
    def check_sense_marking(self) -> "Token":
        if self.fill_pred != (self.pred_sense is not None):
            raise ValueError("pred_sense must be present exactly when fill_pred is set")
        return self


class Sentence(FrozenSchema):
    """An ordered list of tokens in one language."""
    tokens: Tuple[Token, ...]
    language: str

    @model_validator(mode="after")
    def check_shape(self) -> "Sentence":
        n_predicates = sum(1 for token in self.tokens if token.fill_pred)
        for position, token in enumerate(self.tokens, start=1):
            if token.id != position:
                raise ValueError(f"token ids must be contiguous from 1, found {token.id} at {position}")
            if len(token.apreds) != n_predicates:
                raise ValueError(
                    f"token {token.id} has {len(token.apreds)} APRED cells, expected {n_predicates}"
                )
        return self

    @property
    def predicate_positions(self) -> Tuple[int, ...]:
        """1-based positions of marked predicates, in column order."""
        return tuple(token.id for token in self.tokens if token.fill_pred)

    @property
    def predicate_count(self) -> int:
        return len(self.predicate_positions)

    @property
    def forms(self) -> Tuple[str, ...]:
        return tuple(token.form for token in self.tokens)

    def __len__(self) -> int:
        return len(self.tokens)


class Corpus(FrozenSchema):
    """A parsed CoNLL 2009 file."""
    language: str
    sentences: Tuple[Sentence, ...] = ()

    def __len__(self) -> int:
        return len(self.sentences)


class PredicateInstance(FrozenSchema):
    """The annotation of one marked predicate: one training instance."""
    sentence_ref: int = Field(..., ge=0, description="Index of the sentence in its corpus")
    predicate_index: int = Field(..., ge=1, description="1-based position of the predicate")
    gold_sense: str
    gold_args: Dict[int, str] = Field(default_factory=dict)
    language: str
    lemma: str
    forms: Tuple[str, ...]

    @property
    def key(self) -> Tuple[int, int]:
        """Identity of the instance inside its corpus."""
        return (self.sentence_ref, self.predicate_index)


class CorpusStats(FrozenSchema):
    """Sentence and predicate counts of a corpus."""
    n_sentences: int = Field(..., ge=0)
    n_sentences_with_pred: int = Field(..., ge=0)
    n_predicates: int = Field(..., ge=0)

    @model_validator(mode="after")
    def check_counts(self) -> "CorpusStats":
        if self.n_sentences_with_pred > self.n_sentences:
            raise ValueError("more sentences with predicates than sentences")
        if self.n_predicates < self.n_sentences_with_pred:
            raise ValueError("fewer predicates than sentences with predicates")
        return self

    def as_tuple(self) -> Tuple[int, int, int]:
        return (self.n_sentences, self.n_sentences_with_pred, self.n_predicates)


class LabeledPrediction(FrozenSchema):
    """Predicted sense and non-NULL argument labels for one predicate."""
    sense: str
    args: Dict[int, str] = Field(default_factory=dict)


def gold_predictions(instances: List[PredicateInstance]) -> Dict[Tuple[int, int], LabeledPrediction]:
    """
    Wrap gold annotations as predictions, keyed by instance identity.

    Args:
        instances: Instances extracted from a corpus

    Returns:
        Dict mapping (sentence_ref, predicate_index) to the gold annotation
    """
    return {
        instance.key: LabeledPrediction(sense=instance.gold_sense, args=dict(instance.gold_args))
        for instance in instances
    }
