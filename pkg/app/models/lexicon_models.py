"""
Predicate sense lexicon model.

Maps each predicate lemma to the ordered senses observed for it in training,
with the first-sense fallback used for lemmas never seen in training.
"""

from typing import Dict, List, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

FIRST_SENSE_SUFFIX = ".01"


class SenseLexicon(BaseModel):
    """Lemma to ordered sense list for one language."""
    model_config = ConfigDict(frozen=True)

    language: str
    identity_mode: bool = False
    senses: Dict[str, Tuple[str, ...]] = Field(default_factory=dict)
    counts: Dict[str, int] = Field(default_factory=dict)

    @model_validator(mode="after")
    def check_entries(self) -> "SenseLexicon":
        for lemma, senses in self.senses.items():
            if not senses:
                raise ValueError(f"lemma '{lemma}' has an empty sense list")
            if self.identity_mode and senses != (lemma,):
                raise ValueError(f"identity lexicon maps '{lemma}' to {senses}")
            for sense in senses:
                if self.counts.get(sense, 0) < 1:
                    raise ValueError(f"sense '{sense}' was never observed")
        return self

    def knows(self, lemma: str) -> bool:
        return lemma in self.senses

    def valid_senses(self, lemma: str) -> List[str]:
        """
        Candidate senses of a lemma.

        Returns:
            List[str]: Stored order for a known lemma, ``[lemma]`` in identity
                mode, otherwise empty
        """
        if lemma in self.senses:
            return list(self.senses[lemma])
        if self.identity_mode:
            return [lemma]
        return []

    def fallback_sense(self, lemma: str) -> str:
        """
        First-sense guess for a lemma unseen in training.

        Raises:
            ValueError: If the lemma is known; callers use valid_senses then
        """
        if lemma in self.senses:
            raise ValueError(f"lemma '{lemma}' is in the lexicon; use valid_senses")
        if self.identity_mode:
            return lemma
        return lemma + FIRST_SENSE_SUFFIX

    @property
    def sense_inventory(self) -> List[str]:
        """All stored senses, sorted, for output-head vocabularies."""
        return sorted({sense for senses in self.senses.values() for sense in senses})

    def average_senses(self) -> float:
        """Mean number of senses per known lemma."""
        if not self.senses:
            return 0.0
        return sum(len(senses) for senses in self.senses.values()) / len(self.senses)

    def __len__(self) -> int:
        return len(self.senses)
