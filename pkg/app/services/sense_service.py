"""
Sense Lexicon Service Module

Builds per-language predicate sense lexicons from training instances and
answers the two queries the tagger needs: valid senses of a lemma and the
fallback sense of an unseen lemma. SenseService adds storage of built
lexicons.
"""

import logging
import re
from collections import Counter, defaultdict
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

from app.config.settings import get_settings
from app.models.conll_models import PredicateInstance
from app.models.lexicon_models import SenseLexicon
from app.repositories.lexicon_repository import LexiconRepository

logger = logging.getLogger(__name__)

_NUMERIC_SUFFIX = re.compile(r"^\d+$")


def sense_order_key(sense: str, frequency: int) -> Tuple:
    """
    Ordering key: ascending sense suffix, then frequency descending.

    The suffix is the text after the last ``.``; numeric suffixes compare as
    numbers and sort before non-numeric ones. The full string breaks
    remaining ties.
    """
    suffix = sense.rsplit(".", 1)[1] if "." in sense else ""
    if _NUMERIC_SUFFIX.match(suffix):
        suffix_key = (0, int(suffix), "")
    else:
        suffix_key = (1, 0, suffix)
    return (suffix_key, -frequency, sense)


def build_lexicon(instances: Iterable[PredicateInstance],
                  language: str,
                  identity_languages: Optional[Sequence[str]] = None) -> SenseLexicon:
    """
    Collect the senses observed for each predicate lemma.

    Args:
        instances: Training instances with gold senses and lemmas
        language: ISO 639-3 code
        identity_languages: Languages whose sense is the lemma itself
            (default from settings: ces, jpn)

    Returns:
        SenseLexicon: Lexicon for the language
    """
    if identity_languages is None:
        identity_languages = get_settings().identity_sense_languages
    identity_mode = language in identity_languages

    counts: Counter = Counter()
    by_lemma: Dict[str, set] = defaultdict(set)
    for instance in instances:
        if identity_mode:
            counts[instance.lemma] += 1
            by_lemma[instance.lemma].add(instance.lemma)
        else:
            counts[instance.gold_sense] += 1
            by_lemma[instance.lemma].add(instance.gold_sense)

    senses = {
        lemma: tuple(sorted(observed, key=lambda sense: sense_order_key(sense, counts[sense])))
        for lemma, observed in sorted(by_lemma.items())
    }
    lexicon = SenseLexicon(language=language, identity_mode=identity_mode, senses=senses, counts=dict(counts))
    logger.info(
        f"Built {language} sense lexicon: {len(lexicon)} lemmas, "
        f"{lexicon.average_senses():.2f} senses per lemma (identity_mode={identity_mode})"
    )
    return lexicon


def valid_senses(lexicon: SenseLexicon, lemma: str) -> List[str]:
    """Candidate senses of a lemma; see SenseLexicon.valid_senses."""
    return lexicon.valid_senses(lemma)


def fallback_sense(lexicon: SenseLexicon, lemma: str) -> str:
    """First-sense guess for an unseen lemma; see SenseLexicon.fallback_sense."""
    return lexicon.fallback_sense(lemma)


class SenseService:
    """
    Service class for sense lexicons.

    Builds lexicons from training instances with the configured
    identity-sense languages and stores them through the lexicon repository.
    """

    def __init__(self,
                 lexicon_repository: Optional[LexiconRepository] = None,
                 identity_languages: Optional[Sequence[str]] = None):
        self.lexicon_repository = lexicon_repository or LexiconRepository()
        self.identity_languages = list(
            identity_languages if identity_languages is not None else get_settings().identity_sense_languages
        )

    def build(self, instances: Iterable[PredicateInstance], language: str) -> SenseLexicon:
        return build_lexicon(instances, language, self.identity_languages)

    def build_all(self, instances: Mapping[str, Sequence[PredicateInstance]]) -> Dict[str, SenseLexicon]:
        """Build one lexicon per language."""
        return {language: self.build(items, language) for language, items in instances.items()}

    def save_all(self, output_dir: Union[str, Path], lexicons: Mapping[str, SenseLexicon]) -> Dict[str, Path]:
        """
        Write ``lexicon.<lang>.tsv`` for every lexicon.

        Args:
            output_dir: Destination directory
            lexicons: Lexicons by language

        Returns:
            Dict[str, Path]: Written paths keyed ``lexicon.<lang>``
        """
        output_dir = Path(output_dir)
        outputs = {}
        for language, lexicon in sorted(lexicons.items()):
            try:
                outputs[f"lexicon.{language}"] = self.lexicon_repository.save(
                    output_dir / f"lexicon.{language}.tsv", lexicon
                )
            except OSError as e:
                logger.error(f"Failed to write the {language} sense lexicon: {e}")
                raise
        return outputs

    def load(self, path: Union[str, Path]) -> SenseLexicon:
        try:
            return self.lexicon_repository.load(path)
        except Exception as e:
            logger.error(f"Failed to read sense lexicon {path}: {e}")
            raise
