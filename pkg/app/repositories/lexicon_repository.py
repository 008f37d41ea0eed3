"""
Lexicon Repository Module

Stores sense lexicons as line-oriented text: a ``#`` header carrying the
language and identity flag, then one ``lemma TAB sense TAB count`` line per
stored sense in lexicon order.
"""

import logging
from pathlib import Path
from typing import Dict, Iterable, List, Union

from app.exceptions import SRLToolkitError
from app.models.lexicon_models import SenseLexicon

logger = logging.getLogger(__name__)


def format_lexicon(lexicon: SenseLexicon) -> str:
    """Render a lexicon in its text format."""
    lines = [f"# language={lexicon.language} identity={int(lexicon.identity_mode)}"]
    for lemma, senses in lexicon.senses.items():
        for sense in senses:
            lines.append(f"{lemma}\t{sense}\t{lexicon.counts[sense]}")
    return "".join(line + "\n" for line in lines)


def parse_lexicon(stream: Iterable[str]) -> SenseLexicon:
    """
    Parse the text format written by ``format_lexicon``.

    Raises:
        SRLToolkitError: On a missing header or malformed line
    """
    header: Dict[str, str] = {}
    senses: Dict[str, List[str]] = {}
    counts: Dict[str, int] = {}
    for line_number, line in enumerate(stream, start=1):
        line = line.rstrip("\r\n")
        if not line:
            continue
        if line.startswith("#"):
            for field in line[1:].split():
                key, _, value = field.partition("=")
                header[key] = value
            continue
        fields = line.split("\t")
        if len(fields) != 3 or not fields[2].isdigit():
            raise SRLToolkitError(f"line {line_number}: expected lemma, sense and count")
        lemma, sense, count = fields
        senses.setdefault(lemma, []).append(sense)
        counts[sense] = int(count)
    if "language" not in header:
        raise SRLToolkitError("lexicon file has no '# language=' header")
    return SenseLexicon(
        language=header["language"],
        identity_mode=header.get("identity", "0") == "1",
        senses={lemma: tuple(values) for lemma, values in senses.items()},
        counts=counts,
    )


class LexiconRepository:
    """File access for sense lexicons."""

    encoding = "utf-8"

    def save(self, path: Union[str, Path], lexicon: SenseLexicon) -> Path:
        destination = Path(path)
        destination.parent.mkdir(parents=True, exist_ok=True)
        with open(destination, "w", encoding=self.encoding, newline="\n") as handle:
            handle.write(format_lexicon(lexicon))
        logger.info(f"Wrote {lexicon.language} lexicon ({len(lexicon)} lemmas) to {destination}")
        return destination

    def load(self, path: Union[str, Path]) -> SenseLexicon:
        with open(path, encoding=self.encoding) as handle:
            return parse_lexicon(handle)
