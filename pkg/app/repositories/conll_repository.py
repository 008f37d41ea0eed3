"""
CoNLL 2009 Repository Module

This module reads and writes the tab-separated CoNLL 2009 shared-task format.
Columns 1-12 (ID through PDEPREL) are kept verbatim; column 13 is FILLPRED,
column 14 is PRED and columns 15+ hold one APRED slot per marked predicate.
Files are UTF-8 and ``_`` marks an empty cell.
"""

import logging
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, TextIO, Tuple, Union

from app.exceptions import ConllParseError, ConllValidationError
from app.models.conll_models import EMPTY_CELL, Corpus, InstanceKey, LabeledPrediction, Sentence, Token

logger = logging.getLogger(__name__)

# 1-based column numbers of the fixed part of a row
N_FIXED_COLUMNS = 14
FILLPRED_COLUMN = 13
PRED_COLUMN = 14


def _cell(value: str) -> Optional[str]:
    return None if value == EMPTY_CELL else value


def _build_sentence(rows: List[Tuple[int, List[str]]], language: str) -> Sentence:
    """Validate one block of split rows and build its Sentence."""
    first_line = rows[0][0]
    widths = {len(cells) for _, cells in rows}
    if len(widths) != 1:
        raise ConllValidationError(
            f"inconsistent APRED column count within sentence (widths {sorted(widths)})",
            line_number=first_line,
        )
    n_apreds = widths.pop() - N_FIXED_COLUMNS

    tokens: List[Token] = []
    n_predicates = 0
    for position, (line_number, cells) in enumerate(rows, start=1):
        try:
            token_id = int(cells[0])
        except ValueError:
            raise ConllParseError(f"token id '{cells[0]}' is not an integer", line_number=line_number)
        if token_id != position:
            raise ConllValidationError(
                f"token id {token_id} breaks the 1..n sequence (expected {position})",
                line_number=line_number,
            )

        fill_value = cells[FILLPRED_COLUMN - 1]
        if fill_value not in ("Y", EMPTY_CELL):
            raise ConllValidationError(f"FILLPRED must be Y or _, got '{fill_value}'", line_number=line_number)
        fill_pred = fill_value == "Y"
        pred_sense = _cell(cells[PRED_COLUMN - 1])
        if fill_pred and pred_sense is None:
            raise ConllValidationError("FILLPRED=Y with empty PRED", line_number=line_number)
        if not fill_pred and pred_sense is not None:
            raise ConllValidationError("PRED given on a token without FILLPRED=Y", line_number=line_number)
        n_predicates += fill_pred

        tokens.append(Token.model_construct(
            id=token_id,
            form=cells[1],
            lemma=cells[2],
            pos=cells[4],
            fill_pred=fill_pred,
            pred_sense=pred_sense,
            apreds=tuple(_cell(value) for value in cells[N_FIXED_COLUMNS:]),
            columns=tuple(cells[:FILLPRED_COLUMN - 1]),
        ))

    if n_apreds != n_predicates:
        raise ConllValidationError(
            f"sentence has {n_predicates} predicates but {n_apreds} APRED columns",
            line_number=first_line,
        )
    return Sentence.model_construct(tokens=tuple(tokens), language=language)


def parse_conll09(stream: Iterable[str], language: str) -> Corpus:
    """
    Parse a CoNLL 2009 text stream.

    Args:
        stream: Iterable of lines (an open text file or a list of strings)
        language: ISO 639-3 code of the corpus, supplied by the caller

    Returns:
        Corpus: Parsed corpus

    Raises:
        ConllParseError: If a row has fewer than 14 columns or a bad token id
        ConllValidationError: If PRED/FILLPRED/APRED cells are inconsistent
    """
    sentences: List[Sentence] = []
    block: List[Tuple[int, List[str]]] = []

    for line_number, raw_line in enumerate(stream, start=1):
        line = raw_line.rstrip("\r\n")
        if not line.strip():
            if block:
                sentences.append(_build_sentence(block, language))
                block = []
            continue
        cells = line.split("\t")
        if len(cells) < N_FIXED_COLUMNS:
            raise ConllParseError(
                f"expected at least {N_FIXED_COLUMNS} tab-separated columns, got {len(cells)}",
                line_number=line_number,
            )
        block.append((line_number, cells))

    if block:
        sentences.append(_build_sentence(block, language))

    logger.debug(f"Parsed {len(sentences)} {language} sentences")
    return Corpus.model_construct(language=language, sentences=tuple(sentences))


def write_conll09(corpus: Corpus, predictions: Mapping[InstanceKey, LabeledPrediction]) -> str:
    """
    Render a corpus with predicted PRED/APRED cells.

    Args:
        corpus: Corpus whose non-semantic columns are reproduced verbatim
        predictions: Prediction per (sentence index, predicate position)

    Returns:
        str: CoNLL 2009 text, one blank line after every sentence

    Raises:
        ConllValidationError: If a predicate has no prediction or an argument
            position lies outside its sentence
    """
    lines: List[str] = []
    for sentence_index, sentence in enumerate(corpus.sentences):
        positions = sentence.predicate_positions
        sentence_predictions: List[LabeledPrediction] = []
        for position in positions:
            prediction = predictions.get((sentence_index, position))
            if prediction is None:
                raise ConllValidationError(
                    f"missing prediction for sentence {sentence_index}, predicate {position}"
                )
            for arg_position in prediction.args:
                if not 1 <= arg_position <= len(sentence):
                    raise ConllValidationError(
                        f"argument position {arg_position} outside sentence {sentence_index}"
                    )
            sentence_predictions.append(prediction)
        senses: Dict[int, str] = {
            position: prediction.sense for position, prediction in zip(positions, sentence_predictions)
        }

        for token in sentence.tokens:
            cells = list(token.columns)
            cells.append("Y" if token.fill_pred else EMPTY_CELL)
            cells.append(senses.get(token.id, EMPTY_CELL))
            cells.extend(prediction.args.get(token.id, EMPTY_CELL) for prediction in sentence_predictions)
            lines.append("\t".join(cells))
        lines.append("")

    return "".join(line + "\n" for line in lines)


class ConllRepository:
    """
    File access for CoNLL 2009 corpora.

    Paths are resolved by the caller; this class only owns encoding and
    newline conventions.
    """

    encoding = "utf-8"

    def read(self, path: Union[str, Path], language: str) -> Corpus:
        """
        Read and parse a CoNLL 2009 file.

        Args:
            path: File path
            language: ISO 639-3 code of the file's language

        Returns:
            Corpus: Parsed corpus
        """
        try:
            with open(path, encoding=self.encoding) as handle:
                corpus = parse_conll09(handle, language)
            logger.info(f"Read {len(corpus)} sentences from {path}")
            return corpus
        except Exception as e:
            logger.error(f"Failed to read CoNLL file {path}: {e}")
            raise

    def write(self,
              path: Union[str, Path],
              corpus: Corpus,
              predictions: Mapping[InstanceKey, LabeledPrediction]) -> Path:
        """
        Write a corpus with predictions to disk.

        Args:
            path: Destination path
            corpus: Source corpus
            predictions: Predictions keyed by instance identity

        Returns:
            Path: The written path
        """
        text = write_conll09(corpus, predictions)
        destination = Path(path)
        destination.parent.mkdir(parents=True, exist_ok=True)
        with open(destination, "w", encoding=self.encoding, newline="\n") as handle:
            handle.write(text)
        logger.info(f"Wrote {len(corpus)} sentences to {destination}")
        return destination
