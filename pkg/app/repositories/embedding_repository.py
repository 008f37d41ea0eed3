"""
Embedding Repository Module

Readers and writers for word-vector text files (one token followed by its
whitespace-separated components per line), bilingual dictionaries (two
tab-separated tokens per line, ``#`` comments) and prepared embedding
artifacts stored with joblib.
"""

import logging
from pathlib import Path
from typing import Iterable, List, Optional, Tuple, Union

import joblib
import numpy as np

from app.exceptions import EmbeddingError
from app.models.embedding_models import BilingualDictionary, EmbeddingTable

logger = logging.getLogger(__name__)

TEXT_SUFFIXES = (".txt", ".vec")
ARTIFACT_FORMAT = "polysrl-embeddings/1"


def _is_count_header(fields: List[str]) -> bool:
    return len(fields) == 2 and all(field.isdigit() for field in fields)


def _header_matches(fields: List[str], n_rows: int, dim: Optional[int]) -> bool:
    return n_rows > 0 and int(fields[0]) == n_rows and int(fields[1]) == dim


def load_vectors(stream: Iterable[str]) -> EmbeddingTable:
    """
    Parse a word-vector text stream.

    A leading ``<count> <dim>`` line is skipped as a header only when the
    rows after it number ``count`` and have ``dim`` components; otherwise it
    is read as an ordinary entry. Tokens are lowercased; on collisions the
    first vector is kept.

    Args:
        stream: Iterable of lines

    Returns:
        EmbeddingTable: Loaded table

    Raises:
        EmbeddingError: On ragged rows, unparsable numbers or an empty stream
    """
    tokens: List[str] = []
    rows: List[List[float]] = []
    seen = set()
    dim = None
    n_duplicates = 0
    candidate: Optional[List[str]] = None
    n_rows = 0

    for line_number, line in enumerate(stream, start=1):
        fields = line.split()
        if not fields:
            continue
        if line_number == 1 and _is_count_header(fields):
            candidate = fields
            continue
        n_rows += 1
        token, values = fields[0].lower(), fields[1:]
        if dim is None:
            dim = len(values)
            if dim == 0:
                raise EmbeddingError(f"line {line_number}: token without vector components")
        if len(values) != dim:
            raise EmbeddingError(f"line {line_number}: expected {dim} components, got {len(values)}")
        if token in seen:
            n_duplicates += 1
            logger.warning(f"Duplicate vector for '{token}' at line {line_number}; keeping the first")
            continue
        try:
            rows.append([float(value) for value in values])
        except ValueError as e:
            raise EmbeddingError(f"line {line_number}: {e}")
        seen.add(token)
        tokens.append(token)

    if candidate is not None and not _header_matches(candidate, n_rows, dim):
        token, value = candidate[0].lower(), float(candidate[1])
        if dim is not None and dim != 1:
            raise EmbeddingError(f"line 1: expected {dim} components, got 1")
        if token in seen:
            # The first line wins over the later duplicate that was kept.
            index = tokens.index(token)
            del tokens[index]
            del rows[index]
            n_duplicates += 1
        tokens.insert(0, token)
        rows.insert(0, [value])

    if not tokens:
        raise EmbeddingError("vector stream is empty")
    if n_duplicates:
        logger.info(f"Skipped {n_duplicates} duplicate vector rows")
    return EmbeddingTable(tokens, np.asarray(rows, dtype=np.float64))


def load_dictionary(stream: Iterable[str]) -> BilingualDictionary:
    """
    Parse a bilingual dictionary stream of ``foreign<TAB>english`` lines.

    Args:
        stream: Iterable of lines

    Returns:
        BilingualDictionary: Lowercased, deduplicated pairs

    Raises:
        EmbeddingError: If a non-comment line does not hold two tokens
    """
    pairs: List[Tuple[str, str]] = []
    for line_number, line in enumerate(stream, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        fields = [field.strip() for field in stripped.split("\t")]
        if len(fields) != 2 or not all(fields):
            raise EmbeddingError(f"line {line_number}: expected two tab-separated tokens")
        pairs.append((fields[0].lower(), fields[1].lower()))
    return BilingualDictionary(pairs=tuple(pairs))


def format_vectors(table: EmbeddingTable) -> str:
    """Render a table in the vector text format (repr-exact floats)."""
    lines = [
        " ".join([token] + [repr(float(value)) for value in table.matrix[row]])
        for row, token in enumerate(table.tokens)
    ]
    return "".join(line + "\n" for line in lines)


class EmbeddingRepository:
    """File access for vectors, dictionaries and prepared embedding artifacts."""

    encoding = "utf-8"

    def read_vectors(self, path: Union[str, Path]) -> EmbeddingTable:
        """
        Read vectors from a text file or a prepared artifact.

        Args:
            path: ``.joblib`` artifact or vector text file

        Returns:
            EmbeddingTable: Loaded table
        """
        path = Path(path)
        try:
            if path.suffix == ".joblib":
                return self.load_artifact(path)
            with open(path, encoding=self.encoding) as handle:
                table = load_vectors(handle)
            logger.info(f"Loaded {len(table)} vectors of dimension {table.dim} from {path}")
            return table
        except Exception as e:
            logger.error(f"Failed to read vectors from {path}: {e}")
            raise

    def read_dictionary(self, path: Union[str, Path]) -> BilingualDictionary:
        """Read a bilingual dictionary file."""
        with open(path, encoding=self.encoding) as handle:
            dictionary = load_dictionary(handle)
        logger.info(f"Loaded {len(dictionary)} dictionary pairs from {path}")
        return dictionary

    def save(self, path: Union[str, Path], table: EmbeddingTable) -> Path:
        """
        Save a table; text format for ``.txt``/``.vec`` paths, joblib otherwise.

        Args:
            path: Destination path
            table: Table to save

        Returns:
            Path: The written path
        """
        destination = Path(path)
        destination.parent.mkdir(parents=True, exist_ok=True)
        if destination.suffix in TEXT_SUFFIXES:
            with open(destination, "w", encoding=self.encoding, newline="\n") as handle:
                handle.write(format_vectors(table))
        else:
            payload = {
                "format": ARTIFACT_FORMAT,
                "tokens": list(table.tokens),
                "matrix": np.ascontiguousarray(table.matrix),
            }
            joblib.dump(payload, destination)
        logger.info(f"Saved {len(table)} x {table.dim} embeddings to {destination}")
        return destination

    def load_artifact(self, path: Union[str, Path]) -> EmbeddingTable:
        """
        Load a joblib embedding artifact.

        Raises:
            EmbeddingError: If the file is not an embedding artifact
        """
        payload = joblib.load(path)
        if not isinstance(payload, dict) or payload.get("format") != ARTIFACT_FORMAT:
            raise EmbeddingError(f"{path} is not an embedding artifact")
        table = EmbeddingTable(payload["tokens"], payload["matrix"])
        logger.info(f"Loaded embedding artifact {path} ({len(table)} x {table.dim})")
        return table
