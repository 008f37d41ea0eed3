"""
Embedding domain models.

Word-vector tables, bilingual dictionaries and fitted CCA projections. Tables
are immutable: every transformation returns a new table whose OOV vector is
recomputed as the mean of its entries.
"""

from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator


def _frozen(array: np.ndarray) -> np.ndarray:
    result = np.array(array, dtype=np.float64, copy=True)
    result.setflags(write=False)
    return result


class EmbeddingTable:
    """
    Token to vector mapping with a mean-vector OOV policy.

    Tokens are stored lowercased and looked up lowercased.
    """

    def __init__(self, tokens: Sequence[str], matrix: np.ndarray):
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.ndim != 2:
            raise ValueError(f"embedding matrix must be 2-D, got shape {matrix.shape}")
        if len(tokens) != matrix.shape[0]:
            raise ValueError(f"{len(tokens)} tokens for {matrix.shape[0]} vectors")
        if len(tokens) == 0:
            raise ValueError("embedding table needs at least one entry")
        self.tokens: Tuple[str, ...] = tuple(tokens)
        self.matrix = _frozen(matrix)
        self.vocab: Dict[str, int] = {token: row for row, token in enumerate(self.tokens)}
        if len(self.vocab) != len(self.tokens):
            raise ValueError("embedding table tokens must be unique")
        self.oov_vector = _frozen(self.matrix.mean(axis=0))

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    @property
    def entries(self) -> Dict[str, np.ndarray]:
        """Token to vector mapping (read-only views)."""
        return {token: self.matrix[row] for token, row in self.vocab.items()}

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token.lower() in self.vocab

    def __iter__(self) -> Iterator[str]:
        return iter(self.tokens)

    def lookup(self, token: str) -> np.ndarray:
        """Vector of a token, or the OOV vector."""
        row = self.vocab.get(token.lower())
        return self.oov_vector if row is None else self.matrix[row]

    def lookup_many(self, tokens: Iterable[str]) -> np.ndarray:
        """Stack the vectors of a token sequence into an n x dim matrix."""
        rows = [self.lookup(token) for token in tokens]
        if not rows:
            return np.zeros((0, self.dim))
        return np.vstack(rows)

    def with_matrix(self, matrix: np.ndarray) -> "EmbeddingTable":
        """New table over the same vocabulary with transformed vectors."""
        return EmbeddingTable(self.tokens, matrix)

    def __repr__(self) -> str:
        return f"EmbeddingTable(entries={len(self)}, dim={self.dim})"


class BilingualDictionary(BaseModel):
    """Deduplicated (foreign, english) word pairs."""
    model_config = ConfigDict(frozen=True)

    pairs: Tuple[Tuple[str, str], ...] = ()

    @field_validator("pairs")
    @classmethod
    def deduplicate(cls, v):
        """Reject empty sides and drop repeated pairs, keeping first order."""
        seen = set()
        result: List[Tuple[str, str]] = []
        for foreign, english in v:
            if not foreign or not english:
                raise ValueError("dictionary pairs need two non-empty tokens")
            pair = (foreign, english)
            if pair not in seen:
                seen.add(pair)
                result.append(pair)
        return tuple(result)

    def __len__(self) -> int:
        return len(self.pairs)


class CcaProjection(BaseModel):
    """Fitted canonical correlation analysis between paired samples."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    proj_foreign: np.ndarray = Field(..., description="d_f x k")
    proj_english: np.ndarray = Field(..., description="d_e x k")
    correlations: np.ndarray = Field(..., description="k canonical correlations, non-increasing")
    mean_foreign: np.ndarray
    mean_english: np.ndarray
    regularization: float = 0.0
    n_pairs: Optional[int] = None

    @property
    def k(self) -> int:
        return int(self.correlations.shape[0])

    def transform_foreign(self, vectors: np.ndarray) -> np.ndarray:
        """Project foreign vectors into the shared canonical space."""
        return (np.asarray(vectors) - self.mean_foreign) @ self.proj_foreign

    def transform_english(self, vectors: np.ndarray) -> np.ndarray:
        """Project English vectors into the shared canonical space."""
        return (np.asarray(vectors) - self.mean_english) @ self.proj_english
