"""
Embedding Service Module

This module prepares input word vectors: PCA dimensionality reduction per
language and dictionary-driven CCA alignment of a foreign table into the
pivot (English) vector space.
"""

import logging
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np
from scipy import linalg
from sklearn.decomposition import PCA

from app.config.settings import get_settings
from app.exceptions import EmbeddingError
from app.models.embedding_models import BilingualDictionary, CcaProjection, EmbeddingTable
from app.repositories.embedding_repository import EmbeddingRepository

logger = logging.getLogger(__name__)


def pca_reduce(table: EmbeddingTable, k: int) -> EmbeddingTable:
    """
    Center the table and project it onto its top-k principal directions.

    Args:
        table: Source table
        k: Output dimensionality

    Returns:
        EmbeddingTable: Same vocabulary, ``k`` components with non-increasing
            variance

    Raises:
        EmbeddingError: If k exceeds the dimension or there are at most k entries
    """
    if k < 1 or k > table.dim:
        raise EmbeddingError(f"PCA dimension {k} must be between 1 and the table dimension {table.dim}")
    if len(table) < k + 1:
        raise EmbeddingError(f"PCA to {k} dimensions needs at least {k + 1} entries, got {len(table)}")

    pca = PCA(n_components=k, svd_solver="full")
    reduced = pca.fit_transform(table.matrix)
    logger.info(
        f"PCA {table.dim} -> {k}: retained {pca.explained_variance_ratio_.sum():.4f} of the variance"
    )
    return table.with_matrix(reduced)


def _inverse_sqrt(covariance: np.ndarray, regularization: float) -> np.ndarray:
    """
    Symmetric inverse square root of a covariance matrix.

    Eigenvalues below ``regularization`` times the largest eigenvalue are
    raised to that floor. A covariance whose condition number stays under
    ``1 / regularization`` is therefore whitened exactly.
    """
    eigenvalues, eigenvectors = linalg.eigh(covariance)
    floor = regularization * eigenvalues.max()
    if floor <= 0 and eigenvalues.min() <= 0:
        raise EmbeddingError("covariance is singular; add regularization or more dictionary pairs")
    eigenvalues = np.maximum(eigenvalues, floor)
    return (eigenvectors / np.sqrt(eigenvalues)) @ eigenvectors.T


def fit_cca(X: np.ndarray, Y: np.ndarray, k: int, regularization: Optional[float] = None) -> CcaProjection:
    """
    Fit canonical correlation analysis between paired samples.

    Each covariance is whitened with its eigenvalues floored at
    ``regularization`` times its largest eigenvalue; the singular vectors of
    the whitened cross-covariance give the projection directions. Reported
    correlations are the sample correlations of the projected pairs, sorted
    non-increasing. The floor is relative, so well-conditioned inputs give
    the unregularized solution and correlations unchanged by invertible
    affine maps of either view.

    Args:
        X: n x d_f foreign samples
        Y: n x d_e English samples, row-paired with X
        k: Number of canonical pairs
        regularization: Relative eigenvalue floor (default from settings)

    Returns:
        CcaProjection: Fitted projections and correlations

    Raises:
        EmbeddingError: If n <= k, k exceeds a dimension, or an input column
            has zero variance
    """
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if regularization is None:
        regularization = get_settings().cca_regularization
    if X.ndim != 2 or Y.ndim != 2 or X.shape[0] != Y.shape[0]:
        raise EmbeddingError(f"CCA needs row-paired matrices, got {X.shape} and {Y.shape}")
    n = X.shape[0]
    if n <= k:
        raise EmbeddingError(f"CCA with k={k} needs more than {k} pairs, got {n}")
    if k < 1 or k > min(X.shape[1], Y.shape[1]):
        raise EmbeddingError(f"CCA dimension {k} exceeds input dimensions {X.shape[1]}, {Y.shape[1]}")

    mean_x, mean_y = X.mean(axis=0), Y.mean(axis=0)
    Xc, Yc = X - mean_x, Y - mean_y
    for name, centered in (("foreign", Xc), ("english", Yc)):
        if np.any(np.all(np.isclose(centered, 0.0, atol=1e-12), axis=0)):
            raise EmbeddingError(f"{name} samples have a zero-variance dimension")

    cxx = Xc.T @ Xc / (n - 1)
    cyy = Yc.T @ Yc / (n - 1)
    cxy = Xc.T @ Yc / (n - 1)

    wx, wy = _inverse_sqrt(cxx, regularization), _inverse_sqrt(cyy, regularization)
    u, _, vt = linalg.svd(wx @ cxy @ wy)
    proj_x = wx @ u[:, :k]
    proj_y = wy @ vt.T[:, :k]

    # Empirical correlations of the projected pairs; flip signs so each is >= 0.
    px, py = Xc @ proj_x, Yc @ proj_y
    norms = np.linalg.norm(px, axis=0) * np.linalg.norm(py, axis=0)
    products = np.einsum("ij,ij->j", px, py)
    correlations = np.divide(products, norms, out=np.zeros_like(products), where=norms > 0)
    signs = np.where(correlations < 0, -1.0, 1.0)
    proj_y = proj_y * signs
    correlations = np.abs(correlations)

    order = np.argsort(-correlations, kind="stable")
    projection = CcaProjection(
        proj_foreign=proj_x[:, order],
        proj_english=proj_y[:, order],
        correlations=np.clip(correlations[order], 0.0, None),
        mean_foreign=mean_x,
        mean_english=mean_y,
        regularization=regularization,
        n_pairs=n,
    )
    logger.debug(f"CCA on {n} pairs: top correlation {projection.correlations[0]:.6f}")
    return projection


def dictionary_matrices(foreign: EmbeddingTable,
                        english: EmbeddingTable,
                        dictionary: BilingualDictionary) -> Tuple[np.ndarray, np.ndarray]:
    """
    Stack the vectors of dictionary pairs whose two tokens are both in vocabulary.

    Returns:
        Tuple of row-paired foreign and English matrices
    """
    usable = [(f, e) for f, e in dictionary.pairs if f in foreign and e in english]
    skipped = len(dictionary) - len(usable)
    if skipped:
        logger.warning(f"Skipped {skipped} dictionary pairs with out-of-vocabulary tokens")
    if not usable:
        return np.zeros((0, foreign.dim)), np.zeros((0, english.dim))
    X = np.vstack([foreign.lookup(f) for f, _ in usable])
    Y = np.vstack([english.lookup(e) for _, e in usable])
    return X, Y


def fit_pivot_alignment(foreign: EmbeddingTable,
                        english: EmbeddingTable,
                        dictionary: BilingualDictionary,
                        k: Optional[int] = None,
                        regularization: Optional[float] = None) -> Tuple[EmbeddingTable, CcaProjection]:
    """
    Map a foreign table into the English vector space.

    A foreign vector x becomes ``(x - mean_f) A pinv(B) + mean_e`` where A and
    B are the foreign and English CCA projections. The English table is the
    fixed pivot and is never modified.

    Args:
        foreign: Table to align
        english: Pivot table
        dictionary: Foreign-English word pairs
        k: Canonical dimensions (default: the smaller table dimension)
        regularization: Relative CCA eigenvalue floor (default from settings)

    Returns:
        Tuple of the aligned foreign table and the fitted projection

    Raises:
        EmbeddingError: If fewer than k+1 dictionary pairs are usable
    """
    if k is None:
        k = min(foreign.dim, english.dim)
    X, Y = dictionary_matrices(foreign, english, dictionary)
    if X.shape[0] <= k:
        raise EmbeddingError(
            f"only {X.shape[0]} usable dictionary pairs (both tokens in vocabulary); need more than {k}"
        )

    projection = fit_cca(X, Y, k, regularization=regularization)
    mapping = projection.proj_foreign @ linalg.pinv(projection.proj_english)
    aligned = (foreign.matrix - projection.mean_foreign) @ mapping + projection.mean_english

    logger.info(
        f"Aligned {len(foreign)} vectors on {X.shape[0]} pairs; "
        f"mean canonical correlation {projection.correlations.mean():.4f}"
    )
    return foreign.with_matrix(aligned), projection


def align_to_pivot(foreign: EmbeddingTable,
                   english: EmbeddingTable,
                   dictionary: BilingualDictionary,
                   k: Optional[int] = None,
                   regularization: Optional[float] = None) -> EmbeddingTable:
    """Aligned foreign table only; see ``fit_pivot_alignment``."""
    aligned, _ = fit_pivot_alignment(foreign, english, dictionary, k=k, regularization=regularization)
    return aligned


class EmbeddingService:
    """
    Service class for embedding preparation.

    Reads vector files and dictionaries through the repository, reduces them
    with PCA and optionally aligns a foreign table to a pivot table.
    """

    def __init__(self, embedding_repository: Optional[EmbeddingRepository] = None):
        self.embedding_repository = embedding_repository or EmbeddingRepository()
        self.settings = get_settings()

    def prepare(self,
                vectors_path: Union[str, Path],
                dimension: Optional[int] = None,
                pivot_path: Optional[Union[str, Path]] = None,
                dictionary_path: Optional[Union[str, Path]] = None) -> Tuple[EmbeddingTable, Optional[CcaProjection]]:
        """
        Reduce a vector file and, with a pivot and dictionary, align it.

        Args:
            vectors_path: Vectors to prepare
            dimension: PCA target dimension (default from settings)
            pivot_path: Pivot-language vectors
            dictionary_path: Bilingual dictionary (foreign TAB pivot)

        Returns:
            Tuple of the prepared table and the fitted projection (None without alignment)

        Raises:
            EmbeddingError: If only one of pivot and dictionary is given
        """
        if (pivot_path is None) != (dictionary_path is None):
            raise EmbeddingError("alignment needs both pivot vectors and a dictionary")
        if dimension is None:
            dimension = self.settings.pca_dimension
        try:
            table = pca_reduce(self.embedding_repository.read_vectors(vectors_path), dimension)
            if pivot_path is None:
                return table, None
            pivot = pca_reduce(self.embedding_repository.read_vectors(pivot_path), dimension)
            dictionary = self.embedding_repository.read_dictionary(dictionary_path)
            return fit_pivot_alignment(table, pivot, dictionary, regularization=self.settings.cca_regularization)
        except Exception as e:
            logger.error(f"Failed to prepare embeddings from {vectors_path}: {e}")
            raise

    def save(self, path: Union[str, Path], table: EmbeddingTable) -> Path:
        return self.embedding_repository.save(path, table)
