"""
Unit tests for PCA reduction and CCA alignment of word vectors.
"""

import numpy as np
import pytest
from scipy import linalg as scipy_linalg
from scipy.spatial.distance import pdist

from app.config.settings import get_settings
from app.exceptions import EmbeddingError
from app.models.embedding_models import BilingualDictionary, EmbeddingTable
from app.repositories.embedding_repository import EmbeddingRepository
from app.services.embedding_service import (
    EmbeddingService, align_to_pivot, dictionary_matrices, fit_cca, fit_pivot_alignment, pca_reduce,
)


def random_table(n, dim, seed=0, prefix="w"):
    rng = np.random.default_rng(seed)
    return EmbeddingTable([f"{prefix}{i}" for i in range(n)], rng.normal(size=(n, dim)))


def random_rotation(dim, seed=0):
    q, _ = np.linalg.qr(np.random.default_rng(seed).normal(size=(dim, dim)))
    return q


class TestPcaReduce:
    """Test cases for pca_reduce."""

    def test_collinear_points_keep_distances(self):
        t = np.linspace(-2.0, 3.0, 12)
        matrix = np.outer(t, [1.0, 2.0, -1.0]) + np.array([5.0, 0.0, 1.0])
        table = EmbeddingTable([f"w{i}" for i in range(12)], matrix)
        reduced = pca_reduce(table, 1)
        assert reduced.dim == 1
        assert reduced.tokens == table.tokens
        np.testing.assert_allclose(pdist(reduced.matrix), pdist(matrix), atol=1e-10)

    def test_full_rank_preserves_distances(self):
        table = random_table(20, 5)
        reduced = pca_reduce(table, 5)
        np.testing.assert_allclose(pdist(reduced.matrix), pdist(table.matrix), atol=1e-10)

    def test_output_is_centered(self):
        reduced = pca_reduce(random_table(30, 6, seed=1), 3)
        np.testing.assert_allclose(reduced.matrix.mean(axis=0), 0.0, atol=1e-12)

    def test_component_variances_match_covariance_eigenvalues(self):
        table = random_table(40, 6, seed=2)
        reduced = pca_reduce(table, 4)
        eigenvalues = np.sort(np.linalg.eigvalsh(np.cov(table.matrix, rowvar=False)))[::-1]
        variances = reduced.matrix.var(axis=0, ddof=1)
        np.testing.assert_allclose(variances, eigenvalues[:4], rtol=1e-8)
        assert np.all(np.diff(variances) <= 1e-12)

    def test_dimension_above_table_dimension(self):
        with pytest.raises(EmbeddingError):
            pca_reduce(random_table(10, 3), 4)

    def test_too_few_entries(self):
        with pytest.raises(EmbeddingError):
            pca_reduce(random_table(3, 5), 3)

    def test_source_table_unchanged(self):
        table = random_table(10, 4)
        before = table.matrix.copy()
        pca_reduce(table, 2)
        np.testing.assert_array_equal(table.matrix, before)


class TestFitCca:
    """Test cases for fit_cca."""

    def test_identical_views_are_fully_correlated(self):
        X = np.random.default_rng(0).normal(size=(50, 4))
        projection = fit_cca(X, X.copy(), 4, regularization=0.0)
        np.testing.assert_allclose(projection.correlations, 1.0, atol=1e-8)

    def test_linear_transform_is_fully_correlated(self):
        rng = np.random.default_rng(1)
        X = rng.normal(size=(60, 5))
        Y = X @ rng.normal(size=(5, 5)) + 3.0
        projection = fit_cca(X, Y, 5, regularization=0.0)
        np.testing.assert_allclose(projection.correlations, 1.0, atol=1e-8)
        np.testing.assert_allclose(projection.transform_foreign(X), projection.transform_english(Y), atol=1e-6)

    def test_correlations_match_generalized_eigenproblem(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(80, 4))
        Y = 0.5 * X[:, :3] @ rng.normal(size=(3, 3)) + rng.normal(size=(80, 3))
        projection = fit_cca(X, Y, 3, regularization=0.0)

        Xc, Yc = X - X.mean(axis=0), Y - Y.mean(axis=0)
        cxx, cyy, cxy = Xc.T @ Xc, Yc.T @ Yc, Xc.T @ Yc
        matrix = np.linalg.solve(cxx, cxy) @ np.linalg.solve(cyy, cxy.T)
        expected = np.sqrt(np.clip(np.sort(np.linalg.eigvals(matrix).real)[::-1][:3], 0.0, None))
        np.testing.assert_allclose(projection.correlations, expected, atol=1e-8)

    def test_correlations_sorted_and_bounded(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(40, 4))
        Y = X[:, :3] + 0.3 * rng.normal(size=(40, 3))
        correlations = fit_cca(X, Y, 3).correlations
        assert np.all(np.diff(correlations) <= 1e-12)
        assert np.all((correlations >= 0) & (correlations <= 1 + 1e-12))

    def test_invariant_to_invertible_maps(self):
        rng = np.random.default_rng(4)
        X = rng.normal(size=(70, 3))
        Y = X + 0.5 * rng.normal(size=(70, 3))
        base = fit_cca(X, Y, 3, regularization=0.0).correlations
        moved = fit_cca(X @ rng.normal(size=(3, 3)) - 2.0, Y * 4.0 + 1.0, 3, regularization=0.0).correlations
        np.testing.assert_allclose(moved, base, atol=1e-8)

    def test_default_floor_keeps_scaled_rotation_exact(self):
        rng = np.random.default_rng(8)
        X = 0.01 * rng.normal(size=(100, 5))
        rotation, _ = np.linalg.qr(rng.normal(size=(5, 5)))
        Y = X @ rotation @ np.diag([1.0, 2.0, 3.0, 4.0, 5.0])
        projection = fit_cca(X, Y, 5)
        np.testing.assert_allclose(projection.correlations, 1.0, atol=1e-6)

    def test_default_floor_is_affine_invariant(self):
        rng = np.random.default_rng(9)
        X = rng.normal(size=(70, 3))
        Y = X + 0.5 * rng.normal(size=(70, 3))
        base = fit_cca(X, Y, 3).correlations
        np.testing.assert_allclose(fit_cca(X * 0.01 - 2.0, Y * 4.0 + 1.0, 3).correlations, base, atol=1e-6)
        mixed = X @ np.array([[2.0, 0.5, 0.0], [0.0, 1.0, 0.3], [0.1, 0.0, 0.7]]) + 5.0
        np.testing.assert_allclose(fit_cca(mixed, Y, 3).correlations, base, atol=1e-6)

    @pytest.mark.parametrize("seed", range(20))
    def test_six_pairs_match_generalized_eigenproblem(self, seed):
        rng = np.random.default_rng(seed + 50)
        X = rng.normal(size=(6, 2))
        Y = X @ rng.normal(size=(2, 2)) + rng.normal(size=(6, 2))
        projection = fit_cca(X, Y, 2)

        Xc, Yc = X - X.mean(axis=0), Y - Y.mean(axis=0)
        cxx, cyy, cxy = Xc.T @ Xc, Yc.T @ Yc, Xc.T @ Yc
        between = cxy @ np.linalg.solve(cyy, cxy.T)
        eigenvalues = scipy_linalg.eigh((between + between.T) / 2.0, cxx, eigvals_only=True)
        expected = np.sqrt(np.clip(np.sort(eigenvalues)[::-1], 0.0, 1.0))
        np.testing.assert_allclose(projection.correlations, expected, atol=1e-5)

    def test_rank_deficient_covariance_is_floored(self):
        rng = np.random.default_rng(10)
        X, Y = rng.normal(size=(4, 6)), rng.normal(size=(4, 6))
        correlations = fit_cca(X, Y, 2).correlations
        assert np.all(np.isfinite(correlations))
        assert np.all((correlations >= 0) & (correlations <= 1 + 1e-9))

    def test_needs_more_pairs_than_dimensions(self):
        X = np.random.default_rng(5).normal(size=(3, 3))
        with pytest.raises(EmbeddingError):
            fit_cca(X, X, 3)

    def test_zero_variance_column(self):
        X = np.random.default_rng(6).normal(size=(10, 2))
        Y = X.copy()
        Y[:, 1] = 1.0
        with pytest.raises(EmbeddingError, match="zero-variance"):
            fit_cca(X, Y, 2)

    def test_unpaired_rows(self):
        rng = np.random.default_rng(7)
        with pytest.raises(EmbeddingError):
            fit_cca(rng.normal(size=(10, 2)), rng.normal(size=(9, 2)), 1)


class TestPivotAlignment:
    """Test cases for dictionary-driven alignment into the pivot space."""

    def test_identity_alignment(self):
        english = random_table(30, 4, seed=10)
        foreign = EmbeddingTable(english.tokens, english.matrix)
        dictionary = BilingualDictionary(pairs=[(token, token) for token in english.tokens])
        aligned = align_to_pivot(foreign, english, dictionary, regularization=0.0)
        np.testing.assert_allclose(aligned.matrix, english.matrix, atol=1e-8)

    def test_rotation_is_undone(self):
        foreign = random_table(40, 4, seed=11, prefix="f")
        english_matrix = foreign.matrix @ random_rotation(4, seed=12) + 0.5
        english = EmbeddingTable([f"e{i}" for i in range(40)], english_matrix)
        dictionary = BilingualDictionary(pairs=[(f"f{i}", f"e{i}") for i in range(25)])

        aligned, projection = fit_pivot_alignment(foreign, english, dictionary, regularization=0.0)
        assert projection.n_pairs == 25
        # Words outside the dictionary follow the same map.
        np.testing.assert_allclose(aligned.matrix, english_matrix, atol=1e-8)

    def test_pivot_table_unchanged(self):
        foreign = random_table(20, 3, seed=13, prefix="f")
        english = random_table(20, 3, seed=14, prefix="e")
        before = english.matrix.copy()
        dictionary = BilingualDictionary(pairs=[(f"f{i}", f"e{i}") for i in range(20)])
        align_to_pivot(foreign, english, dictionary)
        np.testing.assert_array_equal(english.matrix, before)

    def test_out_of_vocabulary_pairs_are_skipped(self):
        foreign = random_table(5, 2, prefix="f")
        english = random_table(5, 2, prefix="e")
        dictionary = BilingualDictionary(pairs=[("f0", "e0"), ("f1", "zzz"), ("yyy", "e2")])
        X, Y = dictionary_matrices(foreign, english, dictionary)
        assert X.shape == (1, 2)
        assert Y.shape == (1, 2)

    def test_no_usable_pairs(self):
        foreign = random_table(5, 2, prefix="f")
        english = random_table(5, 2, prefix="e")
        dictionary = BilingualDictionary(pairs=[("nope", "nada")])
        with pytest.raises(EmbeddingError, match="usable dictionary pairs"):
            align_to_pivot(foreign, english, dictionary)


class TestEmbeddingService:
    """Test cases for preparing vector files through the repository."""

    @pytest.fixture
    def files(self, tmp_path):
        repository = EmbeddingRepository()
        foreign = random_table(40, 4, seed=21, prefix="f")
        english = EmbeddingTable([f"e{i}" for i in range(40)], foreign.matrix @ random_rotation(4, seed=22) - 1.0)
        dictionary = tmp_path / "dict.tsv"
        dictionary.write_text("".join(f"f{i}\te{i}\n" for i in range(30)), encoding="utf-8")
        return {
            "foreign": repository.save(tmp_path / "foreign.txt", foreign),
            "english": repository.save(tmp_path / "english.txt", english),
            "dictionary": dictionary,
            "english_table": english,
        }

    def test_pca_only(self, files):
        table, projection = EmbeddingService().prepare(files["foreign"], 2)
        assert projection is None
        assert table.dim == 2
        assert len(table) == 40

    def test_dimension_defaults_to_setting(self, files, monkeypatch):
        monkeypatch.setenv("POLYSRL_PCA_DIMENSION", "3")
        get_settings.cache_clear()
        table, _ = EmbeddingService().prepare(files["foreign"])
        assert table.dim == 3

    def test_alignment_with_default_floor(self, files):
        table, projection = EmbeddingService().prepare(
            files["foreign"], 4, pivot_path=files["english"], dictionary_path=files["dictionary"]
        )
        assert projection.n_pairs == 30
        np.testing.assert_allclose(projection.correlations, 1.0, atol=1e-8)
        pivot = pca_reduce(files["english_table"], 4)
        np.testing.assert_allclose(table.matrix, pivot.matrix, atol=1e-6)

    def test_pivot_without_dictionary(self, files):
        with pytest.raises(EmbeddingError, match="both"):
            EmbeddingService().prepare(files["foreign"], 2, pivot_path=files["english"])

    def test_unreadable_vectors_are_logged(self, tmp_path, caplog):
        with pytest.raises(OSError):
            EmbeddingService().prepare(tmp_path / "absent.vec", 2)
        assert "Failed to prepare embeddings" in caplog.text

    def test_save_round_trip(self, files, tmp_path):
        service = EmbeddingService()
        table, _ = service.prepare(files["foreign"], 2)
        path = service.save(tmp_path / "prepared.joblib", table)
        np.testing.assert_array_equal(EmbeddingRepository().read_vectors(path).matrix, table.matrix)
