"""
Unit tests for the checkpoint container.
"""

import json
import zipfile

import numpy as np
import pytest

from app.exceptions import CheckpointError
from app.ml.models.srl_tagger import ModelParams
from app.models.lexicon_models import SenseLexicon
from app.models.pydantic_models import ModelConfig, TrainConfig, Variant
from app.repositories.checkpoint_repository import CHECKPOINT_FORMAT, Checkpoint, CheckpointRepository


def rewrite_header(tmp_path, checkpoint, edit):
    """Save a checkpoint, apply ``edit`` to its decoded header and write a copy."""
    path = CheckpointRepository().save(tmp_path / "model.npz", checkpoint)
    with np.load(path) as archive:
        entries = {name: archive[name] for name in archive.files}
    header = json.loads(entries["__header__"].tobytes().decode("utf-8"))
    edit(header)
    entries["__header__"] = np.frombuffer(json.dumps(header).encode("utf-8"), dtype=np.uint8)
    np.savez(tmp_path / "edited.npz", **entries)
    return tmp_path / "edited.npz"


class TestCheckpointRepository:
    """Test cases for saving and loading checkpoints."""

    @pytest.fixture
    def checkpoint(self):
        config = ModelConfig(variant=Variant.LANG_ID, shared_layers=2, hidden_size=3, languages=["cat", "eng"])
        params = ModelParams.initialize(
            config, embedding_dim=4,
            label_sets={"cat": ["arg0-agt", "arg1-pat"], "eng": ["A0"]},
            sense_sets={"cat": ["menjar.a2"], "eng": ["eat.01", "eat.02"]},
            seed=3,
        )
        lexicons = {
            "cat": SenseLexicon(language="cat", senses={"menjar": ("menjar.a2",)}, counts={"menjar.a2": 1}),
            "eng": SenseLexicon(language="eng", senses={"eat": ("eat.01", "eat.02")}, counts={"eat.01": 2, "eat.02": 1}),
        }
        return Checkpoint(
            config=config, params=params, lexicons=lexicons,
            embedding_files={"cat": "cat.joblib", "eng": "eng.joblib"},
            training=TrainConfig(seed=3), metadata={"best_epoch": 2, "best_dev_f1": 71.5},
        )

    def test_round_trip(self, tmp_path, checkpoint):
        repository = CheckpointRepository()
        path = repository.save(tmp_path / "model.npz", checkpoint)
        loaded = repository.load(path)

        assert loaded.config == checkpoint.config
        assert loaded.training == checkpoint.training
        assert loaded.lexicons == checkpoint.lexicons
        assert loaded.embedding_files == checkpoint.embedding_files
        assert loaded.metadata == checkpoint.metadata
        assert loaded.params.label_vocab == checkpoint.params.label_vocab
        assert loaded.params.sense_vocab == checkpoint.params.sense_vocab
        assert set(loaded.params.arrays) == set(checkpoint.params.arrays)
        for name, array in checkpoint.params.arrays.items():
            np.testing.assert_array_equal(loaded.params.arrays[name], array)

    def test_identical_checkpoints_are_byte_identical(self, tmp_path, checkpoint):
        repository = CheckpointRepository()
        first = repository.save(tmp_path / "a.npz", checkpoint)
        second = repository.save(tmp_path / "b.npz", checkpoint)
        assert first.read_bytes() == second.read_bytes()

    def test_layout(self, tmp_path, checkpoint):
        """Header entry plus one little-endian float64 entry per tensor."""
        path = CheckpointRepository().save(tmp_path / "model.npz", checkpoint)
        with np.load(path) as archive:
            header = json.loads(archive["__header__"].tobytes().decode("utf-8"))
            assert header["format"] == CHECKPOINT_FORMAT
            assert header["label_vocab"]["cat"] == ["<null>", "arg0-agt", "arg1-pat"]
            weights = archive["param/arg/cat/W"]
            assert weights.dtype == np.dtype("<f8")
            assert weights.shape == (3, 6)

    def test_unknown_format(self, tmp_path, checkpoint):
        path = CheckpointRepository().save(tmp_path / "model.npz", checkpoint)
        with np.load(path) as archive:
            entries = {name: archive[name] for name in archive.files}
        header = json.loads(entries["__header__"].tobytes().decode("utf-8"))
        header["format"] = "other/9"
        entries["__header__"] = np.frombuffer(json.dumps(header).encode("utf-8"), dtype=np.uint8)
        np.savez(tmp_path / "bad.npz", **entries)
        with pytest.raises(CheckpointError, match="unsupported"):
            CheckpointRepository().load(tmp_path / "bad.npz")

    @pytest.mark.parametrize("key", ["model", "label_vocab", "sense_vocab", "lexicons"])
    def test_header_missing_key(self, tmp_path, checkpoint, key):
        path = rewrite_header(tmp_path, checkpoint, lambda header: header.pop(key))
        with pytest.raises(CheckpointError, match=key):
            CheckpointRepository().load(path)

    def test_header_with_invalid_model(self, tmp_path, checkpoint):
        path = rewrite_header(tmp_path, checkpoint, lambda header: header["model"].update(hidden_size=0))
        with pytest.raises(CheckpointError, match="invalid checkpoint header"):
            CheckpointRepository().load(path)

    def test_header_not_an_object(self, tmp_path, checkpoint):
        path = CheckpointRepository().save(tmp_path / "model.npz", checkpoint)
        with np.load(path) as archive:
            entries = {name: archive[name] for name in archive.files}
        entries["__header__"] = np.frombuffer(b"[1, 2]", dtype=np.uint8)
        np.savez(tmp_path / "list.npz", **entries)
        with pytest.raises(CheckpointError, match="JSON object"):
            CheckpointRepository().load(tmp_path / "list.npz")

    def test_not_a_checkpoint(self, tmp_path):
        path = tmp_path / "junk.npz"
        path.write_bytes(b"not a zip file")
        with pytest.raises(CheckpointError):
            CheckpointRepository().load(path)

    def test_missing_header(self, tmp_path):
        path = tmp_path / "empty.npz"
        with zipfile.ZipFile(path, "w"):
            pass
        with pytest.raises(CheckpointError, match="__header__"):
            CheckpointRepository().load(path)
