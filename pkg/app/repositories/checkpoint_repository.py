"""
Checkpoint Repository Module

A checkpoint is a zip container readable with ``numpy.load``:

    __header__.npy       uint8 array holding UTF-8 JSON: format version,
                         model and training configuration, label and sense
                         vocabularies, sense lexicons, embedding file
                         references and selection metadata
    param/<name>.npy     one array per parameter tensor, dtype '<f8'
                         (little-endian float64), C order

Entries are written in sorted order with a fixed timestamp so identical
parameters give byte-identical files.
"""

import json
import logging
import zipfile
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union

import numpy as np

from app.exceptions import CheckpointError
from app.ml.models.srl_tagger import ModelParams
from app.models.lexicon_models import SenseLexicon
from app.models.pydantic_models import ModelConfig, TrainConfig

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "polysrl-checkpoint/1"
HEADER_ENTRY = "__header__"
PARAM_PREFIX = "param/"
REQUIRED_HEADER_KEYS = ("model", "label_vocab", "sense_vocab", "lexicons")
_ZIP_TIMESTAMP = (1980, 1, 1, 0, 0, 0)


class Checkpoint:
    """Everything needed to rebuild a trained tagger."""

    def __init__(self,
                 config: ModelConfig,
                 params: ModelParams,
                 lexicons: Mapping[str, SenseLexicon],
                 embedding_files: Optional[Mapping[str, str]] = None,
                 training: Optional[TrainConfig] = None,
                 metadata: Optional[Mapping[str, Any]] = None):
        self.config = config
        self.params = params
        self.lexicons = dict(lexicons)
        self.embedding_files = dict(embedding_files or {})
        self.training = training
        self.metadata = dict(metadata or {})

    def header(self) -> Dict[str, Any]:
        return {
            "format": CHECKPOINT_FORMAT,
            "model": self.config.model_dump(mode="json"),
            "training": self.training.model_dump(mode="json") if self.training else None,
            "label_vocab": self.params.label_vocab,
            "sense_vocab": self.params.sense_vocab,
            "lexicons": {
                language: lexicon.model_dump(mode="json") for language, lexicon in sorted(self.lexicons.items())
            },
            "embedding_files": self.embedding_files,
            "metadata": self.metadata,
        }


def _write_entry(archive: zipfile.ZipFile, name: str, array: np.ndarray) -> None:
    info = zipfile.ZipInfo(f"{name}.npy", date_time=_ZIP_TIMESTAMP)
    info.compress_type = zipfile.ZIP_STORED
    with archive.open(info, "w") as handle:
        np.lib.format.write_array(handle, np.ascontiguousarray(array), allow_pickle=False)


class CheckpointRepository:
    """Reads and writes checkpoint containers."""

    def save(self, path: Union[str, Path], checkpoint: Checkpoint) -> Path:
        """
        Write a checkpoint.

        Args:
            path: Destination (conventionally ``*.npz``)
            checkpoint: Checkpoint to store

        Returns:
            Path: The written path
        """
        destination = Path(path)
        destination.parent.mkdir(parents=True, exist_ok=True)
        header = json.dumps(checkpoint.header(), sort_keys=True, ensure_ascii=False).encode("utf-8")
        try:
            with zipfile.ZipFile(destination, "w") as archive:
                _write_entry(archive, HEADER_ENTRY, np.frombuffer(header, dtype=np.uint8))
                for name in sorted(checkpoint.params.arrays):
                    array = np.asarray(checkpoint.params.arrays[name], dtype="<f8")
                    _write_entry(archive, PARAM_PREFIX + name, array)
        except OSError as e:
            logger.error(f"Failed to write checkpoint {destination}: {e}")
            raise
        logger.info(f"Wrote checkpoint with {len(checkpoint.params)} tensors to {destination}")
        return destination

    def load(self, path: Union[str, Path]) -> Checkpoint:
        """
        Read a checkpoint.

        Raises:
            CheckpointError: On a missing header, unknown format or bad tensor
        """
        try:
            with np.load(path, allow_pickle=False) as archive:
                if HEADER_ENTRY not in archive.files:
                    raise CheckpointError(f"{path}: no {HEADER_ENTRY} entry")
                header = json.loads(archive[HEADER_ENTRY].tobytes().decode("utf-8"))
                arrays = {
                    name[len(PARAM_PREFIX):]: np.array(archive[name], dtype=np.float64)
                    for name in archive.files
                    if name.startswith(PARAM_PREFIX)
                }
        except (OSError, ValueError, zipfile.BadZipFile) as e:
            if isinstance(e, CheckpointError):
                raise
            raise CheckpointError(f"{path}: unreadable checkpoint ({e})")

        if not isinstance(header, dict):
            raise CheckpointError(f"{path}: {HEADER_ENTRY} is not a JSON object")
        if header.get("format") != CHECKPOINT_FORMAT:
            raise CheckpointError(f"{path}: unsupported checkpoint format {header.get('format')!r}")
        missing = [key for key in REQUIRED_HEADER_KEYS if key not in header]
        if missing:
            raise CheckpointError(f"{path}: header lacks {', '.join(missing)}")
        try:
            config = ModelConfig.model_validate(header["model"])
            params = ModelParams(arrays, header["label_vocab"], header["sense_vocab"])
            lexicons = {
                language: SenseLexicon.model_validate(payload) for language, payload in header["lexicons"].items()
            }
            training = TrainConfig.model_validate(header["training"]) if header.get("training") else None
        except (AttributeError, KeyError, TypeError, ValueError) as e:
            logger.error(f"Invalid checkpoint header in {path}: {e}")
            raise CheckpointError(f"{path}: invalid checkpoint header ({' '.join(str(e).split())})")
        logger.info(f"Loaded {config.variant.value} checkpoint with {len(arrays)} tensors from {path}")
        return Checkpoint(
            config=config,
            params=params,
            lexicons=lexicons,
            embedding_files=header.get("embedding_files", {}),
            training=training,
            metadata=header.get("metadata", {}),
        )
