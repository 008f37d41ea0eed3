"""
Repository Layer Package

This package contains the file-format access classes. Repositories keep
encodings, layouts and containers out of the service layer.
"""

from .checkpoint_repository import Checkpoint, CheckpointRepository
from .conll_repository import ConllRepository
from .embedding_repository import EmbeddingRepository
from .lexicon_repository import LexiconRepository
from .report_repository import ReportRepository

__all__ = [
    "Checkpoint",
    "CheckpointRepository",
    "ConllRepository",
    "EmbeddingRepository",
    "LexiconRepository",
    "ReportRepository",
]
