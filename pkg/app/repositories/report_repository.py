"""
Report Repository Module

File access for evaluation reports (JSON), CSV tables, training-data
statistics and the run manifests written next to every artifact.
"""

import hashlib
import json
import logging
from pathlib import Path
from typing import Dict, Iterable, Union

import pandas as pd

from app.exceptions import SRLToolkitError
from app.models.pydantic_models import EvalReport, RunManifest

logger = logging.getLogger(__name__)

MANIFEST_SUFFIX = ".manifest.json"
_DIGEST_CHUNK = 1 << 20


def file_digest(path: Union[str, Path]) -> str:
    """SHA-256 hex digest of a file's bytes."""
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(_DIGEST_CHUNK), b""):
            digest.update(chunk)
    return digest.hexdigest()


def manifest_path(artifact: Union[str, Path]) -> Path:
    artifact = Path(artifact)
    return artifact.with_name(artifact.name + MANIFEST_SUFFIX)


class ReportRepository:
    """Reads and writes reports, tables and manifests."""

    encoding = "utf-8"

    def _prepare(self, path: Union[str, Path]) -> Path:
        destination = Path(path)
        destination.parent.mkdir(parents=True, exist_ok=True)
        return destination

    def save_report(self, path: Union[str, Path], report: EvalReport) -> Path:
        destination = self._prepare(path)
        destination.write_text(report.model_dump_json(indent=2) + "\n", encoding=self.encoding)
        logger.info(f"Wrote {report.language} report to {destination}")
        return destination

    def load_report(self, path: Union[str, Path]) -> EvalReport:
        """
        Read a report written by ``save_report``.

        Raises:
            SRLToolkitError: If the file is not a valid report
        """
        try:
            return EvalReport.model_validate_json(Path(path).read_text(encoding=self.encoding))
        except ValueError as e:
            logger.error(f"Invalid report file {path}: {e}")
            raise SRLToolkitError(f"{path}: not a valid evaluation report")

    def save_table(self, path: Union[str, Path], frame: pd.DataFrame, index: bool = False) -> Path:
        destination = self._prepare(path)
        frame.to_csv(destination, index=index, float_format="%.4f", lineterminator="\n")
        logger.info(f"Wrote {len(frame)} rows to {destination}")
        return destination

    def load_train_predicates(self, paths: Iterable[Union[str, Path]]) -> Dict[str, int]:
        """
        Training predicate counts per language from ``stats`` CSV files.

        Raises:
            SRLToolkitError: If a file lacks the language or predicates column
        """
        counts: Dict[str, int] = {}
        for path in paths:
            frame = pd.read_csv(path, dtype={"language": str})
            if "language" not in frame.columns or "predicates" not in frame.columns:
                raise SRLToolkitError(f"{path}: expected 'language' and 'predicates' columns")
            for language, predicates in zip(frame["language"], frame["predicates"]):
                counts[language] = int(predicates)
        return counts

    def save_manifest(self, artifact: Union[str, Path], manifest: RunManifest) -> Path:
        """Write ``<artifact>.manifest.json``."""
        destination = self._prepare(manifest_path(artifact))
        payload = manifest.model_dump(mode="json")
        destination.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding=self.encoding)
        logger.debug(f"Wrote manifest {destination}")
        return destination

    def load_manifest(self, artifact: Union[str, Path]) -> RunManifest:
        return RunManifest.model_validate_json(manifest_path(artifact).read_text(encoding=self.encoding))
