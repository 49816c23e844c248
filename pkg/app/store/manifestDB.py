"""
Simple SQLite storage for the artifact manifest of an output directory.
"""

from dataclasses import asdict
import json
from pathlib import Path
from sqlite3 import Row
from typing import Any

from app.store.base import DB, DBTable
from app.store.models import Artifact
from app.typings import ArtifactStatus

MANIFEST_DATABASE = "manifest.db"
MANIFEST_EXPORT = "manifest.json"


class ManifestDB(DBTable[Artifact]):
    """A lightweight SQLite3 Table handler for artifacts."""

    def __init__(self, output_dir: str | Path):
        schema = """
            path TEXT PRIMARY KEY,
            stage TEXT NOT NULL,
            seed TEXT NOT NULL,
            sha256 TEXT NOT NULL,
            status TEXT NOT NULL,
            created TEXT NOT NULL DEFAULT CURRENT_TIMESTAMP
        """
        self.root = Path(output_dir)
        db = DB(database=str(self.root / MANIFEST_DATABASE))
        super().__init__(db, "ARTIFACTS", schema, key_column="path")

    def row_factory(self, artifact: Artifact) -> dict[str, Any]:
        """Convert an artifact to a Table's row.

        Args:
            artifact (Artifact): Artifact to convert to a row.

        Returns:
            dict[str, Any]: Created row.
        """
        return artifact.serialize()

    def obj_factory(self, row: Row) -> Artifact:
        """Convert a Table's row to an `Artifact`.

        Args:
            row (Row): Table's row.

        Returns:
            Artifact: Artifact created from the row.
        """
        return Artifact(**self.row_to_dict(row))

    def record(self, path: Path, stage: str, seed: int, status: ArtifactStatus = "complete") -> Artifact:
        """Hash a file written by a stage and register it."""
        artifact = Artifact.from_file(self.root, path, stage, seed, status)
        self.insert(artifact)
        return artifact

    def get_by_stage(self, stage: str) -> list[Artifact]:
        return self.select("stage = ?", (stage,))

    def mark_stage(self, stage: str, status: ArtifactStatus) -> None:
        """Flag every artifact of a stage, e.g. as `partial` after a failure."""
        self.update({"status": status}, "stage = ?", (stage,))

    def export(self) -> Path:
        """Write the manifest as sorted JSON (no timestamps), for comparison across runs."""
        path = self.root / MANIFEST_EXPORT
        artifacts = [asdict(artifact) for artifact in self.select()]
        path.write_text(json.dumps(artifacts, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path
