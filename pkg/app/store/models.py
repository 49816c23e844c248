from dataclasses import asdict, dataclass
import hashlib
from pathlib import Path
from typing import Any

from app.typings import ArtifactStatus


@dataclass
class Artifact:
    """A file written by a pipeline stage."""

    path: str  # relative to the output directory
    stage: str
    seed: int
    sha256: str
    status: ArtifactStatus = "complete"

    def __post_init__(self):
        self.seed = int(self.seed)

    @classmethod
    def from_file(
        cls, root: Path, path: Path, stage: str, seed: int, status: ArtifactStatus = "complete"
    ) -> "Artifact":
        """Describe a file, hashing its content."""
        return cls(
            path=path.relative_to(root).as_posix(),
            stage=stage,
            seed=seed,
            sha256=hashlib.sha256(path.read_bytes()).hexdigest(),
            status=status,
        )

    def serialize(self) -> dict[str, Any]:
        # SQLite integers are signed 64-bit
        return asdict(self) | {"seed": str(self.seed)}
