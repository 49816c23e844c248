"""
Perturbation sets as CSV: trace_id, position, amplitude, success, confidence_target_class, achieved_confidence.
"""

from pathlib import Path

import pandas as pd

from app.adversarial.models import PERTURBATION_COLUMNS, Perturbation, PerturbationSet
from app.errors import ArtifactError


def write_perturbations(path: str | Path, perturbations: PerturbationSet) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    perturbations.to_frame().to_csv(path, index=False, lineterminator="\n", float_format="%.9g")
    return path


def read_perturbations(path: str | Path) -> PerturbationSet:
    """Read a perturbation CSV. The prediction vectors and DE iteration counts are not stored.

    Raises:
        ArtifactError: Missing file or columns.
    """
    path = Path(path)
    if not path.exists():
        raise ArtifactError(f"missing perturbation file {path}")
    frame = pd.read_csv(path, keep_default_na=False, dtype={"confidence_target_class": str})
    missing = set(PERTURBATION_COLUMNS) - set(frame.columns)
    if missing:
        raise ArtifactError(f"{path}: missing columns {sorted(missing)}")
    return PerturbationSet(
        [
            Perturbation(
                trace_id=int(row.trace_id),
                position=int(row.position),
                amplitude=float(row.amplitude),
                success=bool(int(row.success)),
                target_class=int(row.confidence_target_class) if row.confidence_target_class != "" else None,
                achieved_confidence=float(row.achieved_confidence),
            )
            for row in frame.itertuples(index=False)
        ]
    )
