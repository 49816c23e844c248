from dataclasses import dataclass

from pydantic import BaseModel, ConfigDict, Field

from app.typings import LeakageKind


class LeakageModel(BaseModel):
    """Labeling of traces by the first-round S-box output of one state byte."""

    model_config = ConfigDict(frozen=True)

    kind: LeakageKind = Field("LSB", description="LSB: 2 classes, HW: 9 classes")
    byte_index: int = Field(2, ge=0, le=15, description="Zero-based index of the attacked byte")

    @property
    def n_classes(self) -> int:
        return 2 if self.kind == "LSB" else 9


@dataclass(frozen=True)
class AcquisitionRecord:
    plaintext: bytes
    key: bytes
    label: int
