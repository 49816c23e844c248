"""
Typed view of the flat settings used by the pipeline commands.
"""

from pathlib import Path
from typing import Optional

from pydantic import BaseModel, Field, model_validator

from app.adversarial.models import Balance, ConfidenceTarget, DeConfig, Termination
from app.aes.models import LeakageModel
from app.classifiers.models import CnnSpec, MlpSpec
from app.countermeasure.models import InsertionPolicy
from app.settings import Settings
from app.typings import AmplitudeCriterion
from app.utils import derive_seed, get_settings_starting_with
from app.vm.models import DeviceConfig


class CampaignSizes(BaseModel):
    profiling_count: int = Field(10_000, ge=2)
    attack_count: int = Field(2_000, ge=1)
    length_cap: int = Field(840, ge=1)
    fixed_key: str = "2b7e151628aed2a6abf7158809cf4f3c"


class MiningConfig(BaseModel):
    trace_count: int = Field(500, ge=1)
    balance_trace_count: int = Field(20, ge=0)
    amplitude_min: float = -5.2
    amplitude_max: float = 4.8
    amplitude_bins: int = Field(160, ge=2)
    peak_count: int = Field(3, ge=1)
    peak_radius_cycles: int = Field(2, ge=0)

    @model_validator(mode="after")
    def check_amplitudes(self) -> "MiningConfig":
        if self.amplitude_min >= self.amplitude_max:
            raise ValueError("mining_amplitude_min must be below mining_amplitude_max")
        return self

    @property
    def amplitude_bounds(self) -> tuple[float, float]:
        return self.amplitude_min, self.amplitude_max


class CountermeasureConfig(BaseModel):
    point_count: int = Field(3, ge=1)
    tolerance_cycles: int = Field(2, ge=0)
    window_radius: int = Field(6, ge=0)
    profile_repetitions: int = Field(50, ge=1)
    interval_margin: float = Field(0.25, ge=0)
    amplitude_criterion: AmplitudeCriterion = "delta"
    scratch_register: int = Field(24, ge=0, le=31)
    omega_domain: list[int] = Field(default_factory=lambda: [0, 1, 2])
    random_noise_slots: int = Field(3, ge=1)


class EvaluationConfig(BaseModel):
    repetitions: int = Field(10, ge=1)
    profiling_count: int = Field(8_000, ge=1)
    max_traces: int = Field(1_000, ge=1)
    include_hw: bool = False
    overhead_runs: int = Field(1_000, ge=1)
    naive_trace_count: int = Field(2_000, ge=2)
    naive_profiling_count: int = Field(1_500, ge=1)


class PipelineConfig(BaseModel):
    """Everything a pipeline command needs, derived from the settings and the command-line flags."""

    output_dir: Path
    master_seed: int
    threads: int = Field(1, ge=1)
    device: DeviceConfig
    leakage: LeakageModel
    campaign: CampaignSizes
    mlp: MlpSpec
    cnn: CnnSpec
    template_regularization: float = Field(0.1, ge=0, le=1)
    template_ridge: float = Field(1e-6, ge=0)
    de: DeConfig
    termination: Termination
    mining: MiningConfig
    countermeasure: CountermeasureConfig
    evaluation: EvaluationConfig

    @classmethod
    def from_settings(cls, source: Settings) -> "PipelineConfig":
        def group(prefix: str) -> dict:
            return get_settings_starting_with(prefix, remove_prefix=True, source=source)

        cnn = group("cnn_")
        termination = group("termination_")
        if termination["kind"] == "balance":
            termination_config: ConfidenceTarget | Balance = Balance(sigma=termination["sigma"])
        else:
            termination_config = ConfidenceTarget(target_class=termination["target_class"], tau=termination["tau"])
        countermeasure = group("countermeasure_")
        return cls(
            output_dir=source.output_path,
            master_seed=source.master_seed,
            threads=source.threads,
            device=DeviceConfig(**group("device_")),
            leakage=LeakageModel(**group("leakage_")),
            campaign=CampaignSizes(**group("campaign_")),
            mlp=MlpSpec(**group("mlp_")),
            cnn=CnnSpec.uniform(
                cnn.pop("filters"), cnn.pop("kernel_length"), cnn.pop("pool_length"), **cnn
            ),
            template_regularization=source.template_regularization,
            template_ridge=source.template_ridge,
            de=DeConfig(**group("de_")),
            termination=termination_config,
            mining=MiningConfig(**group("mining_")),
            countermeasure=CountermeasureConfig(**countermeasure),
            evaluation=EvaluationConfig(**group("evaluation_")),
        )

    def seed(self, stage: str, index: int = 0) -> int:
        return derive_seed(self.master_seed, stage, index)

    def leakage_models(self) -> list[LeakageModel]:
        """Leakage models the campaigns are evaluated under: the configured one, plus HW when enabled."""
        models = [self.leakage]
        if self.evaluation.include_hw and self.leakage.kind != "HW":
            models.append(LeakageModel(kind="HW", byte_index=self.leakage.byte_index))
        return models

    def mlp_spec(self, leakage: LeakageModel, seed: int) -> MlpSpec:
        return self.mlp.model_copy(update={"n_classes": leakage.n_classes, "seed": seed})

    def cnn_spec(self, leakage: LeakageModel, seed: int, input_length: Optional[int] = None) -> CnnSpec:
        return CnnSpec.model_validate(
            self.cnn.model_dump() | {"n_classes": leakage.n_classes, "seed": seed, "input_length": input_length}
        )

    def insertion_policy(self) -> InsertionPolicy:
        return InsertionPolicy(omega_domain=self.countermeasure.omega_domain, seed=self.seed("insertion"))
