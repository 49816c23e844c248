"""
Module: settings
Description: Contains configuration settings and environment variables used in the /app directory.
Architecture:
- Defines a Pydantic settings object from pydantic_settings.BaseSettings
- Settings are flat and grouped by prefix (device_, campaign_, mlp_, ...). Typed configurations are built from a group
  with `app.utils.get_settings_starting_with(prefix, remove_prefix=True)`.
- exposes the settings as a singleton instance for import: `settings = Settings()`
- a run configuration file (`--config`) is a flat KEY=VALUE file read like the `.env` file
"""

import os
from pathlib import Path
from typing import Literal, Optional

from pydantic_settings import BaseSettings, DotEnvSettingsSource, SettingsConfigDict

from app.typings import AmplitudeCriterion, LeakageKind, LogLevel


class Settings(BaseSettings):
    model_config = SettingsConfigDict(env_file=".env", env_prefix="APP_", extra="ignore")

    # Run settings
    output_dir: str = "./output"
    master_seed: int = 2024
    threads: int = 1

    # Simulated device
    device_hw_gain: float = 1.0
    device_baseline: float = 0.0
    device_noise_sigma: float = 1.0
    device_samples_per_cycle: int = 3
    device_trigger_low_level: float = -10.0
    device_rng_seed: int = 0
    device_cycle_budget: int = 100_000
    device_uninitialized: Literal["zero", "error"] = "zero"
    device_in_port_value: int = 0xFF  # value written by `in`, whatever the port
    device_store_leakage: bool = False

    # Leakage model
    leakage_kind: LeakageKind = "LSB"
    leakage_byte_index: int = 2  # zero-based, i.e. the 3rd key byte

    # Acquisition campaigns
    campaign_profiling_count: int = 10_000
    campaign_attack_count: int = 2_000
    campaign_length_cap: int = 840  # fixed trace length n, in samples
    campaign_fixed_key: str = "2b7e151628aed2a6abf7158809cf4f3c"

    # Attackers
    mlp_hidden_widths: list[int] = [200, 200, 200, 200, 200]
    mlp_activation: Literal["relu", "tanh", "sigmoid"] = "relu"
    mlp_learning_rate: float = 1e-3
    mlp_batch_size: int = 256
    mlp_epochs: int = 20
    cnn_filters: list[int] = [8, 16, 32, 64]
    cnn_kernel_length: int = 11
    cnn_pool_length: int = 2
    cnn_dense_widths: list[int] = [512]
    cnn_activation: Literal["relu", "tanh", "sigmoid"] = "relu"
    cnn_learning_rate: float = 1e-3
    cnn_batch_size: int = 256
    cnn_epochs: int = 10
    template_regularization: float = 0.1
    template_ridge: float = 1e-6

    # Differential evolution & one-pixel attack
    de_population_size: int = 400
    de_max_iterations: int = 100
    de_differential_weight: float = 0.5
    de_crossover_rate: float = 0.9
    termination_kind: Literal["confidence", "balance"] = "confidence"
    termination_target_class: Optional[int] = None  # None: the runner-up class of each trace
    termination_tau: float = 0.95
    termination_sigma: float = 0.05
    mining_trace_count: int = 500
    mining_balance_trace_count: int = 20
    mining_amplitude_min: float = -5.2
    mining_amplitude_max: float = 4.8
    mining_amplitude_bins: int = 160
    mining_peak_count: int = 3  # correlation peaks the perturbation positions are compared with
    mining_peak_radius_cycles: int = 2

    # Countermeasure synthesis
    countermeasure_point_count: int = 3
    countermeasure_tolerance_cycles: int = 2
    countermeasure_window_radius: int = 6  # samples around each insertion point for constrained mining
    countermeasure_profile_repetitions: int = 50
    countermeasure_interval_margin: float = 0.25
    countermeasure_amplitude_criterion: AmplitudeCriterion = "delta"
    countermeasure_scratch_register: int = 24
    countermeasure_omega_domain: list[int] = [0, 1, 2]
    countermeasure_random_noise_slots: int = 3

    # Evaluation
    evaluation_repetitions: int = 10
    evaluation_profiling_count: int = 8_000
    evaluation_max_traces: int = 1_000
    evaluation_include_hw: bool = False
    evaluation_overhead_runs: int = 1_000
    evaluation_naive_trace_count: int = 2_000
    evaluation_naive_profiling_count: int = 1_500

    @property
    def output_path(self) -> Path:
        """Root directory of the artifacts."""
        return Path(self.output_dir)

    # Logging settings
    log_level: LogLevel = "INFO"
    dependency_log_level: LogLevel = "WARNING"

    @property
    def logging_config(self) -> dict:
        return {
            "version": 1,
            "disable_existing_loggers": False,
            "formatters": {
                "default": {
                    "format": "%(asctime)s [%(levelname)s] %(name)s: %(message)s",
                    "datefmt": "%Y-%m-%d %H:%M",
                }
            },
            "handlers": {
                "console": {
                    "class": "logging.StreamHandler",
                    "formatter": "default",
                    "level": self.log_level,
                },
            },
            "root": {
                "handlers": ["console"],
                "level": self.log_level,
            },
            "loggers": {
                "matplotlib": {
                    "handlers": ["console"],
                    "level": self.dependency_log_level,
                    "propagate": False,
                },
                "PIL": {
                    "handlers": ["console"],
                    "level": self.dependency_log_level,
                    "propagate": False,
                },
            },
        }


def reset_settings(**overrides) -> Settings:
    """Overrides default settings. Designed for use in notebooks and tests."""
    # Clear existing overrides
    keys_to_remove = [key for key in os.environ.keys() if key.startswith("APP_")]
    for key in keys_to_remove:
        del os.environ[key]

    # Set new overrides
    for key, value in overrides.items():
        env_key = f"APP_{key.upper()}"
        os.environ[env_key] = str(value)

    global settings
    settings = Settings()
    return settings


def load_settings(config_file: Optional[str | Path] = None, **overrides) -> Settings:
    """Load the settings from a flat KEY=VALUE run configuration, explicit overrides taking precedence.

    Keys carry the `APP_` prefix, the same way as in the `.env` file (e.g. `APP_DEVICE_NOISE_SIGMA=1.0`).
    Precedence, highest first: overrides, the configuration file, `APP_` environment variables, `.env`.

    Args:
        config_file (Optional[str | Path], optional): Run configuration file. Defaults to None (`.env` only).

    Returns:
        Settings: The new settings singleton.
    """
    global settings
    from_file = {} if config_file is None else DotEnvSettingsSource(Settings, env_file=config_file)()
    settings = Settings(**(from_file | {k: v for k, v in overrides.items() if v is not None}))
    return settings


settings = Settings()
