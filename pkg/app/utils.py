"""
Module: utils
Description: App-wide utility functions
"""

import hashlib
import json
import logging
import logging.config
from typing import Any, Iterable, Optional, TypeVar

import numpy as np
from tqdm import tqdm

import app.settings as app_settings
from app.settings import Settings
from app.typings import LogLevel

logger = logging.getLogger(__name__)

T = TypeVar("T")

# Hamming weight of every byte value
HAMMING_WEIGHT = np.array([bin(x).count("1") for x in range(256)], dtype=np.uint8)


def init_logging(log_level: Optional[LogLevel] = None) -> None:
    config = app_settings.settings.logging_config.copy()
    log_level = log_level or app_settings.settings.log_level
    config["root"]["level"] = log_level.upper()
    for handler in config["handlers"].values():
        handler["level"] = log_level.upper()
    logging.config.dictConfig(config)


def dict2str(data: dict[str, Any], indent: int = 2) -> str:
    """Convert a dictionary to a nicely formatted string."""
    return json.dumps(data, indent=indent, default=str)


def get_settings_starting_with(
    prefix: str, remove_prefix: bool = False, source: Optional[Settings] = None
) -> dict[str, Any]:
    """Collect a group of flat settings.

    Args:
        prefix (str): Group prefix, e.g. `device_`.
        remove_prefix (bool, optional): Strip the prefix from the keys. Defaults to False.
        source (Optional[Settings], optional): Settings to read from. Defaults to the current singleton.

    Returns:
        dict[str, Any]: Settings of the group.
    """
    source = source or app_settings.settings
    return {
        field.removeprefix(prefix if remove_prefix else ""): value
        for field, value in source
        if field.startswith(prefix)
    }


def derive_seed(master_seed: int, stage: str, index: int = 0) -> int:
    """Derive a 64-bit seed from a master seed, a stage name and an index.

    The derivation is `blake2b("<master>:<stage>:<index>")` truncated to 8 bytes (little-endian), so any stage can be
    reproduced in isolation from the master seed alone.
    """
    digest = hashlib.blake2b(f"{master_seed}:{stage}:{index}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def progress(iterable: Iterable[T], **kwargs) -> Iterable[T]:
    """Progress bar that stays quiet unless the lab logs at INFO level or below."""
    disable = logging.getLogger().getEffectiveLevel() > logging.INFO
    return tqdm(iterable, disable=disable, **kwargs)
