"""
Module: typings
Description: Application-wide literals
"""

from typing import Literal

# Logging levels
LogLevel = Literal["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]

# Leakage models & acquisition policies
LeakageKind = Literal["LSB", "HW"]
KeyPolicy = Literal["fixed", "random"]
PlaintextPolicy = Literal["random"]

# Attackers & implementations under test
ClassifierKind = Literal["mlp", "cnn", "template"]
Implementation = Literal["unprotected", "random_noise", "protected"]

# Noise selection: profiled delta from the baseline program, or the absolute profiled level
AmplitudeCriterion = Literal["delta", "level"]

# Outcome of a result check
Verdict = Literal["pass", "fail", "n/a"]

# Manifest
ArtifactStatus = Literal["complete", "partial"]
