"""Learned predictor-corrector schedules for homotopy solvers."""

from ._npc import (
    ConfigError,
    NpcError,
    VersionError,
    bench,
    default_instance,
    derive_seed,
    metric_names,
    policy_info,
    run_cli,
)

__all__ = [
    "ConfigError",
    "NpcError",
    "VersionError",
    "bench",
    "default_instance",
    "derive_seed",
    "metric_names",
    "policy_info",
    "run_cli",
]
