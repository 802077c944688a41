"""Shielded POMCP planning with almost-sure reach-avoid winning regions."""

from ._core import (
    FactoredRegion,
    GraphCapExceeded,
    Model,
    ModelError,
    RegionTimeout,
    SafetyViolation,
    WinningRegion,
    factored_region,
    generate,
    layout_preview,
    load_model,
    parse_model,
    run_episode,
    shield_modes,
    winning_region,
)

__all__ = [
    "FactoredRegion",
    "GraphCapExceeded",
    "Model",
    "ModelError",
    "RegionTimeout",
    "SafetyViolation",
    "WinningRegion",
    "factored_region",
    "generate",
    "layout_preview",
    "load_model",
    "parse_model",
    "run_episode",
    "shield_modes",
    "winning_region",
]
