"""Technique registry and the LoopScheduler driver."""

from __future__ import annotations

from ..errors import UnknownTechnique
from .base import AdaptiveState, LoopScheduler, SchedulerState, awf_update_weights
from .techniques import (
    AF,
    AWF,
    AWFB,
    AWFC,
    AWFD,
    AWFE,
    BOLD,
    FAC,
    FAC2,
    FSC,
    GSS,
    MAF,
    MFAC,
    SS,
    TAP,
    TSS,
    WF2,
    Static,
    Technique,
)

_CLASSES: dict[str, type[Technique]] = {
    cls.name: cls
    for cls in (
        Static, SS, GSS, TSS, FSC, FAC, MFAC, FAC2, TAP, WF2, BOLD,
        AWF, AWFB, AWFC, AWFD, AWFE, AF, MAF,
    )
}

# Canonical listing order (also the order the CLI expands "all" into).
TECHNIQUE_NAMES: tuple[str, ...] = (
    "static", "ss", "gss", "tss", "fsc", "fac", "mfac", "fac2", "tap",
    "wf2", "bold", "awf", "awf-b", "awf-c", "awf-d", "awf-e", "af", "maf",
)

assert set(TECHNIQUE_NAMES) == set(_CLASSES)

_SINGLETONS: dict[str, Technique] = {}


def normalize_technique(name: str) -> str:
    """Canonicalize a technique name (case-insensitive, _ and - alike)."""
    if not isinstance(name, str):
        raise UnknownTechnique(repr(name), TECHNIQUE_NAMES)
    norm = name.strip().lower().replace("_", "-")
    if norm not in _CLASSES:
        raise UnknownTechnique(name, TECHNIQUE_NAMES)
    return norm


def get_technique(name: str, **options) -> Technique:
    """Look up a technique by name.

    Keyword options are forwarded to the constructor (e.g. tap's alpha);
    without options a shared stateless instance is returned.
    """
    norm = normalize_technique(name)
    if options:
        return _CLASSES[norm](**options)
    inst = _SINGLETONS.get(norm)
    if inst is None:
        inst = _SINGLETONS[norm] = _CLASSES[norm]()
    return inst


__all__ = [
    "AdaptiveState",
    "LoopScheduler",
    "SchedulerState",
    "TECHNIQUE_NAMES",
    "Technique",
    "awf_update_weights",
    "get_technique",
    "normalize_technique",
]
