"""Projection-based list detection for generalized spatial modulation MIMO."""

from .core import BACKEND, HAVE_COMPILED, detect_block
from .detectors import (DetectionResult, ListRule, PbldParams, lrzf_single_detect,
                        ml_detect, pbld_detect)
from .gsm import SystemConfig, build_table
from .modulation import make_constellation

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "DetectionResult",
    "HAVE_COMPILED",
    "ListRule",
    "PbldParams",
    "SystemConfig",
    "build_table",
    "detect_block",
    "lrzf_single_detect",
    "make_constellation",
    "ml_detect",
    "pbld_detect",
]
