"""Multilevel communication-avoiding QR and LU on a simulated hierarchical cluster platform."""

from .caqr import QrResult, caqr, ml_apply, ml_caqr
from .calu import LuResult, PivotQuality, calu, ml_calu, pivot_quality
from .cannon import ml_cannon
from .costmodel import (
    ModelReport,
    calls_at_depth,
    default_blocks,
    mlcaqr_cost,
    mlcalu_cost,
    onelevel_cost,
    sweep,
)
from .dense import gepp, householder_qr
from .platform import (
    CostVector,
    LevelSpec,
    PlatformSpec,
    ValidatedPlatform,
    bcast_cost,
    load_platform,
    lower_bounds,
    make_platform,
    p2p_cost,
    validate,
)
from .schedule import BlockSchedule
from .vmachine import CommLedger

__version__ = "0.1.0"

__all__ = [
    "BlockSchedule",
    "CommLedger",
    "CostVector",
    "LevelSpec",
    "LuResult",
    "ModelReport",
    "PivotQuality",
    "PlatformSpec",
    "QrResult",
    "ValidatedPlatform",
    "bcast_cost",
    "calls_at_depth",
    "calu",
    "caqr",
    "default_blocks",
    "gepp",
    "householder_qr",
    "load_platform",
    "lower_bounds",
    "make_platform",
    "ml_apply",
    "ml_calu",
    "ml_cannon",
    "ml_caqr",
    "mlcaqr_cost",
    "mlcalu_cost",
    "onelevel_cost",
    "p2p_cost",
    "pivot_quality",
    "sweep",
    "validate",
]
