"""RF-assisted building-map toolkit.

Simulates map corruption and per-pair RF observations for synthetic urban
environments, refines corrupted maps by fusing them with RF-derived LOS/NLOS
labels, and evaluates predictions with mask metrics (IoU, Dice, Hausdorff,
Chamfer) including grouped test-set reports.
"""

__version__ = "0.1.0"

from .corruption import CorruptionParams, CorruptionRecord, TestGroupLabel, severity_params
from .environment import Environment, GeneratorConfig, generate_environment
from .geometry import GRID_SIZE, BinaryMap, Polygon, convex_hull, rasterize, segment_pixels
from .metrics import chamfer, dice_loss, hausdorff, iou
from .refine import RefinementConfig, analyze_violations, refine_map
from .rfsim import NoiseProfile, PathLossTable, PathRecord, RadioFeature

__all__ = [
    "GRID_SIZE",
    "BinaryMap",
    "CorruptionParams",
    "CorruptionRecord",
    "Environment",
    "GeneratorConfig",
    "NoiseProfile",
    "PathLossTable",
    "PathRecord",
    "Polygon",
    "RadioFeature",
    "RefinementConfig",
    "TestGroupLabel",
    "analyze_violations",
    "chamfer",
    "convex_hull",
    "dice_loss",
    "generate_environment",
    "hausdorff",
    "iou",
    "rasterize",
    "refine_map",
    "segment_pixels",
    "severity_params",
]
