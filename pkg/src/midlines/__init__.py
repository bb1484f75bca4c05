"""Middle-line representation of oriented boxes.

The package turns rotated rectangles into ordered pairs of middle lines and
back, rasterizes annotations into per-branch training target maps, decodes
such maps into detections with no top-K cap, and scores the results with a
clipping-based rotated IoU. The `midlines` console script drives the same
pieces from the command line.
"""

from midlines.decoder import Detection, decode, reconstruct_at_cell
from midlines.encoder import TargetMaps, drift_radius, encode_image
from midlines.errors import (
    AllLinesMalformed,
    DegenerateBox,
    EmptyFile,
    KinkProximity,
    MidlinesError,
    NonBinaryGroundTruth,
    NonConvexInput,
    OutOfBounds,
    ShapeMismatch,
    UnknownClass,
)
from midlines.evaluation import EvalReport, evaluate, rotated_iou
from midlines.geometry import (
    BranchId,
    MidlinePair,
    OrientedBox,
    Point2,
    Segment,
    box_to_midlines,
    intersection_point,
    midlines_to_box,
    rectangle,
)
from midlines.gradcheck import run_gradchecks
from midlines.ingest import (
    AnnotatedImage,
    TileSpec,
    load_ground_truth,
    parse_dota,
    parse_icdar,
    tile_image,
)
from midlines.losses import LossValue, LossWeights, total_loss

__version__ = "0.1.0"

__all__ = [
    "AllLinesMalformed",
    "AnnotatedImage",
    "BranchId",
    "DegenerateBox",
    "Detection",
    "EmptyFile",
    "EvalReport",
    "KinkProximity",
    "LossValue",
    "LossWeights",
    "MidlinePair",
    "MidlinesError",
    "NonBinaryGroundTruth",
    "NonConvexInput",
    "OrientedBox",
    "OutOfBounds",
    "Point2",
    "Segment",
    "ShapeMismatch",
    "TargetMaps",
    "TileSpec",
    "UnknownClass",
    "box_to_midlines",
    "decode",
    "drift_radius",
    "encode_image",
    "evaluate",
    "intersection_point",
    "load_ground_truth",
    "midlines_to_box",
    "parse_dota",
    "parse_icdar",
    "reconstruct_at_cell",
    "rectangle",
    "rotated_iou",
    "run_gradchecks",
    "tile_image",
    "total_loss",
    "__version__",
]
