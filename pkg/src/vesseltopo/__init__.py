"""Topology-aware toolkit for tubular segmentation masks."""

from .errors import (
    DegenerateInput,
    DimensionMismatch,
    EmptyInput,
    FormatError,
    InsufficientStructure,
    InvalidConfig,
    InvalidParams,
    NonFiniteLoss,
    RejectedTie,
    VesselTopoError,
)
from .maskio import (
    BinaryMask,
    GrayImage,
    as_gray,
    as_mask,
    load_image,
    load_mask,
    save_image,
    save_mask,
    threshold,
)
from .metrics import MetricReport, aggregate_reports, cl_dice, dice, metric_report
from .topology import (
    ComponentLabeling,
    TopologySummary,
    beta0_matching_error,
    beta0_number_error,
    betti_numbers,
    count_loops,
    euler_characteristic,
    label_components,
    skeletonize,
)

__version__ = "0.1.0"

__all__ = [
    "BinaryMask",
    "ComponentLabeling",
    "DegenerateInput",
    "DimensionMismatch",
    "EmptyInput",
    "FormatError",
    "GrayImage",
    "InsufficientStructure",
    "InvalidConfig",
    "InvalidParams",
    "MetricReport",
    "NonFiniteLoss",
    "RejectedTie",
    "TopologySummary",
    "VesselTopoError",
    "aggregate_reports",
    "as_gray",
    "as_mask",
    "beta0_matching_error",
    "beta0_number_error",
    "betti_numbers",
    "cl_dice",
    "count_loops",
    "dice",
    "euler_characteristic",
    "label_components",
    "load_image",
    "load_mask",
    "metric_report",
    "save_image",
    "save_mask",
    "skeletonize",
    "threshold",
]
