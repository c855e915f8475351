"""tbes: image segmentation driven by description length.

Segments an image by greedily merging adjacent regions whenever the merge
shortens the total lossy coding length of the image: Gaussian texture bits
per region plus chain-coded boundary bits. Ships the segmentation estimator,
the evaluation metrics (PRI, VOI, boundary F-measure), and a regressor that
picks the distortion level per image from contrast features.
"""

from .chain import (
    BSD_CHAIN_CODE_PRIOR,
    ChainCodePrior,
    ChainCodeSequence,
    difference_codes,
    entropy_boundary_length,
    estimate_prior,
    freeman_length,
    region_boundary_length,
    replay_codes,
    trace_boundaries,
    trace_mask_contours,
)
from .coding import CodingParams, coding_length_full, region_coding_length
from .distortion import (
    DiscrepancyFit,
    DistortionRegressor,
    contrast_features,
    fit_quadratic,
    predict_epsilon,
    sample_discrepancy,
    train_regressor,
)
from .features import (
    FeatureField,
    PcaBasis,
    RegionStats,
    extract_windows,
    fit_pca,
    interior_pixels,
    project,
    region_stats,
)
from .image import RasterImage, color_scale_factor, convert_color, load_image, to_rgb
from .labelmap import grid_superpixels, load_label_map, save_label_map
from .metrics import MetricResult, boundary_map, gfm, pri, voi
from .segmentation import (
    RegionAdjacencyGraph,
    SegmentationReport,
    TbesSegmentation,
    tbes_segment,
    total_coding_length,
)

__version__ = "0.1.0"

__all__ = [
    "BSD_CHAIN_CODE_PRIOR",
    "ChainCodePrior",
    "ChainCodeSequence",
    "CodingParams",
    "DiscrepancyFit",
    "DistortionRegressor",
    "FeatureField",
    "MetricResult",
    "PcaBasis",
    "RasterImage",
    "RegionAdjacencyGraph",
    "RegionStats",
    "SegmentationReport",
    "TbesSegmentation",
    "boundary_map",
    "color_scale_factor",
    "coding_length_full",
    "contrast_features",
    "convert_color",
    "difference_codes",
    "entropy_boundary_length",
    "estimate_prior",
    "extract_windows",
    "fit_pca",
    "fit_quadratic",
    "freeman_length",
    "gfm",
    "grid_superpixels",
    "interior_pixels",
    "load_image",
    "load_label_map",
    "predict_epsilon",
    "pri",
    "project",
    "region_boundary_length",
    "region_coding_length",
    "region_stats",
    "replay_codes",
    "sample_discrepancy",
    "save_label_map",
    "tbes_segment",
    "to_rgb",
    "total_coding_length",
    "trace_boundaries",
    "trace_mask_contours",
    "train_regressor",
    "voi",
]
