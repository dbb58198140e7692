"""Fourier guide masks, training-free nuclear instance segmentation, guide-based
instance filtering, loss kernels and instance-level metrics."""

__version__ = "0.1.0"

from .coarse import (
    CoarseSegParams,
    binarize,
    coarse_segment,
    connected_components,
    morph_open,
    remove_small,
    trace_contours,
)
from .dataset import CropConfig, WeakenConfig, crop_patches, weaken_annotations
from .fourier import (
    GuideMask,
    SpectralFilterSpec,
    apply_notch,
    fft2_centered,
    fuse_with_gt,
    generate_soft_guide,
    harden,
    ifft2_magnitude,
    normalize_minmax,
)
from .guide_filter import FilterDecision, filter_instances, instance_guide_score
from .kernels import (
    EmbeddingSet,
    GilcConfig,
    bce_grad,
    bce_loss,
    check_gradient,
    garu,
    gilc_sample,
    info_nce_grad,
    info_nce_loss,
    total_loss,
)
from .metrics import MetricReport, PQStats, aji, dq_sq_pq, evaluate, evaluate_batch, pq_match
from .raster import (
    AnnotationSet,
    Contour,
    Instance,
    annotations_to_label_map,
    mask_iou,
    rasterize_contour,
    resize_bilinear,
    rgb_to_gray,
)
