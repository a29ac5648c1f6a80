"""topopi: persistence-image representations of 2D segmentation maps.

The pipeline: contour extraction, Gaussian kernel density filtration,
cubical persistent homology, weighted persistence-image rasterization, and
the topological dissimilarity/loss and Betti evaluation metrics built on it.
"""

__version__ = "0.1.0"

from .errors import ContractError, EmptyContoursError, FormatError, TopopiError
from .segmap import (
    ContourSet,
    SegMap,
    extract_contours,
    filter_majority_overlap,
    label_components,
    load_segmap,
    write_segmap,
)
from .filtration import (
    FiltrationField,
    field_from_contours,
    kde_density,
    neglog_filtration,
    read_field,
    total_variation,
    write_field,
)
from .persistence import (
    BettiPair,
    PersistenceDiagram,
    betti_numbers,
    compute_persistence,
    diagram_to_csv,
    persistence_dim0_unionfind,
    read_diagram_csv,
    write_diagram_csv,
)
from .pimage import (
    PersistenceImage,
    PersistenceImageConfig,
    compute_diagram,
    linear_transform,
    persistence_image,
    pi_from_diagram,
    rasterize,
    read_pi,
    weight,
    write_pi,
    write_preview_pgm,
    z_normalize,
)
from .loss import (
    EpochResult,
    LossConfig,
    SchedulerState,
    StepRecord,
    cross_entropy_reference,
    epoch_loss,
    joint_loss,
    scheduler_update,
    topological_dissimilarity,
    warmup_step,
    write_schedule_log,
)
from .metrics import (
    ImageMetrics,
    MetricReport,
    aggregate,
    betti_error,
    betti_matching_error,
    evaluate_batch,
    evaluate_pair,
    pixel_metrics,
    report_to_csv,
    report_to_json,
)
from .synth import CORRUPTIONS, synth_pair

__all__ = [
    "__version__",
    "TopopiError", "FormatError", "ContractError", "EmptyContoursError",
    "SegMap", "ContourSet", "load_segmap", "write_segmap",
    "extract_contours", "filter_majority_overlap", "label_components",
    "FiltrationField", "kde_density", "neglog_filtration", "field_from_contours",
    "total_variation", "write_field", "read_field",
    "PersistenceDiagram", "BettiPair", "compute_persistence",
    "persistence_dim0_unionfind", "betti_numbers",
    "diagram_to_csv", "write_diagram_csv", "read_diagram_csv",
    "PersistenceImage", "PersistenceImageConfig", "linear_transform", "weight",
    "rasterize", "z_normalize", "pi_from_diagram", "compute_diagram",
    "persistence_image", "write_pi", "read_pi", "write_preview_pgm",
    "LossConfig", "SchedulerState", "StepRecord", "EpochResult",
    "topological_dissimilarity", "joint_loss", "scheduler_update", "warmup_step",
    "epoch_loss", "cross_entropy_reference", "write_schedule_log",
    "ImageMetrics", "MetricReport", "pixel_metrics", "betti_error",
    "betti_matching_error", "evaluate_pair", "evaluate_batch", "aggregate",
    "report_to_json", "report_to_csv",
    "synth_pair", "CORRUPTIONS",
]
