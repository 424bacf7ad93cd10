"""annofuse: fuse multi-annotator bounding-box labels into consensus labels.

The toolkit covers the full annotation-quality loop: simulate noisy
multi-expert annotation sets, fuse them into consensus boxes whose
confidence reflects annotator agreement, export those confidences as
per-box training weights for a re-weighted detection loss, and measure
annotation quality with interpolated mAP.
"""

from .canonical import canonical_dumps, canonical_float
from .dataset_io import (
    Category,
    DatasetError,
    DatasetFile,
    DatasetKindError,
    DatasetParseError,
    DatasetValidationError,
    DataWarning,
    convert_external,
    dumps,
    loads,
    parse,
    read_weights,
    weights_dumps,
    write,
    write_weights,
)
from .fusion import (
    CONFIDENCE_MODES,
    Cluster,
    FusionConfig,
    WeightedBoxFusion,
    fuse_image,
    fuse_scenes,
)
from .geometry import Box, area, iou, weighted_average
from .loss import (
    LossInputs,
    WeightEntry,
    WeightExport,
    base_loss,
    cross_entropy,
    earl_loss,
    export_weights,
    objectness_indicator,
    smooth_l1,
)
from .metrics import (
    EvalReport,
    MatchResult,
    ThresholdReport,
    average_precision,
    evaluate,
    match_greedy,
    threshold_range,
)
from .records import (
    RECORD_KINDS,
    AnnotatedBox,
    Annotator,
    FusedBox,
    GroundTruthBox,
    SceneRecord,
    ScoredBox,
    as_predictions,
)
from .render import render_scene
from .simulation import (
    NO_OBJ,
    SimConfig,
    SimulatedDataset,
    TransitionMatrix,
    build_transition_matrix,
    category_ids,
    expert_ids,
    generate_dataset,
    jitter_box,
    simulate_expert,
)

__version__ = "0.1.0"

__all__ = [
    "AnnotatedBox",
    "Annotator",
    "Box",
    "CONFIDENCE_MODES",
    "Category",
    "Cluster",
    "DataWarning",
    "DatasetError",
    "DatasetFile",
    "DatasetKindError",
    "DatasetParseError",
    "DatasetValidationError",
    "EvalReport",
    "FusedBox",
    "FusionConfig",
    "GroundTruthBox",
    "LossInputs",
    "MatchResult",
    "NO_OBJ",
    "RECORD_KINDS",
    "SceneRecord",
    "ScoredBox",
    "SimConfig",
    "SimulatedDataset",
    "ThresholdReport",
    "TransitionMatrix",
    "WeightEntry",
    "WeightExport",
    "WeightedBoxFusion",
    "area",
    "as_predictions",
    "average_precision",
    "base_loss",
    "build_transition_matrix",
    "canonical_dumps",
    "canonical_float",
    "category_ids",
    "convert_external",
    "cross_entropy",
    "dumps",
    "earl_loss",
    "evaluate",
    "expert_ids",
    "export_weights",
    "fuse_image",
    "fuse_scenes",
    "generate_dataset",
    "iou",
    "jitter_box",
    "loads",
    "match_greedy",
    "objectness_indicator",
    "parse",
    "read_weights",
    "render_scene",
    "simulate_expert",
    "smooth_l1",
    "threshold_range",
    "weighted_average",
    "weights_dumps",
    "write",
    "write_weights",
]
