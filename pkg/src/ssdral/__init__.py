"""Superpoint-based active learning for point cloud semantic segmentation."""

from .cloud import (
    PointCloud,
    Prediction,
    SuperpointPartition,
    load_point_cloud,
    read_cloud_file,
    save_point_cloud,
    validate_partition,
)
from .config import RunConfig, load_run_config, load_scene_spec
from .errors import ConfigError, DataError
from .graph import (
    SuperpointGraph,
    aggregate,
    build_graph,
    chamfer_distance,
    edge_weight,
    fps_select,
    location_distance,
    superpoint_feature,
)
from .harness import CycleRecord, run_cycle, run_experiment, seed_labeled_set
from .labeling import (
    AnnotationState,
    ClickLedger,
    dominant_labeling,
    noise_aware_labeling,
    split_subregions,
)
from .learner import KNNLearner, NoisyOracleLearner, make_learner
from .metrics import evaluate
from .partition import (
    VoxelRegionGrowingPartitioner,
    dominant_class,
    generate_superpoints,
    purity,
)
from .scene import SceneSpec, generate_scene
from .scoring import (
    SuperpointScore,
    bvsb_uncertainty,
    class_weights,
    classbal_rank,
    entropy_uncertainty,
    least_confidence,
    random_select,
    region_margin_uncertainty,
    region_mean_uncertainty,
)

__version__ = "0.1.0"

__all__ = [
    "AnnotationState",
    "ClickLedger",
    "ConfigError",
    "CycleRecord",
    "DataError",
    "KNNLearner",
    "NoisyOracleLearner",
    "PointCloud",
    "Prediction",
    "RunConfig",
    "SceneSpec",
    "SuperpointGraph",
    "SuperpointPartition",
    "SuperpointScore",
    "VoxelRegionGrowingPartitioner",
    "aggregate",
    "build_graph",
    "bvsb_uncertainty",
    "chamfer_distance",
    "class_weights",
    "classbal_rank",
    "dominant_class",
    "dominant_labeling",
    "edge_weight",
    "entropy_uncertainty",
    "evaluate",
    "fps_select",
    "generate_scene",
    "generate_superpoints",
    "least_confidence",
    "load_point_cloud",
    "load_run_config",
    "load_scene_spec",
    "location_distance",
    "make_learner",
    "noise_aware_labeling",
    "purity",
    "random_select",
    "read_cloud_file",
    "region_margin_uncertainty",
    "region_mean_uncertainty",
    "run_cycle",
    "run_experiment",
    "save_point_cloud",
    "seed_labeled_set",
    "split_subregions",
    "superpoint_feature",
    "validate_partition",
]
