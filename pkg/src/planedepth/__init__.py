"""planedepth: monocular video depth estimation.

Pipeline: spatio-temporal segmentation -> region features -> random-forest
depth regression -> occlusion-boundary detection -> occlusion-gated
piecewise-planar MRF refinement -> temporal smoothing.
"""

from .errors import (
    BehindCameraError,
    DegenerateGeometryError,
    DimensionMismatchError,
    EmptyInputError,
    FormatError,
    MissingPlaneError,
    NotTrainedError,
    PlaneDepthError,
)
from .evaluate import EvalReport, crossval, evaluate
from .features import (
    FEATURE_BLOCKS,
    FEATURE_LENGTH,
    GC_CLASSES,
    assemble_features,
    feature_names,
)
from .flow import dense_flow, flow_to
from .forest import ForestModel, ForestParams, load_forest, oob_importance, predict, save_forest, train
from .geometry import (
    D_MAX,
    CameraIntrinsics,
    DepthMap,
    fit_plane,
    pixel_ray,
    plane_depth,
    ray_grid,
    render_depth,
)
from .lidar import Extrinsics, LidarScan, project_lidar, segment_ground_truth
from .mrf import (
    MrfProblem,
    MrfSolution,
    PairTerm,
    RegionSamples,
    connectivity_energy,
    coplanarity_energy,
    data_energy,
    fractional_error,
    solve,
    temporal_depth_smooth,
    total_energy,
    total_energy_grad,
)
from .occlusion import Edgelet, EdgeletGraph, build_graph, extract_edgelets
from .pipeline import PipelineConfig, infer_video, solve_video
from .segmentation import RegionIndex, segment_video
from .synth import Scene, SceneSpec, generate_scene, layered_scene_spec, outdoor_scene_spec

__version__ = "0.1.0"

__all__ = [
    "BehindCameraError",
    "CameraIntrinsics",
    "D_MAX",
    "DegenerateGeometryError",
    "DepthMap",
    "DimensionMismatchError",
    "Edgelet",
    "EdgeletGraph",
    "EmptyInputError",
    "EvalReport",
    "Extrinsics",
    "FEATURE_BLOCKS",
    "FEATURE_LENGTH",
    "ForestModel",
    "ForestParams",
    "FormatError",
    "GC_CLASSES",
    "LidarScan",
    "MissingPlaneError",
    "MrfProblem",
    "MrfSolution",
    "NotTrainedError",
    "PairTerm",
    "PipelineConfig",
    "PlaneDepthError",
    "RegionIndex",
    "RegionSamples",
    "Scene",
    "SceneSpec",
    "assemble_features",
    "build_graph",
    "connectivity_energy",
    "coplanarity_energy",
    "crossval",
    "data_energy",
    "dense_flow",
    "evaluate",
    "extract_edgelets",
    "feature_names",
    "fit_plane",
    "flow_to",
    "fractional_error",
    "generate_scene",
    "infer_video",
    "layered_scene_spec",
    "load_forest",
    "oob_importance",
    "outdoor_scene_spec",
    "pixel_ray",
    "plane_depth",
    "predict",
    "project_lidar",
    "ray_grid",
    "render_depth",
    "save_forest",
    "segment_ground_truth",
    "segment_video",
    "solve",
    "solve_video",
    "temporal_depth_smooth",
    "total_energy",
    "total_energy_grad",
    "train",
    "__version__",
]
