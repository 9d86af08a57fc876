"""Transparent-object segmentation from single-shot 4D light-field images."""

from .energy import (
    BoundaryTerm,
    DirectedWeights,
    EnergyParams,
    Labeling,
    SegGraph,
    boundary_term,
    boundary_weights,
    build_graph,
    energy_of,
    regional_terms,
    scale_linearity,
    sigmoid,
)
from .features import (
    DIRECTIONS,
    LFD,
    ConsistencyVolume,
    HyperplaneFit,
    OcclusionDetector,
    OcclusionResponse,
    build_lfd,
    consistency_volume,
    directional_detectors,
    fb_error,
    fit_hyperplane,
    linearity_map,
    make_detectors,
    occlusion_response,
)
from .flow import (
    FlowField,
    FlowPair,
    FlowParams,
    TextureMask,
    compute_flow,
    load_flo,
    sample_flow,
    save_flo,
    texture_mask,
)
from .lightfield import (
    LightField,
    Mask,
    ScalarMap,
    Viewpoint,
    load_lightfield,
    read_mask,
    write_mask,
    write_scalar_map,
)
from .metrics import PRF, compare_report, prf, threshold_baseline
from .mincut import FlowNetwork, max_flow, solve_segmentation
from .pipeline import (
    FeatureBundle,
    PipelineConfig,
    SegmentResult,
    compute_features,
    features_dump,
    segment,
    segment_lightfield,
    subset_views,
)
from .synth import (
    Disk,
    Occluder,
    Rect,
    RefractiveRegion,
    SceneSpec,
    SynthScene,
    emit,
    example_scene_spec,
    generate,
    parse_scene_spec,
)

__version__ = "0.1.0"
