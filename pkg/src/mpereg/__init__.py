"""Rigid point-cloud registration via potential-energy descent.

Coarse global alignment moves the template through the gravitational field
induced by the reference (inverse-offset-distance energy, stride halving on
direction reversal), then trimmed ICP refines on the full-resolution
clouds. A multiview loop merges accepted scans into a growing model, and a
synthetic harness reproduces the noise/outlier robustness studies.
"""

from .cloud import PointCloud, apply_transform
from .cloud_io import load_cloud, load_transform, save_cloud, save_transform
from .config import RunConfig, load_run_config, parse_run_config
from .criterion import (
    CriterionParams,
    LandscapeGrid,
    SweepAxis,
    default_eps2,
    l2_nn_energy,
    landscape_sweep,
    local_minima_1d,
    nfi_energy,
    pair_distance,
    potential_energy,
)
from .errors import CloudFormatError, ConfigError, DegenerateConfigurationError
from .geom import AxisAngle, RigidTransform, compose, inverse, nearest_rotation, rodrigues, skew
from .gravity import (
    ForceField,
    MotionDirections,
    aggregate_directions,
    compute_force_field,
    decompose_force,
    per_point_gravitation,
    torque,
)
from .icp import (
    SpatialIndex,
    TrimmedIcpConfig,
    TrimmedIcpResult,
    build_index,
    rigid_fit,
    trimmed_icp,
)
from .motion import (
    MotionState,
    MotionTrace,
    MpeConfig,
    flags,
    mpe_align,
    mpe_step,
    random_downsample,
)
from .multiview import (
    MultiviewConfig,
    MultiviewReport,
    PairRegistration,
    merge,
    multiview_register,
    overlap_fraction,
    register_pair,
)
from .synth import (
    ErrorMetrics,
    PerturbationSpec,
    SweepResult,
    add_gaussian_noise,
    add_uniform_outliers,
    pipeline_register,
    random_pose,
    rmse,
    rotation_error,
    run_sweep,
    translation_error,
)

__version__ = "0.1.0"
