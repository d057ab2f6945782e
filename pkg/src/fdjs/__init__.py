"""Full-duplex joint spectrum sensing library and link simulator."""

from fdjs.detector import (
    DetectorParams,
    Hypothesis,
    RocConstants,
    SampleModel,
    empirical_rates,
    p_fa_of_p_md,
    p_fa_of_threshold,
    p_md_of_threshold,
    roc_constants,
    roc_derivative,
    threshold_for_p_md,
)
from fdjs.fusion import (
    JointDetector,
    JointOperatingPoint,
    OptimizeResult,
    OptimizerConfig,
    fuse_availability,
    gradient,
    joint_p_fa,
    joint_p_md,
    objective,
    optimize_eta,
    single_detector_point,
)
from fdjs.numerics import RngStream, q_func, q_inv, std_normal_pdf
from fdjs.scenario import (
    Geometry,
    Propagation,
    PuActivity,
    PuTrajectory,
    RadioConfig,
    alpha_i_of,
    alpha_s_at,
    received_power_dbm,
    sample_trajectory,
)
from fdjs.simulator import (
    HeatmapCell,
    IjsConfig,
    LinkScenario,
    SimConfig,
    SimResult,
    Strategy,
    StrategyPoints,
    derive_operating_points,
    heatmap_pfa,
    ijs_off_probability,
    ijs_predict,
    run_link,
)

__version__ = "0.1.0"

