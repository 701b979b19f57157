"""Navigation with deformable obstacles: modulated dynamical-system fields,
soft-shell traversal, and benchmark tooling."""

__version__ = "0.1.0"

from .dynamics import LinearDS, LpvDS, evaluate_ds, validate_stability
from .errors import (
    DegeneratePointError,
    DomainError,
    InteriorPointError,
    ScenarioError,
    SingularBasisError,
    SoftnavError,
)
from .geometry import (
    Obstacle,
    RegionLabel,
    classify_region,
    gamma,
    gamma_gradient,
    gamma_soft,
    in_intersection,
    reference_direction,
    stiffness_coefficient,
    tangent_basis,
)
from .modulation import (
    ModulationResult,
    basis_matrix,
    combine_multi,
    eigenvalue_pair,
    modulate_moving,
    modulate_static,
    modulation_matrix,
)
from .scenario import LoadedScenario, load_scenario
from .sim import (
    IntegrationSettings,
    MotionScript,
    Scenario,
    Target,
    TrajectoryRecord,
    Waypoint,
    batch_run,
    integrate,
    k_sweep,
    regional_speed_stats,
    rk4_step,
    time_reduction_map,
)
from .strategy import (
    Scene,
    StrategyConfig,
    intersection_adjustment,
    resolve_theta2,
    sign_factor,
    soft_region_adjustment,
    total_velocity,
)
