"""Control allocation for thrust-vectored rigid bodies."""

from .body import (
    AXES,
    ActuatorSpec,
    BodyConfig,
    MappingMatrix,
    Mount,
    MountKind,
    build_mapping,
    unit_vector,
)
from .classic import ClassicParams, solve_classic
from .convex import ConeConstraint, ConvexAllocator, ConvexWeights, QPSolution, Status, build_rate_cone, solve_convex
from .errors import (
    AllocationError,
    ConfigError,
    DegenerateKernelBlock,
    InconsistentConstraints,
    InfeasibleKb,
    RankDeficientTarget,
    ScenarioError,
)
from .kb import KbProblem, KbSolution, solve_kb
from .mapping import (
    ActuatorCommand,
    allocate_pinv,
    allocate_pinv_constrained,
    commands_to_forces,
    commands_to_wrench,
    forces_to_commands,
)
from .sim import (
    Allocator,
    Constant,
    RampHold,
    ScenarioConfig,
    Sine,
    Sum,
    TimeSeries,
    power_fraction,
    run_scenario,
    tracking_metrics,
)
from .smooth import (
    KernelDirection,
    SmoothingMode,
    SmoothingParams,
    allocate_smooth,
    empirical_lipschitz,
    lipschitz_bound,
)

__version__ = "0.1.0"
