"""modeswitch: switched-coupling transfer in detuned two-mode systems.

Closed-form propagators for piecewise-constant coupling modulation, a
Bloch-sphere geometric account of when two segments suffice for complete
mode conversion, multi-segment descent planning for strong detuning, a
three-stage nonreciprocal cascade model, and an independent RK4 oracle.
"""

from .dynamics import (
    CouplerParams,
    CouplingSegment,
    ModeState,
    Protocol,
    TransferMatrix,
    compose,
    propagate,
    propagator_until,
    protocol_propagator,
    rabi_frequency,
    segment_propagator,
    static_max_transfer,
)
from .geometry import (
    NORTH,
    SOUTH,
    BlochVector,
    CircleIntersection,
    RotationAxis,
    SphericalCircle,
    angular_distance,
    bloch_precess,
    circle_intersection,
    circle_through,
    cone_floor,
    pole_circle_radii,
    precession_duration,
    rotation_axis,
    tilt_angle,
    to_bloch,
)
from .isolator import (
    BACKWARD,
    FORWARD,
    ContrastSweep,
    DirectionalResponse,
    IsolatorSpec,
    canonical_stage,
    cascade,
    cascade_trajectory,
    closed_form_cross_power,
    contrast_sweep,
    cross_power,
    directional_response,
    effective_differential_phase,
    offset_protocol,
    optimal_phases,
    phase_jump,
    phase_section,
    reciprocity_defect,
    stage_with_offset,
)
from .oracle import (
    IntegrationConfig,
    expm_propagator,
    expm_protocol,
    generator,
    integrate,
    integrate_matrix,
)
from .planner import (
    PlanSearch,
    PlanSearchError,
    StaircasePlan,
    descent_bound,
    dive_plan,
    greedy_staircase,
    min_switches_estimate,
    minimal_plan_search,
    plan_from_protocol,
    recursive_intersection_ok,
    refine_plan,
    staircase_circles,
)
from .twostep import (
    FeasibilityMap,
    InfeasibleTransferError,
    TransferMap,
    TwoStepSolution,
    axis_separation,
    critical_phase,
    feasibility_map,
    pushpull_times,
    solve_fraction,
    solve_two_step,
    transfer_map,
    two_step_ceiling,
    two_step_feasible,
)

__version__ = "0.1.0"
