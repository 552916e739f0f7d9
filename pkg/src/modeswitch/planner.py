"""Multi-segment descent planning for ratios beyond the two-segment regime.

Every precession axis sits at polar angle pi/2 - psi, psi = arctan(delta /
kappa0), so one segment can deepen the polar angle of the state by at most
pi - 2 psi.  That single fact gives both a rigorous per-count transfer
bound,

    max |a2|^2 with k segments  <=  (1 - cos(min(k (pi - 2 psi), pi))) / 2,

and a constructive plan that attains it: enter each circle at its shallow
point, precess half a turn to its deepest point, and switch to the axis
whose azimuth is antipodal to the exit point.  Once the state is at polar
angle >= 2 psi a final axis azimuth exists whose circle passes through the
south pole exactly, finishing the transfer.

The planner offers that construction directly (dive_plan), a greedy
candidate search that rediscovers it segment by segment (greedy_staircase),
local polish of any plan (refine_plan), and a per-count search wrapper
(minimal_plan_search).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .dynamics import (
    CouplerParams,
    CouplingSegment,
    ModeState,
    Protocol,
    compose,
    protocol_propagator,
    segment_propagator,
)
from .geometry import (
    NORTH,
    SOUTH,
    BlochVector,
    SphericalCircle,
    circle_intersection,
    circle_through,
    precession_duration,
    rotation_axis,
    tilt_angle,
    to_bloch,
)

_TWO_PI = 2.0 * math.pi


def min_switches_estimate(ratio: float) -> int:
    """Quick switch-count scale for a given |delta| / kappa0.

    Returns ceil(pi / (4 arctan(1 / ratio))).  This counts full
    modulation periods rather than raw segment boundaries; plans found
    by the search need roughly twice as many segments, one per half
    period.  A tiny slack keeps exact integer arguments (ratio 1 gives
    exactly 1) from rounding up through float noise.
    """
    if ratio <= 0.0 or not math.isfinite(ratio):
        raise ValueError("ratio must be positive and finite")
    value = math.pi / (4.0 * math.atan(1.0 / ratio))
    return math.ceil(value - 1e-9)


def descent_bound(params: CouplerParams, k: int) -> float:
    """Largest |a2|^2 any k-segment protocol can reach from mode 1."""
    if k < 1:
        raise ValueError("segment count must be >= 1")
    psi = abs(tilt_angle(params))
    angle = min(k * (math.pi - 2.0 * psi), math.pi)
    return (1.0 - math.cos(angle)) / 2.0


@dataclass(frozen=True)
class StaircasePlan:
    """A planned protocol with its switch geometry.

    switch_points holds the Bloch vectors at interior segment
    boundaries (one fewer than the segment count); achieved is the
    transfer |a2|^2 from mode 1 under the full protocol.
    """

    protocol: Protocol
    switch_points: tuple[BlochVector, ...]
    achieved: float
    switches: int


class PlanSearchError(RuntimeError):
    """Search exhausted its segment cap; carries the best plan found."""

    def __init__(self, message: str, best: StaircasePlan, curve: tuple):
        super().__init__(message)
        self.best = best
        self.curve = curve


def plan_from_protocol(params: CouplerParams, protocol: Protocol) -> StaircasePlan:
    """Evaluate a protocol into a StaircasePlan by direct propagation."""
    acc = None
    points: list[BlochVector] = []
    start = ModeState.mode1()
    segs = protocol.segments
    for i, seg in enumerate(segs):
        m = segment_propagator(params, seg)
        acc = m if acc is None else compose(m, acc)
        if i < len(segs) - 1:
            points.append(to_bloch(acc.apply(start)))
    achieved = acc.transfer
    return StaircasePlan(protocol, tuple(points), achieved, len(segs) - 1)


def staircase_circles(params: CouplerParams, plan: StaircasePlan) -> tuple[SphericalCircle, ...]:
    """Precession circle of each segment, entered at the previous switch."""
    entry = NORTH
    circles: list[SphericalCircle] = []
    for i, seg in enumerate(plan.protocol.segments):
        axis = rotation_axis(params, seg.phase)
        circles.append(circle_through(axis, entry))
        if i < len(plan.switch_points):
            entry = plan.switch_points[i]
    return tuple(circles)


def recursive_intersection_ok(circles, tol: float = 1e-8) -> bool:
    """Check that each consecutive circle pair actually meets."""
    for a, b in zip(circles, circles[1:]):
        if circle_intersection(a, b, tol).count < 1:
            return False
    return True


def _mirror_protocol(protocol: Protocol) -> Protocol:
    """Negate all phases; maps plans for -delta onto plans for +delta."""
    return Protocol(
        tuple(CouplingSegment(-s.phase, s.duration) for s in protocol.segments)
    )


def _deepest_point(n: np.ndarray, rho: float) -> np.ndarray:
    """Point of largest polar angle on the circle of radius rho about n."""
    down = np.array([0.0, 0.0, -1.0]) + n[2] * n
    nn = np.linalg.norm(down)
    if nn < 1e-12:
        raise ValueError("deepest point undefined for a polar axis")
    down = down / nn
    return math.cos(rho) * n + math.sin(rho) * down


def _rotate(n: np.ndarray, p: np.ndarray, angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return p * c + np.cross(n, p) * s + n * np.dot(n, p) * (1.0 - c)


def _landing_phases(params: CouplerParams, p: np.ndarray) -> list[float]:
    """Axis azimuths whose circle through p also passes through the pole.

    Solves cos(phi) u + sin(phi) v = -(delta/kappa0)(1 + w) for phi.
    Empty when p is too shallow (polar angle below 2 psi).
    """
    r_uv = math.hypot(p[0], p[1])
    rhs = -(params.delta / params.kappa0) * (1.0 + p[2])
    if r_uv < 1e-12:
        return [0.0] if abs(rhs) < 1e-12 else []
    x = rhs / r_uv
    if abs(x) > 1.0 + 1e-12:
        return []
    x = max(-1.0, min(1.0, x))
    alpha = math.atan2(p[1], p[0])
    dphi = math.acos(x)
    if dphi < 1e-12:
        return [alpha]
    return [alpha + dphi, alpha - dphi]


def _best_landing(params: CouplerParams, p: np.ndarray) -> tuple[float, float] | None:
    """Shortest-duration (phase, duration) landing p onto the south pole."""
    options = []
    p_bloch = BlochVector.from_array(p)
    for phi in _landing_phases(params, p):
        axis = rotation_axis(params, phi)
        dur = precession_duration(axis, p_bloch, SOUTH)
        options.append((dur, phi))
    if not options:
        return None
    dur, phi = min(options)
    return phi, dur


def dive_plan(params: CouplerParams, max_segments: int) -> StaircasePlan:
    """Half-turn descent plan, the constructive optimum per segment count.

    Alternating push-pull half turns walk the state down one maximal
    polar step per segment.  If max_segments suffices to bring the state
    within reach of a pole circle, the last segment lands on the south
    pole exactly and the plan may use fewer segments than allowed;
    otherwise every segment is a half turn and the plan stops on the
    deepest reachable circle bottom, attaining descent_bound.
    """
    if max_segments < 1:
        raise ValueError("max_segments must be >= 1")
    if params.kappa0 == 0.0:
        raise ValueError("planning requires kappa0 > 0")
    if params.delta < 0.0:
        core = dive_plan(CouplerParams(-params.delta, params.kappa0), max_segments)
        return plan_from_protocol(params, _mirror_protocol(core.protocol))

    w = params.rabi
    half_turn = math.pi / (2.0 * w)
    psi = tilt_angle(params)
    if params.delta == 0.0:
        prot = Protocol((CouplingSegment(0.0, half_turn),))
        return plan_from_protocol(params, prot)

    step = math.pi - 2.0 * psi
    pairs: list[tuple[float, float]] = []
    p = NORTH.as_array()
    phase = 0.0
    if max_segments * step >= math.pi - 1e-12:
        dives = max(0, math.ceil(2.0 * psi / step - 1e-12))
    else:
        dives = max_segments
    for _ in range(dives):
        axis = rotation_axis(params, phase)
        n = axis.as_array()
        rho = math.acos(max(-1.0, min(1.0, float(np.dot(n, p)))))
        pairs.append((phase, half_turn))
        p = _deepest_point(n, rho)
        phase = math.atan2(p[1], p[0]) + math.pi
    if max_segments * step >= math.pi - 1e-12:
        landing = _best_landing(params, p)
        if landing is None:
            # Entry sits marginally shy of the pole circle; take one more dive.
            axis = rotation_axis(params, phase)
            n = axis.as_array()
            rho = math.acos(max(-1.0, min(1.0, float(np.dot(n, p)))))
            pairs.append((phase, half_turn))
            p = _deepest_point(n, rho)
            landing = _best_landing(params, p)
        phi, dur = landing
        pairs.append((phi, dur))
    return plan_from_protocol(params, Protocol.from_pairs(pairs))


def greedy_staircase(
    params: CouplerParams, max_segments: int, candidates: int = 256
) -> StaircasePlan:
    """Segment-by-segment descent by candidate scoring.

    On the current circle, candidate switch points are sampled at
    uniformly spaced precession angles.  A candidate from which some
    axis circle passes through the south pole wins outright (earliest
    such candidate is kept and the plan finishes next segment); otherwise
    candidates are scored by the depth of the circle obtained with the
    azimuth-antipodal axis, and the best is refined continuously before
    committing.  The final allowed segment stops at its circle's deepest
    point.  Durations are exact precession times, so refine_plan is only
    needed when the segment budget binds.
    """
    if max_segments < 1:
        raise ValueError("max_segments must be >= 1")
    if candidates < 8:
        raise ValueError("need at least 8 candidates")
    if params.kappa0 == 0.0:
        raise ValueError("planning requires kappa0 > 0")
    if params.delta < 0.0:
        core = greedy_staircase(
            CouplerParams(-params.delta, params.kappa0), max_segments, candidates
        )
        return plan_from_protocol(params, _mirror_protocol(core.protocol))

    w = params.rabi
    psi = tilt_angle(params)
    theta_ax = math.pi / 2.0 - psi
    pole_gap = math.acos(-params.delta / w)  # axis-to-south-pole angle

    pairs: list[tuple[float, float]] = []
    p = NORTH.as_array()
    phase = 0.0
    for i in range(max_segments):
        axis = rotation_axis(params, phase)
        n = axis.as_array()
        rho = math.acos(max(-1.0, min(1.0, float(np.dot(n, p)))))
        if abs(rho - pole_gap) <= 1e-9:
            dur = precession_duration(axis, BlochVector.from_array(p), SOUTH)
            pairs.append((phase, dur))
            break
        if i == max_segments - 1:
            deep = _deepest_point(n, rho)
            dur = precession_duration(
                axis, BlochVector.from_array(p), BlochVector.from_array(deep)
            )
            pairs.append((phase, dur))
            break

        def depth_after(theta: float) -> float:
            q = _rotate(n, p, -theta)
            phi_d = math.atan2(q[1], q[0]) + math.pi
            n2 = rotation_axis(params, phi_d).as_array()
            rho2 = math.acos(max(-1.0, min(1.0, float(np.dot(n2, q)))))
            mp = theta_ax + rho2
            return mp if mp <= math.pi else _TWO_PI - mp

        best_theta = None
        best_score = None
        landing_theta = None
        for j in range(candidates):
            theta = _TWO_PI * (j + 0.5) / candidates
            q = _rotate(n, p, -theta)
            if _landing_phases(params, q):
                landing_theta = theta
                break
            score = depth_after(theta)
            if best_score is None or score > best_score:
                best_score = score
                best_theta = theta

        if landing_theta is not None:
            q = _rotate(n, p, -landing_theta)
            phi_next, _ = _best_landing(params, q)
            pairs.append((phase, landing_theta / (2.0 * w)))
            p = q
            phase = phi_next
            continue

        spacing = _TWO_PI / candidates
        res = minimize_scalar(
            lambda th: -depth_after(th),
            bounds=(max(best_theta - spacing, 1e-9), min(best_theta + spacing, _TWO_PI)),
            method="bounded",
            options={"xatol": 1e-12},
        )
        theta = float(res.x)
        q = _rotate(n, p, -theta)
        pairs.append((phase, theta / (2.0 * w)))
        phase = math.atan2(q[1], q[0]) + math.pi
        p = q

    return plan_from_protocol(params, Protocol.from_pairs(pairs))


def refine_plan(
    params: CouplerParams, plan: StaircasePlan, maxfev: int = 20000
) -> StaircasePlan:
    """Polish durations and phases by derivative-free local search.

    Optimizes 1 - |a2|^2 over all segment durations (reflected to stay
    nonnegative) and phases with Powell's method.  Returns the input
    plan unchanged unless the polish strictly improves it.
    """
    segs = plan.protocol.segments
    k = len(segs)
    x0 = np.array([s.duration for s in segs] + [s.phase for s in segs])

    def loss(x):
        prot = Protocol(
            tuple(
                CouplingSegment(x[k + i], abs(x[i])) for i in range(k)
            )
        )
        return 1.0 - protocol_propagator(params, prot).transfer

    res = minimize(
        loss,
        x0,
        method="Powell",
        options={"xtol": 1e-12, "ftol": 1e-14, "maxfev": maxfev},
    )
    achieved = 1.0 - float(res.fun)
    if achieved <= plan.achieved:
        return plan
    prot = Protocol(
        tuple(
            CouplingSegment(float(res.x[k + i]), abs(float(res.x[i])))
            for i in range(k)
        )
    )
    return plan_from_protocol(params, prot)


@dataclass(frozen=True)
class PlanSearch:
    """Outcome of minimal_plan_search.

    curve holds (segment_count, best_achieved) for every count tried,
    in order; estimate is min_switches_estimate at this ratio.
    """

    plan: StaircasePlan
    curve: tuple[tuple[int, float], ...]
    estimate: int


def minimal_plan_search(
    params: CouplerParams,
    threshold: float = 0.99,
    restarts: int = 8,
    rng_seed: int = 20240817,
    max_segments: int | None = None,
    refine_maxfev: int = 8000,
) -> PlanSearch:
    """Smallest segment count whose best plan reaches the threshold.

    Counts are tried in increasing order.  Counts whose descent_bound
    falls below the threshold cannot succeed, so only the bound-attaining
    dive plan is recorded for them.  At viable counts the dive, greedy
    and (for small ratios, count 2) exact two-segment constructions seed
    a multi-start Powell refinement with `restarts` random perturbations.
    Raises PlanSearchError with the best plan found if the cap is hit.
    """
    if not 0.0 < threshold <= 1.0:
        raise ValueError("threshold must lie in (0, 1]")
    if params.kappa0 == 0.0:
        raise ValueError("planning requires kappa0 > 0")
    psi = abs(tilt_angle(params))
    step = math.pi - 2.0 * psi
    cap = max_segments if max_segments is not None else math.ceil(math.pi / step) + 2
    rng = np.random.default_rng(rng_seed)

    curve: list[tuple[int, float]] = []
    best_overall: StaircasePlan | None = None
    ratio = params.ratio
    estimate = min_switches_estimate(ratio) if ratio > 0 else 1

    for k in range(1, cap + 1):
        if descent_bound(params, k) < threshold - 1e-12:
            plan_k = dive_plan(params, k)
        else:
            seeds = [dive_plan(params, k), greedy_staircase(params, k)]
            if k == 2 and ratio < 1.0:
                from .twostep import pushpull_times

                seeds.append(plan_from_protocol(params, pushpull_times(params).protocol()))
            pool = list(seeds)
            base = max(seeds, key=lambda pl: pl.achieved)
            for _ in range(restarts):
                segs = base.protocol.segments
                jitter = Protocol(
                    tuple(
                        CouplingSegment(
                            s.phase + rng.normal(0.0, 0.2),
                            s.duration * math.exp(rng.normal(0.0, 0.1)),
                        )
                        for s in segs
                    )
                )
                pool.append(plan_from_protocol(params, jitter))
            refined = [
                pl
                if pl.achieved >= 1.0 - 1e-12
                else refine_plan(params, pl, maxfev=refine_maxfev)
                for pl in pool
            ]
            plan_k = max(
                refined, key=lambda pl: (pl.achieved, -pl.protocol.total_duration)
            )
        curve.append((k, plan_k.achieved))
        if best_overall is None or plan_k.achieved > best_overall.achieved:
            best_overall = plan_k
        if plan_k.achieved >= threshold:
            return PlanSearch(plan_k, tuple(curve), estimate)

    raise PlanSearchError(
        f"no plan reached {threshold:g} within {cap} segments "
        f"(best {best_overall.achieved:.6f})",
        best_overall,
        tuple(curve),
    )
