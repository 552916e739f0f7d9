import math

import numpy as np
import pytest

from modeswitch import (
    CouplerParams,
    CouplingSegment,
    ModeState,
    PlanSearchError,
    Protocol,
    descent_bound,
    dive_plan,
    greedy_staircase,
    min_switches_estimate,
    minimal_plan_search,
    plan_from_protocol,
    propagate,
    pushpull_times,
    recursive_intersection_ok,
    refine_plan,
    segment_propagator,
    staircase_circles,
    static_max_transfer,
    tilt_angle,
    to_bloch,
)


def test_min_switches_estimate_values():
    assert min_switches_estimate(1.0) == 1
    assert min_switches_estimate(2.0) == 2
    assert min_switches_estimate(10.0) == 8
    with pytest.raises(ValueError):
        min_switches_estimate(0.0)
    with pytest.raises(ValueError):
        min_switches_estimate(-1.0)


def test_min_switches_estimate_large_ratio_asymptote():
    # For large ratios the estimate approaches pi * ratio / 4.
    for ratio in (4.0, 6.0, 10.0, 25.0, 100.0):
        est = min_switches_estimate(ratio)
        assert abs(est - math.pi * ratio / 4.0) <= 1.0


def test_descent_bound_shape():
    params = CouplerParams(1.0, 1.0)
    # step is pi/2, so two segments reach the south pole exactly.
    assert descent_bound(params, 1) == pytest.approx(0.5)
    assert descent_bound(params, 2) == pytest.approx(1.0)
    assert descent_bound(params, 5) == pytest.approx(1.0)
    prev = 0.0
    p2 = CouplerParams(3.0, 1.0)
    for k in range(1, 12):
        b = descent_bound(p2, k)
        assert b >= prev - 1e-15
        prev = b


def test_descent_bound_first_step_is_static_max():
    for ratio in (0.5, 1.5, 4.0):
        params = CouplerParams(ratio, 1.0)
        assert descent_bound(params, 1) == pytest.approx(static_max_transfer(params))


def test_dive_plan_attains_bound():
    for ratio, k in ((2.0, 2), (3.0, 3), (6.0, 5)):
        params = CouplerParams(ratio, 1.0)
        plan = dive_plan(params, k)
        assert len(plan.protocol.segments) == k
        assert plan.achieved == pytest.approx(descent_bound(params, k), abs=1e-12)


def test_dive_plan_exact_landing():
    for ratio in (0.5, 1.0, 2.0, 4.0):
        params = CouplerParams(ratio, 1.0)
        psi = abs(tilt_angle(params))
        k_full = math.ceil(math.pi / (math.pi - 2.0 * psi))
        plan = dive_plan(params, k_full)
        assert plan.achieved == pytest.approx(1.0, abs=1e-12)
        assert len(plan.protocol.segments) == k_full


def test_dive_plan_zero_detuning_single_segment():
    plan = dive_plan(CouplerParams(0.0, 1.0), 5)
    assert len(plan.protocol.segments) == 1
    assert plan.achieved == pytest.approx(1.0, abs=1e-12)


def test_greedy_reproduces_two_step():
    params = CouplerParams(0.5, 1.0)
    plan = greedy_staircase(params, 2)
    assert len(plan.protocol.segments) == 2
    assert plan.achieved == pytest.approx(1.0, abs=1e-6)


def test_greedy_exact_at_ratio_two():
    params = CouplerParams(2.0, 1.0)
    plan = greedy_staircase(params, 4)
    assert plan.achieved == pytest.approx(1.0, abs=1e-9)
    assert plan.switches == 3


def test_greedy_descent_is_monotone():
    params = CouplerParams(3.0, 1.0)
    plan = greedy_staircase(params, 5)
    samples = propagate(params, plan.protocol, ModeState.mode1(), 512)
    # Per-segment running minima of w must strictly decrease.
    boundaries = np.cumsum([s.duration for s in plan.protocol.segments])
    total = plan.protocol.total_duration
    minima = []
    idx = 0
    current = math.inf
    for t, s in samples:
        current = min(current, to_bloch(s).w)
        while idx < len(boundaries) and t >= boundaries[idx] - 1e-12:
            minima.append(current)
            idx += 1
    assert len(minima) == len(plan.protocol.segments)
    for a, b in zip(minima, minima[1:]):
        assert b < a - 1e-6


def test_greedy_switch_points_on_circles():
    params = CouplerParams(2.5, 1.0)
    plan = greedy_staircase(params, 4)
    circles = staircase_circles(params, plan)
    assert recursive_intersection_ok(circles)
    for i, p in enumerate(plan.switch_points):
        assert circles[i].contains(p.as_array(), 1e-8)
        assert circles[i + 1].contains(p.as_array(), 1e-8)


def test_refine_plan_fixed_point():
    params = CouplerParams(0.5, 1.0)
    sol = pushpull_times(params)
    plan = plan_from_protocol(params, sol.protocol())
    refined = refine_plan(params, plan)
    # Already optimal: polish may not make it worse, and an exact tie
    # must return the input object untouched.
    assert refined.achieved >= plan.achieved
    if refined is not plan:
        assert refined.achieved > plan.achieved


def test_refine_plan_restores_perturbed_plan():
    params = CouplerParams(0.5, 1.0)
    sol = pushpull_times(params)
    perturbed = Protocol(
        (
            CouplingSegment(0.02, sol.t1 * 1.01),
            CouplingSegment(math.pi - 0.015, sol.t2 * 0.99),
        )
    )
    plan = plan_from_protocol(params, perturbed)
    assert plan.achieved < 1.0 - 1e-6
    refined = refine_plan(params, plan)
    assert refined.achieved >= 1.0 - 1e-8


def test_minimal_search_ratio_two():
    params = CouplerParams(2.0, 1.0)
    search = minimal_plan_search(params, restarts=3, rng_seed=4)
    assert search.plan.achieved >= 0.99
    assert len(search.plan.protocol.segments) == 4
    assert search.plan.switches == 3
    assert search.estimate == 2
    counts = [k for k, _ in search.curve]
    assert counts == sorted(counts)
    values = [a for _, a in search.curve]
    for a, b in zip(values, values[1:]):
        assert b >= a - 1e-9
    for k, a in search.curve:
        assert a <= descent_bound(params, k) + 1e-9


def test_minimal_search_curve_attains_bound():
    params = CouplerParams(4.0, 1.0)
    search = minimal_plan_search(params, restarts=2, rng_seed=4)
    for k, a in search.curve[:-1]:
        assert a == pytest.approx(descent_bound(params, k), abs=1e-9)


def test_minimal_search_cap_raises_with_best():
    params = CouplerParams(3.0, 1.0)
    with pytest.raises(PlanSearchError) as exc:
        minimal_plan_search(params, max_segments=2, restarts=2, rng_seed=4)
    err = exc.value
    assert err.best.achieved < 0.99
    assert err.best.achieved == pytest.approx(descent_bound(params, 2), abs=1e-6)
    assert len(err.curve) == 2


def test_negative_detuning_mirrors():
    pos = minimal_plan_search(CouplerParams(2.0, 1.0), restarts=2, rng_seed=4)
    neg = minimal_plan_search(CouplerParams(-2.0, 1.0), restarts=2, rng_seed=4)
    assert len(neg.plan.protocol.segments) == len(pos.plan.protocol.segments)
    assert neg.plan.achieved >= 0.99


def test_plan_switch_points_match_propagation():
    params = CouplerParams(1.5, 1.0)
    plan = dive_plan(params, 3)
    acc_state = ModeState.mode1()
    for seg, point in zip(plan.protocol.segments, plan.switch_points):
        acc_state = segment_propagator(params, seg).apply(acc_state)
        assert to_bloch(acc_state).as_array() == pytest.approx(
            point.as_array(), abs=1e-12
        )
