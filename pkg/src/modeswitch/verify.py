"""Self-check battery: every load-bearing identity, checked numerically.

Each check exercises one contract of the package against an independent
route (dense grids, the RK4 oracle, scipy's expm, direct geometry) and
reports a residual against a fixed tolerance.  The battery is what the
`modeswitch verify` subcommand runs.

inject_fault=True deliberately corrupts the reference generator used in
the expm comparison (the detuning sign is flipped).  A healthy battery
must then fail; this guards against the battery itself going soft.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import (
    CouplerParams,
    CouplingSegment,
    ModeState,
    Protocol,
    TransferMatrix,
    compose,
    propagate,
    protocol_propagator,
    segment_propagator,
    static_max_transfer,
)
from .geometry import (
    NORTH,
    SOUTH,
    BlochVector,
    SphericalCircle,
    bloch_precess,
    circle_intersection,
    cone_floor,
    rotation_axis,
    tilt_angle,
    to_bloch,
)
from .isolator import (
    BACKWARD,
    FORWARD,
    IsolatorSpec,
    cascade_trajectory,
    closed_form_cross_power,
    cross_power,
    offset_protocol,
    reciprocity_defect,
    stage_with_offset,
)
from .oracle import IntegrationConfig, expm_protocol, generator, integrate_matrix
from .planner import minimal_plan_search, recursive_intersection_ok, staircase_circles
from .twostep import pushpull_times, two_step_ceiling, two_step_feasible


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    residual: float
    tolerance: float
    detail: str


def _result(name: str, residual: float, tol: float, detail: str = "") -> CheckResult:
    return CheckResult(name, bool(residual <= tol), float(residual), float(tol), detail)


def _random_params(rng) -> CouplerParams:
    return CouplerParams(rng.uniform(-3.0, 3.0), rng.uniform(0.1, 3.0))


def _random_protocol(
    rng, params: CouplerParams, max_segments: int = 8, min_frac: float = 0.05
) -> Protocol:
    n = int(rng.integers(1, max_segments + 1))
    w = params.rabi
    return Protocol.from_pairs(
        (rng.uniform(0.0, 2.0 * math.pi), rng.uniform(min_frac, 1.2) * math.pi / w)
        for _ in range(n)
    )


def _matrix_mismatch(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.abs(a - b).max())


def check_segment_unitarity(rng, n: int) -> CheckResult:
    worst = 0.0
    for _ in range(n):
        params = _random_params(rng)
        seg = CouplingSegment(
            rng.uniform(0.0, 2.0 * math.pi), rng.uniform(0.0, 4.0) / params.rabi
        )
        worst = max(worst, segment_propagator(params, seg).unitarity_defect)
    return _result("segment_unitarity", worst, 1e-12, f"{n} random segments")


def check_norm_conservation(rng, n: int) -> CheckResult:
    worst = 0.0
    for _ in range(n):
        params = _random_params(rng)
        protocol = _random_protocol(rng, params)
        a = rng.normal(size=4)
        state = ModeState(complex(a[0], a[1]), complex(a[2], a[3])).normalized()
        for _, s in propagate(params, protocol, state, 32):
            worst = max(worst, abs(s.norm - 1.0))
    return _result("norm_conservation", worst, 1e-12, f"{n} random protocols")


def check_segment_splitting(rng, n: int) -> CheckResult:
    worst = 0.0
    for _ in range(n):
        params = _random_params(rng)
        phase = rng.uniform(0.0, 2.0 * math.pi)
        t1, t2 = rng.uniform(0.0, 2.0, size=2) / params.rabi
        whole = segment_propagator(params, CouplingSegment(phase, t1 + t2))
        split = compose(
            segment_propagator(params, CouplingSegment(phase, t2)),
            segment_propagator(params, CouplingSegment(phase, t1)),
        )
        worst = max(worst, _matrix_mismatch(whole.as_array(), split.as_array()))
    return _result("segment_splitting", worst, 1e-12, f"{n} random splits")


def check_static_peak(rng, n: int) -> CheckResult:
    grid = np.linspace(0.0, math.pi, 2001)
    worst = 0.0
    worst_pos = 0.0
    for _ in range(n):
        params = _random_params(rng)
        bound = static_max_transfer(params)
        values = (params.kappa0 / params.rabi) ** 2 * np.sin(grid) ** 2
        peak = float(values.max())
        worst = max(worst, abs(peak - bound))
        worst_pos = max(worst_pos, abs(grid[int(values.argmax())] - math.pi / 2.0))
    residual = max(worst, 0.0 if worst_pos <= grid[1] * 1.5 else worst_pos)
    return _result(
        "static_peak_bound",
        residual,
        1e-9,
        f"peak at W t = pi/2 within {grid[1]:.2e} rad on {n} parameter draws",
    )


def check_rk4_agreement(rng, n: int) -> CheckResult:
    worst = 0.0
    for _ in range(n):
        params = _random_params(rng)
        protocol = _random_protocol(rng, params)
        exact = protocol_propagator(params, protocol).as_array()
        rk4 = integrate_matrix(params, protocol, IntegrationConfig())
        worst = max(worst, _matrix_mismatch(exact, rk4))
    return _result("propagator_vs_rk4", worst, 1e-8, f"{n} random protocols")


def check_expm_agreement(rng, n: int, inject_fault: bool) -> CheckResult:
    from scipy.linalg import expm

    worst = 0.0
    for _ in range(n):
        params = _random_params(rng)
        seg = CouplingSegment(
            rng.uniform(0.0, 2.0 * math.pi), rng.uniform(0.0, 3.0) / params.rabi
        )
        h = generator(params, seg.phase)
        if inject_fault:
            # Deliberate corruption used to prove the battery can fail.
            h = h.conj()
        ref = expm(-1j * h * seg.duration)
        worst = max(
            worst, _matrix_mismatch(segment_propagator(params, seg).as_array(), ref)
        )
    detail = f"{n} random segments" + (" [fault injected]" if inject_fault else "")
    return _result("propagator_vs_expm", worst, 1e-10, detail)


def check_bloch_consistency(rng, n: int) -> CheckResult:
    worst = 0.0
    for _ in range(n):
        params = _random_params(rng)
        protocol = _random_protocol(rng, params, max_segments=5)
        a = rng.normal(size=4)
        state = ModeState(complex(a[0], a[1]), complex(a[2], a[3])).normalized()
        bloch = to_bloch(state)
        acc = state
        for seg in protocol.segments:
            acc = segment_propagator(params, seg).apply(acc)
            bloch = bloch_precess(rotation_axis(params, seg.phase), bloch, seg.duration)
        diff = np.abs(to_bloch(acc).as_array() - bloch.as_array()).max()
        worst = max(worst, float(diff))
    return _result("bloch_consistency", worst, 1e-10, f"{n} random protocols")


def check_precession_rigidity(rng, n: int) -> CheckResult:
    worst = 0.0
    for _ in range(n):
        params = _random_params(rng)
        axis = rotation_axis(params, rng.uniform(0.0, 2.0 * math.pi))
        p = rng.normal(size=3)
        p /= np.linalg.norm(p)
        start = BlochVector.from_array(p)
        axial0 = float(np.dot(axis.as_array(), p))
        for t in rng.uniform(0.0, 5.0 / params.rabi, size=5):
            moved = bloch_precess(axis, start, float(t))
            worst = max(worst, abs(moved.norm - 1.0))
            worst = max(
                worst, abs(float(np.dot(axis.as_array(), moved.as_array())) - axial0)
            )
    return _result("precession_rigidity", worst, 1e-12, f"{n} random axes")


def check_cone_floor(rng, n: int) -> CheckResult:
    worst = -1.0
    for _ in range(n):
        params = _random_params(rng)
        floor = cone_floor(params)
        w = params.rabi
        seg_duration = math.pi / w  # half period covers the full circle depth
        samples = propagate(
            params,
            Protocol((CouplingSegment(rng.uniform(0.0, 2.0 * math.pi), seg_duration),)),
            ModeState.mode1(),
            128,
        )
        min_w = min(to_bloch(s).w for _, s in samples)
        worst = max(worst, floor - min_w - 0.0)
    # min_w may sit above the floor (sampling), but never below it.
    return _result("cone_floor", max(worst, 0.0), 1e-9, f"{n} static trajectories")


def check_two_step_ceiling(rng, n: int) -> CheckResult:
    """Brute-force maxima against the analytic two-segment ceiling."""
    from .twostep import _grid_transfer, _refine_two_step

    worst = 0.0
    for _ in range(n):
        ratio = rng.uniform(0.05, 1.2)
        phi = rng.uniform(0.0, math.pi)
        params = CouplerParams(ratio, 1.0)
        wt, grid = _grid_transfer(params, phi, 48)
        i, j = np.unravel_index(int(np.argmax(grid)), grid.shape)
        w = params.rabi
        _, _, achieved = _refine_two_step(params, phi, wt[i] / w, wt[j] / w)
        worst = max(worst, abs(achieved - two_step_ceiling(params, phi)))
    return _result("two_step_ceiling", worst, 1e-7, f"{n} random (ratio, phi) draws")


def check_criterion_vs_brute(n_cells: int = 50) -> CheckResult:
    """Classification agreement between the criterion and maximization."""
    from .twostep import _grid_transfer, _refine_two_step

    ratios = np.linspace(0.0, 1.2, n_cells)
    phis = np.linspace(0.0, math.pi, n_cells)
    agree = 0
    counted = 0
    for r in ratios:
        for phi in phis:
            margin = abs(math.cos(phi) - (1.0 - 2.0 * r * r))
            if margin < 0.02:
                continue
            counted += 1
            params = CouplerParams(float(r), 1.0)
            feasible = two_step_feasible(params, float(phi))
            wt, grid = _grid_transfer(params, float(phi), 48)
            peak = float(grid.max())
            if peak >= 0.99:
                i, j = np.unravel_index(int(np.argmax(grid)), grid.shape)
                w = params.rabi
                _, _, peak = _refine_two_step(params, float(phi), wt[i] / w, wt[j] / w)
            brute_feasible = peak >= 1.0 - 1e-6
            agree += int(feasible == brute_feasible)
    frac = agree / counted
    return _result(
        "criterion_vs_brute",
        1.0 - frac,
        0.01,
        f"{agree}/{counted} cells agree away from the boundary band",
    )


def check_circle_intersection(rng, n: int) -> CheckResult:
    worst = 0.0
    for _ in range(n):
        n1 = rng.normal(size=3)
        n1 /= np.linalg.norm(n1)
        n2 = rng.normal(size=3)
        n2 /= np.linalg.norm(n2)
        c1 = SphericalCircle(tuple(n1), rng.uniform(0.05, math.pi - 0.05))
        c2 = SphericalCircle(tuple(n2), rng.uniform(0.05, math.pi - 0.05))
        inter = circle_intersection(c1, c2)
        for p in inter.points:
            arr = p.as_array()
            worst = max(worst, abs(np.linalg.norm(arr) - 1.0))
            for c in (c1, c2):
                g = float(np.clip(np.dot(c.center_array(), arr), -1.0, 1.0))
                worst = max(worst, abs(math.acos(g) - c.radius))
    return _result("circle_intersection", worst, 1e-9, f"{n} random circle pairs")


def check_pushpull_identity(rng, n: int) -> CheckResult:
    worst = 0.0
    for _ in range(n):
        ratio = rng.uniform(0.0, 0.98)
        params = CouplerParams(ratio, 1.0)
        sol = pushpull_times(params)
        m = protocol_propagator(params, sol.protocol())
        worst = max(worst, abs(m.d))
        half = segment_propagator(params, CouplingSegment(0.0, sol.t1))
        worst = max(worst, abs(half.transfer - 0.5))
    return _result(
        "pushpull_identity",
        worst,
        1e-9,
        f"|D|=0 and a balanced first segment on {n} ratios",
    )


def check_plan_geometry(fast: bool) -> CheckResult:
    ratios = (2.0,) if fast else (1.5, 2.5, 4.0)
    worst = 0.0
    details = []
    for ratio in ratios:
        params = CouplerParams(ratio, 1.0)
        search = minimal_plan_search(params, restarts=2, refine_maxfev=2000)
        plan = search.plan
        if plan.achieved < 0.99:
            worst = max(worst, 0.99 - plan.achieved)
        circles = staircase_circles(params, plan)
        if not recursive_intersection_ok(circles):
            worst = max(worst, 1.0)
        for i, p in enumerate(plan.switch_points):
            arr = p.as_array()
            for c in (circles[i], circles[i + 1]):
                g = float(np.clip(np.dot(c.center_array(), arr), -1.0, 1.0))
                worst = max(worst, abs(math.acos(g) - c.radius))
        details.append(f"ratio {ratio:g}: {len(plan.protocol.segments)} segments")
    return _result("plan_geometry", worst, 1e-8, "; ".join(details))


def check_rk4_convergence(rng, n: int) -> CheckResult:
    # Segments of at least 0.3 pi / W keep every segment >= 12 base steps,
    # so the ceil() step rounding perturbs the halving factor by < 20%.
    # The factor is measured across both halvings together: a single
    # halving can read high when the leading dt^4 error term nearly
    # cancels for one protocol and the dt^5 term shows through.
    lo, hi = math.inf, 0.0
    for _ in range(n):
        params = _random_params(rng)
        protocol = _random_protocol(rng, params, max_segments=8, min_frac=0.3)
        exact = protocol_propagator(params, protocol).as_array()
        errs = []
        for frac in (0.08, 0.04, 0.02):
            cfg = IntegrationConfig(step=frac / params.rabi, max_step_fraction=0.1)
            errs.append(_matrix_mismatch(exact, integrate_matrix(params, protocol, cfg)))
        factor = math.sqrt(errs[0] / errs[2])
        lo = min(lo, factor)
        hi = max(hi, factor)
    residual = max(12.0 - lo, hi - 20.0, 0.0)
    return _result(
        "rk4_convergence",
        residual,
        0.0,
        f"per-halving factors in [{lo:.2f}, {hi:.2f}] over {n} protocols",
    )


def check_isolator_identity(rng, n: int) -> CheckResult:
    worst = 0.0
    for _ in range(n):
        alpha = rng.uniform(0.0, math.pi / 2.0)
        d = math.cos(alpha) * np.exp(1j * rng.uniform(-math.pi, math.pi))
        o = math.sin(alpha) * np.exp(1j * rng.uniform(-math.pi, math.pi))
        stage = TransferMatrix(complex(d), complex(o))
        spec = IsolatorSpec(
            stage,
            rng.uniform(0.0, 2.0 * math.pi),
            rng.uniform(0.0, 2.0 * math.pi),
            rng.uniform(0.0, 2.0 * math.pi),
        )
        for direction in (FORWARD, BACKWARD):
            worst = max(
                worst,
                abs(
                    cross_power(spec, direction)
                    - closed_form_cross_power(spec, direction)
                ),
            )
    # Reciprocity zeros: offset 0, and effective differential phase 0.
    stage = TransferMatrix(math.sqrt(0.5), 1j * math.sqrt(0.5))
    worst = max(worst, reciprocity_defect(IsolatorSpec(stage, 1.3, 0.4, 0.0)))
    worst = max(worst, reciprocity_defect(IsolatorSpec(stage, 0.0, 0.0, 2.1)))
    return _result("isolator_identity", worst, 1e-12, f"{n} random cascades")


def check_isolator_offset_realization(rng, n: int) -> CheckResult:
    """Shifting all drive phases reproduces the offset stage exactly."""
    worst = 0.0
    for _ in range(n):
        params = _random_params(rng)
        protocol = _random_protocol(rng, params, max_segments=4)
        offset = rng.uniform(0.0, 2.0 * math.pi)
        direct = stage_with_offset(protocol_propagator(params, protocol), offset)
        shifted = protocol_propagator(params, offset_protocol(protocol, offset))
        worst = max(worst, _matrix_mismatch(direct.as_array(), shifted.as_array()))
    return _result("isolator_offset_realization", worst, 1e-12, f"{n} random stages")


def check_isolator_endpoints() -> CheckResult:
    params = CouplerParams(0.5, 1.0)
    sol = pushpull_times(params)
    stage_protocol = Protocol((CouplingSegment(0.0, sol.t1),))
    stage = protocol_propagator(params, stage_protocol)
    import cmath

    arg_d = cmath.phase(stage.d)
    offset = math.pi / 2.0
    # Full transmission forward: delta_theta + 2 arg D + offset = 0 (mod 2 pi).
    theta1 = (-offset - 2.0 * arg_d) % (2.0 * math.pi)
    spec = IsolatorSpec(stage, theta1, 0.0, offset)
    worst = abs(cross_power(spec, FORWARD) - 1.0)
    worst = max(worst, cross_power(spec, BACKWARD))
    fwd_final = cascade_trajectory(params, stage_protocol, spec, FORWARD, 64)[-1][1]
    bwd_final = cascade_trajectory(params, stage_protocol, spec, BACKWARD, 64)[-1][1]
    worst = max(worst, abs(to_bloch(fwd_final).w + 1.0))
    worst = max(worst, abs(to_bloch(bwd_final).w - 1.0))
    return _result(
        "isolator_endpoints",
        worst,
        1e-6,
        "forward lands on mode 2, backward returns to mode 1",
    )


def check_output_determinism(tmp_base: str | None = None) -> CheckResult:
    import contextlib
    import io
    import tempfile
    from pathlib import Path

    from .cli import main as cli_main

    with tempfile.TemporaryDirectory(dir=tmp_base) as tmp:
        outs = []
        for sub in ("a", "b"):
            out = Path(tmp) / sub
            # The subcommand's one-line status print is not part of the
            # battery's own report.
            with contextlib.redirect_stdout(io.StringIO()):
                code = cli_main(
                    [
                        "simulate",
                        "--delta",
                        "0.5",
                        "--kappa",
                        "1",
                        "--out",
                        str(out),
                    ]
                )
            if code != 0:
                return _result("output_determinism", 1.0, 0.0, f"exit code {code}")
            outs.append(out)
        mismatch = 0.0
        names = sorted(p.name for p in outs[0].iterdir())
        if names != sorted(p.name for p in outs[1].iterdir()):
            mismatch = 1.0
        else:
            for name in names:
                if (outs[0] / name).read_bytes() != (outs[1] / name).read_bytes():
                    mismatch = 1.0
    return _result(
        "output_determinism", mismatch, 0.0, f"{len(names)} files byte-compared"
    )


def run_battery(
    seed: int = 20240817, fast: bool = False, inject_fault: bool = False
) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    k = 0.2 if fast else 1.0

    def scaled(n: int) -> int:
        return max(3, int(n * k))

    results = [
        check_segment_unitarity(rng, scaled(2000)),
        check_norm_conservation(rng, scaled(150)),
        check_segment_splitting(rng, scaled(300)),
        check_static_peak(rng, scaled(300)),
        check_rk4_agreement(rng, scaled(20)),
        check_expm_agreement(rng, scaled(200), inject_fault),
        check_bloch_consistency(rng, scaled(100)),
        check_precession_rigidity(rng, scaled(200)),
        check_cone_floor(rng, scaled(200)),
        check_two_step_ceiling(rng, scaled(60)),
        check_criterion_vs_brute(24 if fast else 50),
        check_circle_intersection(rng, scaled(300)),
        check_pushpull_identity(rng, scaled(200)),
        check_plan_geometry(fast),
        check_rk4_convergence(rng, scaled(20)),
        check_isolator_identity(rng, scaled(1000)),
        check_isolator_offset_realization(rng, scaled(100)),
        check_isolator_endpoints(),
        check_output_determinism(),
    ]
    return results


def battery_report(results: list[CheckResult]) -> dict:
    return {
        "passed": all(r.passed for r in results),
        "checks": [
            {
                "name": r.name,
                "passed": r.passed,
                "residual": r.residual,
                "tolerance": r.tolerance,
                "detail": r.detail,
            }
            for r in results
        ],
    }
