"""Command line interface and deterministic file output.

Subcommands:

    simulate      run a protocol (default: the solved two-step transfer)
    feasibility   tabulate the two-segment criterion over (ratio, phi)
    transfer-map  tabulate two-segment transfer over both durations
    plan          search for a minimal multi-segment plan
    isolator      evaluate the three-stage nonreciprocal cascade
    verify        run the self-check battery

Configuration comes from an optional JSON file (--config) with explicit
flags overriding file values.  Unknown config keys are rejected.  All
numeric file output is serialized with 17 significant digits so every
double round-trips exactly, and identical configurations produce byte
identical outputs.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .dynamics import (
    CouplerParams,
    CouplingSegment,
    ModeState,
    Protocol,
    propagate,
    protocol_propagator,
    rabi_frequency,
    static_max_transfer,
)
from .geometry import to_bloch
from .isolator import (
    BACKWARD,
    FORWARD,
    IsolatorSpec,
    cascade_trajectory,
    closed_form_cross_power,
    contrast_sweep,
    directional_response,
    effective_differential_phase,
    optimal_phases,
)
from .oracle import IntegrationConfig, integrate
from .planner import PlanSearchError, minimal_plan_search
from .render import split_legs, trajectory_svg
from .twostep import (
    critical_phase,
    feasibility_map,
    pushpull_times,
    solve_two_step,
    transfer_map,
    two_step_feasible,
)
from . import verify as verify_mod


def fmt17(x: float) -> str:
    """17 significant digits; exact round-trip for any finite double."""
    return format(float(x), ".17g")


def _to_jsonable(obj):
    if isinstance(obj, dict):
        return {k: _to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_jsonable(v) for v in obj]
    if isinstance(obj, bool) or obj is None or isinstance(obj, (int, str)):
        return obj
    if isinstance(obj, float):
        if math.isfinite(obj):
            return _Raw(fmt17(obj))
        # JSON has no Infinity/NaN literals; emit them as strings.
        return str(obj)
    raise TypeError(f"not serializable: {type(obj)!r}")


class _Raw:
    def __init__(self, text: str):
        self.text = text


def dumps17(obj) -> str:
    """JSON text with floats at 17 significant digits, keys kept in order."""

    def render(x, indent: int) -> str:
        pad = "  " * indent
        if isinstance(x, _Raw):
            return x.text
        if isinstance(x, dict):
            if not x:
                return "{}"
            inner = ",\n".join(
                f'{pad}  "{k}": {render(v, indent + 1)}' for k, v in x.items()
            )
            return "{\n" + inner + "\n" + pad + "}"
        if isinstance(x, list):
            if not x:
                return "[]"
            inner = ",\n".join(f"{pad}  {render(v, indent + 1)}" for v in x)
            return "[\n" + inner + "\n" + pad + "]"
        return json.dumps(x)

    return render(_to_jsonable(obj), 0) + "\n"


def write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def write_csv(path: Path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(
            ",".join(fmt17(v) if isinstance(v, float) else str(v) for v in row)
        )
    write_text(path, "\n".join(lines) + "\n")


@dataclass(frozen=True)
class RunConfig:
    """Validated run configuration shared by all subcommands."""

    delta: float = 0.5
    kappa: float = 1.0
    phi: float = math.pi
    threshold: float = 0.99
    grid: int = 64
    samples: int = 256
    seed: int = 20240817
    out: str = "out"
    protocol: tuple | None = None
    target: float | None = None
    theta1: float = 1.5 * math.pi
    theta2: float = 0.0
    rf_offset: float = 0.5 * math.pi
    direction: str = FORWARD
    max_segments: int | None = None
    restarts: int = 8
    fast: bool = False
    inject_fault: bool = False

    def __post_init__(self) -> None:
        for name in ("delta", "kappa", "phi", "threshold", "theta1", "theta2", "rf_offset"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
                raise ValueError(f"config field {name!r} must be a finite number")
            object.__setattr__(self, name, float(v))
        for name in ("grid", "samples", "seed", "restarts"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int):
                raise ValueError(f"config field {name!r} must be an integer")
        if self.kappa < 0:
            raise ValueError("kappa must be nonnegative")
        if not 0.0 < self.threshold <= 1.0:
            raise ValueError("threshold must lie in (0, 1]")
        if self.grid < 2:
            raise ValueError("grid must be >= 2")
        if self.samples < 1:
            raise ValueError("samples must be >= 1")
        if self.restarts < 0:
            raise ValueError("restarts must be >= 0")
        if self.direction not in (FORWARD, BACKWARD):
            raise ValueError(f"direction must be '{FORWARD}' or '{BACKWARD}'")
        if self.max_segments is not None:
            if isinstance(self.max_segments, bool) or not isinstance(self.max_segments, int):
                raise ValueError("max_segments must be an integer")
            if self.max_segments < 1:
                raise ValueError("max_segments must be >= 1")
        if self.target is not None:
            if not isinstance(self.target, (int, float)) or isinstance(self.target, bool):
                raise ValueError("target must be a number")
            if not 0.0 <= float(self.target) <= 1.0:
                raise ValueError("target must lie in [0, 1]")
            object.__setattr__(self, "target", float(self.target))
        if self.protocol is not None:
            segs = []
            if not isinstance(self.protocol, (list, tuple)) or not self.protocol:
                raise ValueError("protocol must be a nonempty list of [phase, duration]")
            for item in self.protocol:
                if not isinstance(item, (list, tuple)) or len(item) != 2:
                    raise ValueError("protocol entries must be [phase, duration] pairs")
                phase, dur = item
                for x in (phase, dur):
                    if not isinstance(x, (int, float)) or isinstance(x, bool):
                        raise ValueError("protocol entries must be numeric")
                segs.append((float(phase), float(dur)))
            object.__setattr__(self, "protocol", tuple(segs))
        for name in ("fast", "inject_fault"):
            if not isinstance(getattr(self, name), bool):
                raise ValueError(f"config field {name!r} must be a boolean")
        if not isinstance(self.out, str) or not self.out:
            raise ValueError("out must be a nonempty string")

    @property
    def params(self) -> CouplerParams:
        return CouplerParams(self.delta, self.kappa)

    def built_protocol(self) -> Protocol | None:
        if self.protocol is None:
            return None
        return Protocol.from_pairs(self.protocol)


_CONFIG_KEYS = {f.name for f in fields(RunConfig)}


def load_config(path: str | None, overrides: dict) -> RunConfig:
    data: dict = {}
    if path is not None:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(raw, dict):
            raise ValueError("config file must hold a JSON object")
        unknown = sorted(set(raw) - _CONFIG_KEYS)
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        data.update(raw)
    data.update({k: v for k, v in overrides.items() if v is not None})
    if "protocol" in data and data["protocol"] is not None:
        data["protocol"] = tuple(tuple(p) for p in data["protocol"])
    return RunConfig(**data)


def _params_block(cfg: RunConfig) -> dict:
    params = cfg.params
    return {
        "delta": cfg.delta,
        "kappa": cfg.kappa,
        "rabi": rabi_frequency(params),
        "ratio": params.ratio if cfg.kappa > 0 else None,
    }


def _protocol_block(protocol: Protocol) -> list:
    return [
        {"phase": s.phase, "duration": s.duration} for s in protocol.segments
    ]


def cmd_simulate(cfg: RunConfig) -> int:
    params = cfg.params
    protocol = cfg.built_protocol()
    source = "config"
    if protocol is None:
        if cfg.target is not None:
            from .twostep import solve_fraction

            protocol = solve_fraction(params, cfg.phi, cfg.target)
            source = "solve_fraction"
        else:
            protocol = solve_two_step(params, cfg.phi).protocol()
            source = "solve_two_step"
    samples = propagate(params, protocol, ModeState.mode1(), cfg.samples)
    final = samples[-1][1]
    rk4_final = integrate(params, protocol, ModeState.mode1(), IntegrationConfig())
    out = Path(cfg.out)

    rows = []
    for t, s in samples:
        b = to_bloch(s)
        rows.append(
            (
                t,
                s.a1.real,
                s.a1.imag,
                s.a2.real,
                s.a2.imag,
                abs(s.a1) ** 2,
                abs(s.a2) ** 2,
                b.u,
                b.v,
                b.w,
            )
        )
    write_csv(
        out / "trajectory.csv",
        ["t", "re_a1", "im_a1", "re_a2", "im_a2", "p1", "p2", "u", "v", "w"],
        rows,
    )
    boundaries = []
    acc = 0.0
    for seg in protocol.segments[:-1]:
        acc += seg.duration
        boundaries.append(acc)
    legs = split_legs(samples, boundaries)
    write_text(out / "trajectory.svg", trajectory_svg([[s for s in leg] for leg in legs]))
    summary = {
        "command": "simulate",
        "params": _params_block(cfg),
        "protocol_source": source,
        "protocol": _protocol_block(protocol),
        "total_duration": protocol.total_duration,
        "transfer": final.transfer,
        "final_norm": final.norm,
        "static_max_transfer": static_max_transfer(params),
        "rk4_transfer": rk4_final.transfer,
        "rk4_mismatch": abs(rk4_final.transfer - final.transfer),
    }
    write_text(out / "summary.json", dumps17(summary))
    print(f"simulate: transfer {final.transfer:.12g} over {len(protocol.segments)} segments")
    return 0


def cmd_feasibility(cfg: RunConfig) -> int:
    fm = feasibility_map(cfg.grid)
    out = Path(cfg.out)
    rows = [
        (float(r), float(p), int(fm.feasible[i, j]))
        for i, r in enumerate(fm.ratios)
        for j, p in enumerate(fm.phis)
    ]
    write_csv(out / "feasibility.csv", ["ratio", "phi", "feasible"], rows)
    boundary = [
        (float(r), critical_phase(float(r))) for r in fm.ratios if r <= 1.0
    ]
    write_csv(out / "boundary.csv", ["ratio", "phi_critical"], boundary)
    summary = {
        "command": "feasibility",
        "grid": cfg.grid,
        "feasible_cells": int(fm.feasible.sum()),
        "total_cells": int(fm.feasible.size),
    }
    write_text(out / "summary.json", dumps17(summary))
    print(
        f"feasibility: {int(fm.feasible.sum())}/{fm.feasible.size} cells feasible"
    )
    return 0


def cmd_transfer_map(cfg: RunConfig) -> int:
    params = cfg.params
    tm = transfer_map(params, cfg.phi, cfg.grid)
    out = Path(cfg.out)
    rows = [
        (float(tm.t1_axis[i]), float(tm.t2_axis[j]), float(tm.values[i, j]))
        for i in range(len(tm.t1_axis))
        for j in range(len(tm.t2_axis))
    ]
    write_csv(out / "transfer_map.csv", ["t1_over_pi", "t2_over_pi", "transfer"], rows)
    import numpy as np

    i, j = np.unravel_index(int(np.argmax(tm.values)), tm.values.shape)
    summary = {
        "command": "transfer-map",
        "params": _params_block(cfg),
        "phi": cfg.phi,
        "grid": cfg.grid,
        "peak": tm.peak,
        "peak_t1_over_pi": float(tm.t1_axis[i]),
        "peak_t2_over_pi": float(tm.t2_axis[j]),
        "feasible": two_step_feasible(params, cfg.phi),
    }
    write_text(out / "summary.json", dumps17(summary))
    print(f"transfer-map: peak {tm.peak:.12g} on a {cfg.grid}x{cfg.grid} grid")
    return 0


def _plan_payload(cfg: RunConfig, search, met: bool) -> dict:
    plan = search.plan if met else search.best
    return {
        "command": "plan",
        "params": _params_block(cfg),
        "threshold": cfg.threshold,
        "threshold_met": met,
        "switch_estimate": search.estimate if met else None,
        "segments": _protocol_block(plan.protocol),
        "switches": plan.switches,
        "achieved": plan.achieved,
        "total_duration": plan.protocol.total_duration,
        "switch_points": [
            {"u": p.u, "v": p.v, "w": p.w} for p in plan.switch_points
        ],
        "curve": [{"segments": k, "achieved": a} for k, a in search.curve],
    }


def cmd_plan(cfg: RunConfig) -> int:
    params = cfg.params
    out = Path(cfg.out)
    try:
        search = minimal_plan_search(
            params,
            threshold=cfg.threshold,
            restarts=cfg.restarts,
            rng_seed=cfg.seed,
            max_segments=cfg.max_segments,
        )
    except PlanSearchError as err:
        payload = _plan_payload(cfg, err, met=False)
        payload["switch_estimate"] = None
        write_text(out / "plan.json", dumps17(payload))
        print(f"plan: threshold not met (best {err.best.achieved:.6f})", file=sys.stderr)
        return 3
    plan = search.plan
    payload = _plan_payload(cfg, search, met=True)
    write_text(out / "plan.json", dumps17(payload))
    write_csv(
        out / "curve.csv",
        ["segments", "achieved"],
        [(int(k), float(a)) for k, a in search.curve],
    )
    samples = propagate(params, plan.protocol, ModeState.mode1(), cfg.samples)
    boundaries = []
    acc = 0.0
    for seg in plan.protocol.segments[:-1]:
        acc += seg.duration
        boundaries.append(acc)
    write_text(
        out / "trajectory.svg",
        trajectory_svg(split_legs(samples, boundaries)),
    )
    print(
        f"plan: {len(plan.protocol.segments)} segments, {plan.switches} switches, "
        f"achieved {plan.achieved:.9f} (estimate {search.estimate})"
    )
    return 0


def cmd_isolator(cfg: RunConfig) -> int:
    params = cfg.params
    if params.kappa0 == 0 or params.ratio >= 1.0:
        raise ValueError("isolator stage construction needs |delta| < kappa")
    sol = pushpull_times(params)
    stage_protocol = Protocol((CouplingSegment(0.0, sol.t1),))
    stage = protocol_propagator(params, stage_protocol)
    spec = IsolatorSpec(stage, cfg.theta1, cfg.theta2, cfg.rf_offset)
    resp = directional_response(spec)
    out = Path(cfg.out)

    sweep = contrast_sweep(stage, cfg.grid)
    rows = []
    contrast = sweep.contrast_db
    for i in range(len(sweep.delta_thetas)):
        for j in range(len(sweep.offsets)):
            rows.append(
                (
                    float(sweep.delta_thetas[i]),
                    float(sweep.offsets[j]),
                    float(sweep.forward[i, j]),
                    float(sweep.backward[i, j]),
                    float(contrast[i, j]),
                )
            )
    write_csv(
        out / "sweep.csv",
        ["delta_theta", "rf_offset", "forward", "backward", "contrast_db"],
        rows,
    )
    for direction in (FORWARD, BACKWARD):
        samples = cascade_trajectory(params, stage_protocol, spec, direction, cfg.samples)
        t_mid = stage_protocol.total_duration
        write_text(
            out / f"trajectory_{direction}.svg",
            trajectory_svg(split_legs(samples, [t_mid])),
        )
    opt_dt, opt_off = optimal_phases()
    summary = {
        "command": "isolator",
        "params": _params_block(cfg),
        "stage": {
            "d_re": stage.d.real,
            "d_im": stage.d.imag,
            "o_re": stage.o.real,
            "o_im": stage.o.imag,
            "split": stage.transfer,
        },
        "theta1": cfg.theta1,
        "theta2": cfg.theta2,
        "rf_offset": cfg.rf_offset,
        "effective_delta_theta": effective_differential_phase(spec),
        "forward_power": resp.forward_power,
        "backward_power": resp.backward_power,
        "contrast_db": resp.contrast_db,
        "closed_form_forward": closed_form_cross_power(spec, FORWARD),
        "closed_form_backward": closed_form_cross_power(spec, BACKWARD),
        "optimal_delta_theta": opt_dt,
        "optimal_rf_offset": opt_off,
    }
    write_text(out / "summary.json", dumps17(summary))
    print(
        f"isolator: forward {resp.forward_power:.12g}, backward "
        f"{resp.backward_power:.12g}"
    )
    return 0


def cmd_verify(cfg: RunConfig) -> int:
    results = verify_mod.run_battery(
        seed=cfg.seed, fast=cfg.fast, inject_fault=cfg.inject_fault
    )
    out = Path(cfg.out)
    write_text(out / "report.json", dumps17(verify_mod.battery_report(results)))
    failures = 0
    for r in results:
        status = "ok" if r.passed else "FAIL"
        print(f"{status:4s} {r.name:32s} residual {r.residual:.3e} tol {r.tolerance:.1e}")
        if not r.passed:
            failures += 1
    print(f"verify: {len(results) - failures}/{len(results)} checks passed")
    return 0 if failures == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="modeswitch",
        description="Switched-coupling transfer protocols for detuned two-mode systems",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("simulate", "feasibility", "transfer-map", "plan", "isolator", "verify"):
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="JSON config file")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--grid", type=int, default=None)
        p.add_argument("--delta", type=float, default=None)
        p.add_argument("--kappa", type=float, default=None)
        p.add_argument("--phi", type=float, default=None)
        p.add_argument("--threshold", type=float, default=None)
        if name == "verify":
            p.add_argument("--fast", action="store_true", default=None)
            p.add_argument(
                "--inject-fault", dest="inject_fault", action="store_true", default=None
            )
    return parser


_COMMANDS = {
    "simulate": cmd_simulate,
    "feasibility": cmd_feasibility,
    "transfer-map": cmd_transfer_map,
    "plan": cmd_plan,
    "isolator": cmd_isolator,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {
        k: v
        for k, v in vars(args).items()
        if k not in ("command", "config") and v is not None
    }
    try:
        cfg = load_config(args.config, overrides)
        return _COMMANDS[args.command](cfg)
    except (ValueError, OSError, json.JSONDecodeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
