"""Independent numerical integration of the two-mode equations.

This module deliberately avoids the closed-form propagator: it steps
i da/dt = H a with a fixed-step classical Runge-Kutta (RK4) scheme so it
can arbitrate disputes about signs and conventions elsewhere.  A second,
structurally different check via scipy's matrix exponential is also
provided.

Steps never straddle a segment boundary.  Within each segment the step
count is ceil(duration / step) so the integrator lands on the boundary
exactly; the last partial step is therefore slightly shorter, never
longer, than requested.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .dynamics import (
    CouplerParams,
    CouplingSegment,
    ModeState,
    Protocol,
    rabi_frequency,
)

# Default resolution: step * W, and the loudest value still accepted.
DEFAULT_STEP_FRACTION = 0.001
MAX_STEP_FRACTION = 0.01
HARD_STEP_FRACTION = 0.1


@dataclass(frozen=True)
class IntegrationConfig:
    """Fixed-step RK4 configuration.

    step: time step in seconds, or None to use DEFAULT_STEP_FRACTION / W.
    max_step_fraction: largest allowed step * W.  Raising it above
    HARD_STEP_FRACTION is rejected outright; RK4 error grows like
    (step * W)^4 and results past that point are not meaningful.
    """

    step: float | None = None
    max_step_fraction: float = MAX_STEP_FRACTION

    def __post_init__(self) -> None:
        if self.step is not None:
            step = float(self.step)
            if not math.isfinite(step) or step <= 0.0:
                raise ValueError("integration step must be positive")
            object.__setattr__(self, "step", step)
        frac = float(self.max_step_fraction)
        if frac <= 0.0:
            raise ValueError("max_step_fraction must be positive")
        if frac > HARD_STEP_FRACTION:
            raise ValueError(
                f"max_step_fraction {frac:g} exceeds the hard cap {HARD_STEP_FRACTION:g}"
            )
        object.__setattr__(self, "max_step_fraction", frac)

    def resolved_step(self, params: CouplerParams) -> float:
        w = rabi_frequency(params)
        if self.step is None:
            return DEFAULT_STEP_FRACTION / w
        if self.step * w > self.max_step_fraction * (1.0 + 1e-12):
            raise ValueError(
                f"step * W = {self.step * w:g} exceeds the configured cap "
                f"{self.max_step_fraction:g}"
            )
        return self.step


def generator(params: CouplerParams, phi: float) -> np.ndarray:
    """Coupling matrix H for phase phi."""
    kappa = params.kappa0 * complex(math.cos(phi), math.sin(phi))
    return np.array(
        [[params.delta, kappa], [kappa.conjugate(), -params.delta]], dtype=complex
    )


def _rk4_segment(h: np.ndarray, a: np.ndarray, duration: float, step: float) -> np.ndarray:
    if duration == 0.0:
        return a
    n = max(1, math.ceil(duration / step))
    dt = duration / n
    m = -1j * h
    for _ in range(n):
        k1 = m @ a
        k2 = m @ (a + 0.5 * dt * k1)
        k3 = m @ (a + 0.5 * dt * k2)
        k4 = m @ (a + dt * k3)
        a = a + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return a


def integrate(
    params: CouplerParams,
    protocol: Protocol,
    initial: ModeState,
    config: IntegrationConfig | None = None,
) -> ModeState:
    """Integrate the protocol from the given initial state.

    No renormalization is applied along the way; norm drift is part of
    the error signal this oracle exists to expose.
    """
    cfg = config or IntegrationConfig()
    step = cfg.resolved_step(params)
    a = np.array([initial.a1, initial.a2], dtype=complex)
    for seg in protocol.segments:
        h = generator(params, seg.phase)
        a = _rk4_segment(h, a, seg.duration, step)
    return ModeState(complex(a[0]), complex(a[1]))


def integrate_matrix(
    params: CouplerParams,
    protocol: Protocol,
    config: IntegrationConfig | None = None,
) -> np.ndarray:
    """Full 2x2 propagator by integrating both basis states."""
    cols = []
    for basis in (ModeState.mode1(), ModeState.mode2()):
        out = integrate(params, protocol, basis, config)
        cols.append([out.a1, out.a2])
    return np.array(cols, dtype=complex).T


def expm_propagator(params: CouplerParams, segment: CouplingSegment) -> np.ndarray:
    """Segment propagator via scipy's scaling-and-squaring expm."""
    h = generator(params, segment.phase)
    return expm(-1j * h * segment.duration)


def expm_protocol(params: CouplerParams, protocol: Protocol) -> np.ndarray:
    acc = np.eye(2, dtype=complex)
    for seg in protocol.segments:
        acc = expm_propagator(params, seg) @ acc
    return acc
