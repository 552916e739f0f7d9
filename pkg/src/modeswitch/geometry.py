"""Bloch-sphere picture of the two-mode dynamics.

A normalized amplitude pair maps to the unit vector

    u = 2 Re(a1 conj(a2)),  v = 2 Im(a1 conj(a2)),  w = |a1|^2 - |a2|^2,

so mode 1 sits at the north pole (0, 0, 1) and mode 2 at the south pole.
A constant-coupling segment with phase phi precesses this vector rigidly
about the unit axis

    n = (kappa0 cos phi, kappa0 sin phi, delta) / W

through the angle -2 W t in the right-hand sense about n (equivalently
2 W t left-handed).  The sense matters: it is fixed by the amplitude map
above and is verified against it to 1e-10 in the test suite.

Trajectories under one segment are therefore circles on the sphere.  The
planner reasons about which circles pass through which points, which is
classical spherical geometry; this module supplies those primitives with
explicit tolerance handling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import CouplerParams, ModeState

# Angular comparisons share one absolute tolerance (rad).
ANGLE_TOL = 1e-9


@dataclass(frozen=True)
class BlochVector:
    u: float
    v: float
    w: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "u", float(self.u))
        object.__setattr__(self, "v", float(self.v))
        object.__setattr__(self, "w", float(self.w))

    @classmethod
    def from_array(cls, arr) -> "BlochVector":
        return cls(float(arr[0]), float(arr[1]), float(arr[2]))

    def as_array(self) -> np.ndarray:
        return np.array([self.u, self.v, self.w], dtype=float)

    @property
    def norm(self) -> float:
        return math.sqrt(self.u**2 + self.v**2 + self.w**2)


NORTH = BlochVector(0.0, 0.0, 1.0)
SOUTH = BlochVector(0.0, 0.0, -1.0)


def to_bloch(state: ModeState) -> BlochVector:
    """Map a normalized state to its Bloch vector.

    The input is normalized first; the zero state is rejected.
    """
    s = state.normalized()
    cross = s.a1 * s.a2.conjugate()
    return BlochVector(
        2.0 * cross.real,
        2.0 * cross.imag,
        abs(s.a1) ** 2 - abs(s.a2) ** 2,
    )


@dataclass(frozen=True)
class RotationAxis:
    """Unit precession axis together with the rate W (rad/s)."""

    n: tuple[float, float, float]
    omega: float

    def __post_init__(self) -> None:
        n = tuple(float(x) for x in self.n)
        if len(n) != 3:
            raise ValueError("axis must have three components")
        nn = math.sqrt(sum(x * x for x in n))
        if abs(nn - 1.0) > 1e-9:
            raise ValueError("axis must be a unit vector")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "omega", float(self.omega))
        if self.omega <= 0.0:
            raise ValueError("precession rate must be positive")

    def as_array(self) -> np.ndarray:
        return np.array(self.n, dtype=float)


def rotation_axis(params: CouplerParams, phi: float) -> RotationAxis:
    """Precession axis for coupling phase phi."""
    w = params.rabi
    return RotationAxis(
        (
            params.kappa0 * math.cos(phi) / w,
            params.kappa0 * math.sin(phi) / w,
            params.delta / w,
        ),
        w,
    )


def tilt_angle(params: CouplerParams) -> float:
    """Axis tilt psi = arctan(delta / kappa0) out of the equatorial plane.

    Requires kappa0 > 0; psi is signed like delta and lies in (-pi/2, pi/2).
    """
    if params.kappa0 == 0.0:
        raise ValueError("tilt angle undefined for kappa0 = 0")
    return math.atan2(params.delta, params.kappa0)


def _rotate(n: np.ndarray, p: np.ndarray, angle: float) -> np.ndarray:
    """Right-handed rotation of p about unit axis n by angle."""
    c = math.cos(angle)
    s = math.sin(angle)
    return p * c + np.cross(n, p) * s + n * np.dot(n, p) * (1.0 - c)


def bloch_precess(axis: RotationAxis, start: BlochVector, t: float) -> BlochVector:
    """Advance a Bloch vector by time t about the given axis.

    The physical sense is a rotation by -2*omega*t in the right-hand
    convention about n, matching the amplitude-level propagator.
    """
    n = axis.as_array()
    p = start.as_array()
    return BlochVector.from_array(_rotate(n, p, -2.0 * axis.omega * t))


def precession_duration(axis: RotationAxis, start: BlochVector, end: BlochVector) -> float:
    """First time at which precession carries start onto end.

    Both points must lie on a common circle about the axis (same axial
    distance within ANGLE_TOL).  Points on the axis itself need no time;
    0.0 is returned.  Raises ValueError if end is off the start's circle.
    """
    n = axis.as_array()
    a = start.as_array()
    b = end.as_array()
    ca = float(np.dot(n, a))
    cb = float(np.dot(n, b))
    if abs(math.acos(max(-1.0, min(1.0, ca))) - math.acos(max(-1.0, min(1.0, cb)))) > 1e-6:
        raise ValueError("points do not share a precession circle")
    a_perp = a - ca * n
    b_perp = b - cb * n
    ra = float(np.linalg.norm(a_perp))
    rb = float(np.linalg.norm(b_perp))
    if ra < 1e-12 or rb < 1e-12:
        return 0.0
    # Signed angle from a_perp to b_perp, right-handed about n.
    ang = math.atan2(float(np.dot(n, np.cross(a_perp, b_perp))), float(np.dot(a_perp, b_perp)))
    # Precession sweeps angle -2 w t, so invert the sign and wrap forward.
    turn = (-ang) % (2.0 * math.pi)
    if turn >= 2.0 * math.pi - ANGLE_TOL:
        turn = 0.0
    return turn / (2.0 * axis.omega)


@dataclass(frozen=True)
class SphericalCircle:
    """Circle on the unit sphere: points p with angle(center, p) = radius."""

    center: tuple[float, float, float]
    radius: float

    def __post_init__(self) -> None:
        c = tuple(float(x) for x in self.center)
        if len(c) != 3:
            raise ValueError("center must have three components")
        nn = math.sqrt(sum(x * x for x in c))
        if abs(nn - 1.0) > 1e-9:
            raise ValueError("circle center must be a unit vector")
        r = float(self.radius)
        if not 0.0 <= r <= math.pi:
            raise ValueError("circle radius must lie in [0, pi]")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", r)

    def center_array(self) -> np.ndarray:
        return np.array(self.center, dtype=float)

    def contains(self, point: np.ndarray, tol: float = ANGLE_TOL) -> bool:
        g = float(np.clip(np.dot(self.center_array(), np.asarray(point, dtype=float)), -1.0, 1.0))
        return abs(math.acos(g) - self.radius) <= tol


def circle_through(axis: RotationAxis, point: BlochVector) -> SphericalCircle:
    """Precession circle traced by a point about an axis."""
    g = float(np.clip(np.dot(axis.as_array(), point.as_array()), -1.0, 1.0))
    return SphericalCircle(axis.n, math.acos(g))


def pole_circle_radii(params: CouplerParams) -> tuple[float, float]:
    """Radii of the precession circles through the two poles.

    For tilt psi these are pi/2 - psi (north pole, mode 1) and
    pi/2 + psi (south pole, mode 2), independent of the coupling phase.
    """
    psi = tilt_angle(params)
    return (math.pi / 2.0 - psi, math.pi / 2.0 + psi)


def cone_floor(params: CouplerParams) -> float:
    """Lowest w reachable from the north pole without switching.

    Precession about a tilted axis keeps the start circle, whose lowest
    point has w = -cos(2 psi).  This is the single-segment floor matching
    the static transfer bound kappa0^2 / W^2.
    """
    psi = tilt_angle(params)
    return -math.cos(2.0 * psi)


@dataclass(frozen=True)
class CircleIntersection:
    """Result of intersecting two spherical circles.

    kind is one of "none", "tangent", "pair", "coincident".  points holds
    0, 1, or 2 unit vectors; a coincident result carries none because the
    intersection is the whole circle.
    """

    kind: str
    points: tuple[BlochVector, ...]

    @property
    def count(self):
        if self.kind == "coincident":
            return math.inf
        return len(self.points)


def circle_intersection(
    c1: SphericalCircle, c2: SphericalCircle, tol: float = ANGLE_TOL
) -> CircleIntersection:
    """Intersect two circles on the unit sphere.

    The classification compares the center separation d with |r1 - r2|
    and r1 + r2 exactly as in the planar case, except that everything is
    angular and the "far side" tangency through d + r1 + r2 = 2 pi also
    occurs.  Intersection points are built in the orthonormal frame
    (n1, e_perp, n1 x n2) and renormalized before return.
    """
    n1 = c1.center_array()
    n2 = c2.center_array()
    r1 = c1.radius
    r2 = c2.radius
    g = float(np.clip(np.dot(n1, n2), -1.0, 1.0))
    d = math.acos(g)

    same_center = d <= tol
    anti_center = math.pi - d <= tol
    if same_center and abs(r1 - r2) <= tol:
        return CircleIntersection("coincident", ())
    if anti_center and abs((r1 + r2) - math.pi) <= tol:
        return CircleIntersection("coincident", ())
    if same_center or anti_center:
        return CircleIntersection("none", ())

    # Angular triangle inequalities, with the wrap-around upper branch.
    lo = d - abs(r1 - r2)
    hi = (r1 + r2) - d
    wrap = (2.0 * math.pi - d) - (r1 + r2)
    if lo < -tol or hi < -tol or wrap < -tol:
        return CircleIntersection("none", ())

    sind = math.sin(d)
    e_perp = (n2 - g * n1) / sind
    e3 = np.cross(n1, e_perp)
    s = (math.cos(r2) - g * math.cos(r1)) / sind
    base = math.cos(r1) * n1 + s * e_perp

    t_sq = 1.0 - math.cos(r1) ** 2 - s * s
    if min(lo, hi, wrap) <= tol:
        p = base / np.linalg.norm(base)
        return CircleIntersection("tangent", (BlochVector.from_array(p),))

    t = math.sqrt(max(t_sq, 0.0))
    p_plus = base + t * e3
    p_minus = base - t * e3
    p_plus = p_plus / np.linalg.norm(p_plus)
    p_minus = p_minus / np.linalg.norm(p_minus)
    return CircleIntersection(
        "pair",
        (BlochVector.from_array(p_plus), BlochVector.from_array(p_minus)),
    )


def angular_distance(a: BlochVector, b: BlochVector) -> float:
    g = float(np.clip(np.dot(a.as_array(), b.as_array()), -1.0, 1.0))
    return math.acos(g)
