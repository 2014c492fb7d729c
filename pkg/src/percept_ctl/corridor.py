"""Two-photoreceptor corridor world.

A unicycle camera moves between two infinite parallel walls at x = -R and
x = +R.  Its heading ``theta`` is measured in the world frame, with
``theta = pi/2`` parallel to the walls.  The one-dimensional image plane lies
on the body-frame y-axis and the pinhole sits at body coordinates (f, 0), so
the image point (0, d) sees the world along the ray through the pinhole with
body direction (f, -d).  Image points d < 0 see the left wall and d > 0 the
right wall.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConeViolationError, CriticalHeadingError, ParameterError, UndefinedTauError

CRITICAL_EPS = 1e-12


@dataclass(frozen=True)
class VehicleState:
    x: float
    y: float
    theta: float


@dataclass(frozen=True)
class CorridorScene:
    """Corridor half-width ``R``, focal length ``f`` and forward speed ``v``."""

    R: float
    f: float
    v: float = 1.0

    def __post_init__(self):
        for name in ("R", "f", "v"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ParameterError(f"{name} must be positive and finite, got {value}")

    @property
    def critical_angle(self) -> float:
        """Heading phi with tan(phi) = f; the cone is phi < theta < pi - phi."""
        return math.atan(self.f)

    def in_cone(self, theta: float) -> bool:
        return math.sin(theta) - self.f * abs(math.cos(theta)) > 0.0

    def in_corridor(self, x: float) -> bool:
        return -self.R < x < self.R


@dataclass(frozen=True)
class FeaturePoint:
    xr: float
    yr: float


@dataclass(frozen=True)
class TauPair:
    tau_left: float
    tau_right: float

    @property
    def difference(self) -> float:
        return self.tau_left - self.tau_right


def tau_of_feature(state: VehicleState, scene: CorridorScene, feat: FeaturePoint) -> float:
    """Time to transit a world-frame feature at constant speed."""
    c, s = math.cos(state.theta), math.sin(state.theta)
    return (c * (feat.xr - state.x) + s * (feat.yr - state.y)) / scene.v


def tau_from_image_track(d_i: float, d_i_dot: float) -> float:
    """Time to transit from an image coordinate and its rate of change."""
    if abs(d_i_dot) <= 1e-12:
        raise UndefinedTauError(f"image velocity {d_i_dot!r} is zero; tau undefined")
    return d_i / d_i_dot


def _gaze_check(state: VehicleState, scene: CorridorScene):
    if not scene.in_cone(state.theta):
        raise ConeViolationError(
            f"heading {math.degrees(state.theta):.4f} deg is outside the critical cone "
            f"({math.degrees(scene.critical_angle):.4f}, {180 - math.degrees(scene.critical_angle):.4f}) deg"
        )


def wall_feature_world(state: VehicleState, scene: CorridorScene, side: str) -> FeaturePoint:
    """World coordinates of the wall point seen by the receptor at image -1 (left) or +1 (right)."""
    _gaze_check(state, scene)
    x, y, th = state.x, state.y, state.theta
    f, R = scene.f, scene.R
    c, s = math.cos(th), math.sin(th)
    if side == "left":
        return FeaturePoint(-R, y + f * s + (R + x + f * c) * (c + f * s) / (s - f * c))
    if side == "right":
        return FeaturePoint(R, y + f * s + (R - x - f * c) * (f * s - c) / (f * c + s))
    raise ParameterError(f"side must be 'left' or 'right', got {side!r}")


def ray_parameter(x: float, theta: float, f: float, R: float, d: float) -> float:
    """Distance parameter s of the wall hit along the gaze ray of image point d.

    The hit point is pinhole + s * (f e1 - d e2); the returned value is
    ``nan`` when the ray does not meet its wall in front of the pinhole.
    """
    c, s = math.cos(theta), math.sin(theta)
    wall = -R if d < 0 else R
    denom = f * c + d * s
    if denom == 0.0 or (denom > 0) != (wall > 0):
        return math.nan
    t = (wall - x - f * c) / denom
    return t if t > 0.0 else math.nan


def tau_at_image(state: VehicleState, scene: CorridorScene, d: float) -> float:
    """Time to transit of the wall point imaged at coordinate ``d``.

    Projecting the hit point on the heading gives tau * v = f (1 + s).
    """
    if d == 0.0:
        raise ParameterError("image coordinate 0 looks straight ahead and never meets a wall")
    s = ray_parameter(state.x, state.theta, scene.f, scene.R, d)
    if math.isnan(s):
        raise ConeViolationError(f"gaze ray of image point {d} misses its wall")
    return scene.f * (1.0 + s) / scene.v


def tau_pair_exact(state: VehicleState, scene: CorridorScene) -> TauPair:
    """Closed-form transit times of the two wall points imaged at -1 and +1."""
    _gaze_check(state, scene)
    x, th = state.x, state.theta
    f, R, v = scene.f, scene.R, scene.v
    c, s = math.cos(th), math.sin(th)
    tau_r = c * (R - x) + s * (f * s + (f * s - c) * (-f * c + R - x) / (f * c + s))
    tau_l = c * (-R - x) + s * (f * s + (f * s + c) * (f * c + R + x) / (s - f * c))
    return TauPair(tau_l / v, tau_r / v)


def balance_rate(x: float, theta: float, f: float, R: float, v: float, k: float) -> float:
    """k (tau_left - tau_right) without validation; the caller guards the cone."""
    c, s = math.cos(theta), math.sin(theta)
    return -2.0 * f * k * (f * c * (s + R) + x * s) / (v * (f * f * c * c - s * s))


def tau_balance_closed_form(state: VehicleState, scene: CorridorScene, k: float) -> float:
    """Turn rate k (tau_left - tau_right) from the simplified rational expression."""
    c, s = math.cos(state.theta), math.sin(state.theta)
    denom = scene.f ** 2 * c * c - s * s
    if abs(denom) < CRITICAL_EPS:
        raise CriticalHeadingError(f"heading {state.theta!r} is critical (denominator {denom:.3e})")
    return balance_rate(state.x, state.theta, scene.f, scene.R, scene.v, k)
