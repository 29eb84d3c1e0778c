"""Differential-drive kinematics, the PWM command path, and pose integration.

Forward model for wheel angular speeds (wL, wR) with wheel radius r and
wheelbase w_b:

    v = r * (wR + wL) / 2
    w = r * (wR - wL) / w_b
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import Pose2D, RobotParams, Twist2D, WheelSpeeds, normalize_angle

# Below this |w| the unicycle arc degenerates to a straight line.
OMEGA_EPSILON = 1e-9


def _clamp(value: float, lo: float, hi: float) -> float:
    return lo if value < lo else (hi if value > hi else value)


@dataclass(frozen=True)
class PwmCommand:
    """Duty-cycle style motor command; each channel is clamped to [-100, 100]."""

    left: float
    right: float

    def __post_init__(self):
        object.__setattr__(self, "left", _clamp(float(self.left), -100.0, 100.0))
        object.__setattr__(self, "right", _clamp(float(self.right), -100.0, 100.0))


def wheel_to_body(wheels: WheelSpeeds, params: RobotParams) -> Twist2D:
    """Body twist produced by the given wheel speeds."""
    r = params.wheel_radius
    v = r * (wheels.right + wheels.left) / 2.0
    w = r * (wheels.right - wheels.left) / params.wheelbase
    return Twist2D(v, w)


def body_to_wheel(twist: Twist2D, params: RobotParams) -> WheelSpeeds:
    """Wheel speeds realizing a body twist, saturated to the wheel speed limit.

    When either wheel would exceed max_wheel_speed, both wheels are scaled by
    the same factor so the commanded curvature is preserved.
    """
    r = params.wheel_radius
    half_track = params.wheelbase / 2.0
    right = (twist.v + twist.w * half_track) / r
    left = (twist.v - twist.w * half_track) / r
    peak = max(abs(left), abs(right))
    if peak > params.max_wheel_speed:
        scale = params.max_wheel_speed / peak
        left *= scale
        right *= scale
    return WheelSpeeds(left, right)


def pwm_to_wheel_speed(pwm: PwmCommand, params: RobotParams) -> WheelSpeeds:
    """Memoryless linear map from PWM duty to wheel speed.

    100% duty corresponds to the no-load wheel speed; there is no motor lag
    or load model, so the response is instantaneous.
    """
    scale = params.max_wheel_speed / 100.0
    return WheelSpeeds(pwm.left * scale, pwm.right * scale)


def integrate_pose(pose: Pose2D, twist: Twist2D, dt: float, method: str = "arc") -> Pose2D:
    """Advance a pose by a constant twist over dt seconds.

    The default integrator follows the exact unicycle arc, so results do not
    depend on the timestep.  method="euler" selects the first-order fallback
    and exists for convergence diagnostics only.
    """
    if not (dt > 0):
        raise ValueError(f"dt must be positive, got {dt!r}")
    v, w = twist.v, twist.w
    theta = pose.theta
    if method == "euler":
        return Pose2D(
            pose.x + v * math.cos(theta) * dt,
            pose.y + v * math.sin(theta) * dt,
            normalize_angle(theta + w * dt),
        )
    if method != "arc":
        raise ValueError(f"unknown integration method {method!r}")
    if abs(w) < OMEGA_EPSILON:
        return Pose2D(
            pose.x + v * math.cos(theta) * dt,
            pose.y + v * math.sin(theta) * dt,
            normalize_angle(theta + w * dt),
        )
    radius = v / w
    theta_end = theta + w * dt
    return Pose2D(
        pose.x + radius * (math.sin(theta_end) - math.sin(theta)),
        pose.y - radius * (math.cos(theta_end) - math.cos(theta)),
        normalize_angle(theta_end),
    )
