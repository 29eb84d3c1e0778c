"""Ray-cast range sensing and floor-reflectance line sensing.

The eight range sensors sit on the body perimeter with 45 degrees of
separation, indexed clockwise from the robot's heading, and report
surface-to-object distance in millimeters.  The two line sensors read the
floor reflectance under their body-frame mounting points through a 10-bit
ADC.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

from .core import Pose2D, RobotParams, WorldModel, floor_reflectance

ADC_FULL_SCALE = 1023.0

# Hits closer than this along the ray are treated as the sensor touching its
# own mounting point and ignored.
_T_MIN = 1e-12


@dataclass(frozen=True)
class TofReading:
    """Eight range values in millimeters; invalid channels hold the sentinel."""

    distances: tuple[float, ...]
    valid: tuple[bool, ...]


@dataclass(frozen=True)
class AdcFrame:
    """Eight ADC counts in [0, 1023]; channel 0 is the left line sensor,
    channel 1 the right, channels 2-7 are unwired spares."""

    values: tuple[float, ...]


def raycast(
    world: WorldModel,
    origin: tuple[float, float],
    bearing: float,
    max_range: float,
) -> float | None:
    """Distance to the nearest obstacle along a ray, or None past max_range."""
    if not (max_range > 0):
        raise ValueError(f"max_range must be positive, got {max_range!r}")
    ox, oy = origin
    dx = math.cos(bearing)
    dy = math.sin(bearing)
    best = None

    for seg in world.segments:
        ex = seg.x2 - seg.x1
        ey = seg.y2 - seg.y1
        denom = dx * ey - dy * ex
        if abs(denom) < 1e-15:
            continue  # parallel ray; grazing contact ignored
        qx = seg.x1 - ox
        qy = seg.y1 - oy
        t = (qx * ey - qy * ex) / denom
        s = (qx * dy - qy * dx) / denom
        if t > _T_MIN and 0.0 <= s <= 1.0 and (best is None or t < best):
            best = t

    for circ in world.circles:
        fx = ox - circ.cx
        fy = oy - circ.cy
        b = 2.0 * (dx * fx + dy * fy)
        c = fx * fx + fy * fy - circ.radius * circ.radius
        disc = b * b - 4.0 * c
        if disc < 0.0:
            continue
        sq = math.sqrt(disc)
        for t in ((-b - sq) / 2.0, (-b + sq) / 2.0):
            if t > _T_MIN and (best is None or t < best):
                best = t
                break

    if best is None or best > max_range:
        return None
    return best


def tof_bearings(theta: float, count: int = 8) -> list[float]:
    """Beam bearings in channel order: clockwise from the heading."""
    step = 2.0 * math.pi / count
    return [theta - k * step for k in range(count)]


def sample_tof_array(
    world: WorldModel,
    pose: Pose2D,
    params: RobotParams,
    noise_mm: float = 0.0,
    rng: random.Random | None = None,
) -> TofReading:
    """Cast the sensor ring and assemble the range message payload.

    Each beam originates on the body perimeter and measures from there, so a
    reading is the gap between the robot surface and the obstacle.  Misses
    report the max-range sentinel with valid=False.  Optional uniform noise
    of +-noise_mm is applied to valid channels when an rng is supplied.
    """
    sentinel = params.tof_max_range_mm
    max_range_m = params.tof_max_range_m
    distances = []
    valid = []
    for bearing in tof_bearings(pose.theta, params.tof_count):
        ox = pose.x + params.body_radius * math.cos(bearing)
        oy = pose.y + params.body_radius * math.sin(bearing)
        hit = raycast(world, (ox, oy), bearing, max_range_m)
        if hit is None:
            distances.append(sentinel)
            valid.append(False)
            continue
        mm = hit * 1000.0
        if noise_mm > 0.0 and rng is not None:
            mm += rng.uniform(-noise_mm, noise_mm)
        mm = min(max(mm, 1e-9), sentinel)
        distances.append(mm)
        valid.append(True)
    return TofReading(tuple(distances), tuple(valid))


def sample_line_sensors(
    world: WorldModel,
    pose: Pose2D,
    params: RobotParams,
    inverted: bool = False,
    noise_counts: float = 0.0,
    rng: random.Random | None = None,
) -> AdcFrame:
    """Read the two downward line sensors into an 8-channel ADC frame.

    Default polarity: white floor reads full scale, a dark line reads low.
    inverted=True flips that for hardware wired the other way around.
    """
    cos_t = math.cos(pose.theta)
    sin_t = math.sin(pose.theta)
    values = []
    for fx, fy in params.line_sensor_offsets[:2]:
        px = pose.x + fx * cos_t - fy * sin_t
        py = pose.y + fx * sin_t + fy * cos_t
        refl = floor_reflectance(world, (px, py))
        if inverted:
            refl = 1.0 - refl
        count = round(ADC_FULL_SCALE * refl)
        if noise_counts > 0.0 and rng is not None:
            count += rng.uniform(-noise_counts, noise_counts)
        values.append(min(max(float(count), 0.0), ADC_FULL_SCALE))
    while len(values) < 8:
        values.append(0.0)
    return AdcFrame(tuple(values))
