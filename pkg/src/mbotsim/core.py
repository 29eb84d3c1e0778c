"""Shared domain types: poses, twists, robot parameters, and the 2D world model."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

TWO_PI = 2.0 * math.pi

# Body-frame mounting points of the two downward line sensors, (forward, left)
# in meters.  Index 0 is the left sensor, index 1 the right one.
DEFAULT_LINE_SENSOR_OFFSETS = ((0.05, 0.02), (0.05, -0.02))


def normalize_angle(theta: float) -> float:
    """Wrap an angle to (-pi, pi].  The boundary -pi maps to +pi."""
    if not math.isfinite(theta):
        raise ValueError(f"angle must be finite, got {theta!r}")
    wrapped = math.fmod(theta, TWO_PI)
    if wrapped <= -math.pi:
        wrapped += TWO_PI
    elif wrapped > math.pi:
        wrapped -= TWO_PI
    return wrapped


@dataclass(frozen=True)
class Pose2D:
    """Planar pose; heading is counterclockwise-positive from +x, in (-pi, pi]."""

    x: float
    y: float
    theta: float

    def __post_init__(self):
        object.__setattr__(self, "theta", normalize_angle(self.theta))

    def position(self) -> tuple[float, float]:
        return (self.x, self.y)

    def distance_to(self, point: tuple[float, float]) -> float:
        return math.hypot(point[0] - self.x, point[1] - self.y)


@dataclass(frozen=True)
class Twist2D:
    """Body velocity command: linear v (m/s) and angular w (rad/s)."""

    v: float
    w: float


ZERO_TWIST = Twist2D(0.0, 0.0)


@dataclass(frozen=True)
class WheelSpeeds:
    """Angular velocity of the left and right wheels, rad/s."""

    left: float
    right: float


@dataclass(frozen=True)
class LedState:
    """RGB LED color (0-255 per channel) and intensity fraction in [0, 1]."""

    r: int
    g: int
    b: int
    intensity: float = 1.0

    def __post_init__(self):
        for name in ("r", "g", "b"):
            v = getattr(self, name)
            if not 0 <= v <= 255:
                raise ValueError(f"LED channel {name}={v} outside 0-255")
        if not 0.0 <= self.intensity <= 1.0:
            raise ValueError(f"LED intensity {self.intensity} outside [0, 1]")

    def rgb(self) -> tuple[int, int, int]:
        return (self.r, self.g, self.b)


LED_OFF = LedState(0, 0, 0, 0.0)


@dataclass(frozen=True)
class RobotParams:
    """Physical constants of one robot.

    wheel_radius and wheelbase are in meters; max_wheel_speed is the
    no-load wheel speed in rad/s and bounds every wheel command after
    saturation.  tof_max_range_mm is also the miss sentinel value
    reported on the range topic.
    """

    wheel_radius: float
    wheelbase: float
    body_radius: float
    max_wheel_speed: float
    tof_count: int = 8
    tof_max_range_mm: float = 2000.0
    line_sensor_offsets: tuple[tuple[float, float], ...] = DEFAULT_LINE_SENSOR_OFFSETS

    def __post_init__(self):
        for name in ("wheel_radius", "wheelbase", "body_radius", "max_wheel_speed"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive, got {v!r}")
        if self.tof_count < 1:
            raise ValueError(f"tof_count must be >= 1, got {self.tof_count}")
        if self.tof_max_range_mm <= 0:
            raise ValueError("tof_max_range_mm must be positive")
        object.__setattr__(
            self,
            "line_sensor_offsets",
            tuple((float(fx), float(fy)) for fx, fy in self.line_sensor_offsets),
        )

    @property
    def tof_max_range_m(self) -> float:
        return self.tof_max_range_mm / 1000.0


# Default profile.  Body diameter is 15 cm; wheel radius and wheelbase are not
# published for the track wheel set, so these are chosen to fit inside the body
# and can be overridden per scenario.  34.56 rad/s is the 330 RPM no-load speed.
SMARTMBOT_PARAMS = RobotParams(
    wheel_radius=0.016,
    wheelbase=0.11,
    body_radius=0.075,
    max_wheel_speed=34.56,
)

PARAM_PROFILES = {"smartmbot": SMARTMBOT_PARAMS}


@dataclass(frozen=True)
class Segment:
    """Obstacle line segment from (x1, y1) to (x2, y2), meters."""

    x1: float
    y1: float
    x2: float
    y2: float


@dataclass(frozen=True)
class Circle:
    """Circular obstacle: center (cx, cy) and radius, meters."""

    cx: float
    cy: float
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError(f"circle radius must be positive, got {self.radius}")


class FloorMap:
    """Grayscale reflectance grid with half-open cells.

    Cell (ix, iy) covers [origin + i*cell, origin + (i+1)*cell) on each axis.
    Points outside the grid read the background reflectance.
    """

    def __init__(
        self,
        origin: tuple[float, float],
        cell_size: float,
        width: int,
        height: int,
        background: float = 1.0,
    ):
        if cell_size <= 0:
            raise ValueError(f"cell_size must be positive, got {cell_size}")
        if width < 1 or height < 1:
            raise ValueError("floor grid must be at least 1x1")
        if not 0.0 <= background <= 1.0:
            raise ValueError(f"background reflectance {background} outside [0, 1]")
        self.origin = (float(origin[0]), float(origin[1]))
        self.cell_size = float(cell_size)
        self.width = int(width)
        self.height = int(height)
        self.background = float(background)
        # Row-major: cells[iy][ix]
        self.cells = [[self.background] * self.width for _ in range(self.height)]

    def cell_index(self, point: tuple[float, float]) -> tuple[int, int] | None:
        ix = math.floor((point[0] - self.origin[0]) / self.cell_size)
        iy = math.floor((point[1] - self.origin[1]) / self.cell_size)
        if 0 <= ix < self.width and 0 <= iy < self.height:
            return (ix, iy)
        return None

    def value_at(self, point: tuple[float, float]) -> float:
        idx = self.cell_index(point)
        if idx is None:
            return self.background
        return self.cells[idx[1]][idx[0]]

    def set_cell(self, ix: int, iy: int, value: float) -> None:
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"reflectance {value} outside [0, 1]")
        self.cells[iy][ix] = float(value)

    def paint_polyline(self, points: list[tuple[float, float]], width: float, value: float) -> None:
        """Paint every cell whose center lies within width/2 of the polyline."""
        if len(points) < 2:
            raise ValueError("polyline needs at least 2 points")
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"reflectance {value} outside [0, 1]")
        half = width / 2.0
        cs = self.cell_size
        ox, oy = self.origin
        for (ax, ay), (bx, by) in zip(points, points[1:]):
            # Only visit cells inside the segment's padded bounding box.
            lo_ix = max(0, math.floor((min(ax, bx) - half - ox) / cs))
            hi_ix = min(self.width - 1, math.floor((max(ax, bx) + half - ox) / cs))
            lo_iy = max(0, math.floor((min(ay, by) - half - oy) / cs))
            hi_iy = min(self.height - 1, math.floor((max(ay, by) + half - oy) / cs))
            ex, ey = bx - ax, by - ay
            seg_len_sq = ex * ex + ey * ey
            for iy in range(lo_iy, hi_iy + 1):
                py = oy + (iy + 0.5) * cs
                row = self.cells[iy]
                for ix in range(lo_ix, hi_ix + 1):
                    px = ox + (ix + 0.5) * cs
                    if seg_len_sq > 0:
                        t = ((px - ax) * ex + (py - ay) * ey) / seg_len_sq
                        t = 0.0 if t < 0.0 else (1.0 if t > 1.0 else t)
                    else:
                        t = 0.0
                    dx = px - (ax + t * ex)
                    dy = py - (ay + t * ey)
                    if dx * dx + dy * dy <= half * half:
                        row[ix] = value


@dataclass
class WorldModel:
    """Obstacles plus the floor reflectance map queried by the sensors."""

    segments: list[Segment] = field(default_factory=list)
    circles: list[Circle] = field(default_factory=list)
    floor: FloorMap | None = None
    bounds: tuple[float, float, float, float] | None = None


def floor_reflectance(world: WorldModel, point: tuple[float, float]) -> float:
    """Reflectance under a world point; background (white, 1.0) off the grid."""
    if world.floor is None:
        return 1.0
    return world.floor.value_at(point)
