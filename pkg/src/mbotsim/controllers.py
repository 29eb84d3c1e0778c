"""Navigation and swarm behaviors as pure step functions.

Five behaviors: go-to-goal (proportional control on distance and heading
error), pure pursuit (steer toward a look-ahead point on a waypoint path),
two-sensor line following, multi-agent rendezvous on the centroid, and
chain-formation leader following.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import LedState, Pose2D, RobotParams, Twist2D, ZERO_TWIST, normalize_angle
from .kinematics import PwmCommand
from .sensors import AdcFrame

Point = tuple[float, float]

GREEN = (0, 255, 0)
BLUE = (0, 0, 255)


@dataclass(frozen=True)
class GoToGoalConfig:
    """Gains for the go-to-goal proportional controller.

    v = kp_linear * distance (capped at v_max); w = kp_angular * heading
    error.  Inside arrival_epsilon of the goal the command is zero.
    """

    kp_linear: float
    kp_angular: float
    arrival_epsilon: float
    v_max: float

    def __post_init__(self):
        if self.kp_linear <= 0 or self.kp_angular <= 0:
            raise ValueError("gains must be positive")
        if self.arrival_epsilon <= 0:
            raise ValueError("arrival_epsilon must be positive")
        if self.v_max <= 0:
            raise ValueError("v_max must be positive")


@dataclass(frozen=True)
class PurePursuitConfig:
    """Pure-pursuit tuning: look-ahead radius, cruise speed, and gains."""

    kp_linear: float
    kp_angular: float
    lookahead: float
    cruise_v: float
    waypoint_advance_epsilon: float

    def __post_init__(self):
        if self.lookahead <= 0:
            raise ValueError("lookahead must be positive")
        if self.cruise_v <= 0:
            raise ValueError("cruise_v must be positive")
        if self.waypoint_advance_epsilon <= 0:
            raise ValueError("waypoint_advance_epsilon must be positive")


@dataclass
class Path:
    """Ordered waypoints with a monotone cursor marking tracking progress."""

    waypoints: tuple[Point, ...]
    cursor: int = 0

    def __post_init__(self):
        self.waypoints = tuple((float(x), float(y)) for x, y in self.waypoints)
        if len(self.waypoints) < 2:
            raise ValueError("path needs at least 2 waypoints")
        if not 0 <= self.cursor < len(self.waypoints):
            raise ValueError(f"cursor {self.cursor} out of bounds")

    @property
    def last_segment(self) -> int:
        return len(self.waypoints) - 2

    @property
    def final(self) -> Point:
        return self.waypoints[-1]


@dataclass(frozen=True)
class LineFollowConfig:
    """Bang-bang line following thresholds and PWM levels.

    dark_line declares the line polarity in ADC space: True means the line
    reads below the threshold (dark line on a bright floor).
    """

    threshold: float
    base_pwm: float
    delta_pwm: float
    dark_line: bool = True

    def __post_init__(self):
        if not 0 < self.threshold < 1023:
            raise ValueError("threshold must be inside (0, 1023)")
        if self.base_pwm < 0 or self.delta_pwm < 0:
            raise ValueError("PWM levels must be non-negative")
        if self.base_pwm + self.delta_pwm > 100:
            raise ValueError("base_pwm + delta_pwm must not exceed 100")


def go_to_goal_step(pose: Pose2D, goal: Point, cfg: GoToGoalConfig) -> Twist2D:
    """Proportional drive toward a fixed goal point."""
    dx = goal[0] - pose.x
    dy = goal[1] - pose.y
    distance = math.hypot(dx, dy)
    if distance <= cfg.arrival_epsilon:
        return ZERO_TWIST
    v = min(cfg.kp_linear * distance, cfg.v_max)
    heading_error = normalize_angle(math.atan2(dy, dx) - pose.theta)
    return Twist2D(v, cfg.kp_angular * heading_error)


def _circle_segment_hits(center: Point, radius: float, a: Point, b: Point) -> list[float]:
    """Parameters s in [0, 1] where segment a->b crosses the circle."""
    ex = b[0] - a[0]
    ey = b[1] - a[1]
    fx = a[0] - center[0]
    fy = a[1] - center[1]
    qa = ex * ex + ey * ey
    if qa == 0.0:
        return []
    qb = 2.0 * (fx * ex + fy * ey)
    qc = fx * fx + fy * fy - radius * radius
    disc = qb * qb - 4.0 * qa * qc
    if disc < 0.0:
        return []
    sq = math.sqrt(disc)
    hits = []
    for s in ((-qb - sq) / (2.0 * qa), (-qb + sq) / (2.0 * qa)):
        if 0.0 <= s <= 1.0:
            hits.append(s)
    return hits


def _project_on_segment(p: Point, a: Point, b: Point) -> tuple[float, float]:
    """(clamped parameter, squared distance) of p projected onto a->b."""
    ex = b[0] - a[0]
    ey = b[1] - a[1]
    len_sq = ex * ex + ey * ey
    if len_sq == 0.0:
        t = 0.0
    else:
        t = ((p[0] - a[0]) * ex + (p[1] - a[1]) * ey) / len_sq
        t = 0.0 if t < 0.0 else (1.0 if t > 1.0 else t)
    dx = p[0] - (a[0] + t * ex)
    dy = p[1] - (a[1] + t * ey)
    return t, dx * dx + dy * dy


def select_lookahead(path: Path, position: Point, lookahead: float) -> tuple[Point, int]:
    """Pick the pursuit target on the path and the updated cursor.

    Terminal rule first: once the final waypoint is inside the look-ahead
    circle it is the target.  Otherwise the target is the farthest-along
    intersection of the circle with the remaining path; with no intersection
    the nearest point on the remaining path is used.  The cursor never
    decreases.
    """
    if lookahead <= 0:
        raise ValueError("lookahead must be positive")
    wps = path.waypoints
    cursor = path.cursor

    final = wps[-1]
    if math.hypot(final[0] - position[0], final[1] - position[1]) <= lookahead:
        return final, path.last_segment

    best = None  # (segment index, s along it)
    for i in range(cursor, path.last_segment + 1):
        hits = _circle_segment_hits(position, lookahead, wps[i], wps[i + 1])
        if hits:
            s = max(hits)
            if best is None or (i, s) > best:
                best = (i, s)
    if best is not None:
        i, s = best
        a, b = wps[i], wps[i + 1]
        return (a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])), i

    nearest = None  # (squared distance, segment index, s)
    for i in range(cursor, path.last_segment + 1):
        t, d_sq = _project_on_segment(position, wps[i], wps[i + 1])
        if nearest is None or d_sq < nearest[0]:
            nearest = (d_sq, i, t)
    _, i, t = nearest
    a, b = wps[i], wps[i + 1]
    return (a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])), i


def pure_pursuit_step(
    pose: Pose2D, target: Point, cfg: PurePursuitConfig, params: RobotParams
) -> Twist2D:
    """Steer toward the look-ahead target at cruise speed.

    alpha is the gained bearing error to the target; the steering angle
    delta = atan(kp_linear * w_b * sin(alpha) / l) is realized on the
    differential platform as the curvature w = v * tan(delta) / w_b.
    """
    alpha = cfg.kp_angular * normalize_angle(
        math.atan2(target[1] - pose.y, target[0] - pose.x) - pose.theta
    )
    delta = math.atan(cfg.kp_linear * params.wheelbase * math.sin(alpha) / cfg.lookahead)
    v = cfg.cruise_v
    return Twist2D(v, v * math.tan(delta) / params.wheelbase)


def line_follow_step(
    adc: AdcFrame, cfg: LineFollowConfig, last_turn: PwmCommand | None = None
) -> PwmCommand:
    """One bang-bang decision from the two line-sensor channels.

    When neither sensor sees the line the most recent turning command is
    repeated (pass it as last_turn); with no history the robot drives
    straight.
    """
    left_raw, right_raw = adc.values[0], adc.values[1]
    if cfg.dark_line:
        left_on = left_raw < cfg.threshold
        right_on = right_raw < cfg.threshold
    else:
        left_on = left_raw > cfg.threshold
        right_on = right_raw > cfg.threshold

    base, delta = cfg.base_pwm, cfg.delta_pwm
    if left_on and right_on:
        return PwmCommand(base, base)
    if left_on:
        return PwmCommand(base - delta, base + delta)
    if right_on:
        return PwmCommand(base + delta, base - delta)
    if last_turn is not None:
        return last_turn
    return PwmCommand(base, base)


def rendezvous_step(
    own: Pose2D, others: list[Point], cfg: GoToGoalConfig
) -> tuple[Twist2D, bool]:
    """Drive toward the centroid of all known agent positions.

    Returns the twist command and whether this agent is within
    arrival_epsilon of the centroid.
    """
    xs = [own.x] + [p[0] for p in others]
    ys = [own.y] + [p[1] for p in others]
    target = (sum(xs) / len(xs), sum(ys) / len(ys))
    command = go_to_goal_step(own, target, cfg)
    arrived = own.distance_to(target) <= cfg.arrival_epsilon
    return command, arrived


def leader_follower_step(
    own: Pose2D, predecessor: Pose2D, gap: float, cfg: GoToGoalConfig
) -> Twist2D:
    """Hold position gap meters behind the predecessor along its heading."""
    if gap <= 0:
        raise ValueError(f"gap must be positive, got {gap!r}")
    target = (
        predecessor.x - gap * math.cos(predecessor.theta),
        predecessor.y - gap * math.sin(predecessor.theta),
    )
    return go_to_goal_step(own, target, cfg)


def led_for_status(
    arrived: bool,
    arrival_rgb: tuple[int, int, int] = BLUE,
    intensity: float = 1.0,
) -> LedState:
    """Status color: green while en route, the arrival color once arrived."""
    rgb = arrival_rgb if arrived else GREEN
    return LedState(rgb[0], rgb[1], rgb[2], intensity)
