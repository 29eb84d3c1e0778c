"""Deterministic fixed-timestep simulation engine.

Each step runs a fixed sequence: drain teleoperation commands, fire due
scheduled sensor publishers from current poses, run controllers on their
freshest inputs, consume the motor and LED topics (later stamp wins; a twist
beats a PWM command on a tie), integrate poses along exact arcs, then append
one log sample per robot stamped with the end-of-step clock.  Identical
configs and seeds produce bit-identical logs.
"""

from __future__ import annotations

import json
import math
import random
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path as FsPath

from . import bus as busmod
from .bus import Bus, TopicMessage, TopicSpec, make_image_stub
from .controllers import (
    GoToGoalConfig,
    LineFollowConfig,
    Path,
    PurePursuitConfig,
    go_to_goal_step,
    leader_follower_step,
    led_for_status,
    line_follow_step,
    pure_pursuit_step,
    rendezvous_step,
    select_lookahead,
)
from .core import (
    Circle,
    FloorMap,
    LedState,
    PARAM_PROFILES,
    Pose2D,
    RobotParams,
    Segment,
    Twist2D,
    WheelSpeeds,
    WorldModel,
)
from .kinematics import PwmCommand, body_to_wheel, integrate_pose, pwm_to_wheel_speed, wheel_to_body
from .sensors import AdcFrame, TofReading, sample_line_sensors, sample_tof_array

SUFFIX_IMAGE_RAW = "image_raw"
SUFFIX_IMAGE_COMPRESSED = "image_raw/compressed"
SUFFIX_ADC = "reading_spi_adc"
SUFFIX_TOF = "reading_tof_array"
SUFFIX_CMD_VEL = "writing_dc_cmd_vel"
SUFFIX_MOTOR_VEL = "writing_dc_motor_vel"
SUFFIX_LED = "writing_gpio_smd5050_led"
SUFFIX_STRIP = "writing_ws2813b_rgb_strip"
# Artifact addition standing in for the motion-capture system: ground-truth
# pose as a 3-entry float array, published every 10 ms.
SUFFIX_GROUND_TRUTH = "ground_truth_pose"

ROBOT_TOPIC_SUFFIXES = (
    SUFFIX_IMAGE_RAW,
    SUFFIX_IMAGE_COMPRESSED,
    SUFFIX_ADC,
    SUFFIX_TOF,
    SUFFIX_CMD_VEL,
    SUFFIX_MOTOR_VEL,
    SUFFIX_LED,
    SUFFIX_STRIP,
    SUFFIX_GROUND_TRUTH,
)

DEFAULT_RATES = {
    SUFFIX_IMAGE_RAW: 12.0,
    SUFFIX_IMAGE_COMPRESSED: 30.0,
    SUFFIX_ADC: 50.0,
    SUFFIX_TOF: 15.0,
}
GROUND_TRUTH_RATE = 100.0

RAW_IMAGE_STUB_BYTES = 64 * 1024
COMPRESSED_IMAGE_STUB_BYTES = 8 * 1024

DEFAULT_DT = 0.01

CSV_COLUMNS = ("t", "robot", "x", "y", "theta", "v_cmd", "w_cmd", "led_r", "led_g", "led_b")


def topic_name(robot: str, suffix: str) -> str:
    return f"/{robot}/{suffix}"


class ScenarioError(ValueError):
    """A scenario document violated the schema; the message names the field."""


@dataclass(frozen=True)
class LogSample:
    t: float
    x: float
    y: float
    theta: float
    v_cmd: float
    w_cmd: float
    led_r: int
    led_g: int
    led_b: int


@dataclass(frozen=True)
class Event:
    t: float
    robot: str
    kind: str
    detail: dict


class TrajectoryLog:
    """Per-robot time series of poses and commands plus the event list.

    Samples record end-of-step state, so the first entry is at t = dt.
    """

    def __init__(self, robot_names: list[str]):
        self.robot_names = list(robot_names)
        self.samples: dict[str, list[LogSample]] = {n: [] for n in self.robot_names}
        self.events: list[Event] = []

    def n_steps(self) -> int:
        if not self.robot_names:
            return 0
        return len(self.samples[self.robot_names[0]])

    def is_empty(self) -> bool:
        return self.n_steps() == 0

    def final_sample(self, robot: str) -> LogSample:
        return self.samples[robot][-1]

    def rows(self):
        """Samples in export order: by step, then by robot config order."""
        for i in range(self.n_steps()):
            for name in self.robot_names:
                yield name, self.samples[name][i]

    @classmethod
    def from_jsonl(cls, source) -> "TrajectoryLog":
        """Rebuild a log from a JSONL export.  Events are not serialized."""
        path = FsPath(source)
        names: list[str] = []
        samples: dict[str, list[LogSample]] = {}
        for line in path.read_text().splitlines():
            if not line.strip():
                continue
            obj = json.loads(line)
            name = obj["robot"]
            if name not in samples:
                names.append(name)
                samples[name] = []
            samples[name].append(
                LogSample(
                    obj["t"], obj["x"], obj["y"], obj["theta"],
                    obj["v_cmd"], obj["w_cmd"],
                    obj["led_r"], obj["led_g"], obj["led_b"],
                )
            )
        log = cls(names)
        log.samples = samples
        return log


def _sample_fields(name: str, s: LogSample) -> list:
    return [s.t, name, s.x, s.y, s.theta, s.v_cmd, s.w_cmd, s.led_r, s.led_g, s.led_b]


def export_log_text(log: TrajectoryLog, fmt: str) -> str:
    if log.is_empty():
        raise ValueError("log is empty; nothing to export")
    if fmt == "csv":
        lines = [",".join(CSV_COLUMNS)]
        for name, s in log.rows():
            lines.append(",".join(repr(v) if isinstance(v, float) else str(v)
                                  for v in _sample_fields(name, s)))
        return "\n".join(lines) + "\n"
    if fmt == "jsonl":
        lines = []
        for name, s in log.rows():
            obj = dict(zip(CSV_COLUMNS, _sample_fields(name, s)))
            lines.append(json.dumps(obj, separators=(",", ":")))
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown export format {fmt!r}")


def export_log(log: TrajectoryLog, fmt: str, destination) -> None:
    """Write the log as CSV or JSONL.  Raises on an empty log."""
    text = export_log_text(log, fmt)
    FsPath(destination).write_text(text)


# --------------------------------------------------------------------------
# Scenario parsing


@dataclass
class SensorOptions:
    tof_noise_mm: float = 0.0
    adc_noise_counts: float = 0.0
    adc_inverted: bool = False


@dataclass
class RobotSetup:
    name: str
    params: RobotParams
    pose: Pose2D
    controller: dict


@dataclass
class Scenario:
    name: str
    world: WorldModel
    robots: list[RobotSetup]
    duration: float
    dt: float
    seed: int
    rates: dict[str, float]
    sensors: SensorOptions
    teleop_v_max: float
    teleop_w_max: float
    command_timeout_steps: int | None
    doc: dict = field(repr=False, default_factory=dict)


def _expect(doc: dict, key: str, kinds, ctx: str, default=None, required=False):
    if key not in doc:
        if required:
            raise ScenarioError(f"{ctx}.{key}: missing required field")
        return default
    value = doc[key]
    if kinds is not None and not isinstance(value, kinds):
        raise ScenarioError(f"{ctx}.{key}: expected {kinds}, got {type(value).__name__}")
    return value


def _expect_number(doc: dict, key: str, ctx: str, default=None, required=False, positive=False):
    value = _expect(doc, key, (int, float), ctx, default=default, required=required)
    if value is None:
        return None
    if isinstance(value, bool):
        raise ScenarioError(f"{ctx}.{key}: expected a number")
    value = float(value)
    if positive and not value > 0:
        raise ScenarioError(f"{ctx}.{key}: must be positive, got {value}")
    return value


def _expect_point(doc: dict, key: str, ctx: str, required=True):
    value = _expect(doc, key, (list, tuple), ctx, required=required)
    if value is None:
        return None
    if len(value) != 2 or not all(isinstance(v, (int, float)) for v in value):
        raise ScenarioError(f"{ctx}.{key}: expected [x, y]")
    return (float(value[0]), float(value[1]))


def _parse_floor(doc: dict, ctx: str) -> FloorMap:
    origin = _expect_point(doc, "origin", ctx)
    cell = _expect_number(doc, "cell_size", ctx, required=True, positive=True)
    width = _expect(doc, "width", int, ctx, required=True)
    height = _expect(doc, "height", int, ctx, required=True)
    background = _expect_number(doc, "background", ctx, default=1.0)
    floor = FloorMap(origin, cell, width, height, background)
    for i, stroke in enumerate(_expect(doc, "paint", list, ctx, default=[])):
        sctx = f"{ctx}.paint[{i}]"
        pts = _expect(stroke, "polyline", list, sctx, required=True)
        if len(pts) < 2:
            raise ScenarioError(f"{sctx}.polyline: needs at least 2 points")
        points = [(float(p[0]), float(p[1])) for p in pts]
        floor.paint_polyline(
            points,
            _expect_number(stroke, "width", sctx, required=True, positive=True),
            _expect_number(stroke, "value", sctx, required=True),
        )
    return floor


def _parse_world(doc: dict) -> WorldModel:
    world = WorldModel()
    ctx = "world"
    bounds = _expect(doc, "bounds", (list, tuple), ctx)
    if bounds is not None:
        if len(bounds) != 4:
            raise ScenarioError("world.bounds: expected [xmin, ymin, xmax, ymax]")
        world.bounds = tuple(float(v) for v in bounds)
    for i, seg in enumerate(_expect(doc, "segments", list, ctx, default=[])):
        if len(seg) != 4:
            raise ScenarioError(f"world.segments[{i}]: expected [x1, y1, x2, y2]")
        world.segments.append(Segment(*(float(v) for v in seg)))
    for i, circ in enumerate(_expect(doc, "circles", list, ctx, default=[])):
        if len(circ) != 3:
            raise ScenarioError(f"world.circles[{i}]: expected [cx, cy, radius]")
        world.circles.append(Circle(float(circ[0]), float(circ[1]), float(circ[2])))
    floor_doc = _expect(doc, "floor", dict, ctx)
    if floor_doc is not None:
        world.floor = _parse_floor(floor_doc, "world.floor")
    return world


def _parse_params(value, ctx: str) -> RobotParams:
    if value is None:
        return PARAM_PROFILES["smartmbot"]
    if isinstance(value, str):
        if value not in PARAM_PROFILES:
            raise ScenarioError(f"{ctx}: unknown params profile {value!r}")
        return PARAM_PROFILES[value]
    if not isinstance(value, dict):
        raise ScenarioError(f"{ctx}: expected a profile name or an object")
    profile = value.get("profile")
    if profile is not None:
        if profile not in PARAM_PROFILES:
            raise ScenarioError(f"{ctx}.profile: unknown profile {profile!r}")
        base = PARAM_PROFILES[profile]
        fields = {
            "wheel_radius": base.wheel_radius,
            "wheelbase": base.wheelbase,
            "body_radius": base.body_radius,
            "max_wheel_speed": base.max_wheel_speed,
            "tof_count": base.tof_count,
            "tof_max_range_mm": base.tof_max_range_mm,
            "line_sensor_offsets": base.line_sensor_offsets,
        }
    else:
        fields = {}
        for key in ("wheel_radius", "wheelbase", "body_radius", "max_wheel_speed"):
            if key not in value:
                raise ScenarioError(f"{ctx}.{key}: missing required field")
    for key in ("wheel_radius", "wheelbase", "body_radius", "max_wheel_speed",
                "tof_max_range_mm"):
        if key in value:
            fields[key] = _expect_number(value, key, ctx, required=True, positive=True)
    if "tof_count" in value:
        fields["tof_count"] = _expect(value, "tof_count", int, ctx, required=True)
    if "line_sensor_offsets" in value:
        offs = value["line_sensor_offsets"]
        if len(offs) != 2:
            raise ScenarioError(f"{ctx}.line_sensor_offsets: expected exactly 2 points")
        fields["line_sensor_offsets"] = tuple((float(p[0]), float(p[1])) for p in offs)
    try:
        return RobotParams(**fields)
    except ValueError as exc:
        raise ScenarioError(f"{ctx}: {exc}") from exc


def _parse_scenario(doc: dict, name_hint: str = "scenario") -> Scenario:
    if not isinstance(doc, dict):
        raise ScenarioError("scenario: expected a JSON object at the top level")
    name = _expect(doc, "name", str, "scenario", default=name_hint)
    world = _parse_world(_expect(doc, "world", dict, "scenario", default={}))
    duration = _expect_number(doc, "duration", "scenario", required=True, positive=True)
    dt = _expect_number(doc, "dt", "scenario", default=DEFAULT_DT, positive=True)
    seed = _expect(doc, "seed", int, "scenario", default=0)

    rates = dict(DEFAULT_RATES)
    for key, value in _expect(doc, "rates", dict, "scenario", default={}).items():
        if key not in DEFAULT_RATES:
            raise ScenarioError(f"rates.{key}: unknown topic suffix")
        if not isinstance(value, (int, float)) or not value > 0:
            raise ScenarioError(f"rates.{key}: must be a positive rate in Hz")
        rates[key] = float(value)
    # The scheduler assumes at most one fire per step per topic; the
    # ground-truth topic is pinned at 100 Hz and exempt from this bound.
    max_rate = max(rates.values())
    if dt > 1.0 / (2.0 * max_rate) + 1e-12:
        raise ScenarioError(
            f"dt: {dt} exceeds 1/(2*max topic rate) = {1.0 / (2.0 * max_rate)}"
        )

    robots_doc = _expect(doc, "robots", list, "scenario", required=True)
    if not robots_doc:
        raise ScenarioError("robots: at least one robot is required")
    robots = []
    seen = set()
    for i, rdoc in enumerate(robots_doc):
        ctx = f"robots[{i}]"
        if not isinstance(rdoc, dict):
            raise ScenarioError(f"{ctx}: expected an object")
        rname = _expect(rdoc, "name", str, ctx, required=True)
        if rname in seen:
            raise ScenarioError(f"{ctx}.name: duplicate robot name {rname!r}")
        seen.add(rname)
        params = _parse_params(rdoc.get("params"), f"{ctx}.params")
        pose_v = _expect(rdoc, "pose", (list, tuple), ctx, required=True)
        if len(pose_v) != 3:
            raise ScenarioError(f"{ctx}.pose: expected [x, y, theta]")
        pose = Pose2D(float(pose_v[0]), float(pose_v[1]), float(pose_v[2]))
        controller = _expect(rdoc, "controller", dict, ctx, default={"type": "none"})
        robots.append(RobotSetup(rname, params, pose, controller))

    sensors_doc = _expect(doc, "sensors", dict, "scenario", default={})
    sensors = SensorOptions(
        tof_noise_mm=_expect_number(sensors_doc, "tof_noise_mm", "sensors", default=0.0),
        adc_noise_counts=_expect_number(sensors_doc, "adc_noise_counts", "sensors", default=0.0),
        adc_inverted=bool(sensors_doc.get("adc_inverted", False)),
    )
    teleop_doc = _expect(doc, "teleop", dict, "scenario", default={})
    timeout = _expect(doc, "command_timeout_steps", int, "scenario", default=None)

    return Scenario(
        name=name,
        world=world,
        robots=robots,
        duration=duration,
        dt=dt,
        seed=seed,
        rates=rates,
        sensors=sensors,
        teleop_v_max=_expect_number(teleop_doc, "v_max", "teleop", default=0.5),
        teleop_w_max=_expect_number(teleop_doc, "w_max", "teleop", default=3.0),
        command_timeout_steps=timeout,
        doc=doc,
    )


# --------------------------------------------------------------------------
# Controller bindings (engine-owned state around the pure step functions)


class _Binding:
    def setup(self, engine: "Engine", rt: "RobotRuntime") -> None:
        pass

    def control(self, engine: "Engine", rt: "RobotRuntime", stamp: float) -> None:
        raise NotImplementedError


class _StatusMixin:
    """Arrival bookkeeping: LED color on the strip topic plus a one-shot
    arrival event on the transition into the goal region."""

    arrival_rgb = (0, 0, 255)
    _status: bool | None = None

    def _update_status(self, engine, rt, arrived: bool, stamp: float) -> None:
        if arrived != self._status:
            led = led_for_status(arrived, self.arrival_rgb)
            engine.publish_float_array(
                rt, SUFFIX_STRIP,
                (float(led.r), float(led.g), float(led.b), led.intensity), stamp,
            )
            if arrived:
                engine.emit_event(stamp, rt.name, "arrival", {})
            self._status = arrived


class _ConstantBinding(_Binding):
    def __init__(self, v: float, w: float):
        self.twist = Twist2D(v, w)

    def control(self, engine, rt, stamp):
        engine.publish_twist(rt, self.twist, stamp)


class _GoToGoalBinding(_StatusMixin, _Binding):
    def __init__(self, goal, cfg: GoToGoalConfig, arrival_rgb=(0, 0, 255)):
        self.goal = goal
        self.cfg = cfg
        self.arrival_rgb = arrival_rgb
        self.pose: Pose2D | None = None

    def setup(self, engine, rt):
        self.sub = engine.bus.subscribe(topic_name(rt.name, SUFFIX_GROUND_TRUTH))

    def control(self, engine, rt, stamp):
        msg = self.sub.latest()
        if msg is not None:
            self.pose = Pose2D(*msg.payload)
        if self.pose is None:
            return
        engine.publish_twist(rt, go_to_goal_step(self.pose, self.goal, self.cfg), stamp)
        arrived = self.pose.distance_to(self.goal) <= self.cfg.arrival_epsilon
        self._update_status(engine, rt, arrived, stamp)


class _PurePursuitBinding(_StatusMixin, _Binding):
    def __init__(self, path: Path, cfg: PurePursuitConfig, arrival_rgb=(0, 0, 255)):
        self.path = path
        self.cfg = cfg
        self.arrival_rgb = arrival_rgb
        self.pose: Pose2D | None = None

    def setup(self, engine, rt):
        self.sub = engine.bus.subscribe(topic_name(rt.name, SUFFIX_GROUND_TRUTH))

    def control(self, engine, rt, stamp):
        msg = self.sub.latest()
        if msg is not None:
            self.pose = Pose2D(*msg.payload)
        if self.pose is None:
            return
        pos = self.pose.position()
        final = self.path.final
        if (self.path.cursor >= self.path.last_segment
                and self.pose.distance_to(final) <= self.cfg.waypoint_advance_epsilon):
            engine.publish_twist(rt, Twist2D(0.0, 0.0), stamp)
            self._update_status(engine, rt, True, stamp)
            return
        target, cursor = select_lookahead(self.path, pos, self.cfg.lookahead)
        if cursor > self.path.cursor:
            engine.emit_event(stamp, rt.name, "waypoint", {"cursor": cursor})
            self.path.cursor = cursor
        engine.publish_twist(
            rt, pure_pursuit_step(self.pose, target, self.cfg, rt.params), stamp
        )
        self._update_status(engine, rt, False, stamp)


class _LineFollowBinding(_Binding):
    def __init__(self, cfg: LineFollowConfig):
        self.cfg = cfg
        self.frame: AdcFrame | None = None
        self.last_turn: PwmCommand | None = None

    def setup(self, engine, rt):
        self.sub = engine.bus.subscribe(topic_name(rt.name, SUFFIX_ADC))

    def control(self, engine, rt, stamp):
        msg = self.sub.latest()
        if msg is not None:
            self.frame = AdcFrame(msg.payload)
        if self.frame is None:
            return
        cmd = line_follow_step(self.frame, self.cfg, self.last_turn)
        if cmd.left != cmd.right:
            self.last_turn = cmd
        engine.publish_float_array(rt, SUFFIX_MOTOR_VEL, (cmd.left, cmd.right), stamp)


class _RendezvousBinding(_StatusMixin, _Binding):
    def __init__(self, cfg: GoToGoalConfig, arrival_rgb=(0, 0, 255)):
        self.cfg = cfg
        self.arrival_rgb = arrival_rgb
        self.pose: Pose2D | None = None
        self.others: dict[str, tuple[float, float]] = {}

    def setup(self, engine, rt):
        self.own_sub = engine.bus.subscribe(topic_name(rt.name, SUFFIX_GROUND_TRUTH))
        self.other_subs = {
            other.name: engine.bus.subscribe(topic_name(other.name, SUFFIX_GROUND_TRUTH))
            for other in engine.robots
            if other.name != rt.name
        }

    def control(self, engine, rt, stamp):
        msg = self.own_sub.latest()
        if msg is not None:
            self.pose = Pose2D(*msg.payload)
        for name, sub in self.other_subs.items():
            other = sub.latest()
            if other is not None:
                self.others[name] = (other.payload[0], other.payload[1])
        if self.pose is None:
            return
        command, arrived = rendezvous_step(self.pose, list(self.others.values()), self.cfg)
        engine.publish_twist(rt, command, stamp)
        self._update_status(engine, rt, arrived, stamp)


class _LeaderFollowerBinding(_Binding):
    def __init__(self, predecessor: str, gap: float, cfg: GoToGoalConfig):
        self.predecessor = predecessor
        self.gap = gap
        self.cfg = cfg
        self.pose: Pose2D | None = None
        self.pred_pose: Pose2D | None = None

    def setup(self, engine, rt):
        self.own_sub = engine.bus.subscribe(topic_name(rt.name, SUFFIX_GROUND_TRUTH))
        self.pred_sub = engine.bus.subscribe(topic_name(self.predecessor, SUFFIX_GROUND_TRUTH))

    def control(self, engine, rt, stamp):
        msg = self.own_sub.latest()
        if msg is not None:
            self.pose = Pose2D(*msg.payload)
        pred = self.pred_sub.latest()
        if pred is not None:
            self.pred_pose = Pose2D(*pred.payload)
        if self.pose is None or self.pred_pose is None:
            return
        engine.publish_twist(
            rt, leader_follower_step(self.pose, self.pred_pose, self.gap, self.cfg), stamp
        )


def _go_to_goal_cfg(doc: dict, ctx: str) -> GoToGoalConfig:
    try:
        return GoToGoalConfig(
            kp_linear=_expect_number(doc, "kp_linear", ctx, default=0.8),
            kp_angular=_expect_number(doc, "kp_angular", ctx, default=3.0),
            arrival_epsilon=_expect_number(doc, "arrival_epsilon", ctx, default=0.05),
            v_max=_expect_number(doc, "v_max", ctx, default=0.25),
        )
    except ValueError as exc:
        raise ScenarioError(f"{ctx}: {exc}") from exc


def _arrival_rgb(doc: dict, ctx: str) -> tuple[int, int, int]:
    value = _expect(doc, "arrival_rgb", (list, tuple), ctx, default=(0, 0, 255))
    if len(value) != 3:
        raise ScenarioError(f"{ctx}.arrival_rgb: expected [r, g, b]")
    return (int(value[0]), int(value[1]), int(value[2]))


def _make_binding(doc: dict, ctx: str, robot_names: list[str], own_name: str) -> _Binding | None:
    kind = _expect(doc, "type", str, ctx, default="none")
    if kind in ("none", "teleop"):
        return None
    if kind == "constant":
        return _ConstantBinding(
            _expect_number(doc, "v", ctx, default=0.0),
            _expect_number(doc, "w", ctx, default=0.0),
        )
    if kind == "go_to_goal":
        goal = _expect_point(doc, "goal", ctx)
        return _GoToGoalBinding(goal, _go_to_goal_cfg(doc, ctx), _arrival_rgb(doc, ctx))
    if kind == "pure_pursuit":
        wps = _expect(doc, "waypoints", list, ctx, required=True)
        if len(wps) < 2:
            raise ScenarioError(f"{ctx}.waypoints: needs at least 2 points")
        try:
            path = Path(tuple((float(p[0]), float(p[1])) for p in wps))
            cfg = PurePursuitConfig(
                kp_linear=_expect_number(doc, "kp_linear", ctx, default=1.0),
                kp_angular=_expect_number(doc, "kp_angular", ctx, default=1.0),
                lookahead=_expect_number(doc, "lookahead", ctx, default=0.2),
                cruise_v=_expect_number(doc, "cruise_v", ctx, default=0.2),
                waypoint_advance_epsilon=_expect_number(
                    doc, "waypoint_advance_epsilon", ctx, default=0.05
                ),
            )
        except ValueError as exc:
            raise ScenarioError(f"{ctx}: {exc}") from exc
        return _PurePursuitBinding(path, cfg, _arrival_rgb(doc, ctx))
    if kind == "line_follow":
        try:
            cfg = LineFollowConfig(
                threshold=_expect_number(doc, "threshold", ctx, default=500.0),
                base_pwm=_expect_number(doc, "base_pwm", ctx, default=40.0),
                delta_pwm=_expect_number(doc, "delta_pwm", ctx, default=20.0),
                dark_line=bool(doc.get("dark_line", True)),
            )
        except ValueError as exc:
            raise ScenarioError(f"{ctx}: {exc}") from exc
        return _LineFollowBinding(cfg)
    if kind == "rendezvous":
        goal = _expect_point(doc, "goal", ctx, required=False)
        if goal is not None:
            # Fixed-goal variant: every agent independently homes on the goal.
            return _GoToGoalBinding(goal, _go_to_goal_cfg(doc, ctx), _arrival_rgb(doc, ctx))
        return _RendezvousBinding(_go_to_goal_cfg(doc, ctx), _arrival_rgb(doc, ctx))
    if kind == "leader_follower":
        pred = _expect(doc, "predecessor", str, ctx, required=True)
        if pred not in robot_names:
            raise ScenarioError(f"{ctx}.predecessor: unknown robot {pred!r}")
        if pred == own_name:
            raise ScenarioError(f"{ctx}.predecessor: robot cannot follow itself")
        gap = _expect_number(doc, "gap", ctx, default=0.4, positive=True)
        return _LeaderFollowerBinding(pred, gap, _go_to_goal_cfg(doc, ctx))
    raise ScenarioError(f"{ctx}.type: unknown controller type {kind!r}")


# --------------------------------------------------------------------------
# Runtime


@dataclass
class RobotRuntime:
    name: str
    params: RobotParams
    pose: Pose2D
    binding: _Binding | None
    rng: random.Random
    wheels: WheelSpeeds = WheelSpeeds(0.0, 0.0)
    led: LedState = LedState(0, 0, 0, 0.0)
    effective: Twist2D = Twist2D(0.0, 0.0)
    last_tof: TofReading | None = None
    last_adc: AdcFrame | None = None
    faulted: bool = False
    steps_since_command: int = 0
    handles: dict = field(default_factory=dict)
    cmd_sub: object = None
    motor_sub: object = None
    led_sub: object = None
    strip_sub: object = None


@dataclass(frozen=True)
class RobotView:
    name: str
    x: float
    y: float
    theta: float
    led: tuple[int, int, int]
    tof: tuple[float, ...]
    line: tuple[float, float]
    v: float
    w: float


@dataclass(frozen=True)
class Snapshot:
    step: int
    t: float
    done: bool
    robots: tuple[RobotView, ...]
    watched: tuple[TopicMessage, ...] = ()


class Engine:
    """Owns the bus, the robots, and the clock.  Single-threaded stepping;
    the only cross-thread entry points are inject_teleop() and the watch
    request queue, both drained at step boundaries."""

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.world = scenario.world
        self.dt = scenario.dt
        self.duration = scenario.duration
        self.bus = Bus()
        self.clock = 0.0
        self._step_count = 0
        self.total_steps = int(math.ceil(scenario.duration / scenario.dt - 1e-9))
        self._teleop: deque = deque()
        self._watch_requests: deque = deque()
        self._watch_subs: dict[str, object] = {}
        self._overlaps: set[tuple[str, str]] = set()

        self.robots: list[RobotRuntime] = []
        for setup in scenario.robots:
            rng = random.Random(f"{scenario.seed}:{setup.name}")
            binding = _make_binding(
                setup.controller,
                f"robots[{setup.name}].controller",
                [r.name for r in scenario.robots],
                setup.name,
            )
            self.robots.append(RobotRuntime(setup.name, setup.params, setup.pose, binding, rng))

        self.log = TrajectoryLog([r.name for r in self.robots])
        for rt in self.robots:
            self._advertise_robot(rt)
        for rt in self.robots:
            if rt.binding is not None:
                rt.binding.setup(self, rt)

    # -- wiring ------------------------------------------------------------

    def _advertise_robot(self, rt: RobotRuntime) -> None:
        rates = self.scenario.rates
        opts = self.scenario.sensors
        name = rt.name

        def tof_source():
            reading = sample_tof_array(
                self.world, rt.pose, rt.params, opts.tof_noise_mm, rt.rng
            )
            rt.last_tof = reading
            return reading.distances

        def adc_source():
            frame = sample_line_sensors(
                self.world, rt.pose, rt.params, opts.adc_inverted,
                opts.adc_noise_counts, rt.rng,
            )
            rt.last_adc = frame
            return frame.values

        def gt_source():
            return (rt.pose.x, rt.pose.y, rt.pose.theta)

        raw_stub = make_image_stub(RAW_IMAGE_STUB_BYTES)
        compressed_stub = make_image_stub(COMPRESSED_IMAGE_STUB_BYTES)
        bus = self.bus
        rt.handles[SUFFIX_IMAGE_RAW] = bus.register_scheduled_publisher(
            TopicSpec(topic_name(name, SUFFIX_IMAGE_RAW), busmod.IMAGE_STUB,
                      rates[SUFFIX_IMAGE_RAW]),
            lambda: raw_stub,
        )
        rt.handles[SUFFIX_IMAGE_COMPRESSED] = bus.register_scheduled_publisher(
            TopicSpec(topic_name(name, SUFFIX_IMAGE_COMPRESSED), busmod.IMAGE_STUB,
                      rates[SUFFIX_IMAGE_COMPRESSED]),
            lambda: compressed_stub,
        )
        rt.handles[SUFFIX_ADC] = bus.register_scheduled_publisher(
            TopicSpec(topic_name(name, SUFFIX_ADC), busmod.FLOAT_ARRAY,
                      rates[SUFFIX_ADC], array_len=8),
            adc_source,
        )
        rt.handles[SUFFIX_TOF] = bus.register_scheduled_publisher(
            TopicSpec(topic_name(name, SUFFIX_TOF), busmod.FLOAT_ARRAY,
                      rates[SUFFIX_TOF], array_len=8),
            tof_source,
        )
        rt.handles[SUFFIX_GROUND_TRUTH] = bus.register_scheduled_publisher(
            TopicSpec(topic_name(name, SUFFIX_GROUND_TRUTH), busmod.FLOAT_ARRAY,
                      GROUND_TRUTH_RATE, array_len=3),
            gt_source,
        )
        rt.handles[SUFFIX_CMD_VEL] = bus.advertise(
            TopicSpec(topic_name(name, SUFFIX_CMD_VEL), busmod.TWIST)
        )
        rt.handles[SUFFIX_MOTOR_VEL] = bus.advertise(
            TopicSpec(topic_name(name, SUFFIX_MOTOR_VEL), busmod.FLOAT_ARRAY, array_len=2)
        )
        rt.handles[SUFFIX_LED] = bus.advertise(
            TopicSpec(topic_name(name, SUFFIX_LED), busmod.FLOAT_ARRAY, array_len=4)
        )
        rt.handles[SUFFIX_STRIP] = bus.advertise(
            TopicSpec(topic_name(name, SUFFIX_STRIP), busmod.FLOAT_ARRAY, array_len=4)
        )
        rt.cmd_sub = bus.subscribe(topic_name(name, SUFFIX_CMD_VEL))
        rt.motor_sub = bus.subscribe(topic_name(name, SUFFIX_MOTOR_VEL))
        rt.led_sub = bus.subscribe(topic_name(name, SUFFIX_LED))
        rt.strip_sub = bus.subscribe(topic_name(name, SUFFIX_STRIP))

    # -- publish helpers used by bindings ----------------------------------

    def publish_twist(self, rt: RobotRuntime, twist: Twist2D, stamp: float) -> None:
        self.bus.publish(rt.handles[SUFFIX_CMD_VEL], TopicMessage(
            rt.handles[SUFFIX_CMD_VEL].spec.name, stamp, twist))

    def publish_float_array(self, rt: RobotRuntime, suffix: str, values: tuple,
                            stamp: float) -> None:
        handle = rt.handles[suffix]
        self.bus.publish(handle, TopicMessage(handle.spec.name, stamp, tuple(values)))

    def emit_event(self, t: float, robot: str, kind: str, detail: dict) -> None:
        self.log.events.append(Event(t, robot, kind, detail))

    # -- cross-thread entry points ------------------------------------------

    def inject_teleop(self, robot: str, v: float, w: float) -> None:
        """Queue a teleoperation command; applied at the next step start."""
        self._teleop.append((robot, v, w))

    def request_watch(self, name: str) -> None:
        self._watch_requests.append(name)

    # -- stepping ------------------------------------------------------------

    @property
    def done(self) -> bool:
        return self._step_count >= self.total_steps

    def _drain_teleop(self, stamp: float) -> None:
        sc = self.scenario
        while True:
            try:
                robot, v, w = self._teleop.popleft()
            except IndexError:
                break
            rt = next((r for r in self.robots if r.name == robot), None)
            if rt is None:
                continue
            v = max(-sc.teleop_v_max, min(sc.teleop_v_max, float(v)))
            w = max(-sc.teleop_w_max, min(sc.teleop_w_max, float(w)))
            self.publish_twist(rt, Twist2D(v, w), stamp)

    def _drain_watch_requests(self) -> None:
        while True:
            try:
                name = self._watch_requests.popleft()
            except IndexError:
                break
            if name not in self._watch_subs:
                self._watch_subs[name] = self.bus.subscribe(name, queue_depth=64)

    def _consume_commands(self, rt: RobotRuntime) -> None:
        best = None  # (stamp, twist-priority, arrival order, message)
        order = 0
        for msg in rt.cmd_sub.drain():
            key = (msg.stamp, 1, order)
            if best is None or key > best[0]:
                best = (key, msg)
            order += 1
        for msg in rt.motor_sub.drain():
            key = (msg.stamp, 0, order)
            if best is None or key > best[0]:
                best = (key, msg)
            order += 1
        if best is None:
            rt.steps_since_command += 1
            timeout = self.scenario.command_timeout_steps
            if timeout is not None and rt.steps_since_command > timeout:
                rt.wheels = WheelSpeeds(0.0, 0.0)
            return
        msg = best[1]
        if isinstance(msg.payload, Twist2D):
            rt.wheels = body_to_wheel(msg.payload, rt.params)
        else:
            rt.wheels = pwm_to_wheel_speed(
                PwmCommand(msg.payload[0], msg.payload[1]), rt.params
            )
        rt.steps_since_command = 0

    def _consume_led(self, rt: RobotRuntime) -> None:
        best = None
        order = 0
        for sub in (rt.led_sub, rt.strip_sub):
            for msg in sub.drain():
                key = (msg.stamp, order)
                if best is None or key > best[0]:
                    best = (key, msg)
                order += 1
        if best is None:
            return
        p = best[1].payload
        rt.led = LedState(
            int(max(0, min(255, p[0]))),
            int(max(0, min(255, p[1]))),
            int(max(0, min(255, p[2]))),
            max(0.0, min(1.0, p[3])) if len(p) > 3 else 1.0,
        )

    def _check_collisions(self, t: float) -> None:
        robots = self.robots
        for i in range(len(robots)):
            for j in range(i + 1, len(robots)):
                a, b = robots[i], robots[j]
                limit = a.params.body_radius + b.params.body_radius
                dx = a.pose.x - b.pose.x
                dy = a.pose.y - b.pose.y
                pair = (a.name, b.name)
                overlapping = dx * dx + dy * dy < limit * limit
                if overlapping and pair not in self._overlaps:
                    self._overlaps.add(pair)
                    self.emit_event(t, a.name, "collision", {"other": b.name})
                elif not overlapping:
                    self._overlaps.discard(pair)

    def step(self) -> list[Event]:
        """Advance the world by one dt.  Returns the events the step emitted."""
        t_end = (self._step_count + 1) * self.dt
        events_before = len(self.log.events)

        self._drain_watch_requests()
        self._drain_teleop(t_end)
        self.bus.fire_due(t_end)
        # Delivery is synchronous inside publish, so messages are already in
        # the subscriber queues when the controllers run.
        for rt in self.robots:
            if rt.binding is None or rt.faulted:
                continue
            try:
                rt.binding.control(self, rt, t_end)
            except Exception as exc:
                rt.faulted = True
                self.emit_event(t_end, rt.name, "fault",
                                {"error": f"{type(exc).__name__}: {exc}"})
        for rt in self.robots:
            self._consume_commands(rt)
            self._consume_led(rt)
        for rt in self.robots:
            twist = wheel_to_body(rt.wheels, rt.params)
            rt.effective = twist
            rt.pose = integrate_pose(rt.pose, twist, self.dt)

        self._step_count += 1
        self.clock = self._step_count * self.dt
        for rt in self.robots:
            self.log.samples[rt.name].append(LogSample(
                self.clock, rt.pose.x, rt.pose.y, rt.pose.theta,
                rt.effective.v, rt.effective.w,
                rt.led.r, rt.led.g, rt.led.b,
            ))
        self._check_collisions(self.clock)
        return self.log.events[events_before:]

    def run(self, duration: float | None = None) -> TrajectoryLog:
        """Step through the scenario (or the given horizon) and return the log."""
        if duration is None:
            steps = self.total_steps - self._step_count
        else:
            if not duration > 0:
                raise ValueError(f"duration must be positive, got {duration!r}")
            steps = int(math.ceil(duration / self.dt - 1e-9))
        for _ in range(steps):
            self.step()
        return self.log

    # -- read-side ------------------------------------------------------------

    def robot_names(self) -> list[str]:
        return [r.name for r in self.robots]

    def snapshot(self) -> Snapshot:
        views = []
        for rt in self.robots:
            tof = rt.last_tof.distances if rt.last_tof else (rt.params.tof_max_range_mm,) * 8
            adc = rt.last_adc.values if rt.last_adc else (0.0,) * 8
            views.append(RobotView(
                rt.name, rt.pose.x, rt.pose.y, rt.pose.theta,
                rt.led.rgb(), tof, (adc[0], adc[1]),
                rt.effective.v, rt.effective.w,
            ))
        watched = []
        for sub in self._watch_subs.values():
            watched.extend(sub.drain())
        return Snapshot(self._step_count, self.clock, self.done, tuple(views), tuple(watched))

    def world_summary(self) -> dict:
        return {
            "bounds": list(self.world.bounds) if self.world.bounds else None,
            "segments": [[s.x1, s.y1, s.x2, s.y2] for s in self.world.segments],
            "circles": [[c.cx, c.cy, c.radius] for c in self.world.circles],
        }


def load_scenario(source) -> Engine:
    """Build an engine from a scenario document (dict) or a JSON file path."""
    if isinstance(source, dict):
        return Engine(_parse_scenario(source))
    path = FsPath(source)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario file {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: invalid JSON: {exc}") from exc
    return Engine(_parse_scenario(doc, name_hint=path.stem))
