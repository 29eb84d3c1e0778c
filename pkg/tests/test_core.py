import math
import random

import pytest

from mbotsim.core import (
    FloorMap,
    LedState,
    Pose2D,
    RobotParams,
    SMARTMBOT_PARAMS,
    WorldModel,
    floor_reflectance,
    normalize_angle,
)


def test_normalize_identity():
    assert normalize_angle(0.0) == 0.0


def test_normalize_wraps_down():
    assert normalize_angle(3 * math.pi) == pytest.approx(math.pi, abs=1e-12)


def test_normalize_boundary_convention():
    # (-pi, pi] excludes -pi, so -pi lands on +pi.
    assert normalize_angle(-math.pi) == pytest.approx(math.pi, abs=1e-12)


def test_normalize_rejects_non_finite():
    with pytest.raises(ValueError):
        normalize_angle(float("nan"))
    with pytest.raises(ValueError):
        normalize_angle(float("inf"))


def test_normalize_idempotent_and_periodic():
    rng = random.Random(42)
    for _ in range(2000):
        x = rng.uniform(-50.0, 50.0)
        once = normalize_angle(x)
        assert -math.pi < once <= math.pi
        assert normalize_angle(once) == once
        k = rng.randint(-5, 5)
        assert normalize_angle(x + 2 * math.pi * k) == pytest.approx(once, abs=1e-9)


def test_pose_theta_always_normalized():
    pose = Pose2D(1.0, 2.0, 7.0)
    assert -math.pi < pose.theta <= math.pi
    assert pose.theta == pytest.approx(7.0 - 2 * math.pi)


def test_led_state_validation():
    with pytest.raises(ValueError):
        LedState(300, 0, 0)
    with pytest.raises(ValueError):
        LedState(0, 0, 0, 1.5)
    assert LedState(0, 255, 0).rgb() == (0, 255, 0)


def test_params_validation():
    with pytest.raises(ValueError):
        RobotParams(wheel_radius=0.0, wheelbase=0.1, body_radius=0.07, max_wheel_speed=30)
    assert SMARTMBOT_PARAMS.tof_count == 8
    assert SMARTMBOT_PARAMS.tof_max_range_mm == 2000.0
    assert SMARTMBOT_PARAMS.body_radius == 0.075


def _painted_world():
    floor = FloorMap(origin=(0.0, 0.0), cell_size=0.1, width=4, height=2)
    floor.set_cell(1, 0, 0.05)
    return WorldModel(floor=floor)


def test_floor_lookup_painted_cell():
    world = _painted_world()
    assert floor_reflectance(world, (0.15, 0.05)) == 0.05


def test_floor_lookup_outside_grid_is_background():
    world = _painted_world()
    assert floor_reflectance(world, (5.0, 5.0)) == 1.0
    assert floor_reflectance(world, (-0.01, 0.05)) == 1.0


def test_floor_lookup_half_open_boundary():
    # x = 0.1 is the shared edge of cells 0 and 1; the half-open convention
    # assigns it to cell 1, which is painted dark.
    world = _painted_world()
    assert floor_reflectance(world, (0.1, 0.0)) == 0.05
    # Likewise the far edge of cell 1 belongs to cell 2 (background).
    assert floor_reflectance(world, (0.2, 0.0)) == 1.0


def test_floor_reflectance_without_floor_is_white():
    assert floor_reflectance(WorldModel(), (0.0, 0.0)) == 1.0


def test_paint_polyline_marks_centerline_cells():
    floor = FloorMap(origin=(0.0, 0.0), cell_size=0.01, width=100, height=100)
    line = [(0.1, 0.5), (0.9, 0.5)]
    floor.paint_polyline(line, width=0.04, value=0.05)
    world = WorldModel(floor=floor)
    assert floor_reflectance(world, (0.5, 0.5)) == 0.05
    assert floor_reflectance(world, (0.5, 0.6)) == 1.0
    assert floor_reflectance(world, (0.05, 0.5)) == 1.0
