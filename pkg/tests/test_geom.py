import math

import numpy as np
import pytest

from flatland.geom import (
    Body,
    Bounds,
    Circle,
    CollisionError,
    ConvexPolygon,
    GeometryError,
    MotionParams,
    Pose,
    Segment,
    SpawnError,
    Vec2,
    World,
    circle_shape_overlap,
    integrate_agent,
    normalize_angle,
    penetrations,
    resolve_collision,
    spawn_free_pose,
)

from oracles import grid_nearest_feasible, random_world, substep_forward

GRAY = (0.5, 0.5, 0.5)


def wall(a, b, thickness=0.0):
    return Body(Segment(Vec2(*a), Vec2(*b), thickness), GRAY, kind="wall")


def empty_world(extent=10.0, agent_radius=0.25):
    return World(Bounds(0, 0, extent, extent), (), agent_radius)


# -- shape construction invariants -------------------------------------------


def test_shape_invariants_rejected():
    with pytest.raises(GeometryError):
        Circle(Vec2(0, 0), -1.0)
    with pytest.raises(GeometryError):
        Segment(Vec2(1, 1), Vec2(1, 1))
    with pytest.raises(GeometryError):
        ConvexPolygon((Vec2(0, 0), Vec2(1, 0)))
    # clockwise winding
    with pytest.raises(GeometryError):
        ConvexPolygon((Vec2(0, 0), Vec2(0, 1), Vec2(1, 0)))
    # non-convex
    with pytest.raises(GeometryError):
        ConvexPolygon((Vec2(0, 0), Vec2(2, 0), Vec2(2, 2), Vec2(1.8, 0.2), Vec2(0, 2)))


def test_world_rejects_out_of_bounds_bodies():
    with pytest.raises(GeometryError):
        World(Bounds(0, 0, 5, 5), (Body(Circle(Vec2(4.9, 2), 0.5), GRAY),), 0.25)


def test_normalize_angle():
    assert normalize_angle(2 * math.pi) == 0.0
    assert normalize_angle(-0.5) == pytest.approx(2 * math.pi - 0.5)
    assert normalize_angle(7.0) == pytest.approx(7.0 - 2 * math.pi)


# -- circle_shape_overlap -----------------------------------------------------


def test_overlap_separated_circles():
    assert circle_shape_overlap(Vec2(0, 0), 1.0, Circle(Vec2(3, 0), 1.0)) is None


def test_overlap_concentric_circles_tiebreak():
    pen = circle_shape_overlap(Vec2(0, 0), 1.0, Circle(Vec2(0, 0), 0.5))
    assert pen is not None
    assert pen.depth == pytest.approx(1.5)
    assert (pen.normal.x, pen.normal.y) == (1.0, 0.0)


def test_overlap_circle_vs_vertical_segment():
    pen = circle_shape_overlap(Vec2(0, 0), 1.0, Segment(Vec2(0.5, -2), Vec2(0.5, 2)))
    assert pen is not None
    assert pen.depth == pytest.approx(0.5)
    assert pen.normal.x == pytest.approx(-1.0)
    assert pen.normal.y == pytest.approx(0.0)


def test_overlap_polygon_inside_and_outside():
    square = ConvexPolygon((Vec2(0, 0), Vec2(2, 0), Vec2(2, 2), Vec2(0, 2)))
    outside = circle_shape_overlap(Vec2(3.0, 1.0), 0.5, square)
    assert outside is None
    near = circle_shape_overlap(Vec2(2.3, 1.0), 0.5, square)
    assert near is not None
    assert near.depth == pytest.approx(0.2)
    assert near.normal.x == pytest.approx(1.0)
    inside = circle_shape_overlap(Vec2(1.9, 1.0), 0.5, square)
    assert inside is not None
    # 0.1 inside the right edge: depth = radius + distance inside
    assert inside.depth == pytest.approx(0.6)
    assert inside.normal.x == pytest.approx(1.0)


def test_overlap_symmetry_between_circles():
    rng = np.random.default_rng(5)
    for _ in range(200):
        c1 = Vec2(*rng.uniform(-2, 2, 2))
        c2 = Vec2(*rng.uniform(-2, 2, 2))
        r1, r2 = rng.uniform(0.2, 1.5, 2)
        p12 = circle_shape_overlap(c1, r1, Circle(c2, r2))
        p21 = circle_shape_overlap(c2, r2, Circle(c1, r1))
        assert (p12 is None) == (p21 is None)
        if p12 is not None:
            assert p12.depth == pytest.approx(p21.depth, abs=1e-12)


# -- resolve_collision --------------------------------------------------------


def test_resolve_noop_when_free():
    world = World(Bounds(0, 0, 10, 10), (wall((5, 0), (5, 10)),), 0.25)
    pos = resolve_collision(Vec2(2, 2), 0.25, world)
    assert (pos.x, pos.y) == (2, 2)


def test_resolve_single_wall_projection():
    world = World(Bounds(0, 0, 10, 10), (wall((5, 0), (5, 10)),), 0.25)
    pos = resolve_collision(Vec2(4.9, 3.0), 0.25, world)
    assert pos.x == pytest.approx(4.75)
    assert pos.y == pytest.approx(3.0)


def test_resolve_ignores_items():
    item = Body(Circle(Vec2(2, 2), 0.3), (1, 0.5, 0), kind="item", reward=10, item_class="fruit")
    world = World(Bounds(0, 0, 10, 10), (item,), 0.25)
    pos = resolve_collision(Vec2(2, 2), 0.25, world)
    assert (pos.x, pos.y) == (2, 2)


def test_resolve_idempotent():
    rng = np.random.default_rng(11)
    for _ in range(50):
        world = random_world(rng)
        start = Vec2(rng.uniform(1, 9), rng.uniform(1, 9))
        once = resolve_collision(start, world.agent_radius, world)
        twice = resolve_collision(once, world.agent_radius, world)
        assert (once.x, once.y) == (twice.x, twice.y)


def test_resolve_corner_matches_grid_oracle():
    # Concave corner between two walls; push the agent into the wedge.
    for angle_deg in (90, 120, 150):
        theta = math.radians(angle_deg)
        w1 = wall((0, 0), (6, 0))
        w2 = wall((0, 0), (6 * math.cos(theta), 6 * math.sin(theta)))
        world = World(Bounds(-8, -8, 8, 8), (w1, w2), 0.3)
        start = Vec2(0.5, 0.02)  # penetrating the bottom wall near the corner
        resolved = resolve_collision(start, 0.3, world)
        assert not penetrations(resolved, 0.3 - 1e-9, world)
        oracle = grid_nearest_feasible(world, start, 0.3, window=0.6, resolution=1e-4)
        assert oracle is not None
        assert math.hypot(resolved.x - oracle.x, resolved.y - oracle.y) <= 1e-3


def test_resolve_failure_on_pinched_world():
    # Parallel capsules leave a 1.0-wide slot; a 0.6-radius agent cannot fit,
    # so projection oscillates and must signal the malformed world.
    a = Body(Segment(Vec2(2, 2), Vec2(8, 2), 3.0), GRAY)
    b = Body(Segment(Vec2(2, 6), Vec2(8, 6), 3.0), GRAY)
    world = World(Bounds(0, 0, 10, 10), (a, b), 0.6)
    with pytest.raises(CollisionError):
        resolve_collision(Vec2(5, 4.0), 0.6, world)


# -- integrate_agent ----------------------------------------------------------


def test_forward_free_motion():
    pose = integrate_agent(Pose(Vec2(0, 0), 0.0), 0, MotionParams(0.1, 0.2), empty_world())
    assert pose.position.x == pytest.approx(0.1)
    assert pose.position.y == pytest.approx(0.0)
    assert pose.heading == 0.0


def test_rotation_preserves_position():
    params = MotionParams(0.1, 0.2)
    pose = integrate_agent(Pose(Vec2(3, 4), 0.0), 1, params, empty_world())
    assert pose.heading == pytest.approx(0.2)
    assert (pose.position.x, pose.position.y) == (3, 4)
    pose = integrate_agent(Pose(Vec2(3, 4), 0.0), 2, params, empty_world())
    assert pose.heading == pytest.approx(normalize_angle(-0.2))
    assert (pose.position.x, pose.position.y) == (3, 4)


def test_forward_into_wall_stops_flush():
    # Wall 0.05 ahead of the agent disc; forward step would overshoot.
    world = World(Bounds(0, 0, 10, 10), (wall((5, 0), (5, 10)),), 0.25)
    start = Pose(Vec2(5 - 0.25 - 0.05, 3.0), 0.0)
    params = MotionParams(forward_speed=0.12, angular_speed=0.15)
    moved = integrate_agent(start, 0, params, world)
    assert moved.position.x == pytest.approx(4.75, abs=1e-9)
    ox, oy = substep_forward(
        (start.position.x, start.position.y), 0.0, params.forward_speed, 0.25, world
    )
    assert moved.position.x == pytest.approx(ox, abs=2e-4)
    assert moved.position.y == pytest.approx(oy, abs=2e-4)


def test_continuous_action_combines_turn_and_forward():
    params = MotionParams(0.1, 0.2)
    pose = integrate_agent(Pose(Vec2(0, 0), 0.0), (0.5, -1.0), params, empty_world())
    assert pose.heading == pytest.approx(normalize_angle(-0.2))
    assert pose.position.x == pytest.approx(0.05 * math.cos(-0.2))
    assert pose.position.y == pytest.approx(0.05 * math.sin(-0.2))


def test_no_penetration_invariant_under_random_scripts():
    rng = np.random.default_rng(23)
    params = MotionParams()
    for _ in range(10):
        world = random_world(rng)
        pose = spawn_free_pose(world, rng)
        for _ in range(200):
            action = int(rng.integers(3))
            pose = integrate_agent(pose, action, params, world)
            for _, pen in penetrations(pose.position, world.agent_radius, world):
                assert pen.depth <= 1e-6


def test_integrate_determinism():
    rng = np.random.default_rng(7)
    world = random_world(rng)
    actions = [int(a) for a in np.random.default_rng(1).integers(0, 3, 300)]
    params = MotionParams()

    def run():
        pose = Pose(Vec2(5.0, 5.0), 1.0)
        path = []
        for a in actions:
            pose = integrate_agent(pose, a, params, world)
            path.append((pose.position.x, pose.position.y, pose.heading))
        return path

    assert run() == run()


# -- spawn_free_pose ----------------------------------------------------------


def test_spawn_within_bounds_margin():
    world = empty_world(10.0, agent_radius=0.4)
    rng = np.random.default_rng(3)
    for _ in range(100):
        pose = spawn_free_pose(world, rng)
        assert 0.4 <= pose.position.x <= 9.6
        assert 0.4 <= pose.position.y <= 9.6
        assert 0.0 <= pose.heading < 2 * math.pi


def test_spawn_deterministic():
    world = random_world(np.random.default_rng(2))
    p1 = spawn_free_pose(world, np.random.default_rng(42))
    p2 = spawn_free_pose(world, np.random.default_rng(42))
    assert p1 == p2


def test_spawn_fails_when_fully_covered():
    blocker = Body(Circle(Vec2(5, 5), 4.99), GRAY)
    world = World(Bounds(0, 0, 10, 10), (blocker,), 2.0)
    with pytest.raises(SpawnError):
        spawn_free_pose(world, np.random.default_rng(0))
