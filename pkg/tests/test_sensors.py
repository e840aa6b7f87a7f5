import math

import numpy as np
import pytest

from flatland.geom import Body, Bounds, Circle, ConvexPolygon, Pose, Segment, Vec2, World
from flatland.sensors import (
    RaySensorConfig,
    ray_angles,
    raycast,
    render_depth,
    render_rgb,
    render_topdown,
)

from oracles import march_ray, march_scene_certifiable, random_world

RED = (1.0, 0.0, 0.0)
GRAY = (0.5, 0.5, 0.5)


def one_wall_world(color=RED):
    wall = Body(Segment(Vec2(5, -10), Vec2(5, 10)), color, kind="wall")
    return World(Bounds(-10, -10, 10, 10), (wall,), 0.25)


def test_raycast_axis_aligned_hit():
    hit = raycast(one_wall_world(), Vec2(0, 0), 0.0, 10.0)
    assert hit is not None
    assert hit.distance == pytest.approx(5.0)
    assert hit.color == RED


def test_raycast_miss_pointing_away():
    assert raycast(one_wall_world(), Vec2(0, 0), math.pi, 10.0) is None


def test_raycast_range_cutoff():
    assert raycast(one_wall_world(), Vec2(0, 0), 0.0, 4.9) is None


def test_raycast_circle_and_polygon():
    circle = Body(Circle(Vec2(3, 0), 1.0), RED)
    square = Body(ConvexPolygon((Vec2(-4, -1), Vec2(-2, -1), Vec2(-2, 1), Vec2(-4, 1))), GRAY)
    world = World(Bounds(-10, -10, 10, 10), (circle, square), 0.25)
    hit = raycast(world, Vec2(0, 0), 0.0, 10.0)
    assert hit.distance == pytest.approx(2.0)
    hit = raycast(world, Vec2(0, 0), math.pi, 10.0)
    assert hit.distance == pytest.approx(2.0)
    assert hit.color == GRAY


def test_raycast_capsule_thick_segment():
    capsule = Body(Segment(Vec2(4, -2), Vec2(4, 2), 1.0), RED)
    world = World(Bounds(-10, -10, 10, 10), (capsule,), 0.25)
    hit = raycast(world, Vec2(0, 0), 0.0, 10.0)
    assert hit.distance == pytest.approx(3.5)  # side wall of the capsule
    # Aim past the end so the end cap is the first intersection.
    hit = raycast(world, Vec2(0, 2.2), 0.0, 10.0)
    assert hit is not None
    # End cap: circle of radius 0.5 at (4, 2).
    expected = 4 - math.sqrt(0.5**2 - 0.2**2)
    assert hit.distance == pytest.approx(expected)


def test_raycast_against_marching_oracle_random_scenes():
    rng = np.random.default_rng(1234)
    max_range = 6.0
    step = max_range * 1e-3
    checked = 0
    attempts = 0
    while checked < 60 and attempts < 600:
        attempts += 1
        world = random_world(rng)
        origin = Vec2(rng.uniform(0.5, 9.5), rng.uniform(0.5, 9.5))
        angle = rng.uniform(0, 2 * math.pi)
        shapes = [b.shape for b in world.bodies]
        pt = np.array([[origin.x, origin.y]])
        from oracles import sdf_points

        if min(float(sdf_points(s, pt)[0]) for s in shapes) < 0.1:
            continue
        t_march, (ts, sdf) = march_ray(shapes, origin, angle, max_range, step)
        if not march_scene_certifiable(ts, sdf, step):
            continue
        hit = raycast(world, origin, angle, max_range)
        if t_march is None:
            assert hit is None
        else:
            assert hit is not None
            assert abs(hit.distance - t_march) <= 2.0 * step
        checked += 1
    assert checked == 60


def test_render_rgb_midpoint_attenuation():
    cfg = RaySensorConfig(n_rays=5, fov=math.pi / 2, range=10.0)
    obs = render_rgb(one_wall_world(), Pose(Vec2(0, 0), 0.0), cfg)
    assert obs.shape == (5, 3)
    # Central ray hits at distance 5 = range/2 -> intensity 0.5 of pure red.
    np.testing.assert_allclose(obs[2], [0.5, 0.0, 0.0])


def test_render_rgb_empty_world_zeros():
    cfg = RaySensorConfig(n_rays=16)
    obs = render_rgb(World(Bounds(0, 0, 10, 10), (), 0.25), Pose(Vec2(5, 5), 1.0), cfg)
    assert np.all(obs == 0.0)


def test_render_rgb_single_ray_matches_raycast():
    rng = np.random.default_rng(9)
    cfg = RaySensorConfig(n_rays=1, fov=math.pi, range=6.0)
    for _ in range(20):
        world = random_world(rng)
        pose = Pose(Vec2(rng.uniform(1, 9), rng.uniform(1, 9)), rng.uniform(0, 2 * math.pi))
        obs = render_rgb(world, pose, cfg)
        hit = raycast(world, pose.position, pose.heading, cfg.range)
        if hit is None:
            assert np.all(obs[0] == 0.0)
        else:
            atten = max(0.0, 1.0 - hit.distance / cfg.range)
            np.testing.assert_allclose(obs[0], np.array(hit.color) * atten)


def test_render_rgb_values_in_unit_interval():
    rng = np.random.default_rng(77)
    cfg = RaySensorConfig()
    for _ in range(10):
        world = random_world(rng)
        pose = Pose(Vec2(rng.uniform(1, 9), rng.uniform(1, 9)), rng.uniform(0, 2 * math.pi))
        obs = render_rgb(world, pose, cfg)
        assert obs.shape == (64, 3)
        assert np.all(obs >= 0.0) and np.all(obs <= 1.0)


def _mirror_shape(shape):
    if isinstance(shape, Circle):
        return Circle(Vec2(shape.center.x, -shape.center.y), shape.radius)
    if isinstance(shape, Segment):
        return Segment(Vec2(shape.a.x, -shape.a.y), Vec2(shape.b.x, -shape.b.y), shape.thickness)
    return ConvexPolygon(tuple(Vec2(v.x, -v.y) for v in reversed(shape.vertices)))


def test_render_rgb_mirror_symmetry():
    rng = np.random.default_rng(15)
    cfg = RaySensorConfig(n_rays=32)
    for _ in range(5):
        world = random_world(rng)
        mirrored_bodies = tuple(
            Body(_mirror_shape(b.shape), b.color, kind=b.kind, reward=b.reward,
                 item_class=b.item_class)
            for b in world.bodies
        )
        mirrored = World(Bounds(0, -10, 10, 0), mirrored_bodies, world.agent_radius)
        pose = Pose(Vec2(rng.uniform(1, 9), rng.uniform(1, 9)), rng.uniform(0, 2 * math.pi))
        mirror_pose = Pose(Vec2(pose.position.x, -pose.position.y), -pose.heading)
        obs = render_rgb(world, pose, cfg)
        obs_mirror = render_rgb(mirrored, mirror_pose, cfg)
        np.testing.assert_allclose(obs_mirror, obs[::-1], atol=1e-12)


def test_render_depth_matches_attenuation():
    world = one_wall_world()
    cfg = RaySensorConfig(n_rays=9, fov=math.pi / 2, range=10.0)
    pose = Pose(Vec2(0, 0), 0.0)
    depth = render_depth(world, pose, cfg)
    assert depth.shape == (9,)
    assert depth[4] == pytest.approx(0.5)
    # Cross-check: for hit rays, depth equals the rgb attenuation factor.
    obs = render_rgb(world, pose, cfg)
    for i in range(9):
        hit = raycast(world, pose.position, ray_angles(pose.heading, cfg)[i], cfg.range)
        if hit is None:
            assert depth[i] == 0.0
            assert np.all(obs[i] == 0.0)
        else:
            np.testing.assert_allclose(obs[i], np.array(hit.color) * depth[i], atol=1e-12)


def test_render_depth_wall_touching_center():
    wall = Body(Segment(Vec2(1.0, -5), Vec2(1.0, 5)), RED, kind="wall")
    world = World(Bounds(-10, -10, 10, 10), (wall,), 0.25)
    cfg = RaySensorConfig(n_rays=3, fov=math.pi / 2, range=5.0)
    depth = render_depth(world, Pose(Vec2(1.0, 0.0), 0.0), cfg)
    assert depth[1] == pytest.approx(1.0)


def test_intensity_non_increasing_with_distance():
    cfg = RaySensorConfig(n_rays=1, range=10.0)
    world = one_wall_world()
    last = math.inf
    for x in (4.0, 3.0, 2.0, 1.0, 0.0):  # distance to the wall grows
        obs = render_rgb(world, Pose(Vec2(x, 0), 0.0), cfg)
        value = obs[0, 0]
        assert value <= last
        last = value


def test_topdown_background_and_agent():
    world = World(Bounds(0, 0, 10, 10), (), 0.25)
    img = render_topdown(world, Pose(Vec2(5, 5), 0.0), 64, 4.0)
    assert img.shape == (64, 64, 3)
    corners = [img[0, 0], img[0, -1], img[-1, 0], img[-1, -1]]
    for c in corners:
        np.testing.assert_allclose(c, [1.0, 1.0, 1.0])
    # A pixel on the lower half of the agent disc, away from the heading tick:
    # extent 4 over 64 px -> 0.0625 m/px, so 3.5 rows below center is 0.22 m,
    # inside the 0.25 m agent disc.
    assert img[35, 32, 0] < 0.5


def test_topdown_obstacle_outside_extent_absent():
    body = Body(Circle(Vec2(9, 9), 0.5), RED)
    world = World(Bounds(0, 0, 10, 10), (body,), 0.25)
    img = render_topdown(world, Pose(Vec2(2, 2), 0.0), 32, 2.0)
    assert not np.any(np.all(np.isclose(img, RED), axis=-1))


def test_topdown_pixel_at_obstacle_center_has_obstacle_color():
    body = Body(Circle(Vec2(7, 7), 0.6), RED)
    world = World(Bounds(0, 0, 10, 10), (body,), 0.25)
    extent, size = 10.0, 101
    img = render_topdown(world, Pose(Vec2(5, 5), 0.0), size, extent)
    col = int(7.0 / extent * size)
    row = int((10.0 - 7.0) / extent * size)
    np.testing.assert_allclose(img[row, col], RED)


def test_topdown_matches_point_in_shape_oracle():
    from flatland.sensors import AGENT_COLOR, BACKGROUND_COLOR, HEADING_TICK_COLOR
    from oracles import sdf_points

    rng = np.random.default_rng(21)
    for _ in range(5):
        world = random_world(rng, n_shapes=3)
        pose = Pose(Vec2(rng.uniform(3, 7), rng.uniform(3, 7)), rng.uniform(0, 2 * math.pi))
        size, extent = 48, 6.0
        img = render_topdown(world, pose, size, extent)

        half_px = extent / size / 2.0
        cx, cy = pose.position.x, pose.position.y
        px = cx - extent / 2.0 + (np.arange(size) + 0.5) * extent / size
        py = cy + extent / 2.0 - (np.arange(size) + 0.5) * extent / size
        gx, gy = np.meshgrid(px, py)
        pts = np.stack([gx.reshape(-1), gy.reshape(-1)], axis=1)

        expected = np.tile(np.array(BACKGROUND_COLOR), (len(pts), 1))
        uncertain = np.zeros(len(pts), dtype=bool)
        for body in world.bodies:
            shape = body.shape
            if isinstance(shape, Segment):
                hw = max(shape.thickness / 2.0, half_px)
                shape = Segment(shape.a, shape.b, 2.0 * hw)
            sdf = sdf_points(shape, pts)
            expected[sdf <= 0.0] = body.color
            uncertain |= np.abs(sdf) < 1e-9
        agent_sdf = sdf_points(Circle(pose.position, world.agent_radius), pts)
        expected[agent_sdf <= 0.0] = AGENT_COLOR
        uncertain |= np.abs(agent_sdf) < 1e-9
        tick_len = world.agent_radius * 1.4
        tip = Vec2(cx + tick_len * math.cos(pose.heading), cy + tick_len * math.sin(pose.heading))
        hw = max(half_px, world.agent_radius * 0.15)
        tick_sdf = sdf_points(Segment(pose.position, tip, 2.0 * hw), pts)
        expected[tick_sdf <= 0.0] = HEADING_TICK_COLOR
        uncertain |= np.abs(tick_sdf) < 1e-9

        got = img.reshape(-1, 3)
        ok = uncertain | np.all(got == expected, axis=1)
        assert ok.all()


def test_sensor_config_validation():
    with pytest.raises(ValueError):
        RaySensorConfig(n_rays=0)
    with pytest.raises(ValueError):
        RaySensorConfig(fov=0.0)
    with pytest.raises(ValueError):
        RaySensorConfig(range=-1.0)
