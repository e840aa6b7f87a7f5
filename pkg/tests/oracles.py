"""Independent brute-force oracles used by the tests.

These deliberately avoid the library's analytic fast paths: signed distances
are evaluated pointwise, rays are marched on a fixed grid, collision
feasibility is found by grid search, and gradients come from central finite
differences.
"""

from __future__ import annotations

import numpy as np

from flatland.geom import Circle, ConvexPolygon, Segment, Vec2, World
from flatland import nn


def sdf_points(shape, pts: np.ndarray) -> np.ndarray:
    """Signed distance from each point (negative inside the shape)."""
    if isinstance(shape, Circle):
        d = np.hypot(pts[:, 0] - shape.center.x, pts[:, 1] - shape.center.y)
        return d - shape.radius
    if isinstance(shape, Segment):
        return _seg_distance(pts, shape.a, shape.b) - shape.thickness / 2.0
    verts = shape.vertices
    n = len(verts)
    inside = np.ones(len(pts), dtype=bool)
    min_edge = np.full(len(pts), np.inf)
    for i in range(n):
        a, b = verts[i], verts[(i + 1) % n]
        cross = (b.x - a.x) * (pts[:, 1] - a.y) - (b.y - a.y) * (pts[:, 0] - a.x)
        inside &= cross >= 0.0
        min_edge = np.minimum(min_edge, _seg_distance(pts, a, b))
    return np.where(inside, -min_edge, min_edge)


def _seg_distance(pts: np.ndarray, a: Vec2, b: Vec2) -> np.ndarray:
    dx, dy = b.x - a.x, b.y - a.y
    len_sq = dx * dx + dy * dy
    t = np.clip(((pts[:, 0] - a.x) * dx + (pts[:, 1] - a.y) * dy) / len_sq, 0.0, 1.0)
    return np.hypot(pts[:, 0] - (a.x + t * dx), pts[:, 1] - (a.y + t * dy))


def march_ray(shapes, origin: Vec2, angle: float, max_range: float, step: float):
    """Fixed-step ray march.  Returns (hit_t or None, per-shape sdf grid).

    The hit is the first grid point that lies inside any shape; the sdf grid
    lets callers apply resolution filters (near-tangent scenes are not
    certifiable at a given step size).
    """
    ts = np.arange(0.0, max_range + step / 2.0, step)
    pts = np.stack(
        [origin.x + ts * np.cos(angle), origin.y + ts * np.sin(angle)], axis=1
    )
    sdf = np.stack([sdf_points(s, pts) for s in shapes], axis=1)  # (n_points, n_shapes)
    inside = sdf <= 0.0
    any_inside = inside.any(axis=1)
    if not any_inside.any():
        return None, (ts, sdf)
    return float(ts[int(np.argmax(any_inside))]), (ts, sdf)


def march_scene_certifiable(ts: np.ndarray, sdf: np.ndarray, step: float) -> bool:
    """True when every shape's ray relationship is resolvable at this step.

    Rejects near-misses and sub-grid chords (0 < min sdf < 3 * step) and
    boundary-clipped hits whose inside run is shorter than 2 grid points.
    All shapes are convex, so the inside region along a ray is one interval.
    """
    for j in range(sdf.shape[1]):
        col = sdf[:, j]
        m = float(col.min())
        if 0.0 < m < 3.0 * step:
            return False
        if m <= 0.0:
            first = int(np.argmax(col <= 0.0))
            run = 0
            while first + run < len(col) and col[first + run] <= 0.0:
                run += 1
            if run < 2:
                return False
    return True


def _grid_pass(world: World, start: Vec2, center: Vec2, radius: float,
               window: float, resolution: float) -> Vec2 | None:
    n = int(round(2 * window / resolution)) + 1
    xs = center.x + np.linspace(-window, window, n)
    ys = center.y + np.linspace(-window, window, n)
    gx, gy = np.meshgrid(xs, ys)
    pts = np.stack([gx.reshape(-1), gy.reshape(-1)], axis=1)
    feasible = np.ones(len(pts), dtype=bool)
    for body in world.bodies:
        if not body.solid:
            continue
        feasible &= sdf_points(body.shape, pts) >= radius
    if not feasible.any():
        return None
    d2 = (pts[:, 0] - start.x) ** 2 + (pts[:, 1] - start.y) ** 2
    d2[~feasible] = np.inf
    best = int(np.argmin(d2))
    return Vec2(float(pts[best, 0]), float(pts[best, 1]))


def grid_nearest_feasible(
    world: World, start: Vec2, radius: float, window: float, resolution: float
) -> Vec2 | None:
    """Nearest penetration-free disc center around `start`, by grid search.

    Two passes keep the point count tractable: a coarse sweep of the window,
    then `resolution` sampling in a small box around the coarse optimum.
    Sound when the feasible set near the optimum is a single basin, which
    holds for the convex wedge/corner cases this oracle certifies.
    """
    coarse = max(resolution, window / 250.0)
    best = _grid_pass(world, start, start, radius, window, coarse)
    if best is None:
        return None
    return _grid_pass(world, start, best, radius, 3.0 * coarse, resolution)


def substep_forward(pose_xy, heading: float, distance: float, radius: float, world: World,
                    step: float = 1e-4):
    """March the disc forward in tiny increments, stopping before penetration."""
    x, y = pose_xy
    dx, dy = np.cos(heading) * step, np.sin(heading) * step
    n = int(distance / step)
    for _ in range(n):
        nx, ny = x + dx, y + dy
        pt = np.array([[nx, ny]])
        blocked = any(
            float(sdf_points(b.shape, pt)[0]) < radius for b in world.bodies if b.solid
        )
        if blocked:
            break
        x, y = nx, ny
    return x, y


def fd_gradients(loss_fn, params: list[dict[str, np.ndarray]], h: float = 1e-5):
    """Central finite differences of a scalar loss over every parameter."""
    grads = []
    for p in params:
        g = {}
        for key, arr in p.items():
            flat = arr.reshape(-1)
            out = np.zeros_like(flat)
            for k in range(flat.size):
                old = flat[k]
                flat[k] = old + h
                lp = loss_fn()
                flat[k] = old - h
                lm = loss_fn()
                flat[k] = old
                out[k] = (lp - lm) / (2.0 * h)
            g[key] = out.reshape(arr.shape)
        grads.append(g)
    return grads


def max_rel_error(analytic: list[dict[str, np.ndarray]], numeric: list[dict[str, np.ndarray]]):
    """Worst elementwise deviation, normalized by the gradient scale."""
    worst = 0.0
    for a_dict, n_dict in zip(analytic, numeric):
        for key in a_dict:
            a, b = a_dict[key], n_dict[key]
            scale = max(1.0, float(np.max(np.abs(a))), float(np.max(np.abs(b))))
            worst = max(worst, float(np.max(np.abs(a - b))) / scale)
    return worst


def brute_force_conv1d(x: np.ndarray, w: np.ndarray, b: np.ndarray, stride: int) -> np.ndarray:
    """Triple-loop valid cross-correlation for one sample (L, C) -> (Lout, F)."""
    length, channels = x.shape
    k, _, filters = w.shape
    n_out = (length - k) // stride + 1
    out = np.zeros((n_out, filters))
    for t in range(n_out):
        for f in range(filters):
            acc = 0.0
            for j in range(k):
                for c in range(channels):
                    acc += x[t * stride + j, c] * w[j, c, f]
            out[t, f] = acc + b[f]
    return out


def random_world(rng: np.random.Generator, extent: float = 10.0, n_shapes: int = 4,
                 agent_radius: float = 0.25) -> World:
    """A random mix of convex shapes inside a square arena (no walls)."""
    from flatland.geom import Body, Bounds, OBSTACLE

    bodies = []
    for _ in range(n_shapes):
        kind = rng.integers(3)
        cx = rng.uniform(1.5, extent - 1.5)
        cy = rng.uniform(1.5, extent - 1.5)
        color = tuple(rng.uniform(0.1, 1.0, 3))
        if kind == 0:
            shape = Circle(Vec2(cx, cy), rng.uniform(0.2, 1.0))
        elif kind == 1:
            ang = rng.uniform(0, 2 * np.pi)
            half = rng.uniform(0.3, 1.2)
            a = Vec2(cx - half * np.cos(ang), cy - half * np.sin(ang))
            b = Vec2(cx + half * np.cos(ang), cy + half * np.sin(ang))
            shape = Segment(a, b, thickness=rng.uniform(0.05, 0.3))
        else:
            # Regular polygon with random size/rotation: convex by construction.
            n_verts = int(rng.integers(3, 7))
            r = rng.uniform(0.3, 1.0)
            rot = rng.uniform(0, 2 * np.pi)
            verts = tuple(
                Vec2(cx + r * np.cos(rot + 2 * np.pi * k / n_verts),
                     cy + r * np.sin(rot + 2 * np.pi * k / n_verts))
                for k in range(n_verts)
            )
            shape = ConvexPolygon(verts)
        bodies.append(Body(shape, color, kind=OBSTACLE))
    return World(Bounds(0.0, 0.0, extent, extent), tuple(bodies), agent_radius)
