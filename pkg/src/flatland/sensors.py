"""First-person ray-fan sensing and top-down rendering.

The agent's sole sensory input is a fan of rays returning per-ray color
intensities that fade linearly with hit distance.  Intersections are analytic
(quadratic for discs, parametric for edges); the brute-force ray-marching
variant lives in the test suite as an oracle only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geom import Circle, ConvexPolygon, Pose, Segment, Vec2, World


@dataclass(frozen=True)
class RaySensorConfig:
    n_rays: int = 64
    fov: float = math.pi
    range: float = 6.0

    def __post_init__(self) -> None:
        if self.n_rays < 1:
            raise ValueError("n_rays must be >= 1")
        if not (0.0 < self.fov <= 2.0 * math.pi):
            raise ValueError("fov must be in (0, 2*pi]")
        if self.range <= 0.0:
            raise ValueError("range must be positive")


@dataclass(frozen=True)
class RayHit:
    distance: float
    color: tuple[float, float, float]


def ray_angles(heading: float, cfg: RaySensorConfig) -> np.ndarray:
    """Absolute ray angles, fanned across the field of view.

    Ray i points at heading - fov/2 + i * fov/(n-1); a single ray looks
    straight along the heading.
    """
    if cfg.n_rays == 1:
        return np.array([heading], dtype=np.float64)
    offsets = np.linspace(-cfg.fov / 2.0, cfg.fov / 2.0, cfg.n_rays)
    return heading + offsets


def _raycast_batch(
    world: World, origin: Vec2, angles: np.ndarray, max_range: float
) -> tuple[np.ndarray, np.ndarray]:
    """Nearest hit distance and body index per ray (inf / -1 on miss)."""
    geo = world.geometry
    ox, oy = origin.x, origin.y
    dx = np.cos(angles)
    dy = np.sin(angles)
    n = angles.shape[0]
    best_t = np.full(n, np.inf)
    best_body = np.full(n, -1, dtype=np.intp)

    if geo.edge_a.shape[0]:
        # Rays o + t*d against edges a + u*(b-a): solve 2x2 per (ray, edge).
        ex = geo.edge_d[:, 0][None, :]
        ey = geo.edge_d[:, 1][None, :]
        ax = geo.edge_a[:, 0][None, :] - ox
        ay = geo.edge_a[:, 1][None, :] - oy
        denom = dx[:, None] * ey - dy[:, None] * ex
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (ax * ey - ay * ex) / denom
            u = (ax * dy[:, None] - ay * dx[:, None]) / denom
        valid = (np.abs(denom) > 1e-15) & (t >= 0.0) & (u >= 0.0) & (u <= 1.0)
        t = np.where(valid, t, np.inf)
        idx = np.argmin(t, axis=1)
        tmin = t[np.arange(n), idx]
        closer = tmin < best_t
        best_t = np.where(closer, tmin, best_t)
        best_body = np.where(closer, geo.edge_body[idx], best_body)

    if geo.disc_center.shape[0]:
        cx = geo.disc_center[:, 0][None, :] - ox
        cy = geo.disc_center[:, 1][None, :] - oy
        # |o + t*d - c|^2 = r^2 with unit d: t^2 - 2 t (d.c) + |c|^2 - r^2 = 0
        b_half = dx[:, None] * cx + dy[:, None] * cy
        c_term = cx * cx + cy * cy - geo.disc_radius[None, :] ** 2
        disc = b_half * b_half - c_term
        with np.errstate(invalid="ignore"):
            sqrt_disc = np.sqrt(np.where(disc >= 0.0, disc, np.nan))
        t1 = b_half - sqrt_disc
        t2 = b_half + sqrt_disc
        # Nearest non-negative root; a ray starting inside hits at distance 0.
        t_hit = np.where(t1 >= 0.0, t1, np.where(t2 >= 0.0, np.maximum(t1, 0.0), np.inf))
        t_hit = np.where(disc >= 0.0, t_hit, np.inf)
        idx = np.argmin(t_hit, axis=1)
        tmin = t_hit[np.arange(n), idx]
        closer = tmin < best_t
        best_t = np.where(closer, tmin, best_t)
        best_body = np.where(closer, geo.disc_body[idx], best_body)

    miss = best_t > max_range
    best_t = np.where(miss, np.inf, best_t)
    best_body = np.where(miss, -1, best_body)
    return best_t, best_body


def raycast(world: World, origin: Vec2, angle: float, max_range: float) -> RayHit | None:
    """Nearest body intersection along one ray, or None within `max_range`."""
    t, body = _raycast_batch(world, origin, np.array([angle], dtype=np.float64), max_range)
    if body[0] < 0:
        return None
    return RayHit(distance=float(t[0]), color=world.bodies[int(body[0])].color)


def render_rgb(world: World, pose: Pose, cfg: RaySensorConfig) -> np.ndarray:
    """The (n_rays, 3) observation: hit color scaled by 1 - distance/range.

    Misses are black; every entry lies in [0, 1].
    """
    angles = ray_angles(pose.heading, cfg)
    t, body = _raycast_batch(world, pose.position, angles, cfg.range)
    obs = np.zeros((cfg.n_rays, 3), dtype=np.float64)
    hit = body >= 0
    if np.any(hit):
        atten = np.maximum(0.0, 1.0 - t[hit] / cfg.range)
        obs[hit] = world.geometry.colors[body[hit]] * atten[:, None]
    return obs


def render_depth(world: World, pose: Pose, cfg: RaySensorConfig) -> np.ndarray:
    """Per-ray closeness 1 - distance/range in [0, 1]; misses are 0."""
    angles = ray_angles(pose.heading, cfg)
    t, body = _raycast_batch(world, pose.position, angles, cfg.range)
    depth = np.zeros(cfg.n_rays, dtype=np.float64)
    hit = body >= 0
    depth[hit] = np.maximum(0.0, 1.0 - t[hit] / cfg.range)
    return depth


BACKGROUND_COLOR = (1.0, 1.0, 1.0)
AGENT_COLOR = (0.1, 0.1, 0.1)
HEADING_TICK_COLOR = (1.0, 0.3, 0.3)


def render_topdown(world: World, pose: Pose, size: int, extent: float) -> np.ndarray:
    """Orthographic (size, size, 3) view of the square around the agent.

    Bodies are painted in declaration order; the agent disc and a heading
    tick are drawn last.  Row 0 is the top of the image (+y).
    """
    if size < 1:
        raise ValueError("size must be >= 1")
    if extent <= 0.0:
        raise ValueError("extent must be positive")
    cx, cy = pose.position.x, pose.position.y
    px = cx - extent / 2.0 + (np.arange(size) + 0.5) * extent / size
    py = cy + extent / 2.0 - (np.arange(size) + 0.5) * extent / size
    gx, gy = np.meshgrid(px, py)
    img = np.empty((size, size, 3), dtype=np.float64)
    img[:] = BACKGROUND_COLOR

    half_px = extent / size / 2.0
    for body in world.bodies:
        mask = _shape_mask(body.shape, gx, gy, half_px)
        img[mask] = body.color

    agent_mask = (gx - cx) ** 2 + (gy - cy) ** 2 <= world.agent_radius**2
    img[agent_mask] = AGENT_COLOR
    tick_len = world.agent_radius * 1.4
    tip = Vec2(cx + tick_len * math.cos(pose.heading), cy + tick_len * math.sin(pose.heading))
    tick = _segment_mask(Vec2(cx, cy), tip, max(half_px, world.agent_radius * 0.15), gx, gy)
    img[tick] = HEADING_TICK_COLOR
    return img


def _shape_mask(shape, gx: np.ndarray, gy: np.ndarray, half_px: float) -> np.ndarray:
    if isinstance(shape, Circle):
        return (gx - shape.center.x) ** 2 + (gy - shape.center.y) ** 2 <= shape.radius**2
    if isinstance(shape, Segment):
        # Zero-thickness walls still get one pixel of width so they are visible.
        return _segment_mask(shape.a, shape.b, max(shape.thickness / 2.0, half_px), gx, gy)
    mask = np.ones_like(gx, dtype=bool)
    verts = shape.vertices
    for i in range(len(verts)):
        a, b = verts[i], verts[(i + 1) % len(verts)]
        mask &= (b.x - a.x) * (gy - a.y) - (b.y - a.y) * (gx - a.x) >= 0.0
    return mask


def _segment_mask(a: Vec2, b: Vec2, half_width: float, gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
    dx, dy = b.x - a.x, b.y - a.y
    len_sq = dx * dx + dy * dy
    t = np.clip(((gx - a.x) * dx + (gy - a.y) * dy) / len_sq, 0.0, 1.0)
    qx = a.x + t * dx
    qy = a.y + t * dy
    return (gx - qx) ** 2 + (gy - qy) ** 2 <= half_width**2
