"""2-D geometry and kinematics for a disc-shaped agent among static bodies.

Everything here is deterministic: identical inputs (including the state of an
explicitly-passed random generator) produce bit-identical outputs.  Worlds are
immutable; per-world numpy lookup tables are built lazily and cached so that
the hot queries (ray casting, penetration tests) stay vectorised.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

TWO_PI = 2.0 * math.pi

# Positions closer than this to a boundary count as touching, not penetrating.
PENETRATION_TOL = 1e-6
# Gauss-Seidel projection rounds before resolve_collision gives up.
MAX_PROJECTION_ITERS = 16
# Rejection-sampling budget for free-pose search.
MAX_SPAWN_ATTEMPTS = 10_000


class GeometryError(ValueError):
    """A shape or world violates a construction invariant."""


class CollisionError(RuntimeError):
    """Collision resolution could not find a penetration-free position."""


class SpawnError(RuntimeError):
    """No free pose found within the rejection-sampling budget."""


def normalize_angle(theta: float) -> float:
    """Map an angle to [0, 2*pi)."""
    theta = math.fmod(theta, TWO_PI)
    if theta < 0.0:
        theta += TWO_PI
    return theta if theta < TWO_PI else 0.0


@dataclass(frozen=True)
class Vec2:
    x: float
    y: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise GeometryError(f"non-finite vector components ({self.x}, {self.y})")

    def __add__(self, other: "Vec2") -> "Vec2":
        return Vec2(self.x + other.x, self.y + other.y)

    def __sub__(self, other: "Vec2") -> "Vec2":
        return Vec2(self.x - other.x, self.y - other.y)

    def scaled(self, k: float) -> "Vec2":
        return Vec2(self.x * k, self.y * k)

    def dot(self, other: "Vec2") -> float:
        return self.x * other.x + self.y * other.y

    def norm(self) -> float:
        return math.hypot(self.x, self.y)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=np.float64)


@dataclass(frozen=True)
class Pose:
    """Agent position plus heading, with heading normalised to [0, 2*pi)."""

    position: Vec2
    heading: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "heading", normalize_angle(float(self.heading)))


@dataclass(frozen=True)
class Circle:
    center: Vec2
    radius: float

    def __post_init__(self) -> None:
        if not (self.radius > 0.0 and math.isfinite(self.radius)):
            raise GeometryError(f"circle radius must be positive, got {self.radius}")


@dataclass(frozen=True)
class Segment:
    """Line segment, optionally dilated to a capsule by `thickness`."""

    a: Vec2
    b: Vec2
    thickness: float = 0.0

    def __post_init__(self) -> None:
        if self.a == self.b:
            raise GeometryError("segment endpoints must be distinct")
        if self.thickness < 0.0 or not math.isfinite(self.thickness):
            raise GeometryError(f"segment thickness must be >= 0, got {self.thickness}")


@dataclass(frozen=True)
class ConvexPolygon:
    """Convex polygon with counter-clockwise vertices."""

    vertices: tuple[Vec2, ...]

    def __post_init__(self) -> None:
        verts = tuple(self.vertices)
        object.__setattr__(self, "vertices", verts)
        n = len(verts)
        if n < 3:
            raise GeometryError("polygon needs at least 3 vertices")
        area2 = 0.0
        for i in range(n):
            p, q, r = verts[i], verts[(i + 1) % n], verts[(i + 2) % n]
            e1 = q - p
            e2 = r - q
            cross = e1.x * e2.y - e1.y * e2.x
            if cross < -1e-12:
                raise GeometryError("polygon vertices must be convex and counter-clockwise")
            if e1.norm() < 1e-12:
                raise GeometryError("polygon has duplicate adjacent vertices")
            area2 += p.x * q.y - q.x * p.y
        if area2 <= 1e-12:
            raise GeometryError("polygon must have positive area (counter-clockwise winding)")


Shape = Circle | Segment | ConvexPolygon

WALL = "wall"
OBSTACLE = "obstacle"
ITEM = "item"


@dataclass(frozen=True)
class Body:
    """A world element: static solid (wall/obstacle) or pickup trigger (item)."""

    shape: Shape
    color: tuple[float, float, float]
    kind: str = OBSTACLE
    reward: float = 0.0
    item_class: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in (WALL, OBSTACLE, ITEM):
            raise GeometryError(f"unknown body kind {self.kind!r}")
        if len(self.color) != 3 or any(not (0.0 <= c <= 1.0) for c in self.color):
            raise GeometryError(f"color must be an RGB triple in [0,1], got {self.color}")
        object.__setattr__(self, "color", tuple(float(c) for c in self.color))
        if self.kind == ITEM:
            if not isinstance(self.shape, Circle):
                raise GeometryError("item bodies must be circles")
            if self.item_class is None:
                raise GeometryError("item bodies need an item_class")

    @property
    def solid(self) -> bool:
        return self.kind != ITEM


@dataclass(frozen=True)
class Bounds:
    """Axis-aligned rectangle."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self) -> None:
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise GeometryError("bounds must have positive extent")

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    def contains(self, p: Vec2, margin: float = 0.0) -> bool:
        return (
            self.x_min - margin <= p.x <= self.x_max + margin
            and self.y_min - margin <= p.y <= self.y_max + margin
        )


def _shape_extent_ok(shape: Shape, bounds: Bounds) -> bool:
    if isinstance(shape, Circle):
        c, r = shape.center, shape.radius
        return (
            bounds.x_min <= c.x - r
            and c.x + r <= bounds.x_max
            and bounds.y_min <= c.y - r
            and c.y + r <= bounds.y_max
        )
    if isinstance(shape, Segment):
        h = shape.thickness / 2.0
        return bounds.contains(shape.a, -h + 1e-12) and bounds.contains(shape.b, -h + 1e-12)
    return all(bounds.contains(v) for v in shape.vertices)


class _WorldGeometry:
    """Flat numpy views of a world's shapes, grouped by query primitive.

    Edges cover zero-thickness segments, capsule side walls, and polygon
    boundaries; discs cover circles and capsule end caps.  `body_index`
    columns map each primitive back to its owning body.
    """

    def __init__(self, world: "World") -> None:
        edges: list[tuple[float, float, float, float, int]] = []
        discs: list[tuple[float, float, float, int]] = []
        for idx, body in enumerate(world.bodies):
            shape = body.shape
            if isinstance(shape, Circle):
                discs.append((shape.center.x, shape.center.y, shape.radius, idx))
            elif isinstance(shape, Segment):
                if shape.thickness > 0.0:
                    h = shape.thickness / 2.0
                    d = shape.b - shape.a
                    inv = 1.0 / d.norm()
                    nx, ny = -d.y * inv, d.x * inv
                    for sx, sy in ((nx * h, ny * h), (-nx * h, -ny * h)):
                        edges.append(
                            (shape.a.x + sx, shape.a.y + sy, shape.b.x + sx, shape.b.y + sy, idx)
                        )
                    discs.append((shape.a.x, shape.a.y, h, idx))
                    discs.append((shape.b.x, shape.b.y, h, idx))
                else:
                    edges.append((shape.a.x, shape.a.y, shape.b.x, shape.b.y, idx))
            else:
                verts = shape.vertices
                for i in range(len(verts)):
                    p, q = verts[i], verts[(i + 1) % len(verts)]
                    edges.append((p.x, p.y, q.x, q.y, idx))

        e = np.array(edges, dtype=np.float64).reshape(-1, 5)
        self.edge_a = e[:, 0:2]
        self.edge_b = e[:, 2:4]
        self.edge_body = e[:, 4].astype(np.intp)
        self.edge_d = self.edge_b - self.edge_a

        d = np.array(discs, dtype=np.float64).reshape(-1, 4)
        self.disc_center = d[:, 0:2]
        self.disc_radius = d[:, 2]
        self.disc_body = d[:, 3].astype(np.intp)

        self.colors = np.array([b.color for b in world.bodies], dtype=np.float64).reshape(-1, 3)


@dataclass(frozen=True)
class World:
    """Immutable scene: bounds, bodies, and the agent's disc radius."""

    bounds: Bounds
    bodies: tuple[Body, ...]
    agent_radius: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "bodies", tuple(self.bodies))
        if not (self.agent_radius > 0.0 and math.isfinite(self.agent_radius)):
            raise GeometryError(f"agent_radius must be positive, got {self.agent_radius}")
        for i, body in enumerate(self.bodies):
            if not _shape_extent_ok(body.shape, self.bounds):
                raise GeometryError(f"body {i} lies outside world bounds")

    @cached_property
    def geometry(self) -> _WorldGeometry:
        return _WorldGeometry(self)

    @cached_property
    def solid_indices(self) -> tuple[int, ...]:
        return tuple(i for i, b in enumerate(self.bodies) if b.solid)

    def with_bodies(self, bodies: tuple[Body, ...]) -> "World":
        return World(self.bounds, bodies, self.agent_radius)


@dataclass(frozen=True)
class MotionParams:
    forward_speed: float = 0.12
    angular_speed: float = 0.15

    def __post_init__(self) -> None:
        if not (self.forward_speed > 0.0 and self.angular_speed > 0.0):
            raise GeometryError("motion speeds must be positive")


@dataclass(frozen=True)
class Penetration:
    depth: float
    normal: Vec2


def signed_distance(point: Vec2, shape: Shape) -> float:
    """Signed distance from a point to a shape boundary (negative inside)."""
    if isinstance(shape, Circle):
        return (point - shape.center).norm() - shape.radius
    if isinstance(shape, Segment):
        return _point_segment_distance(point, shape.a, shape.b) - shape.thickness / 2.0
    return _polygon_signed_distance(point, shape)


def _point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> float:
    d = b - a
    t = (p - a).dot(d) / d.dot(d)
    t = min(1.0, max(0.0, t))
    closest = Vec2(a.x + t * d.x, a.y + t * d.y)
    return (p - closest).norm()


def _closest_point_on_segment(p: Vec2, a: Vec2, b: Vec2) -> Vec2:
    d = b - a
    t = (p - a).dot(d) / d.dot(d)
    t = min(1.0, max(0.0, t))
    return Vec2(a.x + t * d.x, a.y + t * d.y)


def _polygon_signed_distance(p: Vec2, poly: ConvexPolygon) -> float:
    verts = poly.vertices
    n = len(verts)
    inside = True
    min_edge = math.inf
    for i in range(n):
        a, b = verts[i], verts[(i + 1) % n]
        e = b - a
        # CCW winding: interior is to the left of every edge.
        if e.x * (p.y - a.y) - e.y * (p.x - a.x) < 0.0:
            inside = False
        min_edge = min(min_edge, _point_segment_distance(p, a, b))
    return -min_edge if inside else min_edge


def circle_shape_overlap(center: Vec2, radius: float, shape: Shape) -> Penetration | None:
    """Penetration of a disc against a shape, or None when separated.

    The returned normal points from the shape toward the disc center; a fully
    degenerate configuration (center exactly on the shape spine) falls back to
    the +x axis so results stay deterministic.
    """
    if radius <= 0.0:
        raise GeometryError("query radius must be positive")
    sd = signed_distance(center, shape)
    if sd >= radius:
        return None
    depth = radius - sd
    normal = _outward_normal(center, shape)
    return Penetration(depth=depth, normal=normal)


def _outward_normal(center: Vec2, shape: Shape) -> Vec2:
    if isinstance(shape, Circle):
        d = center - shape.center
        n = d.norm()
        if n < 1e-12:
            return Vec2(1.0, 0.0)
        return d.scaled(1.0 / n)
    if isinstance(shape, Segment):
        closest = _closest_point_on_segment(center, shape.a, shape.b)
        d = center - closest
        n = d.norm()
        if n < 1e-12:
            return Vec2(1.0, 0.0)
        return d.scaled(1.0 / n)
    verts = shape.vertices
    n_verts = len(verts)
    if _polygon_signed_distance(center, shape) >= 0.0:
        best: Vec2 | None = None
        best_d = math.inf
        for i in range(n_verts):
            a, b = verts[i], verts[(i + 1) % n_verts]
            q = _closest_point_on_segment(center, a, b)
            d = (center - q).norm()
            if d < best_d:
                best_d = d
                best = center - q
        if best is None or best.norm() < 1e-12:
            return Vec2(1.0, 0.0)
        return best.scaled(1.0 / best.norm())
    # Inside: push out through the nearest edge's outward normal.
    best_edge = 0
    best_d = math.inf
    for i in range(n_verts):
        a, b = verts[i], verts[(i + 1) % n_verts]
        d = _point_segment_distance(center, a, b)
        if d < best_d:
            best_d = d
            best_edge = i
    a, b = verts[best_edge], verts[(best_edge + 1) % n_verts]
    e = b - a
    inv = 1.0 / e.norm()
    return Vec2(e.y * inv, -e.x * inv)  # right of a CCW edge = outward


def penetrations(
    center: Vec2, radius: float, world: World, include_items: bool = False
) -> list[tuple[int, Penetration]]:
    """All penetrating (body index, penetration) pairs, in body order."""
    out: list[tuple[int, Penetration]] = []
    for idx, body in enumerate(world.bodies):
        if not include_items and not body.solid:
            continue
        pen = circle_shape_overlap(center, radius, body.shape)
        if pen is not None:
            out.append((idx, pen))
    return out


def resolve_collision(center: Vec2, radius: float, world: World) -> Vec2:
    """Push a disc out of all solid bodies by iterated projection.

    One violated constraint projects out along its normal; two violated
    constraints with independent normals are solved jointly (projection onto
    the constraint intersection), which lands corner contacts on the nearest
    feasible point instead of zigzagging tangentially.  Items are triggers
    and never collide.  Raises CollisionError when the loop cannot reach a
    penetration-free position, signalling a malformed world (e.g. overlapping
    solids pinching the agent).
    """
    pos = center
    for _ in range(MAX_PROJECTION_ITERS):
        pens = _sorted_penetrations(pos, radius, world)
        if not pens:
            return pos
        if len(pens) >= 2:
            delta = _joint_delta(pens[0], pens[1])
            if delta is not None:
                pos = pos + delta
                continue
        first = pens[0]
        pos = pos + first.normal.scaled(first.depth)
        # Clearing one body may land inside another; slide along the first
        # boundary (its constraint held at zero) to clear the deepest newcomer.
        chained = _sorted_penetrations(pos, radius, world)
        if chained:
            delta = _joint_delta(Penetration(0.0, first.normal), chained[0])
            if delta is not None:
                pos = pos + delta
    for idx in world.solid_indices:
        pen = circle_shape_overlap(pos, radius, world.bodies[idx].shape)
        if pen is not None and pen.depth > PENETRATION_TOL:
            raise CollisionError(
                f"no penetration-free position within {MAX_PROJECTION_ITERS} iterations"
            )
    return pos


def _sorted_penetrations(pos: Vec2, radius: float, world: World) -> list[Penetration]:
    pens = [
        pen
        for idx in world.solid_indices
        if (pen := circle_shape_overlap(pos, radius, world.bodies[idx].shape)) is not None
        and pen.depth > 1e-9
    ]
    pens.sort(key=lambda p: p.depth, reverse=True)
    return pens


def _joint_delta(a: Penetration, b: Penetration) -> Vec2 | None:
    """Move satisfying n_a . d = depth_a and n_b . d = depth_b, if the normals
    are independent enough for the 2x2 solve to be stable."""
    cross = a.normal.x * b.normal.y - a.normal.y * b.normal.x
    if abs(cross) <= 0.1:
        return None
    dx = (a.depth * b.normal.y - b.depth * a.normal.y) / cross
    dy = (b.depth * a.normal.x - a.depth * b.normal.x) / cross
    return Vec2(dx, dy)


def integrate_agent(pose: Pose, action, params: MotionParams, world: World) -> Pose:
    """Advance the agent one step: 0=forward, 1=rotate left, 2=rotate right.

    A `(forward, turn)` pair applies both channels in one step: the heading
    turns by `turn * angular_speed`, then the disc moves `forward *
    forward_speed` along the new heading.  Rotations never translate; forward
    motion is clipped against solid bodies by projection.
    """
    if isinstance(action, (int, np.integer)):
        if action == 0:
            return _translate(pose, pose.heading, params.forward_speed, world)
        if action == 1:
            return Pose(pose.position, pose.heading + params.angular_speed)
        if action == 2:
            return Pose(pose.position, pose.heading - params.angular_speed)
        raise ValueError(f"discrete action index out of range: {action}")
    forward, turn = action
    heading = normalize_angle(pose.heading + turn * params.angular_speed)
    if forward == 0.0:
        return Pose(pose.position, heading)
    return _translate(Pose(pose.position, heading), heading, forward * params.forward_speed, world)


def _translate(pose: Pose, heading: float, distance: float, world: World) -> Pose:
    target = Vec2(
        pose.position.x + distance * math.cos(heading),
        pose.position.y + distance * math.sin(heading),
    )
    resolved = resolve_collision(target, world.agent_radius, world)
    return Pose(resolved, heading)


def spawn_free_pose(
    world: World,
    rng: np.random.Generator,
    radius: float | None = None,
    avoid: tuple[tuple[Vec2, float], ...] = (),
) -> Pose:
    """Uniformly sample a penetration-free pose at least one radius from bounds.

    Rejection-samples (x, y, heading) triples; the draw order is fixed so a
    seeded generator always yields the same pose.  `radius` defaults to the
    world's agent radius; item placement passes the item radius instead.
    `avoid` lists extra keep-out discs (center, radius), e.g. the agent when
    respawning items.
    """
    r = world.agent_radius if radius is None else radius
    lo_x, hi_x = world.bounds.x_min + r, world.bounds.x_max - r
    lo_y, hi_y = world.bounds.y_min + r, world.bounds.y_max - r
    if lo_x >= hi_x or lo_y >= hi_y:
        raise SpawnError("world bounds too small for the disc")
    for _ in range(MAX_SPAWN_ATTEMPTS):
        x = rng.uniform(lo_x, hi_x)
        y = rng.uniform(lo_y, hi_y)
        heading = rng.uniform(0.0, TWO_PI)
        center = Vec2(x, y)
        if any((center - c).norm() < r + cr for c, cr in avoid):
            continue
        if not penetrations(center, r, world, include_items=True):
            return Pose(center, heading)
    raise SpawnError(f"no free pose after {MAX_SPAWN_ATTEMPTS} attempts")
