"""Environment configuration: JSON parsing, validation, and the benchmark task.

The on-disk format is a single JSON object (see ``docs/config-schema.md``).
Only ``arena`` is required; everything else falls back to the documented
defaults.  Unknown keys are rejected rather than ignored so typos fail loudly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .geom import Circle, ConvexPolygon, MotionParams, Segment, Shape, Vec2
from .sensors import RaySensorConfig

Color = tuple[float, float, float]

DISCRETE3 = "discrete3"
CONTINUOUS2 = "continuous2"

DEFAULT_EPISODE_LENGTH = 500
DEFAULT_AGENT_RADIUS = 0.25
DEFAULT_WALL_COLOR: Color = (0.5, 0.5, 0.5)


class ConfigError(ValueError):
    """Base class for configuration failures."""


class ConfigSyntaxError(ConfigError):
    """The document is not valid JSON; carries line/column context."""


class ConfigKeyError(ConfigError):
    """An object contains a key the schema does not define."""


class ConfigValueError(ConfigError):
    """A value violates a schema constraint."""


@dataclass(frozen=True)
class ItemSpec:
    count: int
    reward: float
    radius: float
    color: Color
    respawn: bool = True


@dataclass(frozen=True)
class EnvConfig:
    arena: tuple[float, float]
    walls: tuple[Segment, ...]
    obstacles: tuple[tuple[Shape, Color], ...] = ()
    items: tuple[tuple[str, ItemSpec], ...] = ()
    episode_length: int = DEFAULT_EPISODE_LENGTH
    motion: MotionParams = field(default_factory=MotionParams)
    sensor: RaySensorConfig = field(default_factory=RaySensorConfig)
    action_mode: str = DISCRETE3
    agent_radius: float = DEFAULT_AGENT_RADIUS
    wall_color: Color = DEFAULT_WALL_COLOR
    seed: int = 0

    def item_spec(self, name: str) -> ItemSpec:
        for key, spec in self.items:
            if key == name:
                return spec
        raise KeyError(name)


def perimeter_walls(width: float, height: float) -> tuple[Segment, ...]:
    c = [Vec2(0.0, 0.0), Vec2(width, 0.0), Vec2(width, height), Vec2(0.0, height)]
    return tuple(Segment(c[i], c[(i + 1) % 4]) for i in range(4))


def _expect_keys(obj: dict, allowed: set[str], where: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise ConfigKeyError(f"unknown key(s) in {where}: {', '.join(sorted(unknown))}")


def _number(obj, where: str) -> float:
    if isinstance(obj, bool) or not isinstance(obj, (int, float)):
        raise ConfigValueError(f"{where} must be a number, got {obj!r}")
    if not math.isfinite(obj):
        raise ConfigValueError(f"{where} must be finite")
    return float(obj)


def _point(obj, where: str) -> Vec2:
    if not (isinstance(obj, list) and len(obj) == 2):
        raise ConfigValueError(f"{where} must be an [x, y] pair")
    return Vec2(_number(obj[0], where), _number(obj[1], where))


def _color(obj, where: str) -> Color:
    if not (isinstance(obj, list) and len(obj) == 3):
        raise ConfigValueError(f"{where} must be an [r, g, b] triple")
    rgb = tuple(_number(v, where) for v in obj)
    if any(not (0.0 <= v <= 1.0) for v in rgb):
        raise ConfigValueError(f"{where} components must lie in [0, 1]")
    return rgb  # type: ignore[return-value]


def _shape(obj, where: str) -> Shape:
    if not isinstance(obj, dict):
        raise ConfigValueError(f"{where} must be an object")
    kind = obj.get("type")
    try:
        if kind == "circle":
            _expect_keys(obj, {"type", "center", "radius"}, where)
            return Circle(_point(obj["center"], where), _number(obj["radius"], where))
        if kind == "segment":
            _expect_keys(obj, {"type", "a", "b", "thickness"}, where)
            return Segment(
                _point(obj["a"], where),
                _point(obj["b"], where),
                _number(obj.get("thickness", 0.0), where),
            )
        if kind == "polygon":
            _expect_keys(obj, {"type", "vertices"}, where)
            verts = obj.get("vertices")
            if not isinstance(verts, list):
                raise ConfigValueError(f"{where}.vertices must be a list")
            return ConvexPolygon(tuple(_point(v, where) for v in verts))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigValueError(f"{where}: {exc}") from exc
    raise ConfigValueError(f"{where}.type must be circle, segment, or polygon, got {kind!r}")


_TOP_KEYS = {
    "arena",
    "walls",
    "wall_color",
    "obstacles",
    "items",
    "episode_length",
    "motion",
    "sensor",
    "action_mode",
    "agent_radius",
    "seed",
}


def parse_config(source) -> EnvConfig:
    """Parse and validate a JSON config from a string or readable stream."""
    text = source.read() if hasattr(source, "read") else source
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigSyntaxError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(raw, dict):
        raise ConfigValueError("top-level config must be a JSON object")
    _expect_keys(raw, _TOP_KEYS, "config")

    if "arena" not in raw:
        raise ConfigValueError("config requires an 'arena' object")
    arena_obj = raw["arena"]
    if not isinstance(arena_obj, dict):
        raise ConfigValueError("'arena' must be an object")
    _expect_keys(arena_obj, {"width", "height"}, "arena")
    width = _number(arena_obj.get("width"), "arena.width")
    height = _number(arena_obj.get("height"), "arena.height")
    if width <= 0.0 or height <= 0.0:
        raise ConfigValueError("arena dimensions must be positive")

    if "walls" in raw:
        walls_obj = raw["walls"]
        if not isinstance(walls_obj, list):
            raise ConfigValueError("'walls' must be a list")
        walls = []
        for i, w in enumerate(walls_obj):
            if not isinstance(w, dict):
                raise ConfigValueError(f"walls[{i}] must be an object")
            _expect_keys(w, {"a", "b", "thickness"}, f"walls[{i}]")
            try:
                walls.append(
                    Segment(
                        _point(w.get("a"), f"walls[{i}].a"),
                        _point(w.get("b"), f"walls[{i}].b"),
                        _number(w.get("thickness", 0.0), f"walls[{i}].thickness"),
                    )
                )
            except ValueError as exc:
                if isinstance(exc, ConfigError):
                    raise
                raise ConfigValueError(f"walls[{i}]: {exc}") from exc
        walls = tuple(walls)
    else:
        walls = perimeter_walls(width, height)

    obstacles = []
    for i, o in enumerate(raw.get("obstacles", [])):
        if not isinstance(o, dict):
            raise ConfigValueError(f"obstacles[{i}] must be an object")
        _expect_keys(o, {"shape", "color"}, f"obstacles[{i}]")
        if "shape" not in o or "color" not in o:
            raise ConfigValueError(f"obstacles[{i}] needs 'shape' and 'color'")
        obstacles.append((_shape(o["shape"], f"obstacles[{i}].shape"), _color(o["color"], f"obstacles[{i}].color")))

    items = []
    items_obj = raw.get("items", {})
    if not isinstance(items_obj, dict):
        raise ConfigValueError("'items' must be an object keyed by item class")
    for name, spec in items_obj.items():
        if not isinstance(spec, dict):
            raise ConfigValueError(f"items.{name} must be an object")
        _expect_keys(spec, {"count", "reward", "radius", "color", "respawn"}, f"items.{name}")
        count = spec.get("count")
        if isinstance(count, bool) or not isinstance(count, int) or count < 0:
            raise ConfigValueError(f"items.{name}.count must be a non-negative integer")
        radius = _number(spec.get("radius"), f"items.{name}.radius")
        if radius <= 0.0:
            raise ConfigValueError(f"items.{name}.radius must be positive")
        respawn = spec.get("respawn", True)
        if not isinstance(respawn, bool):
            raise ConfigValueError(f"items.{name}.respawn must be a boolean")
        items.append(
            (
                name,
                ItemSpec(
                    count=count,
                    reward=_number(spec.get("reward"), f"items.{name}.reward"),
                    radius=radius,
                    color=_color(spec.get("color"), f"items.{name}.color"),
                    respawn=respawn,
                ),
            )
        )

    episode_length = raw.get("episode_length", DEFAULT_EPISODE_LENGTH)
    if isinstance(episode_length, bool) or not isinstance(episode_length, int) or episode_length < 1:
        raise ConfigValueError("episode_length must be an integer >= 1")

    motion = MotionParams()
    if "motion" in raw:
        m = raw["motion"]
        if not isinstance(m, dict):
            raise ConfigValueError("'motion' must be an object")
        _expect_keys(m, {"forward_speed", "angular_speed"}, "motion")
        try:
            motion = MotionParams(
                forward_speed=_number(m.get("forward_speed", 0.12), "motion.forward_speed"),
                angular_speed=_number(m.get("angular_speed", 0.15), "motion.angular_speed"),
            )
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigValueError(str(exc)) from exc

    sensor = RaySensorConfig()
    if "sensor" in raw:
        s = raw["sensor"]
        if not isinstance(s, dict):
            raise ConfigValueError("'sensor' must be an object")
        _expect_keys(s, {"n_rays", "fov", "range"}, "sensor")
        n_rays = s.get("n_rays", 64)
        if isinstance(n_rays, bool) or not isinstance(n_rays, int) or n_rays < 1:
            raise ConfigValueError("sensor.n_rays must be an integer >= 1")
        try:
            sensor = RaySensorConfig(
                n_rays=n_rays,
                fov=_number(s.get("fov", math.pi), "sensor.fov"),
                range=_number(s.get("range", 6.0), "sensor.range"),
            )
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigValueError(str(exc)) from exc

    action_mode = raw.get("action_mode", DISCRETE3)
    if action_mode not in (DISCRETE3, CONTINUOUS2):
        raise ConfigValueError(f"action_mode must be '{DISCRETE3}' or '{CONTINUOUS2}'")

    agent_radius = _number(raw.get("agent_radius", DEFAULT_AGENT_RADIUS), "agent_radius")
    if agent_radius <= 0.0:
        raise ConfigValueError("agent_radius must be positive")

    wall_color = _color(raw["wall_color"], "wall_color") if "wall_color" in raw else DEFAULT_WALL_COLOR

    seed = raw.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or not (0 <= seed < 2**64):
        raise ConfigValueError("seed must be an integer in [0, 2**64)")

    return EnvConfig(
        arena=(width, height),
        walls=walls,
        obstacles=tuple(obstacles),
        items=tuple(items),
        episode_length=episode_length,
        motion=motion,
        sensor=sensor,
        action_mode=action_mode,
        agent_radius=agent_radius,
        wall_color=wall_color,
        seed=seed,
    )


def load_config(path) -> EnvConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh)


def _shape_to_json(shape: Shape) -> dict:
    if isinstance(shape, Circle):
        return {"type": "circle", "center": [shape.center.x, shape.center.y], "radius": shape.radius}
    if isinstance(shape, Segment):
        return {
            "type": "segment",
            "a": [shape.a.x, shape.a.y],
            "b": [shape.b.x, shape.b.y],
            "thickness": shape.thickness,
        }
    return {"type": "polygon", "vertices": [[v.x, v.y] for v in shape.vertices]}


def config_to_json(cfg: EnvConfig) -> dict:
    return {
        "arena": {"width": cfg.arena[0], "height": cfg.arena[1]},
        "walls": [
            {"a": [w.a.x, w.a.y], "b": [w.b.x, w.b.y], "thickness": w.thickness} for w in cfg.walls
        ],
        "wall_color": list(cfg.wall_color),
        "obstacles": [
            {"shape": _shape_to_json(shape), "color": list(color)} for shape, color in cfg.obstacles
        ],
        "items": {
            name: {
                "count": spec.count,
                "reward": spec.reward,
                "radius": spec.radius,
                "color": list(spec.color),
                "respawn": spec.respawn,
            }
            for name, spec in cfg.items
        },
        "episode_length": cfg.episode_length,
        "motion": {
            "forward_speed": cfg.motion.forward_speed,
            "angular_speed": cfg.motion.angular_speed,
        },
        "sensor": {"n_rays": cfg.sensor.n_rays, "fov": cfg.sensor.fov, "range": cfg.sensor.range},
        "action_mode": cfg.action_mode,
        "agent_radius": cfg.agent_radius,
        "seed": cfg.seed,
    }


def serialize_config(cfg: EnvConfig) -> str:
    return json.dumps(config_to_json(cfg), indent=2) + "\n"


def config_hash(cfg: EnvConfig) -> str:
    import hashlib

    canonical = json.dumps(config_to_json(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _regular_polygon(cx: float, cy: float, radius: float, sides: int, start_deg: float) -> ConvexPolygon:
    verts = []
    for k in range(sides):
        a = math.radians(start_deg + 360.0 * k / sides)
        verts.append(Vec2(round(cx + radius * math.cos(a), 4), round(cy + radius * math.sin(a), 4)))
    return ConvexPolygon(tuple(verts))


FRUIT = "fruit"
POISON = "poison"


def default_benchmark_config(seed: int = 0) -> EnvConfig:
    """The navigation benchmark: a walled 10x10 room, 4 obstacles of distinct
    shapes and colors, respawning orange fruits (+10) and purple poisons (-10),
    500-step episodes, 3 discrete actions."""
    width = height = 10.0
    obstacles: tuple[tuple[Shape, Color], ...] = (
        (Circle(Vec2(2.8, 2.8), 0.7), (0.85, 0.15, 0.1)),
        (ConvexPolygon((Vec2(6.4, 2.1), Vec2(8.0, 2.1), Vec2(7.2, 3.5))), (0.1, 0.65, 0.2)),
        (
            ConvexPolygon((Vec2(2.05, 6.55), Vec2(3.35, 6.55), Vec2(3.35, 7.85), Vec2(2.05, 7.85))),
            (0.15, 0.35, 0.9),
        ),
        (_regular_polygon(7.3, 7.3, 0.75, 5, 90.0), (0.9, 0.75, 0.1)),
    )
    items = (
        (FRUIT, ItemSpec(count=15, reward=10.0, radius=0.10, color=(1.0, 0.55, 0.0))),
        (POISON, ItemSpec(count=10, reward=-10.0, radius=0.16, color=(0.55, 0.1, 0.6))),
    )
    return EnvConfig(
        arena=(width, height),
        walls=perimeter_walls(width, height),
        obstacles=obstacles,
        items=items,
        # Benchmark tuning: a slightly faster, more agile agent than the
        # library defaults lets competent policies visit enough fruits per
        # 500-step episode to separate cleanly from random wandering.
        motion=MotionParams(forward_speed=0.15, angular_speed=0.25),
        seed=seed,
    )
