import json
import math
from pathlib import Path

import pytest

from flatland.config import (
    ConfigKeyError,
    ConfigSyntaxError,
    ConfigValueError,
    config_hash,
    default_benchmark_config,
    load_config,
    parse_config,
    serialize_config,
)
from flatland.geom import Circle, ConvexPolygon, Segment

BENCHMARK_PATH = Path(__file__).resolve().parent.parent / "configs" / "benchmark.json"


def test_minimal_config_gets_defaults():
    cfg = parse_config('{"arena": {"width": 8, "height": 6}}')
    assert cfg.arena == (8.0, 6.0)
    assert cfg.episode_length == 500
    assert cfg.sensor.n_rays == 64
    assert cfg.sensor.fov == pytest.approx(math.pi)
    assert cfg.agent_radius == 0.25
    assert cfg.action_mode == "discrete3"
    assert len(cfg.walls) == 4  # perimeter walls by default
    assert cfg.items == ()


def test_syntax_error_reports_line_and_column():
    with pytest.raises(ConfigSyntaxError) as err:
        parse_config('{"arena": {"width": 8,\n  "height": }}')
    assert "line 2" in str(err.value)


def test_unknown_key_rejected():
    with pytest.raises(ConfigKeyError) as err:
        parse_config('{"arena": {"width": 8, "height": 6}, "wibble": 1}')
    assert "wibble" in str(err.value)


def test_unknown_nested_key_rejected():
    with pytest.raises(ConfigKeyError):
        parse_config('{"arena": {"width": 8, "height": 6, "depth": 2}}')


def test_negative_item_count_rejected():
    text = json.dumps(
        {
            "arena": {"width": 8, "height": 6},
            "items": {"fruit": {"count": -1, "reward": 10, "radius": 0.2, "color": [1, 0.5, 0]}},
        }
    )
    with pytest.raises(ConfigValueError):
        parse_config(text)


def test_constraint_violations_rejected():
    base = {"arena": {"width": 8, "height": 6}}
    for override in (
        {"episode_length": 0},
        {"agent_radius": -0.2},
        {"sensor": {"n_rays": 0}},
        {"action_mode": "teleport"},
        {"arena": {"width": -1, "height": 6}},
        {"seed": -1},
    ):
        cfg = dict(base)
        cfg.update(override)
        with pytest.raises(ConfigValueError):
            parse_config(json.dumps(cfg))


def test_missing_arena_rejected():
    with pytest.raises(ConfigValueError):
        parse_config("{}")


def test_roundtrip_identity():
    cfg = default_benchmark_config()
    assert parse_config(serialize_config(cfg)) == cfg
    # hash is stable across a round trip
    assert config_hash(parse_config(serialize_config(cfg))) == config_hash(cfg)


def test_shipped_benchmark_file_matches_builtin():
    shipped = load_config(BENCHMARK_PATH)
    assert shipped == default_benchmark_config()


def test_benchmark_contents():
    cfg = default_benchmark_config()
    assert cfg.arena == (10.0, 10.0)
    assert len(cfg.walls) == 4
    # 4 obstacles of distinct shape kinds and distinct colors
    assert len(cfg.obstacles) == 4
    kinds = []
    for shape, _color in cfg.obstacles:
        if isinstance(shape, Circle):
            kinds.append("circle")
        elif isinstance(shape, Segment):
            kinds.append("segment")
        elif isinstance(shape, ConvexPolygon):
            kinds.append(f"{len(shape.vertices)}-gon")
    assert sorted(kinds) == ["3-gon", "4-gon", "5-gon", "circle"]
    colors = {color for _, color in cfg.obstacles}
    assert len(colors) == 4
    item_specs = dict(cfg.items)
    assert item_specs["fruit"].reward == 10.0
    assert item_specs["fruit"].count == 15
    assert item_specs["poison"].reward == -10.0
    assert item_specs["poison"].count == 10
    assert item_specs["fruit"].respawn and item_specs["poison"].respawn
    assert cfg.episode_length == 500
    assert cfg.action_mode == "discrete3"


def test_explicit_walls_and_shapes_parse():
    text = json.dumps(
        {
            "arena": {"width": 10, "height": 10},
            "walls": [{"a": [0, 0], "b": [10, 0]}],
            "obstacles": [
                {"shape": {"type": "circle", "center": [5, 5], "radius": 1}, "color": [1, 0, 0]},
                {
                    "shape": {"type": "polygon", "vertices": [[1, 1], [2, 1], [1.5, 2]]},
                    "color": [0, 1, 0],
                },
                {
                    "shape": {"type": "segment", "a": [7, 2], "b": [8, 3], "thickness": 0.2},
                    "color": [0, 0, 1],
                },
            ],
        }
    )
    cfg = parse_config(text)
    assert len(cfg.walls) == 1
    assert len(cfg.obstacles) == 3


def test_bad_shape_constraints_are_config_errors():
    base = {"arena": {"width": 10, "height": 10}}
    bad_shapes = [
        {"type": "circle", "center": [5, 5], "radius": -1},
        {"type": "polygon", "vertices": [[0, 0], [0, 1], [1, 0]]},  # clockwise
        {"type": "segment", "a": [1, 1], "b": [1, 1]},
        {"type": "blob"},
    ]
    for shape in bad_shapes:
        cfg = dict(base)
        cfg["obstacles"] = [{"shape": shape, "color": [1, 0, 0]}]
        with pytest.raises(ConfigValueError):
            parse_config(json.dumps(cfg))


def test_color_range_enforced():
    text = json.dumps(
        {
            "arena": {"width": 8, "height": 6},
            "items": {"fruit": {"count": 1, "reward": 1, "radius": 0.2, "color": [2, 0, 0]}},
        }
    )
    with pytest.raises(ConfigValueError):
        parse_config(text)
