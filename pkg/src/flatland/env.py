"""Episode lifecycle: reset, step, pickups, and the Gym-style wrapper.

An episode runs for exactly ``episode_length`` steps.  The only reward signal
is item contact: every live item whose trigger circle overlaps the agent disc
is consumed (in slot order), its reward added, and - when the class respawns -
a replacement placed at a fresh non-overlapping spot drawn from the episode
generator.  All randomness flows through that one generator, so a (config,
seed, action sequence) triple fully determines the trajectory.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import geom
from .config import DISCRETE3, CONTINUOUS2, EnvConfig, ItemSpec
from .geom import Body, Bounds, Circle, Pose, Vec2, World
from .sensors import render_rgb

N_DISCRETE_ACTIONS = 3

# An action is either a discrete index {0: forward, 1: rotate left,
# 2: rotate right} or a (forward in [0,1], turn in [-1,1]) pair.
AgentAction = int | tuple[float, float]


class EpisodeDoneError(RuntimeError):
    """step() was called on a finished episode."""


class InvalidActionError(ValueError):
    """The action does not fit the configured action mode."""


class PlacementError(RuntimeError):
    """reset() could not place the agent or an item (infeasible config)."""


@dataclass
class ItemSlot:
    slot: int
    item_class: str
    body: Body


@dataclass
class EnvState:
    """Single-owner mutable episode state; advanced in place by step()."""

    config: EnvConfig
    world: World
    agent: Pose
    items: list[ItemSlot]
    rng: np.random.Generator
    step_count: int = 0
    score: float = 0.0
    picked: dict[str, int] = field(default_factory=dict)
    _item_centers: np.ndarray = field(default=None, repr=False)  # type: ignore[assignment]
    _item_radii: np.ndarray = field(default=None, repr=False)  # type: ignore[assignment]

    @property
    def fruits_picked(self) -> int:
        return self.picked.get("fruit", 0)

    @property
    def poisons_picked(self) -> int:
        return self.picked.get("poison", 0)

    @property
    def done(self) -> bool:
        return self.step_count >= self.config.episode_length


@dataclass(frozen=True)
class StepResult:
    observation: np.ndarray
    reward: float
    done: bool
    measurements: np.ndarray  # (score, fruits picked, poisons picked)


def static_bodies(cfg: EnvConfig) -> tuple[Body, ...]:
    bodies = [Body(w, cfg.wall_color, kind=geom.WALL) for w in cfg.walls]
    bodies += [Body(shape, color, kind=geom.OBSTACLE) for shape, color in cfg.obstacles]
    return tuple(bodies)


def _item_body(pos: Vec2, name: str, spec: ItemSpec) -> Body:
    return Body(
        Circle(pos, spec.radius),
        spec.color,
        kind=geom.ITEM,
        reward=spec.reward,
        item_class=name,
    )


def _rebuild_world(state: EnvState, statics: tuple[Body, ...] | None = None) -> None:
    if statics is None:
        statics = static_bodies(state.config)
    state.world = state.world.with_bodies(statics + tuple(s.body for s in state.items))
    if state.items:
        state._item_centers = np.array(
            [[s.body.shape.center.x, s.body.shape.center.y] for s in state.items]
        )
        state._item_radii = np.array([s.body.shape.radius for s in state.items])
    else:
        state._item_centers = np.zeros((0, 2))
        state._item_radii = np.zeros(0)


def _place_item(
    state: EnvState,
    name: str,
    spec: ItemSpec,
    statics: tuple[Body, ...],
    agent_pos: Vec2,
) -> Body:
    probe = World(
        state.world.bounds,
        statics + tuple(s.body for s in state.items),
        agent_radius=state.config.agent_radius,
    )
    try:
        pose = geom.spawn_free_pose(
            probe,
            state.rng,
            radius=spec.radius,
            avoid=((agent_pos, state.config.agent_radius),),
        )
    except geom.SpawnError as exc:
        raise PlacementError(f"cannot place item of class {name!r}: {exc}") from exc
    return _item_body(pose.position, name, spec)


def reset(cfg: EnvConfig, seed: int) -> tuple[EnvState, np.ndarray]:
    """Fresh episode: agent placed first, then items class by class."""
    rng = np.random.default_rng(seed)
    bounds = Bounds(0.0, 0.0, cfg.arena[0], cfg.arena[1])
    statics = static_bodies(cfg)
    world = World(bounds, statics, agent_radius=cfg.agent_radius)
    try:
        agent = geom.spawn_free_pose(world, rng)
    except geom.SpawnError as exc:
        raise PlacementError(f"cannot place agent: {exc}") from exc

    state = EnvState(config=cfg, world=world, agent=agent, items=[], rng=rng)
    slot = 0
    for name, spec in cfg.items:
        for _ in range(spec.count):
            body = _place_item(state, name, spec, statics, agent.position)
            state.items.append(ItemSlot(slot=slot, item_class=name, body=body))
            slot += 1
    _rebuild_world(state, statics)
    return state, render_rgb(state.world, state.agent, cfg.sensor)


def _validate_action(action, mode: str):
    if mode == DISCRETE3:
        if isinstance(action, (bool, float)) or not isinstance(action, (int, np.integer)):
            raise InvalidActionError(f"discrete mode expects an action index, got {action!r}")
        if not 0 <= int(action) < N_DISCRETE_ACTIONS:
            raise InvalidActionError(f"action index must be in [0, 3), got {action}")
        return int(action)
    if mode == CONTINUOUS2:
        try:
            forward, turn = (float(action[0]), float(action[1]))
        except (TypeError, ValueError, IndexError) as exc:
            raise InvalidActionError(
                f"continuous mode expects a (forward, turn) pair, got {action!r}"
            ) from exc
        if not (0.0 <= forward <= 1.0 and -1.0 <= turn <= 1.0):
            raise InvalidActionError(
                f"continuous action out of range: forward={forward}, turn={turn}"
            )
        return (forward, turn)
    raise InvalidActionError(f"unknown action mode {mode!r}")


def step(state: EnvState, action: AgentAction) -> tuple[EnvState, StepResult]:
    """Advance one timestep; returns the same (mutated) state plus the result."""
    cfg = state.config
    if state.done:
        raise EpisodeDoneError(
            f"episode is over after {cfg.episode_length} steps; reset before stepping"
        )
    act = _validate_action(action, cfg.action_mode)
    state.agent = geom.integrate_agent(state.agent, act, cfg.motion, state.world)

    reward = 0.0
    if state.items:
        pos = state.agent.position
        d2 = (state._item_centers[:, 0] - pos.x) ** 2 + (state._item_centers[:, 1] - pos.y) ** 2
        touching = d2 < (state._item_radii + cfg.agent_radius) ** 2
        if np.any(touching):
            statics = static_bodies(cfg)
            touched = sorted(
                (state.items[i] for i in np.nonzero(touching)[0]), key=lambda s: s.slot
            )
            for item in touched:
                spec = cfg.item_spec(item.item_class)
                reward += spec.reward
                state.picked[item.item_class] = state.picked.get(item.item_class, 0) + 1
                state.items.remove(item)
                if spec.respawn:
                    body = _place_item(state, item.item_class, spec, statics, pos)
                    state.items.append(ItemSlot(item.slot, item.item_class, body))
                    state.items.sort(key=lambda s: s.slot)
            state.score += reward
            _rebuild_world(state, statics)

    state.step_count += 1
    done = state.done
    obs = render_rgb(state.world, state.agent, cfg.sensor)
    return state, StepResult(obs, reward, done, measurements(state))


def measurements(state: EnvState) -> np.ndarray:
    """(score, fruits picked, poisons picked) as a float vector."""
    return np.array(
        [state.score, float(state.fruits_picked), float(state.poisons_picked)], dtype=np.float64
    )


class Environment:
    """Convenience wrapper with the familiar reset/step surface.

    >>> env = Environment(default_benchmark_config())
    >>> obs = env.reset(seed=7)
    >>> result = env.step(0)
    """

    def __init__(self, config: EnvConfig):
        self.config = config
        self.state: EnvState | None = None

    @property
    def observation_shape(self) -> tuple[int, int]:
        return (self.config.sensor.n_rays, 3)

    @property
    def n_actions(self) -> int:
        return N_DISCRETE_ACTIONS if self.config.action_mode == DISCRETE3 else 0

    def reset(self, seed: int | None = None) -> np.ndarray:
        self.state, obs = reset(self.config, self.config.seed if seed is None else seed)
        return obs

    def step(self, action: AgentAction) -> StepResult:
        if self.state is None:
            raise EpisodeDoneError("reset() must be called before step()")
        self.state, result = step(self.state, action)
        return result

    @property
    def done(self) -> bool:
        return self.state is None or self.state.done

    def measurements(self) -> np.ndarray:
        if self.state is None:
            return np.zeros(3, dtype=np.float64)
        return measurements(self.state)
