"""Agent checkpoints: a small header plus named network blocks."""

from __future__ import annotations

import json
import struct

import numpy as np

from .. import nn

AGENT_MAGIC = b"FLATAGT1"
AGENT_VERSION = 1


def save_agent(path, algorithm: str, config_hash: str, global_step: int,
               networks: dict[str, nn.Network]) -> None:
    header = {
        "algorithm": algorithm,
        "config_hash": config_hash,
        "global_step": global_step,
        "networks": sorted(networks),
    }
    blob = json.dumps(header).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(AGENT_MAGIC)
        fh.write(struct.pack("<II", AGENT_VERSION, len(blob)))
        fh.write(blob)
        for name in sorted(networks):
            nn.save_network(networks[name], fh)


def load_agent(path) -> tuple[dict, dict[str, nn.Network]]:
    with open(path, "rb") as fh:
        magic = fh.read(len(AGENT_MAGIC))
        if magic != AGENT_MAGIC:
            raise nn.CheckpointError("bad magic: not an agent checkpoint")
        version, header_len = struct.unpack("<II", fh.read(8))
        if version != AGENT_VERSION:
            raise nn.CheckpointError(f"unsupported agent checkpoint version {version}")
        header = json.loads(fh.read(header_len).decode("utf-8"))
        networks = {name: nn.load_network(fh) for name in header["networks"]}
    return header, networks


def agent_networks(agent) -> dict[str, nn.Network]:
    """The named networks an agent needs for greedy evaluation."""
    from .dqn import DQNAgent
    from .a3c import A3CAgent
    from .dfp import DFPAgent

    if isinstance(agent, DQNAgent):
        return {"online": agent.online.trunk, "target": agent.target.trunk}
    if isinstance(agent, A3CAgent):
        return {
            "trunk": agent.shared.trunk,
            "policy": agent.shared.heads["policy"],
            "value": agent.shared.heads["value"],
        }
    if isinstance(agent, DFPAgent):
        nets = {"trunk": agent.arch.trunk}
        nets.update(agent.arch.heads)
        return nets
    raise TypeError(f"unknown agent type {type(agent)!r}")


def greedy_policy(header: dict, networks: dict[str, nn.Network], goal=(1.0, 1.0, -1.0),
                  offsets_len: int = 6):
    """Build an obs -> action function from a loaded checkpoint."""
    algorithm = header["algorithm"]
    if algorithm == "dqn":
        online = networks["online"]

        def act(obs):
            q, _ = nn.forward(online, obs)
            return int(np.argmax(q))

        return act
    if algorithm == "a3c":
        trunk, policy = networks["trunk"], networks["policy"]

        def act(obs):
            h, _ = nn.forward(trunk, obs)
            p, _ = nn.forward(policy, h)
            return int(np.argmax(p))

        return act
    if algorithm == "dfp":
        trunk = networks["trunk"]
        heads = [networks[k] for k in sorted(networks) if k.startswith("action_")]
        goal_arr = np.asarray(goal, dtype=np.float64)

        def act(obs):
            h, _ = nn.forward(trunk, obs)
            utilities = []
            for head in heads:
                out, _ = nn.forward(head, h)
                utilities.append(float(np.sum(out.reshape(-1, 3) * goal_arr)))
            return int(np.argmax(utilities))

        return act
    raise ValueError(f"unknown algorithm {algorithm!r} in checkpoint")
