"""Minimal differentiable network stack: 1-D conv, max-pool, dense, ReLU,
softmax, with exact reverse-mode gradients and the Adam optimizer.

Everything is float64.  Forward/backward operate on a single sample shaped
like ``input_shape`` or on a batch with one leading axis; convolutions are
valid-window (no padding) cross-correlations computed via an im2col matmul so
the heavy lifting stays in BLAS.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, field

import numpy as np

DTYPE = np.float64


class ShapeError(ValueError):
    """Tensor shape does not match the layer stack."""


@dataclass(frozen=True)
class Conv1D:
    filters: int
    kernel_size: int
    stride: int = 1

    def __post_init__(self):
        if min(self.filters, self.kernel_size, self.stride) < 1:
            raise ValueError("conv parameters must be >= 1")


@dataclass(frozen=True)
class MaxPool1D:
    window: int = 2
    stride: int = 2

    def __post_init__(self):
        if min(self.window, self.stride) < 1:
            raise ValueError("pool parameters must be >= 1")


@dataclass(frozen=True)
class Dense:
    units: int

    def __post_init__(self):
        if self.units < 1:
            raise ValueError("units must be >= 1")


@dataclass(frozen=True)
class ReLU:
    pass


@dataclass(frozen=True)
class Softmax:
    pass


@dataclass(frozen=True)
class Flatten:
    pass


LayerSpec = Conv1D | MaxPool1D | Dense | ReLU | Softmax | Flatten


def _valid_windows(length: int, k: int, stride: int) -> int:
    if length < k:
        raise ShapeError(f"input length {length} shorter than window {k}")
    return (length - k) // stride + 1


def _out_shape(spec: LayerSpec, shape: tuple[int, ...]) -> tuple[int, ...]:
    if isinstance(spec, Conv1D):
        if len(shape) != 2:
            raise ShapeError(f"Conv1D expects (length, channels), got {shape}")
        return (_valid_windows(shape[0], spec.kernel_size, spec.stride), spec.filters)
    if isinstance(spec, MaxPool1D):
        if len(shape) != 2:
            raise ShapeError(f"MaxPool1D expects (length, channels), got {shape}")
        return (_valid_windows(shape[0], spec.window, spec.stride), shape[1])
    if isinstance(spec, Dense):
        if len(shape) != 1:
            raise ShapeError(f"Dense expects flat features, got {shape} (add Flatten first)")
        return (spec.units,)
    if isinstance(spec, Flatten):
        return (int(np.prod(shape)),)
    return shape


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int, shape: tuple[int, ...]) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(DTYPE)


def _init_params(spec: LayerSpec, shape: tuple[int, ...], rng: np.random.Generator) -> dict:
    if isinstance(spec, Conv1D):
        k, c, f = spec.kernel_size, shape[1], spec.filters
        return {"w": _glorot(rng, k * c, k * f, (k, c, f)), "b": np.zeros(f, dtype=DTYPE)}
    if isinstance(spec, Dense):
        d, u = shape[0], spec.units
        return {"w": _glorot(rng, d, u, (d, u)), "b": np.zeros(u, dtype=DTYPE)}
    return {}


class Network:
    """A layer stack plus its parameters, built for a fixed input shape."""

    def __init__(
        self,
        layers: list[LayerSpec],
        input_shape: tuple[int, ...],
        rng: np.random.Generator | None = None,
    ):
        if rng is None:
            rng = np.random.default_rng(0)
        self.layers = list(layers)
        self.input_shape = tuple(int(d) for d in input_shape)
        self.params: list[dict[str, np.ndarray]] = []
        shape = self.input_shape
        for spec in self.layers:
            self.params.append(_init_params(spec, shape, rng))
            shape = _out_shape(spec, shape)
        self.output_shape = shape

    def clone(self) -> "Network":
        dup = Network.__new__(Network)
        dup.layers = list(self.layers)
        dup.input_shape = self.input_shape
        dup.output_shape = self.output_shape
        dup.params = [{k: v.copy() for k, v in p.items()} for p in self.params]
        return dup

    def zero_grads(self) -> list[dict[str, np.ndarray]]:
        return [{k: np.zeros_like(v) for k, v in p.items()} for p in self.params]

    def num_params(self) -> int:
        return sum(v.size for p in self.params for v in p.values())


def _window_index(length: int, k: int, stride: int) -> np.ndarray:
    n = _valid_windows(length, k, stride)
    return np.arange(n)[:, None] * stride + np.arange(k)[None, :]


def _layer_forward(spec: LayerSpec, params: dict, x: np.ndarray):
    if isinstance(spec, Conv1D):
        n, length, c = x.shape
        idx = _window_index(length, spec.kernel_size, spec.stride)
        col = x[:, idx, :].reshape(n, idx.shape[0], spec.kernel_size * c)
        w2 = params["w"].reshape(spec.kernel_size * c, spec.filters)
        y = col @ w2 + params["b"]
        return y, (x.shape, col)
    if isinstance(spec, MaxPool1D):
        n, length, c = x.shape
        idx = _window_index(length, spec.window, spec.stride)
        win = x[:, idx, :]  # (n, out, window, c)
        am = np.argmax(win, axis=2)  # first index wins ties
        y = np.take_along_axis(win, am[:, :, None, :], axis=2)[:, :, 0, :]
        return y, (x.shape, am)
    if isinstance(spec, Dense):
        y = x @ params["w"] + params["b"]
        return y, (x,)
    if isinstance(spec, ReLU):
        return np.maximum(x, 0.0), (x > 0.0,)
    if isinstance(spec, Softmax):
        shifted = x - np.max(x, axis=-1, keepdims=True)
        e = np.exp(shifted)
        y = e / np.sum(e, axis=-1, keepdims=True)
        return y, (y,)
    if isinstance(spec, Flatten):
        return x.reshape(x.shape[0], -1), (x.shape,)
    raise TypeError(f"unknown layer spec {spec!r}")


def _layer_backward(spec: LayerSpec, params: dict, cache, dy: np.ndarray):
    if isinstance(spec, Conv1D):
        x_shape, col = cache
        n, length, c = x_shape
        k, s, f = spec.kernel_size, spec.stride, spec.filters
        w2 = params["w"].reshape(k * c, f)
        db = dy.sum(axis=(0, 1))
        dw = np.tensordot(col, dy, axes=([0, 1], [0, 1])).reshape(k, c, f)
        dcol = (dy @ w2.T).reshape(n, -1, k, c)
        dx = np.zeros(x_shape, dtype=DTYPE)
        n_out = dcol.shape[1]
        for j in range(k):
            dx[:, j : j + n_out * s : s, :] += dcol[:, :, j, :]
        return dx, {"w": dw, "b": db}
    if isinstance(spec, MaxPool1D):
        x_shape, am = cache
        n, length, c = x_shape
        w, s = spec.window, spec.stride
        n_out = am.shape[1]
        dwin = np.zeros((n, n_out, w, c), dtype=DTYPE)
        np.put_along_axis(dwin, am[:, :, None, :], dy[:, :, None, :], axis=2)
        dx = np.zeros(x_shape, dtype=DTYPE)
        for j in range(w):
            dx[:, j : j + n_out * s : s, :] += dwin[:, :, j, :]
        return dx, {}
    if isinstance(spec, Dense):
        (x,) = cache
        dw = x.T @ dy
        db = dy.sum(axis=0)
        dx = dy @ params["w"].T
        return dx, {"w": dw, "b": db}
    if isinstance(spec, ReLU):
        (mask,) = cache
        return dy * mask, {}
    if isinstance(spec, Softmax):
        (y,) = cache
        inner = np.sum(dy * y, axis=-1, keepdims=True)
        return y * (dy - inner), {}
    if isinstance(spec, Flatten):
        (x_shape,) = cache
        return dy.reshape(x_shape), {}
    raise TypeError(f"unknown layer spec {spec!r}")


def forward(net: Network, x) -> tuple[np.ndarray, list]:
    """Run the stack; returns (output, cache).  Accepts one sample or a batch."""
    x = np.asarray(x, dtype=DTYPE)
    if x.shape == net.input_shape:
        batched = False
        h = x[None, ...]
    elif x.shape[1:] == net.input_shape:
        batched = True
        h = x
    else:
        raise ShapeError(f"input shape {x.shape} incompatible with {net.input_shape}")
    caches: list = [batched]
    for spec, params in zip(net.layers, net.params):
        h, cache = _layer_forward(spec, params, h)
        caches.append(cache)
    return (h if batched else h[0]), caches


def backward(net: Network, caches: list, dy) -> tuple[list[dict[str, np.ndarray]], np.ndarray]:
    """Exact reverse-mode gradients from an output gradient.

    `caches` must come from a forward() call on the same network whose
    parameters have not been updated in between.
    """
    if len(caches) != len(net.layers) + 1:
        raise ShapeError("cache does not match this network (stale or truncated)")
    batched = caches[0]
    dy = np.asarray(dy, dtype=DTYPE)
    g = dy if batched else dy[None, ...]
    grads: list[dict[str, np.ndarray]] = [{} for _ in net.layers]
    for i in range(len(net.layers) - 1, -1, -1):
        g, layer_grads = _layer_backward(net.layers[i], net.params[i], caches[i + 1], g)
        grads[i] = layer_grads
    return grads, (g if batched else g[0])


def softmax(logits) -> np.ndarray:
    """Stable softmax over the last axis; output sums to 1."""
    z = np.asarray(logits, dtype=DTYPE)
    shifted = z - np.max(z, axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=-1, keepdims=True)


@dataclass
class AdamState:
    """Per-parameter Adam moments plus hyperparameters (bias-corrected update)."""

    m: list[dict[str, np.ndarray]]
    v: list[dict[str, np.ndarray]]
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0

    @classmethod
    def for_params(cls, params: list[dict[str, np.ndarray]], lr: float = 0.001, **kw) -> "AdamState":
        zeros = lambda: [{k: np.zeros_like(a) for k, a in p.items()} for p in params]
        return cls(m=zeros(), v=zeros(), lr=lr, **kw)


def adam_step(
    params: list[dict[str, np.ndarray]],
    grads: list[dict[str, np.ndarray]],
    state: AdamState,
) -> None:
    """One Adam update, in place: p -= lr * m_hat / (sqrt(v_hat) + eps)."""
    for g_dict in grads:
        for g in g_dict.values():
            if not np.all(np.isfinite(g)):
                raise ValueError("non-finite gradient rejected")
    state.t += 1
    bc1 = 1.0 - state.beta1**state.t
    bc2 = 1.0 - state.beta2**state.t
    for p_dict, g_dict, m_dict, v_dict in zip(params, grads, state.m, state.v):
        for key, g in g_dict.items():
            m = m_dict[key]
            v = v_dict[key]
            m *= state.beta1
            m += (1.0 - state.beta1) * g
            v *= state.beta2
            v += (1.0 - state.beta2) * np.square(g)
            p_dict[key] -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)


CONV_STACK: list[LayerSpec] = [
    Conv1D(32, 8, 1),
    ReLU(),
    Conv1D(48, 4, 1),
    ReLU(),
    Conv1D(64, 3, 1),
    ReLU(),
]

DQN = "dqn"
A3C = "a3c"
DFP = "dfp"


@dataclass
class Arch:
    """A trunk network plus named head networks fed from the trunk output."""

    kind: str
    trunk: Network
    heads: dict[str, Network] = field(default_factory=dict)

    def parameters(self) -> list[dict[str, np.ndarray]]:
        out = list(self.trunk.params)
        for name in sorted(self.heads):
            out.extend(self.heads[name].params)
        return out

    def clone(self) -> "Arch":
        return Arch(
            self.kind,
            self.trunk.clone(),
            {name: net.clone() for name, net in self.heads.items()},
        )


def build_arch(
    kind: str,
    n_actions: int,
    input_shape: tuple[int, int] = (64, 3),
    rng: np.random.Generator | None = None,
    n_offsets: int = 6,
    n_measurements: int = 3,
) -> Arch:
    """The three benchmark architectures on the shared 3-layer conv stack.

    dqn:  convs -> max pool -> flatten -> linear Q-head (one value per action)
    a3c:  convs -> flatten -> dense(128) + ReLU trunk, softmax policy head and
          scalar value head
    dfp:  convs -> max pool -> flatten -> dense(256) + ReLU trunk, one linear
          head per action predicting (n_offsets x n_measurements) future
          measurement deltas
    """
    if n_actions < 1:
        raise ValueError("n_actions must be >= 1")
    if rng is None:
        rng = np.random.default_rng(0)
    if kind == DQN:
        trunk = Network(
            CONV_STACK + [MaxPool1D(2, 2), Flatten(), Dense(n_actions)], input_shape, rng
        )
        return Arch(kind, trunk)
    if kind == A3C:
        trunk = Network(CONV_STACK + [Flatten(), Dense(128), ReLU()], input_shape, rng)
        heads = {
            "policy": Network([Dense(n_actions), Softmax()], trunk.output_shape, rng),
            "value": Network([Dense(1)], trunk.output_shape, rng),
        }
        return Arch(kind, trunk, heads)
    if kind == DFP:
        trunk = Network(
            CONV_STACK + [MaxPool1D(2, 2), Flatten(), Dense(256), ReLU()], input_shape, rng
        )
        heads = {
            f"action_{a}": Network([Dense(n_offsets * n_measurements)], trunk.output_shape, rng)
            for a in range(n_actions)
        }
        return Arch(kind, trunk, heads)
    raise ValueError(f"unknown architecture kind {kind!r}")


# ---------------------------------------------------------------------------
# Checkpoint format: magic, little-endian u32 version, u32 JSON header length,
# JSON header (layer specs, shapes), then raw little-endian float64 parameter
# blocks in layer order with keys sorted within a layer.

NETWORK_MAGIC = b"FLATNET1"
CHECKPOINT_VERSION = 1


class CheckpointError(RuntimeError):
    pass


def _spec_to_json(spec: LayerSpec) -> dict:
    if isinstance(spec, Conv1D):
        return {"kind": "conv1d", "filters": spec.filters, "kernel_size": spec.kernel_size, "stride": spec.stride}
    if isinstance(spec, MaxPool1D):
        return {"kind": "maxpool1d", "window": spec.window, "stride": spec.stride}
    if isinstance(spec, Dense):
        return {"kind": "dense", "units": spec.units}
    if isinstance(spec, ReLU):
        return {"kind": "relu"}
    if isinstance(spec, Softmax):
        return {"kind": "softmax"}
    if isinstance(spec, Flatten):
        return {"kind": "flatten"}
    raise TypeError(f"unknown layer spec {spec!r}")


def _spec_from_json(obj: dict) -> LayerSpec:
    kind = obj.get("kind")
    if kind == "conv1d":
        return Conv1D(obj["filters"], obj["kernel_size"], obj["stride"])
    if kind == "maxpool1d":
        return MaxPool1D(obj["window"], obj["stride"])
    if kind == "dense":
        return Dense(obj["units"])
    if kind == "relu":
        return ReLU()
    if kind == "softmax":
        return Softmax()
    if kind == "flatten":
        return Flatten()
    raise CheckpointError(f"unknown layer kind {kind!r} in checkpoint")


def save_network(net: Network, fh: io.BufferedIOBase) -> None:
    header = {
        "layers": [_spec_to_json(s) for s in net.layers],
        "input_shape": list(net.input_shape),
        "param_shapes": [{k: list(v.shape) for k, v in p.items()} for p in net.params],
    }
    blob = json.dumps(header).encode("utf-8")
    fh.write(NETWORK_MAGIC)
    fh.write(struct.pack("<II", CHECKPOINT_VERSION, len(blob)))
    fh.write(blob)
    for p in net.params:
        for key in sorted(p):
            fh.write(np.ascontiguousarray(p[key], dtype="<f8").tobytes())


def _read_exact(fh, n: int) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise CheckpointError("checkpoint truncated")
    return data


def load_network(fh: io.BufferedIOBase) -> Network:
    if _read_exact(fh, len(NETWORK_MAGIC)) != NETWORK_MAGIC:
        raise CheckpointError("bad magic: not a network checkpoint")
    version, header_len = struct.unpack("<II", _read_exact(fh, 8))
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    header = json.loads(_read_exact(fh, header_len).decode("utf-8"))
    layers = [_spec_from_json(o) for o in header["layers"]]
    net = Network(layers, tuple(header["input_shape"]))
    for p, shapes in zip(net.params, header["param_shapes"]):
        for key in sorted(shapes):
            shape = tuple(shapes[key])
            raw = _read_exact(fh, 8 * int(np.prod(shape)))
            p[key] = np.frombuffer(raw, dtype="<f8").reshape(shape).astype(DTYPE)
    return net
