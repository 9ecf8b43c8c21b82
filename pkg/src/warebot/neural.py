"""Small fully connected Q-network with hand-written backprop and Adam.

Hidden layers use ReLU, the output layer is linear. The loss for one sample
is ``(y - q[action])**2``: only the chosen action's output receives gradient.
Minibatch losses are averaged over the batch. Everything is float64.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass
class Mlp:
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def dims(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    @property
    def params(self) -> list[np.ndarray]:
        """Parameter arrays in snapshot order: W1, b1, W2, b2, ..."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def n_params(self) -> int:
        return sum(p.size for p in self.params)

    def copy(self) -> Mlp:
        return Mlp([w.copy() for w in self.weights], [b.copy() for b in self.biases])


def n_params(dims) -> int:
    return sum(a * b + b for a, b in zip(dims[:-1], dims[1:]))


def mlp_init(dims, seed: int | np.random.Generator) -> Mlp:
    """Glorot-uniform weights, zero biases."""
    dims = [int(d) for d in dims]
    if len(dims) < 2:
        raise ValueError("dims needs at least an input and an output size")
    if any(d < 1 for d in dims):
        raise ValueError("layer sizes must be positive")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return Mlp(weights, biases)


@dataclass
class Cache:
    x: np.ndarray
    pre: list[np.ndarray]
    post: list[np.ndarray]
    version: int = 0


def forward(mlp: Mlp, x) -> tuple[np.ndarray, Cache]:
    """Q-values for one input vector ``(d,)`` or a batch ``(n, d)``."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != mlp.weights[0].shape[0]:
        raise ValueError(f"input width {x.shape[-1]} != {mlp.weights[0].shape[0]}")
    h = x
    pre, post = [], []
    last = len(mlp.weights) - 1
    for k, (w, b) in enumerate(zip(mlp.weights, mlp.biases)):
        z = h @ w + b
        h = z if k == last else np.maximum(z, 0.0)
        pre.append(z)
        post.append(h)
    return h, Cache(x, pre, post, _version(mlp))


def _version(mlp: Mlp) -> int:
    # cheap fingerprint so backward can refuse a cache from other parameters
    return hash(tuple(float(p.flat[0]) + float(p.sum()) for p in mlp.params))


def predict(mlp: Mlp, x) -> np.ndarray:
    return forward(mlp, x)[0]


def masked_loss(mlp: Mlp, x, action, target) -> float:
    q, _ = forward(mlp, x)
    q = np.atleast_2d(q)
    action = np.atleast_1d(np.asarray(action, dtype=np.int64))
    target = np.atleast_1d(np.asarray(target, dtype=np.float64))
    err = target - q[np.arange(len(action)), action]
    return float(np.mean(err ** 2))


def backward(mlp: Mlp, cache: Cache, action, target) -> list[np.ndarray]:
    """Gradients of the mean masked squared error, in :attr:`Mlp.params` order."""
    if cache.version != _version(mlp):
        raise ValueError("stale cache: parameters changed since forward()")
    action = np.atleast_1d(np.asarray(action, dtype=np.int64))
    target = np.atleast_1d(np.asarray(target, dtype=np.float64))
    x = np.atleast_2d(cache.x)
    out = np.atleast_2d(cache.post[-1])
    n = out.shape[0]
    if action.shape != (n,) or target.shape != (n,):
        raise ValueError("need one action and one target per sample")
    rows = np.arange(n)
    delta = np.zeros_like(out)
    delta[rows, action] = -2.0 * (target - out[rows, action]) / n
    grads_w: list[np.ndarray] = [None] * len(mlp.weights)  # type: ignore[list-item]
    grads_b: list[np.ndarray] = [None] * len(mlp.weights)  # type: ignore[list-item]
    for k in range(len(mlp.weights) - 1, -1, -1):
        below = x if k == 0 else np.atleast_2d(cache.post[k - 1])
        grads_w[k] = below.T @ delta
        grads_b[k] = delta.sum(axis=0)
        if k > 0:
            delta = (delta @ mlp.weights[k].T) * (np.atleast_2d(cache.pre[k - 1]) > 0.0)
    grads = []
    for gw, gb in zip(grads_w, grads_b):
        grads += [gw, gb]
    return grads


def finite_difference_gradients(mlp: Mlp, x, action, target, h: float = 1e-5) -> list[np.ndarray]:
    """Central differences of :func:`masked_loss`, one parameter at a time."""
    if not h > 0:
        raise ValueError("step h must be positive")
    grads = []
    for p in mlp.params:
        g = np.zeros_like(p)
        flat, gflat = p.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + h
            up = masked_loss(mlp, x, action, target)
            flat[i] = keep - h
            down = masked_loss(mlp, x, action, target)
            flat[i] = keep
            gflat[i] = (up - down) / (2.0 * h)
        grads.append(g)
    return grads


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, params, **kwargs) -> AdamState:
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params], **kwargs)


def adam_step(params: list[np.ndarray], grads: list[np.ndarray], state: AdamState, lr: float) -> None:
    """Bias-corrected Adam update, applied to ``params`` in place."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("params, grads and optimizer moments must align")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)


@dataclass
class Optimizer:
    """Adam bound to one network's parameter list."""

    mlp: Mlp
    lr: float = 0.0025
    state: AdamState = field(init=False)

    def __post_init__(self):
        self.state = AdamState.zeros_like(self.mlp.params)

    def step(self, grads: list[np.ndarray]) -> None:
        adam_step(self.mlp.params, grads, self.state, self.lr)


def save_params(mlp: Mlp, path: str | Path) -> None:
    """CSV snapshot: a ``dims`` header line, then every parameter flattened
    row-major in W1, b1, W2, b2, ... order, one value per line."""
    lines = ["dims," + ",".join(str(d) for d in mlp.dims)]
    for p in mlp.params:
        lines.extend(repr(float(v)) for v in p.ravel())
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def load_params(path: str | Path) -> Mlp:
    lines = Path(path).read_text(encoding="utf-8").split()
    head = lines[0].split(",")
    if head[0] != "dims":
        raise ValueError("missing dims header")
    dims = [int(d) for d in head[1:]]
    values = np.array([float(v) for v in lines[1:]], dtype=np.float64)
    if values.size != n_params(dims):
        raise ValueError(f"expected {n_params(dims)} values, found {values.size}")
    weights, biases, pos = [], [], 0
    for a, b in zip(dims[:-1], dims[1:]):
        weights.append(values[pos:pos + a * b].reshape(a, b))
        pos += a * b
        biases.append(values[pos:pos + b].copy())
        pos += b
    return Mlp(weights, biases)
