"""Dense dueling Q-network written directly in numpy.

A ReLU trunk feeds two linear heads: a scalar state value and one advantage
per action. The heads are merged as ``q = v + adv - mean(adv)``. Gradients are
computed by hand and can be checked against central finite differences with
:func:`grad_check`.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAGIC = b"DUELNET1"


@dataclass(frozen=True)
class NetArchitecture:
    input_dim: int = 3
    hidden: tuple[int, ...] = (64, 64)
    num_actions: int = 3

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.input_dim < 1 or self.num_actions < 1 or any(h < 1 for h in self.hidden):
            raise ValueError("all layer widths must be >= 1")


@dataclass
class NetParams:
    """Weights are stored as (fan_in, fan_out) matrices."""

    trunk_w: list[np.ndarray]
    trunk_b: list[np.ndarray]
    value_w: np.ndarray
    value_b: np.ndarray
    adv_w: np.ndarray
    adv_b: np.ndarray

    def arrays(self) -> list[np.ndarray]:
        return [*self.trunk_w, *self.trunk_b, self.value_w, self.value_b, self.adv_w, self.adv_b]

    def names(self) -> list[str]:
        n = len(self.trunk_w)
        return ([f"trunk_w{i}" for i in range(n)] + [f"trunk_b{i}" for i in range(n)]
                + ["value_w", "value_b", "adv_w", "adv_b"])

    @classmethod
    def from_arrays(cls, arrays: list[np.ndarray]) -> "NetParams":
        n = (len(arrays) - 4) // 2
        return cls(list(arrays[:n]), list(arrays[n:2 * n]), *arrays[2 * n:])

    def map(self, fn) -> "NetParams":
        return NetParams.from_arrays([fn(a) for a in self.arrays()])

    def copy(self) -> "NetParams":
        return self.map(np.copy)

    @property
    def architecture(self) -> NetArchitecture:
        return NetArchitecture(self.trunk_w[0].shape[0], tuple(w.shape[1] for w in self.trunk_w),
                               self.adv_w.shape[1])

    def is_finite(self) -> bool:
        # a sum is nan/inf whenever any summand is
        return bool(np.isfinite(sum(float(a.sum()) for a in self.arrays())))


def init_params(arch: NetArchitecture, seed: int | None = 0, zero: bool = False) -> NetParams:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases."""
    rng = np.random.default_rng(seed)
    widths = [arch.input_dim, *arch.hidden]

    def dense(fan_in, fan_out):
        if zero:
            return np.zeros((fan_in, fan_out))
        bound = 1.0 / np.sqrt(fan_in)
        return rng.uniform(-bound, bound, size=(fan_in, fan_out))

    trunk_w = [dense(i, o) for i, o in zip(widths[:-1], widths[1:])]
    trunk_b = [np.zeros(o) for o in widths[1:]]
    h = widths[-1]
    return NetParams(trunk_w, trunk_b, dense(h, 1), np.zeros(1),
                     dense(h, arch.num_actions), np.zeros(arch.num_actions))


def combine(v, adv):
    """Merge value and advantage streams; works on a single row or a batch."""
    adv = np.asarray(adv, dtype=float)
    if adv.shape[-1] == 0:
        raise ValueError("advantage vector must not be empty")
    v = np.asarray(v, dtype=float)
    if adv.ndim == 2 and v.ndim == 1:
        v = v[:, None]
    return v + adv - adv.mean(axis=-1, keepdims=True)


def encode_state(state, env_config) -> np.ndarray:
    """Scale (cell, location, energy) into [0, 1]; the charging sentinel maps to -1s."""
    if state[0] == -1:
        return np.array([-1.0, -1.0, -1.0])
    L = env_config.num_positions
    return np.array([state[0] / env_config.num_cells,
                     state[1] / max(L - 1, 1),
                     state[2] / env_config.battery_capacity])


def forward(params: NetParams, x):
    """Return ``(q, cache)``; ``x`` is one feature vector or an (n, d) batch."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = x[None, :] if single else x
    if X.shape[1] != params.trunk_w[0].shape[0]:
        raise ValueError(f"input has {X.shape[1]} features, network expects "
                         f"{params.trunk_w[0].shape[0]}")
    acts = [X]
    pre = []
    h = X
    for W, b in zip(params.trunk_w, params.trunk_b):
        z = h @ W + b
        h = np.maximum(z, 0.0)
        pre.append(z)
        acts.append(h)
    v = h @ params.value_w + params.value_b
    adv = h @ params.adv_w + params.adv_b
    q = v + adv - adv.sum(axis=1, keepdims=True) * (1.0 / adv.shape[1])
    cache = (acts, pre)
    return (q[0] if single else q), cache


def q_values(params: NetParams, X) -> np.ndarray:
    return forward(params, X)[0]


def backward(params: NetParams, cache, dq: np.ndarray) -> NetParams:
    """Reverse-mode pass given dLoss/dq of shape (n, A)."""
    acts, pre = cache
    h = acts[-1]
    dv = dq.sum(axis=1, keepdims=True)
    dadv = dq - dq.sum(axis=1, keepdims=True) * (1.0 / dq.shape[1])
    g_vw = h.T @ dv
    g_vb = dv.sum(axis=0)
    g_aw = h.T @ dadv
    g_ab = dadv.sum(axis=0)
    dh = dv @ params.value_w.T + dadv @ params.adv_w.T
    n = len(params.trunk_w)
    g_w = [None] * n
    g_b = [None] * n
    for i in range(n - 1, -1, -1):
        dz = dh * (pre[i] > 0)
        g_w[i] = acts[i].T @ dz
        g_b[i] = dz.sum(axis=0)
        if i:
            dh = dz @ params.trunk_w[i].T
    return NetParams(g_w, g_b, g_vw, g_vb, g_aw, g_ab)


def loss_and_gradient(params: NetParams, X, actions, targets):
    """Mean squared TD error over the batch and its exact gradient.

    ``X`` is (n, d), ``actions`` holds action indices, ``targets`` the
    bootstrapped values ``Y`` (treated as constants).
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    actions = np.asarray(actions, dtype=np.intp)
    targets = np.asarray(targets, dtype=float)
    n = X.shape[0]
    if n == 0:
        raise ValueError("batch must not be empty")
    q, cache = forward(params, X)
    rows = np.arange(n)
    resid = targets - q[rows, actions]
    loss = float(np.mean(resid ** 2))
    dq = np.zeros_like(q)
    dq[rows, actions] = -2.0 * resid / n
    return loss, backward(params, cache, dq)


def batch_loss(params: NetParams, X, actions, targets) -> float:
    """Loss only; no cache is built and no backward pass runs."""
    h = X
    for W, b in zip(params.trunk_w, params.trunk_b):
        h = np.maximum(h @ W + b, 0.0)
    adv = h @ params.adv_w + params.adv_b
    rows = np.arange(len(X))
    q = (h @ params.value_w)[:, 0] + params.value_b[0] + adv[rows, actions] - adv.mean(axis=1)
    return float(np.mean((targets - q) ** 2))


def sgd_step(params: NetParams, grads: NetParams, eta: float) -> NetParams:
    if eta <= 0:
        raise ValueError("step size must be positive")
    if not grads.is_finite():
        raise FloatingPointError("non-finite gradient")
    return NetParams.from_arrays([p - eta * g for p, g in zip(params.arrays(), grads.arrays())])


def numerical_gradient(params: NetParams, X, actions, targets, h: float = 1e-5) -> NetParams:
    """Central differences of the batch loss, one coordinate at a time."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    actions = np.asarray(actions, dtype=np.intp)
    targets = np.asarray(targets, dtype=float)
    probe = params.copy()
    out = []
    for arr in probe.arrays():
        g = np.zeros_like(arr)
        flat, gflat = arr.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + h
            lp = batch_loss(probe, X, actions, targets)
            flat[i] = old - h
            lm = batch_loss(probe, X, actions, targets)
            flat[i] = old
            gflat[i] = (lp - lm) / (2 * h)
        out.append(g)
    return NetParams.from_arrays(out)


def relative_error(analytic: NetParams, numeric: NetParams, floor: float = 1e-5) -> float:
    """max |a - n| / max(|a| + |n|, floor) over every parameter.

    The floor keeps near-zero entries from dividing central-difference roundoff
    (about 1e-10 at h = 1e-5) by almost nothing.
    """
    worst = 0.0
    for a, n in zip(analytic.arrays(), numeric.arrays()):
        err = np.abs(a - n) / np.maximum(np.abs(a) + np.abs(n), floor)
        if err.size:
            worst = max(worst, float(err.max()))
    return worst


def grad_check(arch: NetArchitecture = NetArchitecture(hidden=(8, 8)), draws: int = 20,
               batch_size: int = 8, seed: int = 0, h: float = 1e-5) -> list[float]:
    """Compare analytic and finite-difference gradients on random nets and batches.

    Returns one max relative error per draw.
    """
    rng = np.random.default_rng(seed)
    errors = []
    for _ in range(draws):
        params = init_params(arch, int(rng.integers(2**31)))
        # non-zero biases so every branch of the backward pass is exercised
        params = params.map(lambda a: a + rng.normal(scale=0.1, size=a.shape))
        X = rng.uniform(-1, 1, size=(batch_size, arch.input_dim))
        acts = rng.integers(0, arch.num_actions, size=batch_size)
        Y = rng.normal(scale=5.0, size=batch_size)
        _, g = loss_and_gradient(params, X, acts, Y)
        errors.append(relative_error(g, numerical_gradient(params, X, acts, Y, h)))
    return errors


def save_params(params: NetParams, path, extra: dict | None = None) -> None:
    """Binary checkpoint: magic, uint32 header length, JSON header, float64 payload.

    The header lists every array's name and shape in payload order.
    """
    header = {
        "arrays": [{"name": n, "shape": list(a.shape)} for n, a in zip(params.names(), params.arrays())],
        "extra": extra or {},
    }
    blob = json.dumps(header, sort_keys=True).encode()
    with Path(path).open("wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for a in params.arrays():
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def load_params(path) -> tuple[NetParams, dict]:
    data = Path(path).read_bytes()
    if data[:len(MAGIC)] != MAGIC:
        raise ValueError(f"{path} is not a network checkpoint")
    off = len(MAGIC)
    (n,) = struct.unpack_from("<I", data, off)
    off += 4
    header = json.loads(data[off:off + n])
    off += n
    arrays = []
    for spec in header["arrays"]:
        shape = tuple(spec["shape"])
        count = int(np.prod(shape)) if shape else 1
        arrays.append(np.frombuffer(data, dtype="<f8", count=count, offset=off).reshape(shape).copy())
        off += 8 * count
    if off != len(data):
        raise ValueError(f"{path}: payload size does not match header")
    return NetParams.from_arrays(arrays), header.get("extra", {})
