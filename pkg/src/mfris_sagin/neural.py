"""Dense feed-forward nets with hand-written backprop, SGD/Adam and soft updates."""
from __future__ import annotations

import io
from pathlib import Path

import numpy as np

CKPT_VERSION = 1
ACTIVATIONS = ("relu", "tanh", "linear", "sigmoid", "softmax")


def _act(name, z):
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "tanh":
        return np.tanh(z)
    if name == "linear":
        return z
    if name == "sigmoid":
        return 1.0 / (1.0 + np.exp(-z))
    if name == "softmax":
        e = np.exp(z - z.max(axis=-1, keepdims=True))
        return e / e.sum(axis=-1, keepdims=True)
    raise ValueError(f"unknown activation {name!r}")


def _act_grad(name, z, a, g):
    """Gradient w.r.t. pre-activation z given upstream gradient g on a."""
    if name == "relu":
        return g * (z > 0)
    if name == "tanh":
        return g * (1.0 - a**2)
    if name == "linear":
        return g
    if name == "sigmoid":
        return g * a * (1.0 - a)
    if name == "softmax":
        return a * (g - np.sum(g * a, axis=-1, keepdims=True))
    raise ValueError(f"unknown activation {name!r}")


class MLP:
    """Stack of affine layers, each followed by its activation.

    Weights are (fan_in, fan_out) and initialised U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
    """

    def __init__(self, sizes, activations, rng=None):
        sizes = [int(s) for s in sizes]
        if len(activations) != len(sizes) - 1:
            raise ValueError("need one activation per layer")
        for a in activations:
            if a not in ACTIVATIONS:
                raise ValueError(f"unknown activation {a!r}")
        rng = np.random.default_rng(rng)
        self.sizes = sizes
        self.activations = list(activations)
        self.params = []
        for fi, fo in zip(sizes[:-1], sizes[1:]):
            lim = 1.0 / np.sqrt(fi)
            self.params.append([rng.uniform(-lim, lim, (fi, fo)), rng.uniform(-lim, lim, fo)])

    @property
    def n_in(self) -> int:
        return self.sizes[0]

    @property
    def n_out(self) -> int:
        return self.sizes[-1]

    def forward(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        cache = [x]
        for (W, b), act in zip(self.params, self.activations):
            z = x @ W + b
            x = _act(act, z)
            cache.append((z, x))
        return x, cache

    def predict(self, x):
        return self.forward(x)[0]

    def backward(self, cache, grad_out):
        """Parameter gradients and the gradient w.r.t. the input."""
        grads = [None] * len(self.params)
        g = grad_out
        for i in range(len(self.params) - 1, -1, -1):
            z, a = cache[i + 1]
            inp = cache[0] if i == 0 else cache[i][1]
            gz = _act_grad(self.activations[i], z, a, g)
            W = self.params[i][0]
            grads[i] = [inp.T @ gz, gz.sum(axis=0)]
            g = gz @ W.T
        return grads, g

    def copy(self) -> "MLP":
        new = MLP.__new__(MLP)
        new.sizes = list(self.sizes)
        new.activations = list(self.activations)
        new.params = [[W.copy(), b.copy()] for W, b in self.params]
        return new

    def flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for layer in self.params for p in layer])

    def set_flat(self, v) -> None:
        off = 0
        for layer in self.params:
            for j, p in enumerate(layer):
                layer[j] = np.asarray(v[off:off + p.size], dtype=float).reshape(p.shape).copy()
                off += p.size

    def state(self) -> dict:
        out = {"sizes": np.array(self.sizes), "activations": np.array(self.activations)}
        for i, (W, b) in enumerate(self.params):
            out[f"W{i}"], out[f"b{i}"] = W, b
        return out

    @classmethod
    def from_state(cls, st) -> "MLP":
        new = cls.__new__(cls)
        new.sizes = [int(s) for s in st["sizes"]]
        new.activations = [str(a) for a in st["activations"]]
        new.params = [[np.array(st[f"W{i}"]), np.array(st[f"b{i}"])] for i in range(len(new.sizes) - 1)]
        return new


def clip_grads(grads, max_norm):
    if max_norm is None:
        return grads
    total = np.sqrt(sum(float(np.sum(g * g)) for layer in grads for g in layer))
    if total <= max_norm or total == 0:
        return grads
    s = max_norm / total
    return [[g * s for g in layer] for layer in grads]


def sgd_step(net: MLP, grads, lr: float) -> MLP:
    for layer, gl in zip(net.params, grads):
        for j in range(2):
            layer[j] = layer[j] - lr * gl[j]
    return net


class Adam:
    def __init__(self, net: MLP, lr: float, b1=0.9, b2=0.999, eps=1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, b1, b2, eps
        self.m = [[np.zeros_like(p) for p in layer] for layer in net.params]
        self.v = [[np.zeros_like(p) for p in layer] for layer in net.params]
        self.t = 0

    def step(self, net: MLP, grads) -> MLP:
        self.t += 1
        c1 = 1 - self.b1**self.t
        c2 = 1 - self.b2**self.t
        for li, (layer, gl) in enumerate(zip(net.params, grads)):
            for j in range(2):
                self.m[li][j] = self.b1 * self.m[li][j] + (1 - self.b1) * gl[j]
                self.v[li][j] = self.b2 * self.v[li][j] + (1 - self.b2) * gl[j] ** 2
                layer[j] = layer[j] - self.lr * (self.m[li][j] / c1) / (np.sqrt(self.v[li][j] / c2) + self.eps)
        return net


class Optimizer:
    """Plain SGD by default; Adam when requested."""

    def __init__(self, net: MLP, lr: float, kind: str = "sgd", grad_clip=None):
        self.kind, self.lr, self.grad_clip = kind, lr, grad_clip
        self.adam = Adam(net, lr) if kind == "adam" else None

    def step(self, net: MLP, grads) -> MLP:
        grads = clip_grads(grads, self.grad_clip)
        if self.adam is not None:
            return self.adam.step(net, grads)
        return sgd_step(net, grads, self.lr)


def soft_update(target: MLP, current: MLP, tau: float) -> MLP:
    for lt, lc in zip(target.params, current.params):
        for j in range(2):
            lt[j] = tau * lc[j] + (1.0 - tau) * lt[j]
    return target


def save_nets(path, nets: dict) -> None:
    """Write named nets into one versioned npz file."""
    arrays = {"__version__": np.array(CKPT_VERSION), "__names__": np.array(sorted(nets))}
    for name, net in nets.items():
        for k, v in net.state().items():
            arrays[f"{name}/{k}"] = v
    buf = io.BytesIO()
    np.savez(buf, **arrays)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_bytes(buf.getvalue())


def load_nets(path) -> dict:
    with np.load(path, allow_pickle=False) as z:
        if int(z["__version__"]) != CKPT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version")
        out = {}
        for name in z["__names__"]:
            name = str(name)
            st = {k.split("/", 1)[1]: z[k] for k in z.files if k.startswith(name + "/")}
            out[name] = MLP.from_state(st)
        return out
