"""Fully connected Q-value network in plain numpy.

Parameters may carry leading "agent" axes: a network built with
``n_agents=k`` holds ``k`` independent networks whose weights are stacked
along axis 0, so a whole population trains with one batched matmul per
layer while every slice only ever sees its own data.
"""

from __future__ import annotations

import io
import math
from pathlib import Path

import numpy as np

CHECKPOINT_VERSION = 1


class QNetwork:
    """ReLU hidden layers, identity output; ``weights[l]`` is ``(..., fan_in, fan_out)``."""

    def __init__(self, weights, biases, dtype=None):
        if len(weights) != len(biases) or not weights:
            raise ValueError("need one bias per weight matrix")
        if dtype is None:
            first = np.asarray(weights[0])
            dtype = first.dtype if np.issubdtype(first.dtype, np.floating) else np.float64
        self.weights = [np.array(w, dtype=dtype) for w in weights]
        self.biases = [np.array(b, dtype=dtype) for b in biases]
        lead = self.weights[0].shape[:-2]
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape[:-2] != lead or b.shape != lead + (w.shape[-1],):
                raise ValueError(f"layer {l}: weight {w.shape} / bias {b.shape} mismatch")
            if l and w.shape[-2] != self.weights[l - 1].shape[-1]:
                raise ValueError(f"layer {l}: fan_in {w.shape[-2]} != previous fan_out")

    @classmethod
    def initialize(cls, sizes, rng=None, n_agents=None, seeds=None, dtype=np.float64):
        """Glorot-uniform weights, zero biases.

        ``seeds`` (one per agent) gives every stacked network its own stream,
        so agent ``i`` gets identical parameters whatever ``n_agents`` is.
        """
        if seeds is not None:
            nets = [cls.initialize(sizes, np.random.default_rng(s), dtype=dtype) for s in seeds]
            return cls.stack(nets)
        rng = rng if rng is not None else np.random.default_rng()
        lead = () if n_agents is None else (n_agents,)
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-limit, limit, size=lead + (fan_in, fan_out)))
            biases.append(np.zeros(lead + (fan_out,)))
        return cls(weights, biases, dtype=dtype)

    @classmethod
    def zeros(cls, sizes, n_agents=None):
        lead = () if n_agents is None else (n_agents,)
        return cls([np.zeros(lead + (a, b)) for a, b in zip(sizes[:-1], sizes[1:])],
                   [np.zeros(lead + (b,)) for b in sizes[1:]])

    @classmethod
    def stack(cls, nets):
        return cls([np.stack(ws) for ws in zip(*(n.weights for n in nets))],
                   [np.stack(bs) for bs in zip(*(n.biases for n in nets))])

    @property
    def dtype(self):
        return self.weights[0].dtype

    @property
    def sizes(self) -> tuple[int, ...]:
        return (self.weights[0].shape[-2],) + tuple(w.shape[-1] for w in self.weights)

    @property
    def lead_shape(self) -> tuple[int, ...]:
        return self.weights[0].shape[:-2]

    @property
    def n_params(self) -> int:
        return sum(w[(0,) * len(self.lead_shape)].size + b[(0,) * len(self.lead_shape)].size
                   for w, b in zip(self.weights, self.biases))

    def __getitem__(self, idx) -> "QNetwork":
        """Parameters of the agent(s) at ``idx``, copied."""
        return QNetwork([w[idx] for w in self.weights], [b[idx] for b in self.biases])

    def __setitem__(self, idx, other: "QNetwork"):
        for w, b, ow, ob in zip(self.weights, self.biases, other.weights, other.biases):
            w[idx] = ow
            b[idx] = ob

    def copy(self) -> "QNetwork":
        return QNetwork(self.weights, self.biases)

    def copy_from(self, other: "QNetwork"):
        if other.sizes != self.sizes or other.lead_shape != self.lead_shape:
            raise ValueError(f"shape mismatch: {other.sizes} vs {self.sizes}")
        for w, ow in zip(self.weights, other.weights):
            w[...] = ow
        for b, ob in zip(self.biases, other.biases):
            b[...] = ob

    def is_finite(self) -> bool:
        # NaN/inf always reach a float64 sum; finite float32 entries cannot overflow it
        return math.isfinite(sum(float(np.add.reduce(p, axis=None, dtype=np.float64))
                                 for p in self.weights + self.biases))

    def _check_input(self, x):
        x = np.asarray(x, dtype=self.dtype)
        if x.shape[-1] != self.weights[0].shape[-2]:
            raise ValueError(f"state has {x.shape[-1]} features, network expects {self.sizes[0]}")
        return x

    def _activations(self, x):
        acts = [x]
        last = len(self.weights) - 1
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = acts[-1] @ w
            z += b[..., None, :]
            acts.append(np.maximum(z, 0.0, out=z) if l < last else z)
        return acts

    def forward(self, x):
        """Q-values for states ``x``: ``(d,)``, ``(B, d)`` or ``(*lead, B, d)``."""
        x = self._check_input(x)
        if x.ndim == 1:
            return self._activations(x[None, :])[-1][..., 0, :]
        return self._activations(x)[-1]

    __call__ = forward

    def loss_and_grads(self, states, actions, targets):
        """Mean squared TD error on the taken actions and its gradient.

        ``states`` is ``(*lead, B, d)``, ``actions``/``targets`` ``(*lead, B)``.
        Returns ``(loss, grad_w, grad_b)`` with ``loss`` shaped ``lead``.
        """
        states = self._check_input(states)
        actions = np.asarray(actions, dtype=np.int64)
        targets = np.asarray(targets, dtype=self.dtype)
        acts = self._activations(states)
        q = acts[-1]
        taken = actions[..., None] == np.arange(q.shape[-1])
        err = (q * taken).sum(axis=-1) - targets
        batch = err.shape[-1]
        loss = (err * err).sum(axis=-1) / batch

        delta = taken * ((2.0 / batch) * err)[..., None]
        grad_w = [None] * len(self.weights)
        grad_b = [None] * len(self.weights)
        for l in range(len(self.weights) - 1, -1, -1):
            grad_w[l] = acts[l].swapaxes(-1, -2) @ delta
            grad_b[l] = delta.sum(axis=-2)
            if l:
                delta = delta @ self.weights[l].swapaxes(-1, -2)
                delta *= acts[l] > 0
        return loss, grad_w, grad_b

    def apply_gradients(self, grad_w, grad_b, lr):
        for w, g in zip(self.weights, grad_w):
            w -= lr * g
        for b, g in zip(self.biases, grad_b):
            b -= lr * g

    # flat parameter view, used by gradient checks

    def get_flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for pair in zip(self.weights, self.biases) for p in pair])

    def set_flat(self, flat):
        flat = np.asarray(flat, dtype=float)
        offset = 0
        for pair in zip(self.weights, self.biases):
            for p in pair:
                p[...] = flat[offset:offset + p.size].reshape(p.shape)
                offset += p.size
        if offset != flat.size:
            raise ValueError(f"expected {offset} parameters, got {flat.size}")

    @staticmethod
    def flatten_grads(grad_w, grad_b) -> np.ndarray:
        return np.concatenate([g.ravel() for pair in zip(grad_w, grad_b) for g in pair])

    # checkpoints

    def save(self, path):
        arrays = {"version": np.array(CHECKPOINT_VERSION)}
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            arrays[f"w{l}"] = w
            arrays[f"b{l}"] = b
        buf = io.BytesIO()
        np.savez(buf, **arrays)
        Path(path).write_bytes(buf.getvalue())

    @classmethod
    def load(cls, path) -> "QNetwork":
        with np.load(path) as data:
            version = int(data["version"])
            if version != CHECKPOINT_VERSION:
                raise ValueError(f"unsupported checkpoint version {version}")
            n = sum(1 for k in data.files if k.startswith("w"))
            return cls([data[f"w{l}"] for l in range(n)], [data[f"b{l}"] for l in range(n)])
