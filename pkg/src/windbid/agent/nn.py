"""Small fully-connected networks with hand-written backpropagation."""
from __future__ import annotations

from typing import List, Sequence

import numpy as np

from windbid.errors import ArchitectureMismatch, DimensionMismatch


def _sigmoid(z):
    # split by sign so large |z| neither overflows nor loses the tail
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


ACTIVATIONS = {
    "relu": (lambda z: np.maximum(z, 0.0), lambda z, a: (z > 0).astype(z.dtype)),
    "identity": (lambda z: z, lambda z, a: np.ones_like(z)),
    "tanh": (np.tanh, lambda z, a: 1.0 - a * a),
    "sigmoid": (_sigmoid, lambda z, a: a * (1.0 - a)),
}


class Mlp:
    """Dense layers ``x @ W + b``; weights are stored (fan_in, fan_out)."""

    def __init__(self, sizes: Sequence[int], hidden: str = "relu", output: str = "identity", rng=None):
        if len(sizes) < 2:
            raise ValueError("an Mlp needs at least an input and an output size")
        if hidden not in ACTIVATIONS or output not in ACTIVATIONS:
            raise ValueError(f"activations must be among {sorted(ACTIVATIONS)}")
        self.sizes = [int(s) for s in sizes]
        self.hidden = hidden
        self.output = output
        rng = np.random.default_rng(rng)
        self.weights: List[np.ndarray] = []
        self.biases: List[np.ndarray] = []
        for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            self.weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            self.biases.append(rng.uniform(-bound, bound, size=fan_out))

    @property
    def params(self) -> List[np.ndarray]:
        """Parameter arrays in a fixed order (W0, b0, W1, b1, ...), not copies."""
        out = []
        for W, b in zip(self.weights, self.biases):
            out += [W, b]
        return out

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def copy(self) -> "Mlp":
        net = Mlp.__new__(Mlp)
        net.sizes = list(self.sizes)
        net.hidden = self.hidden
        net.output = self.output
        net.weights = [W.copy() for W in self.weights]
        net.biases = [b.copy() for b in self.biases]
        return net

    def same_architecture(self, other: "Mlp") -> bool:
        return (self.sizes == other.sizes and self.hidden == other.hidden
                and self.output == other.output)

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(p)) for p in self.params)

    def forward(self, x, cache=False):
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        X = x[None, :] if single else x
        if X.shape[1] != self.sizes[0]:
            raise DimensionMismatch(f"input width {X.shape[1]} does not match layer size {self.sizes[0]}")
        acts = [X]
        pre = []
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            z = acts[-1] @ W + b
            f = ACTIVATIONS[self.output if i == self.n_layers - 1 else self.hidden][0]
            pre.append(z)
            acts.append(f(z))
        out = acts[-1][0] if single else acts[-1]
        if cache:
            return out, (acts, pre, single)
        return out

    __call__ = forward

    def backward(self, cache, upstream):
        """Gradients of ``sum(upstream * output)`` w.r.t. parameters and input.

        Returns (list aligned with ``params``, input gradient).
        """
        acts, pre, single = cache
        g = np.asarray(upstream, dtype=float)
        if single:
            g = g[None, :]
        grads = [None] * (2 * self.n_layers)
        for i in range(self.n_layers - 1, -1, -1):
            name = self.output if i == self.n_layers - 1 else self.hidden
            g = g * ACTIVATIONS[name][1](pre[i], acts[i + 1])
            grads[2 * i] = acts[i].T @ g
            grads[2 * i + 1] = g.sum(axis=0)
            g = g @ self.weights[i].T
        return grads, (g[0] if single else g)

    def to_dict(self):
        return {"sizes": self.sizes, "hidden": self.hidden, "output": self.output,
                "weights": [W.tolist() for W in self.weights],
                "biases": [b.tolist() for b in self.biases]}

    @classmethod
    def from_dict(cls, d):
        net = cls.__new__(cls)
        net.sizes = list(d["sizes"])
        net.hidden = d["hidden"]
        net.output = d["output"]
        net.weights = [np.array(W, dtype=float).reshape(a, b)
                       for W, a, b in zip(d["weights"], net.sizes[:-1], net.sizes[1:])]
        net.biases = [np.array(b, dtype=float) for b in d["biases"]]
        return net


def backprop_grads(net: Mlp, inputs, upstream):
    _, cache = net.forward(inputs, cache=True)
    return net.backward(cache, upstream)


def soft_update(target: Mlp, online: Mlp, tau: float) -> Mlp:
    """In place: target <- tau * online + (1 - tau) * target."""
    if not target.same_architecture(online):
        raise ArchitectureMismatch(f"target {target.sizes} vs online {online.sizes}")
    if not 0.0 <= tau <= 1.0:
        raise ValueError("tau must lie in [0, 1]")
    for t, o in zip(target.params, online.params):
        if tau == 1.0:
            t[...] = o
        elif tau > 0.0:
            t *= 1.0 - tau
            t += tau * o
    return target


class Adam:
    def __init__(self, params: List[np.ndarray], lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads, ascent=False):
        if self.lr == 0.0:
            return
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        sign = 1.0 if ascent else -1.0
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p += sign * self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)

    def state_dict(self):
        return {"t": self.t, "m": [m.tolist() for m in self.m], "v": [v.tolist() for v in self.v]}

    def load_state(self, d):
        self.t = d["t"]
        for dst, src in zip(self.m, d["m"]):
            dst[...] = np.asarray(src).reshape(dst.shape)
        for dst, src in zip(self.v, d["v"]):
            dst[...] = np.asarray(src).reshape(dst.shape)
