"""Dense feed-forward networks with hand-written backprop and Adam.

Weights are stored as ``(fan_in, fan_out)`` matrices so a layer computes
``x @ W + b``; inputs may be a single vector or a ``(batch, dim)`` array.
Hidden layers use ReLU, the output layer is softmax or identity.
Everything runs in float64.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

SOFTMAX = "softmax"
IDENTITY = "identity"
RELU = "relu"


@dataclass
class Mlp:
    layer_dims: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    output_activation: str = IDENTITY
    hidden_activation: str = RELU

    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def set_params(self, params: list[np.ndarray]) -> None:
        self.weights = list(params[0::2])
        self.biases = list(params[1::2])

    def copy(self) -> "Mlp":
        return replace(
            self,
            layer_dims=list(self.layer_dims),
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
        )


def init_mlp(layer_dims, output_activation: str, rng: np.random.Generator) -> Mlp:
    """Glorot-uniform weights, zero biases."""
    dims = [int(d) for d in layer_dims]
    if len(dims) < 2 or any(d < 1 for d in dims):
        raise ValueError(f"need at least two positive layer sizes, got {dims}")
    if output_activation not in (SOFTMAX, IDENTITY):
        raise ValueError(f"unknown output activation {output_activation!r}")
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return Mlp(dims, weights, biases, output_activation)


def softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def forward(net: Mlp, x):
    """Return ``(output, cache)``; the cache feeds :func:`backward`."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != net.layer_dims[0]:
        raise ValueError(f"input has dim {x.shape[-1]}, network expects {net.layer_dims[0]}")
    acts = [x]
    pre = []
    a = x
    last = len(net.weights) - 1
    for k, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = a @ w + b
        pre.append(z)
        if k < last:
            a = np.maximum(z, 0.0)
        elif net.output_activation == SOFTMAX:
            a = softmax(z)
        else:
            a = z
        acts.append(a)
    return a, (acts, pre)


def backward(net: Mlp, cache, grad_out):
    """Reverse pass.

    Returns ``(param_grads, input_grad)`` with ``param_grads`` ordered like
    :meth:`Mlp.params`.  For batched inputs the parameter gradients are
    summed over the batch.
    """
    acts, pre = cache
    grad_out = np.asarray(grad_out, dtype=np.float64)
    if grad_out.shape != acts[-1].shape:
        raise ValueError(f"output gradient shape {grad_out.shape} != output shape {acts[-1].shape}")
    if net.output_activation == SOFTMAX:
        y = acts[-1]
        dz = y * (grad_out - (grad_out * y).sum(axis=-1, keepdims=True))
    else:
        dz = grad_out
    grads = [None] * (2 * len(net.weights))
    for k in range(len(net.weights) - 1, -1, -1):
        a_prev = acts[k]
        if a_prev.ndim == 1:
            grads[2 * k] = np.outer(a_prev, dz)
            grads[2 * k + 1] = dz.copy()
        else:
            grads[2 * k] = a_prev.T @ dz
            grads[2 * k + 1] = dz.sum(axis=0)
        da = dz @ net.weights[k].T
        if k > 0:
            dz = da * (pre[k - 1] > 0.0)
    return grads, da


@dataclass(frozen=True)
class AdamState:
    first_moments: tuple
    second_moments: tuple
    step_count: int = 0
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def zeros_like(cls, params, learning_rate: float, **kwargs) -> "AdamState":
        return cls(
            tuple(np.zeros_like(p) for p in params),
            tuple(np.zeros_like(p) for p in params),
            0,
            learning_rate,
            **kwargs,
        )


def adam_step(params, grads, opt: AdamState):
    """Bias-corrected Adam update; returns new params and a new state."""
    t = opt.step_count + 1
    c1 = 1.0 - opt.beta1**t
    c2 = 1.0 - opt.beta2**t
    new_params, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, opt.first_moments, opt.second_moments):
        m = opt.beta1 * m + (1.0 - opt.beta1) * g
        v = opt.beta2 * v + (1.0 - opt.beta2) * (g * g)
        new_params.append(p - opt.learning_rate * (m / c1) / (np.sqrt(v / c2) + opt.epsilon))
        new_m.append(m)
        new_v.append(v)
    return new_params, replace(
        opt, first_moments=tuple(new_m), second_moments=tuple(new_v), step_count=t
    )


# ---------------------------------------------------------------------------
# finite-difference checking


def finite_difference(fn, arrays, h: float = 1e-5) -> list[np.ndarray]:
    """Central differences of scalar ``fn()`` w.r.t. each array (perturbed in place)."""
    out = []
    for arr in arrays:
        g = np.zeros_like(arr)
        flat = arr.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + h
            up = fn()
            flat[i] = old - h
            down = fn()
            flat[i] = old
            gflat[i] = (up - down) / (2.0 * h)
        out.append(g)
    return out


def max_relative_error(analytic, numeric, floor: float = 1e-7) -> float:
    """Largest elementwise ``|a-n| / max(|a|, |n|, floor)`` over all arrays."""
    worst = 0.0
    for a, n in zip(analytic, numeric):
        a = np.asarray(a)
        n = np.asarray(n)
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
        worst = max(worst, float((np.abs(a - n) / denom).max(initial=0.0)))
    return worst


# ---------------------------------------------------------------------------
# serialisation


def to_dict(net: Mlp) -> dict:
    return {
        "layer_dims": list(net.layer_dims),
        "hidden_activation": net.hidden_activation,
        "output_activation": net.output_activation,
        "weights": [w.ravel().tolist() for w in net.weights],
        "biases": [b.tolist() for b in net.biases],
    }


def from_dict(data: dict) -> Mlp:
    dims = [int(d) for d in data["layer_dims"]]
    if data.get("hidden_activation", RELU) != RELU:
        raise ValueError(f"unsupported hidden activation {data['hidden_activation']!r}")
    if data["output_activation"] not in (SOFTMAX, IDENTITY):
        raise ValueError(f"unsupported output activation {data['output_activation']!r}")
    weights = [
        np.asarray(w, dtype=np.float64).reshape(fi, fo)
        for w, fi, fo in zip(data["weights"], dims[:-1], dims[1:])
    ]
    biases = [np.asarray(b, dtype=np.float64) for b in data["biases"]]
    if len(weights) != len(dims) - 1 or any(b.shape != (fo,) for b, fo in zip(biases, dims[1:])):
        raise ValueError("parameter arrays do not match layer_dims")
    return Mlp(dims, weights, biases, data["output_activation"])
