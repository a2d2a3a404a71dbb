"""Self-contained dense-network core: MLPs with analytic reverse-mode
gradients, softmax utilities, the Adam optimizer, and finite-difference
gradient verification. Double precision throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

LINEAR = "linear"
SOFTMAX = "softmax"


class ShapeError(ValueError):
    pass


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def softmax(z: np.ndarray) -> np.ndarray:
    """Row-wise stable softmax; invariant under shifting logits."""
    z = np.asarray(z, dtype=np.float64)
    shifted = z - np.max(z, axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=-1, keepdims=True)


@dataclass
class MLPParams:
    weights: list[np.ndarray]  # layer l: (out_l, in_l)
    biases: list[np.ndarray]  # layer l: (out_l,)
    output: str = LINEAR  # linear | softmax head

    @property
    def sizes(self) -> list[int]:
        return [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]

    def copy(self) -> "MLPParams":
        return MLPParams([w.copy() for w in self.weights], [b.copy() for b in self.biases], self.output)

    def flatten(self) -> np.ndarray:
        parts = []
        for w, b in zip(self.weights, self.biases):
            parts.append(w.ravel())
            parts.append(b.ravel())
        return np.concatenate(parts)

    def to_dict(self) -> dict:
        return {
            "sizes": self.sizes,
            "output": self.output,
            "weights": [w.ravel().tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @staticmethod
    def from_dict(doc: dict) -> "MLPParams":
        sizes = [int(s) for s in doc["sizes"]]
        weights = []
        biases = []
        for i, (flat_w, flat_b) in enumerate(zip(doc["weights"], doc["biases"])):
            w = np.asarray(flat_w, dtype=np.float64).reshape(sizes[i + 1], sizes[i])
            b = np.asarray(flat_b, dtype=np.float64)
            weights.append(w)
            biases.append(b)
        return MLPParams(weights, biases, str(doc["output"]))


def init_mlp(sizes: list[int], output: str, rng: np.random.Generator) -> MLPParams:
    """Glorot-uniform weights, zero biases. ``sizes`` chains input through
    hidden widths to the output width."""
    if len(sizes) < 2:
        raise ShapeError("need at least an input and an output size")
    if output not in (LINEAR, SOFTMAX):
        raise ShapeError(f"unknown output activation {output!r}")
    weights = []
    biases = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out, dtype=np.float64))
    return MLPParams(weights, biases, output)


def mlp_forward(p: MLPParams, x: np.ndarray) -> tuple[np.ndarray, dict]:
    """Affine + rectifier stack with a linear or softmax head. Accepts a
    single vector (d,) or a batch (B, d); returns output plus the activation
    cache consumed by :func:`mlp_backward`."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    h = x[None, :] if single else x
    if h.shape[1] != p.weights[0].shape[1]:
        raise ShapeError(f"input width {h.shape[1]} != expected {p.weights[0].shape[1]}")
    inputs = []  # layer inputs h_{l-1}
    pre = []  # pre-activations z_l
    for i, (w, b) in enumerate(zip(p.weights, p.biases)):
        inputs.append(h)
        z = h @ w.T + b
        pre.append(z)
        h = z if i == len(p.weights) - 1 else relu(z)
    out = softmax(h) if p.output == SOFTMAX else h
    cache = {"inputs": inputs, "pre": pre, "out": out, "single": single, "n_layers": len(p.weights)}
    if single:
        out = out[0]
    return out, cache


def mlp_backward(p: MLPParams, cache: dict, grad_out: np.ndarray) -> tuple[list[tuple[np.ndarray, np.ndarray]], np.ndarray]:
    """Exact gradients of the forward map. ``grad_out`` is the upstream
    gradient with respect to the network OUTPUT (after softmax, when that head
    is active). Parameter gradients are summed over the batch. Returns
    ([(dW, db) per layer], dx)."""
    if cache.get("n_layers") != len(p.weights):
        raise ShapeError("cache does not match parameter stack")
    g = np.asarray(grad_out, dtype=np.float64)
    if cache["single"]:
        g = g[None, :]
    if g.shape != cache["out"].shape:
        raise ShapeError(f"upstream gradient shape {g.shape} != output shape {cache['out'].shape}")
    if p.output == SOFTMAX:
        s = cache["out"]
        g = s * (g - np.sum(g * s, axis=-1, keepdims=True))
    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(p.weights)  # type: ignore[list-item]
    for i in range(len(p.weights) - 1, -1, -1):
        if i != len(p.weights) - 1:
            g = g * (cache["pre"][i] > 0.0)
        dw = g.T @ cache["inputs"][i]
        db = g.sum(axis=0)
        grads[i] = (dw, db)
        g = g @ p.weights[i]
    dx = g[0] if cache["single"] else g
    return grads, dx


def zero_grads_like(p: MLPParams) -> list[tuple[np.ndarray, np.ndarray]]:
    return [(np.zeros_like(w), np.zeros_like(b)) for w, b in zip(p.weights, p.biases)]


def accumulate_grads(total, extra, scale: float = 1.0):
    return [(tw + scale * ew, tb + scale * eb) for (tw, tb), (ew, eb) in zip(total, extra)]


@dataclass
class AdamState:
    m: list[tuple[np.ndarray, np.ndarray]]
    v: list[tuple[np.ndarray, np.ndarray]]
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @staticmethod
    def for_params(p: MLPParams, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        return AdamState(m=zero_grads_like(p), v=zero_grads_like(p), beta1=beta1, beta2=beta2, eps=eps)


def adam_step(p: MLPParams, grads, st: AdamState, lr: float) -> tuple[MLPParams, AdamState]:
    """One bias-corrected adaptive-moment update, in place."""
    if len(grads) != len(p.weights):
        raise ShapeError("gradient stack does not match parameters")
    st.step += 1
    b1, b2 = st.beta1, st.beta2
    c1 = 1.0 - b1**st.step
    c2 = 1.0 - b2**st.step
    for i, ((gw, gb), (w, b)) in enumerate(zip(grads, zip(p.weights, p.biases))):
        if gw.shape != w.shape or gb.shape != b.shape:
            raise ShapeError(f"layer {i}: gradient shape mismatch")
        if not (np.all(np.isfinite(gw)) and np.all(np.isfinite(gb))):
            raise FloatingPointError(f"nonfinite gradient at layer {i}")
        mw, mb = st.m[i]
        vw, vb = st.v[i]
        mw[:] = b1 * mw + (1.0 - b1) * gw
        mb[:] = b1 * mb + (1.0 - b1) * gb
        vw[:] = b2 * vw + (1.0 - b2) * gw * gw
        vb[:] = b2 * vb + (1.0 - b2) * gb * gb
        w -= lr * (mw / c1) / (np.sqrt(vw / c2) + st.eps)
        b -= lr * (mb / c1) / (np.sqrt(vb / c2) + st.eps)
    return p, st


def grad_check(p: MLPParams, x: np.ndarray, loss, h: float = 1e-5) -> float:
    """Worst relative disagreement between analytic and central
    finite-difference gradients over every parameter entry.

    ``loss`` maps the network output vector to ``(value, d value / d output)``.
    """
    out, cache = mlp_forward(p, x)
    _, gout = loss(out)
    analytic, _ = mlp_backward(p, cache, gout)

    worst = 0.0
    for li, (w, b) in enumerate(zip(p.weights, p.biases)):
        for arr, ga in ((w, analytic[li][0]), (b, analytic[li][1])):
            flat = arr.ravel()
            gflat = ga.ravel()
            for j in range(flat.size):
                orig = flat[j]
                flat[j] = orig + h
                lo_plus, _ = loss(mlp_forward(p, x)[0])
                flat[j] = orig - h
                lo_minus, _ = loss(mlp_forward(p, x)[0])
                flat[j] = orig
                fd = (lo_plus - lo_minus) / (2.0 * h)
                denom = max(1.0, abs(fd), abs(gflat[j]))
                worst = max(worst, abs(fd - gflat[j]) / denom)
    return worst


def soft_update(target: MLPParams, online: MLPParams, tau: float) -> None:
    """theta_target <- tau * theta + (1 - tau) * theta_target, in place."""
    for tw, w in zip(target.weights, online.weights):
        tw *= 1.0 - tau
        tw += tau * w
    for tb, b in zip(target.biases, online.biases):
        tb *= 1.0 - tau
        tb += tau * b


def soft_update_array(target: np.ndarray, online: np.ndarray, tau: float) -> None:
    target *= 1.0 - tau
    target += tau * online


@dataclass
class ArrayAdam:
    """Adam moments for one bare parameter array."""

    m: np.ndarray
    v: np.ndarray
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @staticmethod
    def for_array(a: np.ndarray) -> "ArrayAdam":
        return ArrayAdam(m=np.zeros_like(a), v=np.zeros_like(a))

    def update(self, param: np.ndarray, grad: np.ndarray, lr: float) -> None:
        if grad.shape != param.shape:
            raise ShapeError("gradient shape mismatch")
        if not np.all(np.isfinite(grad)):
            raise FloatingPointError("nonfinite gradient")
        self.step += 1
        self.m[:] = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v[:] = self.beta2 * self.v + (1.0 - self.beta2) * grad * grad
        mhat = self.m / (1.0 - self.beta1**self.step)
        vhat = self.v / (1.0 - self.beta2**self.step)
        param -= lr * mhat / (np.sqrt(vhat) + self.eps)


@dataclass
class Checkpoint:
    """JSON-serializable bundle for one network."""

    algo: str
    scenario: str
    name: str
    params: MLPParams
    hyperparameters: dict = field(default_factory=dict)
    seed: int | None = None

    def to_dict(self) -> dict:
        return {
            "algo": self.algo,
            "scenario": self.scenario,
            "name": self.name,
            "network": self.params.to_dict(),
            "hyperparameters": self.hyperparameters,
            "seed": self.seed,
        }

    @staticmethod
    def from_dict(doc: dict) -> "Checkpoint":
        return Checkpoint(
            algo=str(doc["algo"]),
            scenario=str(doc["scenario"]),
            name=str(doc["name"]),
            params=MLPParams.from_dict(doc["network"]),
            hyperparameters=dict(doc.get("hyperparameters", {})),
            seed=doc.get("seed"),
        )
