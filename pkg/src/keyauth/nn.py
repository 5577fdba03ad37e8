"""Minimal from-scratch neural-network engine on numpy.

Four layer kinds (dense, conv1d, relu, flatten), softmax cross-entropy,
bias-corrected Adam, a validation-loss plateau LR scheduler, and a central
finite-difference gradient checker. Training is deterministic for a fixed
seed and data order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import Divergence, SchemaError, ShapeMismatch


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int,
                   shape: tuple[int, ...]) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class Layer:
    """Base layer: forward caches whatever backward needs."""

    params: list[np.ndarray]
    grads: list[np.ndarray]

    def __init__(self) -> None:
        self.params = []
        self.grads = []

    def forward(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def spec(self) -> dict:
        raise NotImplementedError


class Dense(Layer):
    def __init__(self, n_in: int, n_out: int,
                 rng: np.random.Generator | None = None) -> None:
        super().__init__()
        self.n_in, self.n_out = n_in, n_out
        rng = rng or np.random.default_rng(0)
        self.w = glorot_uniform(rng, n_in, n_out, (n_in, n_out))
        self.b = np.zeros(n_out)
        self.params = [self.w, self.b]
        self.grads = [np.zeros_like(self.w), np.zeros_like(self.b)]
        self._x: np.ndarray | None = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 2 or x.shape[1] != self.n_in:
            raise ShapeMismatch(f"dense expects (N, {self.n_in}), got {x.shape}")
        self._x = x
        return x @ self.w + self.b

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        assert self._x is not None
        self.grads[0][...] = self._x.T @ grad_out
        self.grads[1][...] = grad_out.sum(axis=0)
        return grad_out @ self.w.T

    def spec(self) -> dict:
        return {"kind": "dense", "n_in": self.n_in, "n_out": self.n_out}


class Conv1d(Layer):
    """1-D cross-correlation with zero padding. Input (N, C_in, L)."""

    def __init__(self, c_in: int, c_out: int, kernel: int, padding: int = 0,
                 rng: np.random.Generator | None = None) -> None:
        super().__init__()
        if kernel < 1 or padding < 0:
            raise ValueError("kernel >= 1 and padding >= 0 required")
        self.c_in, self.c_out, self.kernel, self.padding = c_in, c_out, kernel, padding
        rng = rng or np.random.default_rng(0)
        fan_in = c_in * kernel
        fan_out = c_out * kernel
        self.w = glorot_uniform(rng, fan_in, fan_out, (c_out, c_in, kernel))
        self.b = np.zeros(c_out)
        self.params = [self.w, self.b]
        self.grads = [np.zeros_like(self.w), np.zeros_like(self.b)]
        self._windows: np.ndarray | None = None
        self._in_len = 0

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 3 or x.shape[1] != self.c_in:
            raise ShapeMismatch(f"conv1d expects (N, {self.c_in}, L), got {x.shape}")
        self._in_len = x.shape[2]
        p = self.padding
        xpad = np.pad(x, ((0, 0), (0, 0), (p, p))) if p else x
        if xpad.shape[2] < self.kernel:
            raise ShapeMismatch("input shorter than kernel")
        win = np.lib.stride_tricks.sliding_window_view(xpad, self.kernel, axis=2)
        self._windows = win  # (N, C_in, L_out, K)
        return np.einsum("nclk,ock->nol", win, self.w) + self.b[None, :, None]

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        assert self._windows is not None
        self.grads[0][...] = np.einsum("nclk,nol->ock", self._windows, grad_out)
        self.grads[1][...] = grad_out.sum(axis=(0, 2))
        k, p = self.kernel, self.padding
        gpad = np.pad(grad_out, ((0, 0), (0, 0), (k - 1, k - 1)))
        gwin = np.lib.stride_tricks.sliding_window_view(gpad, k, axis=2)
        grad_xpad = np.einsum("nolk,ock->ncl", gwin, self.w[:, :, ::-1])
        if p:
            grad_xpad = grad_xpad[:, :, p:-p]
        return grad_xpad[:, :, :self._in_len]

    def spec(self) -> dict:
        return {"kind": "conv1d", "c_in": self.c_in, "c_out": self.c_out,
                "kernel": self.kernel, "padding": self.padding}


class Relu(Layer):
    def __init__(self) -> None:
        super().__init__()
        self._mask: np.ndarray | None = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._mask = x > 0
        return np.where(self._mask, x, 0.0)

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        assert self._mask is not None
        return np.where(self._mask, grad_out, 0.0)

    def spec(self) -> dict:
        return {"kind": "relu"}


class Flatten(Layer):
    def __init__(self) -> None:
        super().__init__()
        self._shape: tuple[int, ...] = ()

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        return grad_out.reshape(self._shape)

    def spec(self) -> dict:
        return {"kind": "flatten"}


def forward(layers: Sequence[Layer], batch: np.ndarray) -> np.ndarray:
    out = batch
    for layer in layers:
        out = layer.forward(out)
    return out


def backward(layers: Sequence[Layer], grad_out: np.ndarray) -> np.ndarray:
    grad = grad_out
    for layer in reversed(layers):
        grad = layer.backward(grad)
    return grad


def softmax_cross_entropy(logits: np.ndarray,
                          labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean cross-entropy and gradient wrt logits (softmax minus one-hot, / N)."""
    logits = np.atleast_2d(logits)
    labels = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    probs = exp / exp.sum(axis=1, keepdims=True)
    n = logits.shape[0]
    loss = float(-np.log(probs[np.arange(n), labels] + 1e-300).mean())
    grad = probs.copy()
    grad[np.arange(n), labels] -= 1.0
    return loss, grad / n


class Adam:
    def __init__(self, params: Sequence[np.ndarray], lr: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> None:
        self.params = list(params)
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in self.params]
        self.v = [np.zeros_like(p) for p in self.params]
        self.t = 0

    def step(self, grads: Sequence[np.ndarray]) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m[...] = b1 * m + (1 - b1) * g
            v[...] = b2 * v + (1 - b2) * g * g
            m_hat = m / (1 - b1 ** self.t)
            v_hat = v / (1 - b2 ** self.t)
            p -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


class PlateauScheduler:
    """Multiply lr by `factor` after `patience` epochs without improvement."""

    def __init__(self, lr: float = 1e-3, factor: float = 0.1, patience: int = 5,
                 min_delta: float = 1e-4, min_lr: float = 1e-6) -> None:
        if not 0.0 < factor < 1.0:
            raise ValueError("factor must be in (0, 1)")
        if patience < 1:
            raise ValueError("patience must be >= 1")
        self.lr, self.factor, self.patience = lr, factor, patience
        self.min_delta, self.min_lr = min_delta, min_lr
        self.best = np.inf
        self.bad_epochs = 0

    def step(self, validation_loss: float) -> float:
        if validation_loss < self.best - self.min_delta:
            self.best = validation_loss
            self.bad_epochs = 0
        else:
            self.bad_epochs += 1
            if self.bad_epochs >= self.patience:
                self.lr = max(self.lr * self.factor, self.min_lr)
                self.bad_epochs = 0
        return self.lr


@dataclass
class TrainConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    scheduler_factor: float = 0.1
    scheduler_patience: int = 5
    min_lr: float = 1e-6
    epochs: int = 200
    batch_size: int = 64
    early_stop_patience: int = 20
    seed: int = 0


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    lr: list[float] = field(default_factory=list)


def _all_params(layers: Sequence[Layer]) -> tuple[list[np.ndarray], list[np.ndarray]]:
    params, grads = [], []
    for layer in layers:
        params.extend(layer.params)
        grads.extend(layer.grads)
    return params, grads


def train(layers: Sequence[Layer], train_x: np.ndarray, train_y: np.ndarray,
          val_x: np.ndarray, val_y: np.ndarray,
          config: TrainConfig | None = None) -> TrainHistory:
    """Mini-batch Adam training with plateau LR decay and early stopping."""
    cfg = config or TrainConfig()
    rng = np.random.default_rng(cfg.seed)
    params, grads = _all_params(layers)
    opt = Adam(params, lr=cfg.lr, beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.eps)
    sched = PlateauScheduler(lr=cfg.lr, factor=cfg.scheduler_factor,
                             patience=cfg.scheduler_patience, min_lr=cfg.min_lr)
    history = TrainHistory()
    best_val = np.inf
    stale = 0
    n = train_x.shape[0]
    for epoch in range(cfg.epochs):
        perm = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = perm[start:start + cfg.batch_size]
            logits = forward(layers, train_x[idx])
            loss, grad = softmax_cross_entropy(logits, train_y[idx])
            if not np.isfinite(loss):
                raise Divergence(f"non-finite training loss at epoch {epoch}")
            backward(layers, grad)
            opt.step(grads)
            epoch_loss += loss * len(idx)
        val_loss, _ = softmax_cross_entropy(forward(layers, val_x), val_y)
        opt.lr = sched.step(val_loss)
        history.train_loss.append(epoch_loss / n)
        history.val_loss.append(val_loss)
        history.lr.append(opt.lr)
        if val_loss < best_val - 1e-6:
            best_val = val_loss
            stale = 0
        else:
            stale += 1
            if stale >= cfg.early_stop_patience:
                break
    return history


def predict_logits(layers: Sequence[Layer], x: np.ndarray,
                   batch_size: int = 512) -> np.ndarray:
    outs = [forward(layers, x[i:i + batch_size]) for i in range(0, x.shape[0], batch_size)]
    return np.vstack(outs)


def gradient_check(layers: Sequence[Layer], batch: np.ndarray, labels: np.ndarray,
                   h: float = 1e-5) -> float:
    """Max relative error between backprop and central finite differences."""
    logits = forward(layers, batch)
    _, grad = softmax_cross_entropy(logits, labels)
    backward(layers, grad)
    params, grads = _all_params(layers)
    analytic = [g.copy() for g in grads]
    worst = 0.0
    for p, g_an in zip(params, analytic):
        flat = p.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            lp, _ = softmax_cross_entropy(forward(layers, batch), labels)
            flat[i] = orig - h
            lm, _ = softmax_cross_entropy(forward(layers, batch), labels)
            flat[i] = orig
            g_fd = (lp - lm) / (2 * h)
            denom = max(abs(g_an.ravel()[i]), abs(g_fd), 1e-8)
            worst = max(worst, abs(g_an.ravel()[i] - g_fd) / denom)
    return worst


# --- model file (versioned text layout: layer specs + flat weight arrays) ---

NN_FORMAT_TAG = "keyauth-nn v1"


def save_network(layers: Sequence[Layer], path: str | Path) -> None:
    lines = [f"# {NN_FORMAT_TAG}", f"n_layers {len(layers)}"]
    for layer in layers:
        spec = layer.spec()
        kind = spec.pop("kind")
        args = " ".join(f"{k}={v}" for k, v in sorted(spec.items()))
        lines.append(f"layer {kind} {args}".rstrip())
        for p in layer.params:
            shape = "x".join(str(d) for d in p.shape)
            data = " ".join(repr(float(v)) for v in p.ravel())
            lines.append(f"param {shape} {data}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_network(path: str | Path) -> list[Layer]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != f"# {NN_FORMAT_TAG}":
        raise SchemaError(f"{path}: not a {NN_FORMAT_TAG} file")
    layers: list[Layer] = []
    current: Layer | None = None
    param_idx = 0
    for line in lines[2:]:
        if line.startswith("layer "):
            parts = line.split()
            kind = parts[1]
            kwargs = {k: int(v) for k, v in (kv.split("=") for kv in parts[2:])}
            if kind == "dense":
                current = Dense(kwargs["n_in"], kwargs["n_out"])
            elif kind == "conv1d":
                current = Conv1d(kwargs["c_in"], kwargs["c_out"],
                                 kwargs["kernel"], kwargs["padding"])
            elif kind == "relu":
                current = Relu()
            elif kind == "flatten":
                current = Flatten()
            else:
                raise SchemaError(f"unknown layer kind {kind!r}")
            layers.append(current)
            param_idx = 0
        elif line.startswith("param "):
            assert current is not None
            _, shape_s, data = line.split(" ", 2)
            shape = tuple(int(d) for d in shape_s.split("x"))
            arr = np.fromstring(data, sep=" ").reshape(shape)
            current.params[param_idx][...] = arr
            param_idx += 1
    return layers
