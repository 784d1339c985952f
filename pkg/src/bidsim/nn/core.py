"""Minimal dense-network core: fixed MLP shapes, manual backprop, Adam.

Tensors are plain 2-D float64 C-contiguous numpy arrays (rows = batch).
Networks are single-writer objects: a forward caches activations that the
next backward consumes; no locking is done.  Gradient and cache buffers
are owned by the network and reused between calls, so callers must
consume returned gradients before the next backward.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from ..errors import (
    ConfigurationError,
    DegenerateBatchError,
    NumericFailure,
    StateError,
)
from . import backend

NORM_EPS = 1e-5


class Activation(IntEnum):
    LINEAR = 0
    RELU = 1
    TANH = 2


class NormScheme(IntEnum):
    NONE = 0
    LAYER = 1
    BATCH = 2


class Mode(IntEnum):
    TRAIN = 0
    EVAL = 1


_EMPTY = np.empty(0)


@dataclass
class BatchNormState:
    """Running statistics for batch normalization (population variance)."""

    running_mean: np.ndarray
    running_var: np.ndarray
    momentum: float = 0.1

    @classmethod
    def for_width(cls, width: int, momentum: float = 0.1) -> "BatchNormState":
        return cls(np.zeros(width), np.ones(width), momentum)

    def copy(self) -> "BatchNormState":
        return BatchNormState(self.running_mean.copy(), self.running_var.copy(),
                              self.momentum)


def _as_batch(x) -> np.ndarray:
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(1, -1)
    if x.ndim != 2:
        raise ConfigurationError(f"expected a 2-D batch, got ndim={x.ndim}")
    return x


class DenseLayer:
    """One affine layer with optional pre-activation normalization.

    Normalization (when present) is applied to the pre-activation
    x @ W + b, before the nonlinearity.
    """

    def __init__(self, in_dim: int, out_dim: int, activation: Activation,
                 norm: NormScheme = NormScheme.NONE, rng=None, name: str = ""):
        if in_dim < 1 or out_dim < 1:
            raise ConfigurationError("layer dimensions must be positive")
        if norm == NormScheme.LAYER and out_dim < 2:
            raise ConfigurationError("layer norm needs at least 2 features")
        bound = 1.0 / np.sqrt(in_dim)
        if rng is None:
            self.weights = np.zeros((in_dim, out_dim))
            self.biases = np.zeros(out_dim)
        else:
            self.weights = rng.uniform(-bound, bound, (in_dim, out_dim))
            self.biases = rng.uniform(-bound, bound, out_dim)
        self.activation = Activation(activation)
        self.norm = NormScheme(norm)
        self.norm_state = (BatchNormState.for_width(out_dim)
                           if self.norm == NormScheme.BATCH else None)
        self.name = name or f"dense {in_dim}x{out_dim}"
        self._bufs = {}     # batch size -> (zh, y, inv_std, scratch, dx)
        self._cache = None  # (x, zh, y, inv_std) from the last forward
        self._dw = np.empty_like(self.weights)
        self._db = np.empty_like(self.biases)

    @property
    def in_dim(self) -> int:
        return self.weights.shape[0]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[1]

    def _buffers(self, rows: int):
        bufs = self._bufs.get(rows)
        if bufs is None:
            n_inv = rows if self.norm == NormScheme.LAYER else self.out_dim
            bufs = (np.empty((rows, self.out_dim)), np.empty((rows, self.out_dim)),
                    np.empty(n_inv), np.empty((rows, self.out_dim)),
                    np.empty((rows, self.in_dim)))
            self._bufs[rows] = bufs
        return bufs

    def forward(self, x: np.ndarray, mode: Mode) -> np.ndarray:
        if x.shape[1] != self.in_dim:
            raise ConfigurationError(
                f"{self.name}: input has {x.shape[1]} features, expected {self.in_dim}")
        rows = x.shape[0]
        if rows < 1:
            raise ConfigurationError(f"{self.name}: empty batch")
        train = mode == Mode.TRAIN
        if self.norm == NormScheme.BATCH and train and rows < 2:
            raise DegenerateBatchError(
                f"{self.name}: batch norm in train mode needs >= 2 rows, got {rows}")
        zh, y, inv_std, _, _ = self._buffers(rows)
        if self.norm_state is not None:
            rm, rv, mom = (self.norm_state.running_mean,
                           self.norm_state.running_var, self.norm_state.momentum)
        else:
            rm, rv, mom = _EMPTY, _EMPTY, 0.0
        backend.ops.layer_forward(x, self.weights, self.biases,
                                  int(self.activation), int(self.norm),
                                  int(train), NORM_EPS, mom, rm, rv,
                                  zh, y, inv_std)
        self._cache = (x, zh, y, inv_std, train)
        return y

    def backward(self, dy: np.ndarray, want_dw: bool = True, want_dx: bool = True):
        if self._cache is None:
            raise StateError(f"{self.name}: backward called before forward")
        x, zh, y, inv_std, train = self._cache
        _, _, _, scratch, dx = self._buffers(x.shape[0])
        backend.ops.layer_backward(dy, x, self.weights, zh, y, inv_std,
                                   int(self.activation), int(self.norm),
                                   int(train), int(want_dw), int(want_dx),
                                   self._dw, self._db, dx, scratch)
        return (self._dw if want_dw else None,
                self._db if want_dw else None,
                dx if want_dx else None)

    def copy(self) -> "DenseLayer":
        dup = DenseLayer.__new__(DenseLayer)
        dup.weights = self.weights.copy()
        dup.biases = self.biases.copy()
        dup.activation = self.activation
        dup.norm = self.norm
        dup.norm_state = self.norm_state.copy() if self.norm_state else None
        dup.name = self.name
        dup._bufs = {}
        dup._cache = None
        dup._dw = np.empty_like(dup.weights)
        dup._db = np.empty_like(dup.biases)
        return dup


@dataclass
class ParamGrads:
    """Per-layer (dW, db) pairs plus gradients w.r.t. the network inputs."""

    layers: list
    input_grad: np.ndarray | None = None
    inject_grad: np.ndarray | None = None

    def flat(self) -> list:
        out = []
        for dw, db in self.layers:
            out.append(dw)
            out.append(db)
        return out


class Network:
    """A chain of dense layers, optionally with a second input injected
    into one hidden layer's input (the critic feeds the action there).
    """

    def __init__(self, layers: list[DenseLayer], inject_at: int | None = None,
                 inject_dim: int = 0):
        if not layers:
            raise ConfigurationError("network needs at least one layer")
        self.layers = layers
        self.inject_at = inject_at
        self.inject_dim = inject_dim if inject_at is not None else 0
        expected = layers[0].in_dim
        for i, layer in enumerate(layers):
            want = layer.in_dim - (self.inject_dim if i == inject_at else 0)
            if i > 0 and want != layers[i - 1].out_dim:
                raise ConfigurationError(
                    f"layer {i} expects {want} features, "
                    f"previous layer emits {layers[i - 1].out_dim}")
        self.input_dim = expected
        self.output_dim = layers[-1].out_dim
        self._concat_buf = {}

    def parameters(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out.append(layer.weights)
            out.append(layer.biases)
        return out

    def forward(self, x, inject=None, mode: Mode = Mode.EVAL) -> np.ndarray:
        x = _as_batch(x)
        if (inject is None) != (self.inject_at is None):
            raise ConfigurationError("inject input does not match architecture")
        h = x
        for i, layer in enumerate(self.layers):
            if i == self.inject_at:
                inj = _as_batch(inject)
                if inj.shape[0] != h.shape[0] or inj.shape[1] != self.inject_dim:
                    raise ConfigurationError("inject input has wrong shape")
                buf = self._concat_buf.get(h.shape[0])
                if buf is None or buf.shape[1] != h.shape[1] + inj.shape[1]:
                    buf = np.empty((h.shape[0], h.shape[1] + inj.shape[1]))
                    self._concat_buf[h.shape[0]] = buf
                buf[:, :h.shape[1]] = h
                buf[:, h.shape[1]:] = inj
                h = buf
            h = layer.forward(h, mode)
        if not np.isfinite(h).all():
            raise NumericFailure(
                f"non-finite output in {self._first_bad_layer()}",
                layer_name=self._first_bad_layer())
        return h

    def _first_bad_layer(self) -> str:
        for layer in self.layers:
            if layer._cache is not None and not np.isfinite(layer._cache[2]).all():
                return layer.name
        return self.layers[-1].name

    def backward(self, upstream: np.ndarray, want_param_grads: bool = True) -> ParamGrads:
        upstream = _as_batch(upstream)
        if self.layers[-1]._cache is None:
            raise StateError("backward called before forward")
        if upstream.shape != self.layers[-1]._cache[2].shape:
            raise ConfigurationError(
                f"upstream gradient shape {upstream.shape} does not match "
                f"forward output shape {self.layers[-1]._cache[2].shape}")
        grads = [None] * len(self.layers)
        g = upstream
        inject_grad = None
        for i in range(len(self.layers) - 1, -1, -1):
            dw, db, dx = self.layers[i].backward(g, want_dw=want_param_grads)
            grads[i] = (dw, db)
            if i == self.inject_at:
                split = self.layers[i].in_dim - self.inject_dim
                inject_grad = dx[:, split:]
                g = dx[:, :split]
            else:
                g = dx
        return ParamGrads(layers=grads if want_param_grads else [],
                          input_grad=g, inject_grad=inject_grad)

    def copy(self) -> "Network":
        dup = Network.__new__(Network)
        dup.layers = [layer.copy() for layer in self.layers]
        dup.inject_at = self.inject_at
        dup.inject_dim = self.inject_dim
        dup.input_dim = self.input_dim
        dup.output_dim = self.output_dim
        dup._concat_buf = {}
        return dup

    def architecture(self) -> list[tuple[int, int]]:
        return [(layer.in_dim, layer.out_dim) for layer in self.layers]


class AdamState:
    """Adam moments for one parameter list (flat views, step counter)."""

    def __init__(self, params: list[np.ndarray], lr: float,
                 beta1: float = 0.9, beta2: float = 0.999, epsilon: float = 1e-8):
        if lr <= 0:
            raise ConfigurationError("learning rate must be positive")
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.step_count = 0
        self.first_moment = [np.zeros(p.size) for p in params]
        self.second_moment = [np.zeros(p.size) for p in params]


def adam_step(params: list[np.ndarray], grads: list[np.ndarray],
              state: AdamState) -> None:
    """Apply one bias-corrected Adam update in place."""
    if len(params) != len(grads) or len(params) != len(state.first_moment):
        raise ConfigurationError("params/grads/state lengths differ")
    state.step_count += 1
    t = state.step_count
    for p, g, m, v in zip(params, grads, state.first_moment, state.second_moment):
        if p.shape != g.shape:
            raise ConfigurationError("gradient shape does not match parameter")
        backend.ops.adam_update(p.reshape(-1), g.reshape(-1), m, v, t,
                                state.lr, state.beta1, state.beta2, state.epsilon)


def soft_update(target: Network, source: Network, tau: float) -> None:
    """target <- tau*source + (1-tau)*target, parameter-wise."""
    if not 0.0 < tau <= 1.0:
        raise ConfigurationError("tau must lie in (0, 1]")
    if target.architecture() != source.architecture():
        raise ConfigurationError("target/source architectures differ")
    for pt, ps in zip(target.parameters(), source.parameters()):
        backend.ops.soft_update_arrays(pt.reshape(-1), ps.reshape(-1), tau)


def apply_normalization(scheme: NormScheme, batch, state: BatchNormState | None = None,
                        mode: Mode = Mode.TRAIN) -> np.ndarray:
    """Standalone normalization op (same math the layers use internally)."""
    x = _as_batch(batch).copy()
    scheme = NormScheme(scheme)
    if scheme == NormScheme.NONE:
        return x
    if scheme == NormScheme.LAYER:
        if x.shape[1] < 2:
            raise ConfigurationError("layer norm needs at least 2 features")
        mu = x.mean(axis=1, keepdims=True)
        var = x.var(axis=1, keepdims=True)
        return (x - mu) / np.sqrt(var + NORM_EPS)
    if mode == Mode.TRAIN:
        if x.shape[0] < 2:
            raise DegenerateBatchError("batch norm in train mode needs >= 2 rows")
        mu = x.mean(axis=0)
        var = x.var(axis=0)
        if state is not None:
            state.running_mean *= 1.0 - state.momentum
            state.running_mean += state.momentum * mu
            state.running_var *= 1.0 - state.momentum
            state.running_var += state.momentum * var
        return (x - mu) / np.sqrt(var + NORM_EPS)
    if state is None:
        raise ConfigurationError("batch norm in eval mode needs running stats")
    return (x - state.running_mean) / np.sqrt(state.running_var + NORM_EPS)
