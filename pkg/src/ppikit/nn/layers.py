"""Differentiable layers over batched numpy arrays.

Each layer owns its parameters and exposes ``forward(x, train) -> (y, cache)``
and ``backward(grad, cache) -> grad_x``. Backward accumulates parameter
gradients in place (``param.grad += ...``), which lets a layer shared between
two inputs collect both contributions; the cache returned by forward carries
everything backward needs, so one layer instance can be applied to several
inputs in the same step.

Arrays are batch-first: dense layers take ``(batch, features)``, sequence
layers ``(batch, length, channels)``. All math runs in float64.
"""

from __future__ import annotations

import numpy as np

from ..errors import InferBeforeTrain, InputTooShort, ShapeMismatch
from .initializers import xavier_uniform


class Parameter:
    """A named value tensor paired with a same-shape gradient buffer."""

    __slots__ = ("name", "value", "grad", "trainable")

    def __init__(self, name: str, value: np.ndarray, trainable: bool = True):
        self.name = name
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)
        self.trainable = trainable

    def zero_grad(self):
        self.grad.fill(0.0)

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.value.shape}, trainable={self.trainable})"


# --- activations -----------------------------------------------------------

def relu(x):
    return np.maximum(x, 0.0)


def sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def activation_forward(kind, x):
    if kind is None:
        return x
    if kind == "relu":
        return relu(x)
    if kind == "tanh":
        return np.tanh(x)
    if kind == "sigmoid":
        return sigmoid(x)
    raise ValueError(f"unknown activation {kind!r}")


def activation_backward(kind, grad, out, pre):
    """Chain ``grad`` through an activation given its output and input."""
    if kind is None:
        return grad
    if kind == "relu":
        return grad * (pre > 0)
    if kind == "tanh":
        return grad * (1.0 - out * out)
    if kind == "sigmoid":
        return grad * out * (1.0 - out)
    raise ValueError(f"unknown activation {kind!r}")


class Layer:
    """Shared interface; subclasses fill in the math."""

    kind = "layer"

    def __init__(self, name: str):
        self.name = name

    def parameters(self) -> list[Parameter]:
        return []

    def state(self) -> dict[str, np.ndarray]:
        """Non-parameter arrays that must persist in checkpoints."""
        return {}

    def load_state(self, state: dict[str, np.ndarray]):
        pass

    def param_count(self) -> int:
        return sum(p.value.size for p in self.parameters())

    def output_shape(self, input_shape: tuple[int, ...]) -> tuple[int, ...]:
        raise NotImplementedError

    def forward(self, x: np.ndarray, train: bool):
        raise NotImplementedError

    def backward(self, grad: np.ndarray, cache) -> np.ndarray:
        raise NotImplementedError


class Activation(Layer):
    """Standalone elementwise activation."""

    kind = "activation"

    def __init__(self, name, fn):
        super().__init__(name)
        self.fn = fn

    def output_shape(self, input_shape):
        return input_shape

    def forward(self, x, train):
        pre = x
        out = activation_forward(self.fn, x)
        return out, (pre, out)

    def backward(self, grad, cache):
        pre, out = cache
        return activation_backward(self.fn, grad, out, pre)


class Flatten(Layer):
    kind = "flatten"

    def output_shape(self, input_shape):
        return (int(np.prod(input_shape)),)

    def forward(self, x, train):
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, grad, cache):
        return grad.reshape(cache)


class Dense(Layer):
    """Fully connected layer with an optional fused activation."""

    kind = "dense"

    def __init__(self, name, n_in, units, activation=None, rng=None):
        super().__init__(name)
        self.n_in = n_in
        self.units = units
        self.activation = activation
        rng = rng or np.random.default_rng(0)
        self.weight = Parameter(f"{name}.weight", xavier_uniform(rng, (n_in, units)))
        self.bias = Parameter(f"{name}.bias", np.zeros(units))

    def parameters(self):
        return [self.weight, self.bias]

    def output_shape(self, input_shape):
        if input_shape != (self.n_in,):
            raise ShapeMismatch(f"{self.name}: expected ({self.n_in},), got {input_shape}")
        return (self.units,)

    def forward(self, x, train):
        if x.ndim != 2 or x.shape[1] != self.n_in:
            raise ShapeMismatch(f"{self.name}: expected (batch, {self.n_in}), got {x.shape}")
        pre = x @ self.weight.value + self.bias.value
        out = activation_forward(self.activation, pre)
        return out, (x, pre, out)

    def backward(self, grad, cache):
        x, pre, out = cache
        grad = activation_backward(self.activation, grad, out, pre)
        self.weight.grad += x.T @ grad
        self.bias.grad += grad.sum(axis=0)
        return grad @ self.weight.value.T


class Conv1D(Layer):
    """1-d convolution, valid padding, stride 1, optional fused activation.

    Kernel shape is (kernel, in_channels, filters); the output keeps only the
    positions where the window fits, so length L becomes L - kernel + 1.
    """

    kind = "conv1d"

    def __init__(self, name, in_channels, filters, kernel_size, activation=None, rng=None):
        super().__init__(name)
        if kernel_size < 1:
            raise ValueError("kernel_size must be >= 1")
        self.in_channels = in_channels
        self.filters = filters
        self.kernel_size = kernel_size
        self.activation = activation
        rng = rng or np.random.default_rng(0)
        self.kernel = Parameter(
            f"{name}.kernel",
            xavier_uniform(
                rng,
                (kernel_size, in_channels, filters),
                fan_in=kernel_size * in_channels,
                fan_out=kernel_size * filters,
            ),
        )
        self.bias = Parameter(f"{name}.bias", np.zeros(filters))

    def parameters(self):
        return [self.kernel, self.bias]

    def output_shape(self, input_shape):
        length, channels = input_shape
        if channels != self.in_channels:
            raise ShapeMismatch(f"{self.name}: expected {self.in_channels} channels, got {channels}")
        if length < self.kernel_size:
            raise InputTooShort(f"{self.name}: length {length} < kernel {self.kernel_size}")
        return (length - self.kernel_size + 1, self.filters)

    def forward(self, x, train):
        if x.ndim != 3 or x.shape[2] != self.in_channels:
            raise ShapeMismatch(
                f"{self.name}: expected (batch, length, {self.in_channels}), got {x.shape}"
            )
        if x.shape[1] < self.kernel_size:
            raise InputTooShort(
                f"{self.name}: length {x.shape[1]} < kernel {self.kernel_size}"
            )
        # windows: (batch, out_len, channels, kernel)
        windows = np.lib.stride_tricks.sliding_window_view(x, self.kernel_size, axis=1)
        pre = np.tensordot(windows, self.kernel.value, axes=([3, 2], [0, 1]))
        pre += self.bias.value
        out = activation_forward(self.activation, pre)
        return out, (x, windows, pre, out)

    def backward(self, grad, cache):
        x, windows, pre, out = cache
        grad = activation_backward(self.activation, grad, out, pre)
        # kernel gradient: contract batch and output position
        dk = np.tensordot(windows, grad, axes=([0, 1], [0, 1]))  # (channels, kernel, filters)
        self.kernel.grad += dk.transpose(1, 0, 2)
        self.bias.grad += grad.sum(axis=(0, 1))
        # input gradient: full correlation of grad with the flipped kernel
        k = self.kernel_size
        padded = np.pad(grad, ((0, 0), (k - 1, k - 1), (0, 0)))
        gwin = np.lib.stride_tricks.sliding_window_view(padded, k, axis=1)  # (B, L, F, k)
        flipped = self.kernel.value[::-1]  # (k, channels, filters)
        return np.tensordot(gwin, flipped, axes=([3, 2], [0, 2]))


class MaxPool1D(Layer):
    """Non-overlapping windowed maximum along the sequence axis.

    Stride equals the pool size; a trailing remainder shorter than the window
    is dropped. Backward routes each window's gradient to the first position
    that attains the maximum.
    """

    kind = "maxpool1d"

    def __init__(self, name, pool_size):
        super().__init__(name)
        if pool_size < 1:
            raise ValueError("pool_size must be >= 1")
        self.pool_size = pool_size

    def output_shape(self, input_shape):
        length, channels = input_shape
        if length < self.pool_size:
            raise InputTooShort(f"{self.name}: length {length} < pool {self.pool_size}")
        return (length // self.pool_size, channels)

    def forward(self, x, train):
        if x.ndim != 3:
            raise ShapeMismatch(f"{self.name}: expected (batch, length, channels), got {x.shape}")
        batch, length, channels = x.shape
        if length < self.pool_size:
            raise InputTooShort(f"{self.name}: length {length} < pool {self.pool_size}")
        n = length // self.pool_size
        windows = x[:, : n * self.pool_size].reshape(batch, n, self.pool_size, channels)
        out = windows.max(axis=2)
        argmax = windows.argmax(axis=2)  # first occurrence on ties
        return out, (x.shape, argmax)

    def backward(self, grad, cache):
        (batch, length, channels), argmax = cache
        n = grad.shape[1]
        dwin = np.zeros((batch, n, self.pool_size, channels))
        np.put_along_axis(dwin, argmax[:, :, None, :], grad[:, :, None, :], axis=2)
        dx = np.zeros((batch, length, channels))
        dx[:, : n * self.pool_size] = dwin.reshape(batch, n * self.pool_size, channels)
        return dx


class BatchNorm(Layer):
    """Batch normalization over the batch (and, for sequences, length) axes.

    Train mode normalizes with the current batch statistics and folds them
    into moving averages; inference uses the moving statistics and fails if
    none exist yet. The reported parameter count includes the moving mean and
    variance alongside gamma and beta (4 per feature).
    """

    kind = "batchnorm"

    def __init__(self, name, features, momentum=0.99, eps=1e-3):
        super().__init__(name)
        self.features = features
        self.momentum = momentum
        self.eps = eps
        self.gamma = Parameter(f"{name}.gamma", np.ones(features))
        self.beta = Parameter(f"{name}.beta", np.zeros(features))
        self.moving_mean = Parameter(f"{name}.moving_mean", np.zeros(features), trainable=False)
        self.moving_var = Parameter(f"{name}.moving_var", np.ones(features), trainable=False)
        self.updates = 0

    def parameters(self):
        return [self.gamma, self.beta, self.moving_mean, self.moving_var]

    def state(self):
        return {f"{self.name}.updates": np.array(float(self.updates))}

    def load_state(self, state):
        self.updates = int(state[f"{self.name}.updates"])

    def output_shape(self, input_shape):
        if input_shape[-1] != self.features:
            raise ShapeMismatch(f"{self.name}: expected {self.features} features, got {input_shape}")
        return input_shape

    def forward(self, x, train):
        if x.shape[-1] != self.features:
            raise ShapeMismatch(
                f"{self.name}: expected trailing dimension {self.features}, got {x.shape}"
            )
        axes = tuple(range(x.ndim - 1))
        if train:
            mean = x.mean(axis=axes)
            var = x.var(axis=axes)
            self.moving_mean.value *= self.momentum
            self.moving_mean.value += (1.0 - self.momentum) * mean
            self.moving_var.value *= self.momentum
            self.moving_var.value += (1.0 - self.momentum) * var
            self.updates += 1
        else:
            if self.updates == 0:
                raise InferBeforeTrain(f"{self.name}: no moving statistics recorded yet")
            mean = self.moving_mean.value
            var = self.moving_var.value
        inv_std = 1.0 / np.sqrt(var + self.eps)
        x_hat = (x - mean) * inv_std
        out = self.gamma.value * x_hat + self.beta.value
        return out, (x, x_hat, mean, inv_std, axes, train)

    def backward(self, grad, cache):
        x, x_hat, mean, inv_std, axes, train = cache
        self.gamma.grad += (grad * x_hat).sum(axis=axes)
        self.beta.grad += grad.sum(axis=axes)
        dx_hat = grad * self.gamma.value
        if not train:
            return dx_hat * inv_std
        n = np.prod([x.shape[a] for a in axes])
        centered = x - mean
        dvar = (dx_hat * centered).sum(axis=axes) * (-0.5) * inv_std**3
        dmean = -(dx_hat * inv_std).sum(axis=axes) + dvar * (-2.0 / n) * centered.sum(axis=axes)
        return dx_hat * inv_std + dvar * 2.0 * centered / n + dmean / n


class LSTM(Layer):
    """Recurrent layer returning the final hidden state only.

    Gate blocks are ordered input, forget, candidate, output; gates use the
    logistic function and the candidate and cell output use tanh. Input
    weights are (channels, 4*units), recurrent weights (units, 4*units),
    biases (4*units,), all Xavier-initialized per gate block with zero
    biases.
    """

    kind = "lstm"

    def __init__(self, name, in_channels, units, rng=None):
        super().__init__(name)
        self.in_channels = in_channels
        self.units = units
        rng = rng or np.random.default_rng(0)
        w = np.concatenate(
            [xavier_uniform(rng, (in_channels, units)) for _ in range(4)], axis=1
        )
        u = np.concatenate([xavier_uniform(rng, (units, units)) for _ in range(4)], axis=1)
        self.w = Parameter(f"{name}.input_weights", w)
        self.u = Parameter(f"{name}.recurrent_weights", u)
        self.bias = Parameter(f"{name}.bias", np.zeros(4 * units))

    def parameters(self):
        return [self.w, self.u, self.bias]

    def output_shape(self, input_shape):
        length, channels = input_shape
        if channels != self.in_channels:
            raise ShapeMismatch(f"{self.name}: expected {self.in_channels} channels, got {channels}")
        return (self.units,)

    def forward(self, x, train):
        if x.ndim != 3 or x.shape[2] != self.in_channels:
            raise ShapeMismatch(
                f"{self.name}: expected (batch, time, {self.in_channels}), got {x.shape}"
            )
        batch, steps, _ = x.shape
        units = self.units
        h = np.zeros((batch, units))
        c = np.zeros((batch, units))
        trace = []
        for t in range(steps):
            z = x[:, t] @ self.w.value + h @ self.u.value + self.bias.value
            i = sigmoid(z[:, :units])
            f = sigmoid(z[:, units : 2 * units])
            g = np.tanh(z[:, 2 * units : 3 * units])
            o = sigmoid(z[:, 3 * units :])
            c_prev = c
            c = f * c_prev + i * g
            tc = np.tanh(c)
            trace.append((x[:, t], h, c_prev, i, f, g, o, tc))
            h = o * tc
        return h, (x.shape, trace)

    def backward(self, grad, cache):
        (batch, steps, channels), trace = cache
        units = self.units
        dx = np.zeros((batch, steps, channels))
        dh = grad
        dc = np.zeros((batch, units))
        for t in range(steps - 1, -1, -1):
            x_t, h_prev, c_prev, i, f, g, o, tc = trace[t]
            do = dh * tc
            dc = dc + dh * o * (1.0 - tc * tc)
            di = dc * g
            df = dc * c_prev
            dg = dc * i
            dz = np.concatenate(
                [
                    di * i * (1.0 - i),
                    df * f * (1.0 - f),
                    dg * (1.0 - g * g),
                    do * o * (1.0 - o),
                ],
                axis=1,
            )
            self.w.grad += x_t.T @ dz
            self.u.grad += h_prev.T @ dz
            self.bias.grad += dz.sum(axis=0)
            dx[:, t] = dz @ self.w.value.T
            dh = dz @ self.u.value.T
            dc = dc * f
        return dx


def concat_pair(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Join two feature batches side by side: (batch, m) + (batch, n)."""
    if a.shape[0] != b.shape[0]:
        raise ShapeMismatch(f"batch sizes differ: {a.shape[0]} vs {b.shape[0]}")
    return np.concatenate([a, b], axis=1)


def split_pair(grad: np.ndarray, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Backward of concat_pair: split the gradient at column m."""
    return grad[:, :m], grad[:, m:]
