"""Differentiable layers with explicit forward and backward passes.

Every layer caches whatever its backward pass needs during forward and
consumes that cache on backward. Gradients are accumulated into
``Parameter.grad`` with ``+=``; the optimizer is responsible for zeroing
them after a step. No autodiff graph: each backward is written by hand and
verified against central finite differences in the test suite.
"""

from __future__ import annotations

import numpy as np

from .transform import dct, idct


class Parameter:
    """A trainable tensor paired with its accumulated gradient."""

    __slots__ = ("name", "value", "grad")

    def __init__(self, name: str, value: np.ndarray):
        self.name = name
        self.value = np.array(value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)

    def zero_grad(self) -> None:
        self.grad[...] = 0.0

    def __repr__(self) -> str:
        return f"Parameter({self.name!r}, shape={self.value.shape})"


class SpectrumAttention:
    """Trainable per-frequency mask applied in the cosine-transform domain.

    Forward: transform the input to the spectral domain, multiply
    elementwise by the mask (initialized to all ones, i.e. the identity
    filter), and transform back. Accepts a vector of length ``length`` or a
    batch of rows ``[batch, length]``.
    """

    def __init__(self, length: int, name: str = "mask"):
        if length < 1:
            raise ValueError(f"mask length must be >= 1, got {length}")
        self.length = length
        self.mask = Parameter(name, np.ones(length))
        self._spectrum = None

    def parameters(self) -> list[Parameter]:
        return [self.mask]

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.length:
            raise ValueError(f"expected series of length {self.length}, got {x.shape[-1]}")
        spectrum = dct(x)
        self._spectrum = spectrum
        return idct(spectrum * self.mask.value)

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        # With orthogonal C: out = C.T diag(mask) C x, a symmetric map, so
        # grad_in is the same filter applied to grad_out, and
        # grad_mask = (C x) * (C grad_out) summed over the batch.
        if self._spectrum is None:
            raise RuntimeError("backward called before forward")
        grad_out = np.asarray(grad_out, dtype=np.float64)
        grad_spectrum = dct(grad_out)
        grad_mask = self._spectrum * grad_spectrum
        if grad_mask.ndim > 1:
            grad_mask = grad_mask.reshape(-1, self.length).sum(axis=0)
        self.mask.grad += grad_mask
        self._spectrum = None
        return idct(grad_spectrum * self.mask.value)


class SegmentedSpectrumAttention:
    """Spectral masks applied independently to tumbling-window segments.

    The input series is cut into ``num_segments`` equal segments of length
    ``input_length // num_segments`` (trailing remainder samples are dropped
    and receive zero gradient); each segment gets its own
    :class:`SpectrumAttention`, and segment outputs are stacked so a
    downstream convolution sees one channel per segment.

    Shapes: a vector of length n maps to ``[segment_length, num_segments]``
    (segments as columns); a batch ``[B, 1, n]`` maps to
    ``[B, num_segments, segment_length]``.
    """

    def __init__(self, input_length: int, num_segments: int, name: str = "ssam"):
        if num_segments < 1:
            raise ValueError(f"number of segments must be >= 1, got {num_segments}")
        if input_length // num_segments < 2:
            raise ValueError(
                f"{num_segments} segments of a length-{input_length} series are degenerate "
                "(segment length < 2)"
            )
        self.input_length = input_length
        self.num_segments = num_segments
        self.segment_length = input_length // num_segments
        self.segments = [
            SpectrumAttention(self.segment_length, name=f"{name}.seg{i}.mask")
            for i in range(num_segments)
        ]
        self._in_shape = None

    def parameters(self) -> list[Parameter]:
        return [seg.mask for seg in self.segments]

    def _split(self, x: np.ndarray) -> list[np.ndarray]:
        t = self.segment_length
        return [x[..., i * t:(i + 1) * t] for i in range(self.num_segments)]

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.input_length:
            raise ValueError(f"expected series of length {self.input_length}, got {x.shape[-1]}")
        self._in_shape = x.shape
        if x.ndim == 1:
            cols = [seg.forward(part) for seg, part in zip(self.segments, self._split(x))]
            return np.stack(cols, axis=1)
        if x.ndim == 3:
            if x.shape[1] != 1:
                raise ValueError(f"expected a single input channel, got {x.shape[1]}")
            rows = x[:, 0, :]
            chans = [seg.forward(part) for seg, part in zip(self.segments, self._split(rows))]
            return np.stack(chans, axis=1)
        raise ValueError(f"expected a vector or [batch, 1, time] tensor, got shape {x.shape}")

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        if self._in_shape is None:
            raise RuntimeError("backward called before forward")
        grad_out = np.asarray(grad_out, dtype=np.float64)
        t = self.segment_length
        grad_in = np.zeros(self._in_shape)
        if len(self._in_shape) == 1:
            for i, seg in enumerate(self.segments):
                grad_in[i * t:(i + 1) * t] = seg.backward(grad_out[:, i])
        else:
            for i, seg in enumerate(self.segments):
                grad_in[:, 0, i * t:(i + 1) * t] = seg.backward(grad_out[:, i, :])
        self._in_shape = None
        return grad_in


class Conv1d:
    """1-D cross-correlation with zero "same" padding and per-channel bias.

    Input [B, C_in, T] -> output [B, C_out, T]; pads (k-1)//2 zeros on the
    left and the remainder on the right so the time length is preserved.
    """

    def __init__(self, weight: Parameter, bias: Parameter):
        if weight.value.ndim != 3:
            raise ValueError(f"weight must be [C_out, C_in, k], got shape {weight.value.shape}")
        if bias.value.shape != (weight.value.shape[0],):
            raise ValueError("bias length must equal the output channel count")
        self.weight = weight
        self.bias = bias
        self._cols = None
        self._shape = None

    def parameters(self) -> list[Parameter]:
        return [self.weight, self.bias]

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        c_out, c_in, k = self.weight.value.shape
        if x.ndim != 3 or x.shape[1] != c_in:
            raise ValueError(
                f"expected input [batch, {c_in}, time], got shape {x.shape}"
            )
        batch, _, time = x.shape
        left = (k - 1) // 2
        right = k - 1 - left
        padded = np.pad(x, ((0, 0), (0, 0), (left, right)))
        # im2col: one contiguous (C_in*k, B*T) matrix so both the forward and
        # the weight gradient are single GEMMs.
        windows = np.lib.stride_tricks.sliding_window_view(padded, k, axis=2)
        cols = np.ascontiguousarray(windows.transpose(1, 3, 0, 2)).reshape(c_in * k, batch * time)
        self._cols = cols
        self._shape = (batch, time)
        out = (self.weight.value.reshape(c_out, c_in * k) @ cols).reshape(c_out, batch, time)
        return out.transpose(1, 0, 2) + self.bias.value[None, :, None]

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        if self._cols is None:
            raise RuntimeError("backward called before forward")
        grad_out = np.asarray(grad_out, dtype=np.float64)
        c_out, c_in, k = self.weight.value.shape
        batch, time = self._shape
        g = np.ascontiguousarray(grad_out.transpose(1, 0, 2)).reshape(c_out, batch * time)
        self.weight.grad += (g @ self._cols.T).reshape(c_out, c_in, k)
        self.bias.grad += g.sum(axis=1)
        grad_cols = (self.weight.value.reshape(c_out, c_in * k).T @ g).reshape(c_in, k, batch, time)
        left = (k - 1) // 2
        grad_padded = np.zeros((batch, c_in, time + k - 1))
        for j in range(k):
            grad_padded[:, :, j:j + time] += grad_cols[:, j].transpose(1, 0, 2)
        self._cols = None
        self._shape = None
        return grad_padded[:, :, left:left + time]


class BatchNorm1d:
    """Per-channel batch normalization over the (batch, time) axes.

    Train mode normalizes with biased batch statistics and updates running
    statistics with momentum 0.9; inference mode normalizes with the running
    statistics. Output is gamma * normalized + beta.
    """

    def __init__(self, gamma: Parameter, beta: Parameter, eps: float = 1e-5, momentum: float = 0.9):
        self.gamma = gamma
        self.beta = beta
        self.eps = eps
        self.momentum = momentum
        channels = gamma.value.shape[0]
        self.running_mean = np.zeros(channels)
        self.running_var = np.ones(channels)
        self._cache = None

    def parameters(self) -> list[Parameter]:
        return [self.gamma, self.beta]

    def forward(self, x: np.ndarray, train: bool = True) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        channels = self.gamma.value.shape[0]
        if x.ndim != 3 or x.shape[1] != channels:
            raise ValueError(f"expected input [batch, {channels}, time], got shape {x.shape}")
        if train:
            count = x.shape[0] * x.shape[2]
            if count < 2:
                raise ValueError("batch normalization needs at least 2 values per channel in train mode")
            mean = x.mean(axis=(0, 2))
            centered = x - mean[None, :, None]
            var = np.mean(centered * centered, axis=(0, 2))
            self.running_mean = self.momentum * self.running_mean + (1 - self.momentum) * mean
            self.running_var = self.momentum * self.running_var + (1 - self.momentum) * var
            inv_std = 1.0 / np.sqrt(var + self.eps)
            x_hat = centered * inv_std[None, :, None]
            self._cache = (x_hat, inv_std)
        else:
            inv_std = 1.0 / np.sqrt(self.running_var + self.eps)
            x_hat = (x - self.running_mean[None, :, None]) * inv_std[None, :, None]
        return self.gamma.value[None, :, None] * x_hat + self.beta.value[None, :, None]

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        if self._cache is None:
            raise RuntimeError("backward called before a train-mode forward")
        grad_out = np.asarray(grad_out, dtype=np.float64)
        x_hat, inv_std = self._cache
        count = grad_out.shape[0] * grad_out.shape[2]
        self.gamma.grad += (grad_out * x_hat).sum(axis=(0, 2))
        self.beta.grad += grad_out.sum(axis=(0, 2))
        # Standard batch-coupled adjoint, folded into one expression:
        # dx = gamma * inv_std / m * (m*g - sum(g) - x_hat * sum(g * x_hat))
        g = grad_out
        sum_g = g.sum(axis=(0, 2), keepdims=True)
        sum_gx = (g * x_hat).sum(axis=(0, 2), keepdims=True)
        scale = (self.gamma.value * inv_std)[None, :, None] / count
        self._cache = None
        return scale * (count * g - sum_g - x_hat * sum_gx)


class ReLU:
    """Elementwise max(0, x); subgradient 0 at exactly 0."""

    def __init__(self):
        self._active = None

    def parameters(self) -> list[Parameter]:
        return []

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        self._active = x > 0
        return np.maximum(x, 0.0)

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        if self._active is None:
            raise RuntimeError("backward called before forward")
        grad = grad_out * self._active
        self._active = None
        return grad


class GlobalAvgPool:
    """Mean over the time axis: [B, C, T] -> [B, C]."""

    def __init__(self):
        self._time = None

    def parameters(self) -> list[Parameter]:
        return []

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 3:
            raise ValueError(f"expected input [batch, channel, time], got shape {x.shape}")
        self._time = x.shape[2]
        return x.mean(axis=2)

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        if self._time is None:
            raise RuntimeError("backward called before forward")
        grad_out = np.asarray(grad_out)
        grad = np.broadcast_to(grad_out[:, :, None], grad_out.shape + (self._time,)) / self._time
        self._time = None
        return grad


class Dense:
    """Affine map [B, C_in] -> [B, C_out]."""

    def __init__(self, weight: Parameter, bias: Parameter):
        if weight.value.ndim != 2:
            raise ValueError(f"weight must be [C_in, C_out], got shape {weight.value.shape}")
        if bias.value.shape != (weight.value.shape[1],):
            raise ValueError("bias length must equal the output width")
        self.weight = weight
        self.bias = bias
        self._input = None

    def parameters(self) -> list[Parameter]:
        return [self.weight, self.bias]

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.weight.value.shape[0]:
            raise ValueError(
                f"expected input [batch, {self.weight.value.shape[0]}], got shape {x.shape}"
            )
        self._input = x
        return x @ self.weight.value + self.bias.value

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        if self._input is None:
            raise RuntimeError("backward called before forward")
        grad_out = np.asarray(grad_out, dtype=np.float64)
        self.weight.grad += self._input.T @ grad_out
        self.bias.grad += grad_out.sum(axis=0)
        grad = grad_out @ self.weight.value.T
        self._input = None
        return grad


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax, numerically stabilized."""
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean negative log-likelihood and its exact gradient w.r.t. the logits.

    Returns ``(loss, grad_logits)`` with grad = (softmax - onehot) / batch.
    """
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels)
    if logits.ndim != 2:
        raise ValueError(f"logits must be [batch, classes], got shape {logits.shape}")
    batch, classes = logits.shape
    if labels.shape != (batch,):
        raise ValueError(f"labels must be [batch]={batch}, got shape {labels.shape}")
    if labels.min() < 0 or labels.max() >= classes:
        raise ValueError(f"labels must lie in [0, {classes})")
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    loss = float(np.mean(log_norm - shifted[np.arange(batch), labels]))
    grad = softmax(logits)
    grad[np.arange(batch), labels] -= 1.0
    return loss, grad / batch
