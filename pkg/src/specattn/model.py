"""Network assembly, the SGD optimizer, and checkpoint I/O.

The classifier is a fixed small pipeline: an optional segmented spectral
mask layer in front of two conv -> batchnorm -> relu blocks, global average
pooling, and a dense softmax head. Keeping the downstream model simple
makes the effect of the spectral masks visible instead of being absorbed by
model capacity.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass

import numpy as np

from .layers import (
    BatchNorm1d,
    Conv1d,
    Dense,
    GlobalAvgPool,
    Parameter,
    ReLU,
    SegmentedSpectrumAttention,
    softmax_cross_entropy,
)

CHECKPOINT_FORMAT_VERSION = 1


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss or gradient."""


@dataclass(frozen=True)
class ModelConfig:
    input_length: int
    num_classes: int
    num_segments: int = 1
    kernel_sizes: tuple[int, int] = (8, 5)
    channels: tuple[int, int] = (32, 8)
    with_ssam: bool = True

    def __post_init__(self):
        if len(self.kernel_sizes) != 2 or len(self.channels) != 2:
            raise ValueError("exactly two conv blocks are supported")
        if self.input_length < 1 or self.num_classes < 1:
            raise ValueError("input_length and num_classes must be positive")
        if self.num_segments < 1:
            raise ValueError("num_segments must be >= 1")
        if self.with_ssam and self.input_length // self.num_segments < 2:
            raise ValueError(
                f"{self.num_segments} segments of a length-{self.input_length} series "
                "are degenerate (segment length < 2)"
            )

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["kernel_sizes"] = list(self.kernel_sizes)
        d["channels"] = list(self.channels)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        d["kernel_sizes"] = tuple(d["kernel_sizes"])
        d["channels"] = tuple(d["channels"])
        return cls(**d)


def _glorot_uniform(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int, fan_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)


class Network:
    """Ordered layer pipeline with a named-parameter registry."""

    def __init__(self, config: ModelConfig, layers: list, mask_names: frozenset[str]):
        self.config = config
        self.layers = layers
        self.mask_names = mask_names
        self.parameters: dict[str, Parameter] = {}
        for layer in layers:
            for p in layer.parameters():
                if p.name in self.parameters:
                    raise ValueError(f"duplicate parameter name {p.name!r}")
                self.parameters[p.name] = p
        self._logits = None

    @property
    def ssam(self) -> SegmentedSpectrumAttention | None:
        first = self.layers[0]
        return first if isinstance(first, SegmentedSpectrumAttention) else None

    def forward(self, x: np.ndarray, train: bool = True) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 3 or x.shape[1] != 1 or x.shape[2] != self.config.input_length:
            raise ValueError(
                f"expected input [batch, 1, {self.config.input_length}], got shape {x.shape}"
            )
        for layer in self.layers:
            if isinstance(layer, BatchNorm1d):
                x = layer.forward(x, train=train)
            else:
                x = layer.forward(x)
        # Only a train-mode forward arms the backward pass.
        self._logits = x if train else None
        return x

    def backward(self, labels: np.ndarray) -> float:
        if self._logits is None:
            raise RuntimeError("backward called before forward")
        loss, grad = softmax_cross_entropy(self._logits, labels)
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        self._logits = None
        return loss

    def zero_grad(self) -> None:
        for p in self.parameters.values():
            p.zero_grad()

    def state_dict(self) -> dict[str, np.ndarray]:
        """All parameter values plus batch-norm running statistics."""
        state = {name: p.value.copy() for name, p in self.parameters.items()}
        for i, layer in enumerate(self.layers):
            if isinstance(layer, BatchNorm1d):
                state[f"buffer.{i}.running_mean"] = layer.running_mean.copy()
                state[f"buffer.{i}.running_var"] = layer.running_var.copy()
        return state

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        for name, p in self.parameters.items():
            value = np.asarray(state[name], dtype=np.float64)
            if value.shape != p.value.shape:
                raise ValueError(f"shape mismatch for {name!r}: {value.shape} vs {p.value.shape}")
            p.value[...] = value
        for i, layer in enumerate(self.layers):
            if isinstance(layer, BatchNorm1d):
                layer.running_mean[...] = state[f"buffer.{i}.running_mean"]
                layer.running_var[...] = state[f"buffer.{i}.running_var"]

    def num_parameters(self) -> int:
        return sum(p.value.size for p in self.parameters.values())

    def masks(self) -> list[np.ndarray]:
        """Current mask vectors, one per segment (empty for the plain CNN)."""
        ssam = self.ssam
        if ssam is None:
            return []
        return [seg.mask.value.copy() for seg in ssam.segments]


def build_ssam_cnn(config: ModelConfig, seed: int = 0) -> Network:
    """Build the classifier (or its no-mask ablation) with seeded init.

    Conv and dense weights are Glorot-uniform, batch-norm is gamma=1/beta=0,
    and every mask starts as all ones so the spectral layer is initially the
    identity.
    """
    rng = np.random.default_rng([seed, 0xC0FFEE])
    layers: list = []
    mask_names: set[str] = set()

    if config.with_ssam:
        ssam = SegmentedSpectrumAttention(config.input_length, config.num_segments, name="ssam")
        layers.append(ssam)
        mask_names.update(p.name for p in ssam.parameters())
        c_in = config.num_segments
    else:
        c_in = 1

    for i, (k, c_out) in enumerate(zip(config.kernel_sizes, config.channels), start=1):
        fan_in, fan_out = c_in * k, c_out * k
        weight = Parameter(f"conv{i}.weight", _glorot_uniform(rng, (c_out, c_in, k), fan_in, fan_out))
        bias = Parameter(f"conv{i}.bias", np.zeros(c_out))
        layers.append(Conv1d(weight, bias))
        gamma = Parameter(f"bn{i}.gamma", np.ones(c_out))
        beta = Parameter(f"bn{i}.beta", np.zeros(c_out))
        layers.append(BatchNorm1d(gamma, beta))
        layers.append(ReLU())
        c_in = c_out

    layers.append(GlobalAvgPool())
    width = config.channels[-1]
    weight = Parameter("dense.weight", _glorot_uniform(rng, (width, config.num_classes), width, config.num_classes))
    bias = Parameter("dense.bias", np.zeros(config.num_classes))
    layers.append(Dense(weight, bias))

    return Network(config, layers, frozenset(mask_names))


def sgd_step(net: Network, lr: float = 0.01, l1_coeff: float = 0.01) -> None:
    """Plain SGD step with a decoupled L1 subgradient on the mask parameters.

    Every parameter moves by -lr * grad; mask entries additionally move by
    -lr * l1_coeff * sign(value) (sign(0) = 0). Gradients are zeroed
    afterwards.
    """
    for name, p in net.parameters.items():
        if not np.all(np.isfinite(p.grad)):
            raise DivergenceError(f"non-finite gradient for parameter {name!r}")
        p.value -= lr * p.grad
        if name in net.mask_names:
            p.value -= lr * l1_coeff * np.sign(p.value)
        p.zero_grad()


def save_checkpoint(net: Network, path) -> None:
    """Write config + full state to ``path`` (.npz); round-trips bit-exactly."""
    meta = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "config": net.config.to_dict(),
    }
    arrays = {f"state/{k}": v for k, v in net.state_dict().items()}
    np.savez(path, __meta__=np.array(json.dumps(meta)), **arrays)


def load_checkpoint(path) -> Network:
    """Rebuild a network from a checkpoint written by :func:`save_checkpoint`."""
    with np.load(path) as archive:
        meta = json.loads(str(archive["__meta__"]))
        if meta["format_version"] != CHECKPOINT_FORMAT_VERSION:
            raise ValueError(f"unsupported checkpoint format version {meta['format_version']}")
        state = {k[len("state/"):]: archive[k] for k in archive.files if k.startswith("state/")}
    net = build_ssam_cnn(ModelConfig.from_dict(meta["config"]))
    net.load_state_dict(state)
    return net
