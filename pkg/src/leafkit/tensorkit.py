"""Numerical kernels of the improved classifier architecture.

Covers the SiLU activation, the channel-attention forward pass over
height x width x channels feature maps, parameter accounting for the
attention block and the classifier head, and a declarative layer plan
that pins where the attention block is allowed to sit in the network.

All kernels work in float64 and are pure functions; values are treated
as immutable once constructed.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionError, InvalidArgumentError, ValidationError

__all__ = [
    "Tensor",
    "AttentionParams",
    "ActivationKind",
    "StageKind",
    "Stage",
    "LayerPlan",
    "silu",
    "silu_grad",
    "sigmoid",
    "global_avg_pool",
    "global_max_pool",
    "channel_attention_forward",
    "dense_param_count",
    "ca_param_count",
    "default_layer_plan",
    "save_tensor_txt",
    "load_tensor_txt",
]


# --------------------------------------------------------------------------
# activations


def sigmoid(x):
    """Logistic function 1 / (1 + e^-x), numerically stable on both tails.

    Accepts a scalar or ndarray; non-finite input raises.
    """
    arr = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError("sigmoid requires finite input")
    pos = arr >= 0
    out = np.empty_like(arr)
    out[pos] = 1.0 / (1.0 + np.exp(-arr[pos]))
    ex = np.exp(arr[~pos])
    out[~pos] = ex / (1.0 + ex)
    if np.isscalar(x) or np.ndim(x) == 0:
        return float(out[0])
    return out


def silu(x):
    """Self-gated activation x * sigmoid(x).

    Smooth and non-monotonic around zero, unlike ReLU it keeps a small
    gradient for negative inputs. Scalar in, scalar out; arrays map
    elementwise.
    """
    s = sigmoid(x)
    arr = np.asarray(x, dtype=np.float64)
    out = arr * s
    if np.isscalar(x) or np.ndim(x) == 0:
        return float(out)
    return out


def silu_grad(x):
    """Analytic derivative of silu: sigma(x) * (1 + x * (1 - sigma(x)))."""
    s = sigmoid(x)
    arr = np.asarray(x, dtype=np.float64)
    out = s * (1.0 + arr * (1.0 - s))
    if np.isscalar(x) or np.ndim(x) == 0:
        return float(out)
    return out


def _relu(v: np.ndarray) -> np.ndarray:
    return np.maximum(v, 0.0)


# --------------------------------------------------------------------------
# tensors and pooling


@dataclass(frozen=True)
class Tensor:
    """Dense rank-3 feature map, height x width x channels, float64.

    Layout is fixed row-major with channels innermost: element (h, w, c)
    lives at flat index (h * width + w) * channels + c.
    """

    height: int
    width: int
    channels: int
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        for name in ("height", "width", "channels"):
            if int(getattr(self, name)) < 1:
                raise InvalidArgumentError(f"tensor {name} must be >= 1")
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.size != self.height * self.width * self.channels:
            raise InvalidArgumentError(
                f"data length {arr.size} != "
                f"{self.height}*{self.width}*{self.channels}"
            )
        if not np.all(np.isfinite(arr)):
            raise InvalidArgumentError("tensor values must be finite")
        arr = arr.reshape(self.height, self.width, self.channels)
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @classmethod
    def from_array(cls, arr) -> "Tensor":
        arr = np.asarray(arr, dtype=np.float64)
        if arr.ndim != 3:
            raise InvalidArgumentError("expected a rank-3 array (H, W, C)")
        h, w, c = arr.shape
        return cls(h, w, c, arr)

    def scaled_per_channel(self, weights: np.ndarray) -> "Tensor":
        return Tensor.from_array(self.data * np.asarray(weights, dtype=np.float64))


def global_avg_pool(t: Tensor) -> np.ndarray:
    """Mean over all spatial positions, one value per channel."""
    return t.data.mean(axis=(0, 1))


def global_max_pool(t: Tensor) -> np.ndarray:
    """Max over all spatial positions, one value per channel."""
    return t.data.max(axis=(0, 1))


# --------------------------------------------------------------------------
# channel attention


@dataclass(frozen=True)
class AttentionParams:
    """Weights of the attention block's encoder-decoder MLP.

    ``w1`` maps channels -> channels/ratio, ``w2`` maps back. With
    ``shared`` set (the default configuration) the same MLP is applied to
    both pooled vectors, and the block carries 2 * channels^2 / ratio
    parameters. There are no bias terms. A non-shared block carries an
    independent second MLP (``w1_max``/``w2_max``) for the max-pool branch.
    """

    channels: int
    ratio: int
    w1: np.ndarray = field(repr=False)
    w2: np.ndarray = field(repr=False)
    shared: bool = True
    w1_max: np.ndarray | None = field(default=None, repr=False)
    w2_max: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.channels < 1 or self.ratio < 1:
            raise InvalidArgumentError("channels and ratio must be >= 1")
        if self.channels % self.ratio != 0:
            raise InvalidArgumentError(
                f"ratio {self.ratio} does not divide channels {self.channels}"
            )
        hidden = self.channels // self.ratio
        w1 = np.asarray(self.w1, dtype=np.float64)
        w2 = np.asarray(self.w2, dtype=np.float64)
        if w1.shape != (self.channels, hidden):
            raise DimensionError(f"w1 must be {(self.channels, hidden)}, got {w1.shape}")
        if w2.shape != (hidden, self.channels):
            raise DimensionError(f"w2 must be {(hidden, self.channels)}, got {w2.shape}")
        if not (np.all(np.isfinite(w1)) and np.all(np.isfinite(w2))):
            raise InvalidArgumentError("attention weights must be finite")
        object.__setattr__(self, "w1", w1)
        object.__setattr__(self, "w2", w2)
        if self.shared:
            if self.w1_max is not None or self.w2_max is not None:
                raise InvalidArgumentError("shared block must not carry a second MLP")
        else:
            if self.w1_max is None or self.w2_max is None:
                raise InvalidArgumentError("non-shared block needs w1_max and w2_max")
            w1m = np.asarray(self.w1_max, dtype=np.float64)
            w2m = np.asarray(self.w2_max, dtype=np.float64)
            if w1m.shape != w1.shape or w2m.shape != w2.shape:
                raise DimensionError("second MLP must match the first MLP's shapes")
            if not (np.all(np.isfinite(w1m)) and np.all(np.isfinite(w2m))):
                raise InvalidArgumentError("attention weights must be finite")
            object.__setattr__(self, "w1_max", w1m)
            object.__setattr__(self, "w2_max", w2m)

    @classmethod
    def random(cls, channels: int, ratio: int, seed: int, shared: bool = True,
               scale: float = 0.05) -> "AttentionParams":
        rng = np.random.default_rng(seed)
        hidden = channels // ratio if ratio else 0
        w1 = rng.normal(0.0, scale, size=(channels, hidden))
        w2 = rng.normal(0.0, scale, size=(hidden, channels))
        if shared:
            return cls(channels, ratio, w1, w2, shared=True)
        w1m = rng.normal(0.0, scale, size=(channels, hidden))
        w2m = rng.normal(0.0, scale, size=(hidden, channels))
        return cls(channels, ratio, w1, w2, shared=False, w1_max=w1m, w2_max=w2m)


def _mlp(v: np.ndarray, w1: np.ndarray, w2: np.ndarray) -> np.ndarray:
    return _relu(v @ w1) @ w2


def channel_attention_forward(t: Tensor, p: AttentionParams):
    """Forward pass of the channel-attention block.

    Pools the input once by average and once by max, pushes each pooled
    vector through the bottleneck MLP, adds the two results, and squashes
    through a sigmoid. Every channel of the input is then multiplied by its
    attention weight.

    Returns ``(weights, out)`` where ``weights`` is one value per channel,
    each strictly inside (0, 1), and ``out`` is the rescaled tensor.
    """
    if t.channels != p.channels:
        raise DimensionError(
            f"tensor has {t.channels} channels, params expect {p.channels}"
        )
    avg = global_avg_pool(t)
    mx = global_max_pool(t)
    if p.shared:
        pre = _mlp(avg, p.w1, p.w2) + _mlp(mx, p.w1, p.w2)
    else:
        pre = _mlp(avg, p.w1, p.w2) + _mlp(mx, p.w1_max, p.w2_max)
    weights = sigmoid(pre)
    return weights, t.scaled_per_channel(weights)


# --------------------------------------------------------------------------
# parameter accounting


def dense_param_count(inputs: int, outputs: int, bias: bool = True) -> int:
    """Weight count of a fully connected layer: inputs*outputs (+ outputs)."""
    if inputs < 1 or outputs < 1:
        raise InvalidArgumentError("layer sizes must be >= 1")
    return inputs * outputs + (outputs if bias else 0)


def ca_param_count(channels: int, ratio: int, shared: bool = True,
                   bias: bool = False) -> int:
    """Parameter count of the channel-attention block.

    One encoder-decoder MLP holds 2 * channels^2 / ratio weights; a
    non-shared block doubles that. Biases, when enabled, add
    channels/ratio + channels per MLP.
    """
    if channels < 1 or ratio < 1:
        raise InvalidArgumentError("channels and ratio must be >= 1")
    if channels % ratio != 0:
        raise InvalidArgumentError(
            f"ratio {ratio} does not divide channels {channels}"
        )
    hidden = channels // ratio
    per_mlp = channels * hidden + hidden * channels
    if bias:
        per_mlp += hidden + channels
    return per_mlp if shared else 2 * per_mlp


# --------------------------------------------------------------------------
# layer plan


class ActivationKind(enum.Enum):
    RELU = "relu"
    SILU = "silu"


class StageKind(enum.Enum):
    PREAMBLE = "preamble"
    DENSE_BLOCK = "dense_block"
    POSTAMBLE = "postamble"
    CHANNEL_ATTENTION = "channel_attention"
    GLOBAL_AVG_POOL = "global_avg_pool"
    CLASSIFIER = "classifier"


@dataclass(frozen=True)
class Stage:
    name: str
    kind: StageKind
    activation: ActivationKind | None = None


@dataclass(frozen=True)
class LayerPlan:
    """Declarative stage order of the improved network.

    The attention block must appear exactly once, immediately after the
    postamble and before global average pooling; it keeps ReLU internally
    while every other activated stage uses SiLU. ``validate`` enforces
    those placement rules; ``allow_silu_in_attention`` relaxes only the
    internal-activation rule so the known-worse all-SiLU variant can still
    be described.
    """

    stages: tuple[Stage, ...]

    def attention_index(self) -> int:
        idx = [i for i, s in enumerate(self.stages)
               if s.kind is StageKind.CHANNEL_ATTENTION]
        if len(idx) != 1:
            raise ValidationError(
                f"plan must contain exactly one attention stage, found {len(idx)}"
            )
        return idx[0]

    def validate(self, allow_silu_in_attention: bool = False) -> None:
        ca = self.attention_index()
        post = [i for i, s in enumerate(self.stages) if s.kind is StageKind.POSTAMBLE]
        if len(post) != 1:
            raise ValidationError("plan must contain exactly one postamble stage")
        if ca != post[0] + 1:
            raise ValidationError(
                "attention stage must sit immediately after the postamble"
            )
        gap = [i for i, s in enumerate(self.stages)
               if s.kind is StageKind.GLOBAL_AVG_POOL]
        if not gap or ca > gap[0]:
            raise ValidationError(
                "attention stage must come before global average pooling"
            )
        for i, s in enumerate(self.stages):
            if s.kind is StageKind.CHANNEL_ATTENTION:
                if s.activation is not ActivationKind.RELU and not allow_silu_in_attention:
                    raise ValidationError(
                        "attention stage must use relu internally "
                        "(pass allow_silu_in_attention=True to override)"
                    )
            elif s.activation is not None and s.activation is not ActivationKind.SILU:
                raise ValidationError(
                    f"stage {s.name!r} must use silu, got {s.activation.value}"
                )


def default_layer_plan(dense_blocks: int = 4) -> LayerPlan:
    """Canonical stage order: preamble, dense blocks, postamble, attention,
    global average pool, classifier head."""
    stages = [Stage("preamble", StageKind.PREAMBLE, ActivationKind.SILU)]
    for i in range(dense_blocks):
        stages.append(
            Stage(f"dense_block_{i + 1}", StageKind.DENSE_BLOCK, ActivationKind.SILU)
        )
    stages += [
        Stage("postamble", StageKind.POSTAMBLE, ActivationKind.SILU),
        Stage("channel_attention", StageKind.CHANNEL_ATTENTION, ActivationKind.RELU),
        Stage("global_avg_pool", StageKind.GLOBAL_AVG_POOL, None),
        Stage("classifier", StageKind.CLASSIFIER, None),
    ]
    return LayerPlan(tuple(stages))


# --------------------------------------------------------------------------
# text serialization for golden tests


def save_tensor_txt(t: Tensor, path) -> None:
    """Write ``H W C`` on the first line, then H*W lines of C values."""
    lines = [f"{t.height} {t.width} {t.channels}"]
    flat = t.data.reshape(t.height * t.width, t.channels)
    for row in flat:
        lines.append(" ".join(repr(float(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_tensor_txt(path) -> Tensor:
    text = Path(path).read_text(encoding="utf-8").strip().split("\n")
    try:
        h, w, c = (int(tok) for tok in text[0].split())
    except ValueError as exc:
        raise InvalidArgumentError(f"bad tensor header {text[0]!r}") from exc
    expected = h * w
    if len(text) - 1 != expected:
        raise InvalidArgumentError(
            f"expected {expected} value lines, found {len(text) - 1}"
        )
    values = np.array(
        [[float(tok) for tok in line.split()] for line in text[1:]], dtype=np.float64
    )
    if values.shape[1] != c:
        raise InvalidArgumentError(
            f"expected {c} values per line, found {values.shape[1]}"
        )
    return Tensor(h, w, c, values.reshape(h, w, c))
