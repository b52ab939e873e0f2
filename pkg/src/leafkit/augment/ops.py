"""Deterministic single-image augmentation operations.

Color and noise ops work on pixels normalized to [0, 1] per channel; the
result is clamped to [0, 1] and re-quantized with round-half-up. Geometric
ops permute pixels and never touch values. Every op is a pure function of
(image, op, stream_seed): the two ops that need randomness (channel shift,
gaussian noise) draw from a generator seeded with the entry's stream seed,
so re-running a plan reproduces output bytes exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidArgumentError
from ..kernels import hue_shift_pixels
from .imageio import Image

KINDS = (
    "identity",
    "brightness",
    "hue_shift",
    "contrast",
    "channel_shift",
    "gaussian_noise",
    "rotate",
    "flip",
)

FLIP_AXES = ("horizontal", "vertical")


@dataclass(frozen=True)
class AugOp:
    """One parameterized augmentation operation.

    Use the classmethod constructors; they validate parameters per kind.
    """

    kind: str
    value: float = 0.0          # delta / degrees / amplitude, per kind
    mean: float = 0.0           # gaussian noise only
    stddev: float = 0.0         # gaussian noise only
    quarter_turns: int = 0      # rotate only
    axis: str = ""              # flip only

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidArgumentError(f"unknown augmentation kind {self.kind!r}")
        for v in (self.value, self.mean, self.stddev):
            if not np.isfinite(v):
                raise InvalidArgumentError("op parameters must be finite")
        if self.kind == "rotate" and self.quarter_turns not in (1, 2, 3):
            raise InvalidArgumentError("rotate takes 1, 2 or 3 quarter turns")
        if self.kind == "flip" and self.axis not in FLIP_AXES:
            raise InvalidArgumentError(f"flip axis must be one of {FLIP_AXES}")
        if self.kind == "gaussian_noise" and self.stddev < 0:
            raise InvalidArgumentError("noise stddev must be >= 0")
        if self.kind == "channel_shift" and self.value < 0:
            raise InvalidArgumentError("channel shift amplitude must be >= 0")

    # -- constructors ------------------------------------------------------

    @classmethod
    def identity(cls) -> "AugOp":
        return cls("identity")

    @classmethod
    def brightness(cls, delta: float) -> "AugOp":
        return cls("brightness", value=float(delta))

    @classmethod
    def hue_shift(cls, degrees: float) -> "AugOp":
        return cls("hue_shift", value=float(degrees))

    @classmethod
    def contrast(cls, delta: float) -> "AugOp":
        return cls("contrast", value=float(delta))

    @classmethod
    def channel_shift(cls, amplitude: float) -> "AugOp":
        return cls("channel_shift", value=float(amplitude))

    @classmethod
    def gaussian_noise(cls, mean: float, stddev: float) -> "AugOp":
        return cls("gaussian_noise", mean=float(mean), stddev=float(stddev))

    @classmethod
    def rotate(cls, quarter_turns: int) -> "AugOp":
        return cls("rotate", quarter_turns=int(quarter_turns))

    @classmethod
    def flip(cls, axis: str) -> "AugOp":
        return cls("flip", axis=axis)

    # -- naming ------------------------------------------------------------

    def describe(self) -> str:
        """Canonical descriptor used in manifests, e.g. ``brightness(+0.75)``."""
        if self.kind == "identity":
            return "identity"
        if self.kind in ("brightness", "contrast"):
            return f"{self.kind}({self.value:+g})"
        if self.kind == "hue_shift":
            return f"hue_shift({self.value:+g})"
        if self.kind == "channel_shift":
            return f"channel_shift({self.value:g})"
        if self.kind == "gaussian_noise":
            return f"gaussian_noise({self.mean:g},{self.stddev:g})"
        if self.kind == "rotate":
            return f"rotate({90 * self.quarter_turns})"
        return f"flip({self.axis})"

    def slug(self) -> str:
        """Short filename-safe tag, e.g. ``bri+0.75`` or ``rot180``."""
        if self.kind == "identity":
            return "orig"
        if self.kind == "brightness":
            return f"bri{self.value:+g}"
        if self.kind == "contrast":
            return f"con{self.value:+g}"
        if self.kind == "hue_shift":
            return f"hue{self.value:+g}"
        if self.kind == "channel_shift":
            return f"chs{self.value:g}"
        if self.kind == "gaussian_noise":
            return f"noise{self.mean:g}s{self.stddev:g}"
        if self.kind == "rotate":
            return f"rot{90 * self.quarter_turns}"
        return f"flip{self.axis[0]}"


def op_from_descriptor(text: str) -> AugOp:
    """Inverse of :meth:`AugOp.describe`."""
    text = text.strip()
    if text == "identity":
        return AugOp.identity()
    if "(" not in text or not text.endswith(")"):
        raise InvalidArgumentError(f"bad op descriptor {text!r}")
    kind, args = text[:-1].split("(", 1)
    try:
        if kind == "brightness":
            return AugOp.brightness(float(args))
        if kind == "contrast":
            return AugOp.contrast(float(args))
        if kind == "hue_shift":
            return AugOp.hue_shift(float(args))
        if kind == "channel_shift":
            return AugOp.channel_shift(float(args))
        if kind == "gaussian_noise":
            mean, stddev = args.split(",")
            return AugOp.gaussian_noise(float(mean), float(stddev))
        if kind == "rotate":
            return AugOp.rotate(int(args) // 90)
        if kind == "flip":
            return AugOp.flip(args)
    except (ValueError, InvalidArgumentError) as exc:
        raise InvalidArgumentError(f"bad op descriptor {text!r}") from exc
    raise InvalidArgumentError(f"bad op descriptor {text!r}")


# --------------------------------------------------------------------------
# color space conversion (single pixel; array math lives in leafkit.kernels)


def rgb_to_hsv(pixel) -> tuple[float, float, float]:
    """Hexcone conversion of one 8-bit RGB triple.

    Returns hue in [0, 360) degrees, saturation and value in [0, 1].
    """
    r, g, b = (float(c) / 255.0 for c in pixel)
    for c in (r, g, b):
        if not 0.0 <= c <= 1.0:
            raise InvalidArgumentError("pixel components must be in [0, 255]")
    mx = max(r, g, b)
    mn = min(r, g, b)
    c = mx - mn
    if c == 0.0:
        h = 0.0
    elif mx == r:
        h = (60.0 * ((g - b) / c)) % 360.0
    elif mx == g:
        h = 60.0 * ((b - r) / c) + 120.0
    else:
        h = 60.0 * ((r - g) / c) + 240.0
    s = 0.0 if mx == 0.0 else c / mx
    return h, s, mx


def hsv_to_rgb(h: float, s: float, v: float) -> tuple[int, int, int]:
    """Inverse hexcone conversion back to an 8-bit RGB triple."""
    hp = (h % 360.0) / 60.0
    sector = int(hp) % 6
    f = hp - int(hp)
    p = v * (1.0 - s)
    q = v * (1.0 - s * f)
    t = v * (1.0 - s * (1.0 - f))
    rgb = (
        (v, t, p), (q, v, p), (p, v, t), (p, q, v), (t, p, v), (v, p, q)
    )[sector]
    return tuple(int(np.floor(c * 255.0 + 0.5)) for c in rgb)


# --------------------------------------------------------------------------
# apply


def _quantize(norm: np.ndarray) -> np.ndarray:
    """Clamp normalized values to [0, 1], scale to bytes, round half up."""
    clipped = np.clip(norm, 0.0, 1.0)
    return np.floor(clipped * 255.0 + 0.5).astype(np.uint8)


def channel_offsets(amplitude: float, stream_seed: int) -> np.ndarray:
    """Per-channel shift drawn once per image, uniform on [-a, a] in 0-255 scale."""
    rng = np.random.default_rng(stream_seed)
    return rng.uniform(-amplitude, amplitude, size=3)


def noise_field(mean: float, stddev: float, shape, stream_seed: int) -> np.ndarray:
    """Per-pixel-per-channel gaussian noise in normalized units."""
    rng = np.random.default_rng(stream_seed)
    return rng.normal(mean, stddev, size=shape)


def apply_aug_op(img: Image, op: AugOp, stream_seed: int = 0) -> Image:
    """Apply one augmentation op; same inputs always give identical bytes."""
    if not isinstance(img, Image):
        raise InvalidArgumentError("expected an Image")
    px = img.pixels

    if op.kind == "identity":
        return Image(px.copy())
    if op.kind == "rotate":
        return Image(np.ascontiguousarray(np.rot90(px, k=-op.quarter_turns)))
    if op.kind == "flip":
        flipped = px[:, ::-1] if op.axis == "horizontal" else px[::-1, :]
        return Image(np.ascontiguousarray(flipped))

    norm = px.astype(np.float64) / 255.0
    if op.kind == "brightness":
        out = norm + op.value
    elif op.kind == "contrast":
        out = 0.5 + (1.0 + op.value) * (norm - 0.5)
    elif op.kind == "channel_shift":
        out = norm + channel_offsets(op.value, stream_seed) / 255.0
    elif op.kind == "gaussian_noise":
        out = norm + noise_field(op.mean, op.stddev, norm.shape, stream_seed)
    elif op.kind == "hue_shift":
        flat = norm.reshape(-1, 3)
        out = hue_shift_pixels(flat, op.value).reshape(norm.shape)
    else:  # pragma: no cover - guarded by AugOp validation
        raise InvalidArgumentError(f"unknown augmentation kind {op.kind!r}")
    return Image(_quantize(out))
