"""Plan generation: which ops run against which sources, with which seeds.

A plan is a pure function of (mode, ordered source ids, global seed). Per
source the mode contributes a fixed op set, always including exactly one
identity entry, so plan size is sources x multiplier with multipliers
1 (none), 8 (color), 6 (transform), 2 (noise) and 15 (combined). The
combined set carries two independent gaussian-noise entries; with one it
would only reach x14.
"""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass

from ..errors import InvalidArgumentError
from .ops import AugOp


class AugmentationMode(enum.Enum):
    NONE = "none"
    COLOR = "color"
    NOISE = "noise"
    TRANSFORM = "transform"
    COMBINED = "combined"


MULTIPLIERS = {
    AugmentationMode.NONE: 1,
    AugmentationMode.COLOR: 8,
    AugmentationMode.TRANSFORM: 6,
    AugmentationMode.NOISE: 2,
    AugmentationMode.COMBINED: 15,
}

COLOR_OPS = (
    AugOp.brightness(-0.75),
    AugOp.brightness(+0.75),
    AugOp.hue_shift(-20),
    AugOp.hue_shift(+20),
    AugOp.contrast(-0.25),
    AugOp.contrast(+0.25),
    AugOp.channel_shift(75),
)

TRANSFORM_OPS = (
    AugOp.rotate(1),
    AugOp.rotate(2),
    AugOp.rotate(3),
    AugOp.flip("horizontal"),
    AugOp.flip("vertical"),
)

NOISE_OPS = (AugOp.gaussian_noise(0, 1),)


def ops_for_mode(mode: AugmentationMode) -> tuple[AugOp, ...]:
    identity = (AugOp.identity(),)
    if mode is AugmentationMode.NONE:
        return identity
    if mode is AugmentationMode.COLOR:
        return identity + COLOR_OPS
    if mode is AugmentationMode.TRANSFORM:
        return identity + TRANSFORM_OPS
    if mode is AugmentationMode.NOISE:
        return identity + NOISE_OPS
    # combined: two independent noise draws (distinct stream seeds via op index)
    return identity + COLOR_OPS + TRANSFORM_OPS + NOISE_OPS + NOISE_OPS


def stream_seed(global_seed: int, source_id: str, op_index: int) -> int:
    """64-bit seed for one plan entry.

    Defined as the little-endian blake2b-64 digest of the string
    ``"<global_seed>/<source_id>/<op_index>"``. Stable across runs and
    platforms for the same inputs.
    """
    key = f"{global_seed}/{source_id}/{op_index}".encode("utf-8")
    return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "little")


@dataclass(frozen=True)
class PlanEntry:
    source_id: str
    op: AugOp
    op_index: int
    stream_seed: int

    def output_id(self) -> str:
        # op index keeps ids unique when a mode repeats an op (combined noise)
        return f"{self.source_id}__{self.op_index:02d}_{self.op.slug()}"


@dataclass(frozen=True)
class AugPlan:
    mode: AugmentationMode
    global_seed: int
    entries: tuple[PlanEntry, ...]

    def __len__(self) -> int:
        return len(self.entries)


def build_plan(mode: AugmentationMode, source_ids, global_seed: int) -> AugPlan:
    """Expand every source into the mode's op set, in source-then-op order."""
    ids = list(source_ids)
    if not ids:
        raise InvalidArgumentError("source id list must not be empty")
    if len(set(ids)) != len(ids):
        dupes = sorted({s for s in ids if ids.count(s) > 1})
        raise InvalidArgumentError(f"duplicate source ids: {dupes[:5]}")
    ops = ops_for_mode(mode)
    entries = []
    for sid in ids:
        for idx, op in enumerate(ops):
            entries.append(PlanEntry(sid, op, idx, stream_seed(global_seed, sid, idx)))
    return AugPlan(mode, global_seed, tuple(entries))
