"""Image container and file IO.

Images are 8-bit RGB held as (H, W, 3) uint8 numpy arrays. PNG and JPEG go
through Pillow; binary PPM (P6) is written/parsed directly so golden files
are byte-stable no matter which encoder version is installed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from ..errors import InvalidArgumentError, LeafkitError

READABLE_SUFFIXES = (".png", ".jpg", ".jpeg", ".ppm")


class ImageIOError(LeafkitError, IOError):
    """Reading or decoding an image failed; message names the path."""


@dataclass(frozen=True)
class Image:
    """8-bit RGB raster, row-major, shape (height, width, 3)."""

    pixels: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.asarray(self.pixels)
        if arr.ndim != 3 or arr.shape[2] != 3 or arr.dtype != np.uint8:
            raise InvalidArgumentError(
                f"expected (H, W, 3) uint8 pixels, got {arr.shape} {arr.dtype}"
            )
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise InvalidArgumentError("image must have at least one pixel")
        arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        object.__setattr__(self, "pixels", arr)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    def tobytes(self) -> bytes:
        return self.pixels.tobytes()


def read_image(path) -> Image:
    path = Path(path)
    if not path.exists():
        raise ImageIOError(f"image not found: {path}")
    try:
        if path.suffix.lower() == ".ppm":
            return _read_ppm(path)
        with PILImage.open(path) as im:
            return Image(np.asarray(im.convert("RGB"), dtype=np.uint8))
    except ImageIOError:
        raise
    except Exception as exc:
        raise ImageIOError(f"failed to decode {path}: {exc}") from exc


def write_image(img: Image, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    suffix = path.suffix.lower()
    if suffix == ".ppm":
        write_ppm(img, path)
    elif suffix == ".png":
        PILImage.fromarray(img.pixels, mode="RGB").save(path, format="PNG")
    else:
        raise InvalidArgumentError(f"unsupported output format {suffix!r} (png or ppm)")


def write_ppm(img: Image, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = f"P6\n{img.width} {img.height}\n255\n".encode("ascii")
    path.write_bytes(header + img.tobytes())


def _read_ppm(path: Path) -> Image:
    raw = path.read_bytes()
    # header: magic, width, height, maxval as whitespace-separated tokens,
    # comments (#...) allowed between them
    tokens: list[bytes] = []
    i = 0
    while len(tokens) < 4 and i < len(raw):
        if raw[i : i + 1].isspace():
            i += 1
            continue
        if raw[i : i + 1] == b"#":
            while i < len(raw) and raw[i : i + 1] != b"\n":
                i += 1
            continue
        j = i
        while j < len(raw) and not raw[j : j + 1].isspace():
            j += 1
        tokens.append(raw[i:j])
        i = j
    if len(tokens) < 4 or tokens[0] != b"P6":
        raise ImageIOError(f"not a binary PPM file: {path}")
    width, height, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    if maxval != 255:
        raise ImageIOError(f"only maxval 255 PPM supported: {path}")
    i += 1  # single whitespace byte after maxval
    expected = width * height * 3
    data = raw[i : i + expected]
    if len(data) != expected:
        raise ImageIOError(f"truncated PPM payload in {path}")
    arr = np.frombuffer(data, dtype=np.uint8).reshape(height, width, 3)
    return Image(arr.copy())


def resize_bilinear(img: Image, width: int = 224, height: int = 224) -> Image:
    """Single resize utility used when pulling sources to a common size."""
    if width < 1 or height < 1:
        raise InvalidArgumentError("target size must be positive")
    resized = PILImage.fromarray(img.pixels, mode="RGB").resize(
        (width, height), PILImage.BILINEAR
    )
    return Image(np.asarray(resized, dtype=np.uint8))
