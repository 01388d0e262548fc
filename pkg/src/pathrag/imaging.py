"""Image containers, PNG/JPEG I/O and optical-density conversion."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import CorruptImage, ImageNotFound, UnsupportedFormat

#: OD of the darkest representable intensity (1/255); every OD value is clamped here.
OD_CEILING = float(-np.log10(1.0 / 255.0))

_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"
_JPEG_MAGIC = b"\xff\xd8"


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.ascontiguousarray(array)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class RgbImage:
    """8-bit RGB raster stored as a read-only ``(height, width, 3)`` uint8 array."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 3 or px.shape[2] != 3:
            raise ValueError(f"expected (H, W, 3) array, got shape {px.shape}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError("image must be at least 1x1")
        if px.dtype != np.uint8:
            if np.any(px < 0) or np.any(px > 255):
                raise ValueError("channel values must lie in [0, 255]")
            px = px.astype(np.uint8)
        object.__setattr__(self, "pixels", _frozen(px))

    @classmethod
    def from_flat(cls, width: int, height: int, data) -> "RgbImage":
        arr = np.asarray(data, dtype=np.int64)
        if arr.size != width * height * 3:
            raise ValueError("data length must equal width * height * 3")
        return cls(arr.reshape(height, width, 3))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def data(self) -> list[int]:
        return self.pixels.reshape(-1).tolist()

    def tobytes(self) -> bytes:
        return self.pixels.tobytes()

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(f"{self.width}x{self.height}:".encode())
        h.update(self.tobytes())
        return h.hexdigest()

    def __eq__(self, other):
        if not isinstance(other, RgbImage):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and bool(
            np.array_equal(self.pixels, other.pixels)
        )

    def __repr__(self):
        return f"RgbImage({self.width}x{self.height})"


@dataclass(frozen=True, eq=False)
class OdImage:
    """Optical density per channel, ``(height, width, 3)`` float64 in ``[0, OD_CEILING]``."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 3 or v.shape[2] != 3:
            raise ValueError(f"expected (H, W, 3) array, got shape {v.shape}")
        if np.any(v < 0) or np.any(v > OD_CEILING + 1e-12):
            raise ValueError("optical density outside [0, OD_CEILING]")
        object.__setattr__(self, "values", _frozen(v))

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]


def load_image(path) -> RgbImage:
    """Decode a PNG or JPEG file to RGB, expanding grayscale and dropping alpha."""
    path = Path(path)
    if not path.is_file():
        raise ImageNotFound(str(path))
    with open(path, "rb") as fh:
        head = fh.read(8)
    looks_supported = head.startswith(_PNG_MAGIC) or head.startswith(_JPEG_MAGIC)
    try:
        with Image.open(path) as img:
            fmt = img.format
            if fmt not in ("PNG", "JPEG"):
                raise UnsupportedFormat(f"{path}: {fmt} images are not supported")
            img.load()
            rgb = img.convert("RGB")
    except UnidentifiedImageError as exc:
        if looks_supported:
            raise CorruptImage(f"{path}: {exc}") from exc
        raise UnsupportedFormat(f"{path}: not a PNG or JPEG file") from exc
    except (OSError, SyntaxError, ValueError) as exc:
        if isinstance(exc, UnsupportedFormat):
            raise
        raise CorruptImage(f"{path}: {exc}") from exc
    return RgbImage(np.asarray(rgb, dtype=np.uint8))


def save_image(image: RgbImage, path) -> None:
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".png":
        fmt = "PNG"
    elif suffix in (".jpg", ".jpeg"):
        fmt = "JPEG"
    else:
        raise UnsupportedFormat(f"cannot encode {suffix!r}; use .png or .jpg")
    Image.fromarray(np.asarray(image.pixels)).save(path, format=fmt)


def encode_png(image: RgbImage) -> bytes:
    """Losslessly encode to PNG bytes (used for wire payloads)."""
    import io

    buf = io.BytesIO()
    Image.fromarray(np.asarray(image.pixels)).save(buf, format="PNG")
    return buf.getvalue()


def intensity_to_od(intensity) -> np.ndarray:
    i = np.maximum(np.asarray(intensity, dtype=np.float64), 1.0)
    return -np.log10(i / 255.0)


def od_to_intensity(od) -> np.ndarray:
    raw = 255.0 * np.power(10.0, -np.asarray(od, dtype=np.float64))
    # half-up rounding keeps the inverse independent of numpy's banker's rounding
    return np.clip(np.floor(raw + 0.5), 0, 255).astype(np.uint8)


def rgb_to_od(image: RgbImage) -> OdImage:
    return OdImage(intensity_to_od(image.pixels))


def od_to_rgb(image: OdImage) -> RgbImage:
    return RgbImage(od_to_intensity(image.values))
