"""Grayscale raster container and 8-bit file I/O (binary PGM and PNG).

Samples are kept as real values internally; quantization to 8 bit happens
only at file boundaries so that reconstruction arithmetic stays exact.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import CorruptImageError, DimensionError, InputError, MissingFileError, UnsupportedFormatError

# ITU-R BT.601 luma weights for RGB -> gray conversion.
LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True)
class RasterImage:
    """2-D grayscale image, row-major float64 samples, nominal range [0, 255].

    The sample array is made read-only on construction, so instances are
    immutable values and safe to share between workers.
    """

    samples: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(np.asarray(self.samples, dtype=np.float64))
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DimensionError(f"image must be a 2-D array with positive size, got shape {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    @property
    def width(self) -> int:
        return self.samples.shape[1]

    @property
    def height(self) -> int:
        return self.samples.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.samples.shape


def quantize(samples: np.ndarray) -> np.ndarray:
    """Clamp to [0, 255] and round half-up to uint8 (the on-disk representation)."""
    return np.floor(np.clip(samples, 0.0, 255.0) + 0.5).astype(np.uint8)


def rgb_to_gray(rgb: np.ndarray) -> np.ndarray:
    """BT.601 luma of an (H, W, 3) array, rounded half-up to integers."""
    lum = np.asarray(rgb, dtype=np.float64) @ LUMA_WEIGHTS
    return np.floor(lum + 0.5)


def _read_pgm(data: bytes, path) -> np.ndarray:
    # Binary PGM: "P5 <width> <height> <maxval>" header tokens separated by
    # whitespace, '#' comments allowed, then one raw byte per sample.
    pos = 2  # past magic
    tokens = []
    while len(tokens) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            eol = data.find(b"\n", pos)
            if eol < 0:
                raise CorruptImageError(path, "unterminated comment in header")
            pos = eol + 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise CorruptImageError(path, "truncated header")
        tokens.append(data[start:pos])
    pos += 1  # single whitespace byte after maxval
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError:
        raise CorruptImageError(path, "non-numeric header field") from None
    if width < 1 or height < 1:
        raise CorruptImageError(path, f"bad dimensions {width}x{height}")
    if not 0 < maxval < 256:
        raise UnsupportedFormatError(path, f"maxval {maxval} is not 8-bit")
    raw = data[pos : pos + width * height]
    if len(raw) != width * height:
        raise CorruptImageError(path, "pixel data shorter than header promises")
    return np.frombuffer(raw, dtype=np.uint8).reshape(height, width).astype(np.float64)


def _write_pgm(arr: np.ndarray, path) -> None:
    header = f"P5\n{arr.shape[1]} {arr.shape[0]}\n255\n".encode("ascii")
    Path(path).write_bytes(header + arr.tobytes())


def load_image(path) -> RasterImage:
    """Load an 8-bit grayscale or RGB raster file as a grayscale image.

    Binary PGM (P5) is parsed directly; everything else goes through Pillow.
    RGB input is converted with the BT.601 luma weights, rounded half-up.
    """
    p = Path(path)
    if not p.is_file():
        raise MissingFileError(path)
    data = p.read_bytes()
    if data[:2] == b"P5":
        return RasterImage(_read_pgm(data, path))
    try:
        img = Image.open(io.BytesIO(data))
        img.load()
    except UnidentifiedImageError:
        raise CorruptImageError(path) from None
    if img.mode == "P":
        img = img.convert("RGB")
    if img.mode == "L":
        arr = np.asarray(img, dtype=np.float64)
    elif img.mode == "RGB":
        arr = rgb_to_gray(np.asarray(img))
    else:
        raise UnsupportedFormatError(path, f"mode {img.mode}; expected 8-bit gray or RGB")
    return RasterImage(arr)


def save_image(image: RasterImage, path) -> None:
    """Write as 8-bit grayscale; format chosen by extension (.pgm or .png)."""
    arr = quantize(image.samples)
    suffix = Path(path).suffix.lower()
    try:
        if suffix == ".pgm":
            _write_pgm(arr, path)
        elif suffix == ".png":
            Image.fromarray(arr, mode="L").save(path, format="PNG")
        else:
            raise UnsupportedFormatError(path, "use .pgm or .png")
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc}") from exc


def crop(image: RasterImage, x0: int, y0: int, w: int, h: int) -> RasterImage:
    """Return the w x h sub-image with top-left corner (x0, y0)."""
    if w < 1 or h < 1:
        raise DimensionError(f"crop size must be positive, got {w}x{h}")
    if x0 < 0 or y0 < 0 or x0 + w > image.width or y0 + h > image.height:
        raise DimensionError(
            f"crop rectangle ({x0},{y0},{w},{h}) exceeds image {image.width}x{image.height}"
        )
    return RasterImage(image.samples[y0 : y0 + h, x0 : x0 + w].copy())
