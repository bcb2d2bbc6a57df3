"""Non-regular quarter-sampling masks and masked / plain low-resolution capture.

A quarter mask divides every 2x2 cell of the high-resolution grid (one
low-resolution sensor pixel) into four quadrants and keeps exactly one of
them, chosen pseudo-randomly per cell. Which quadrant survives is a pure
function of (cell index, seed), so masks are reproducible across runs and
platforms without shared generator state.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .errors import DimensionError
from .raster import RasterImage


class WeightClass(IntEnum):
    """Provenance of a pixel inside a sampled view."""

    ABSENT = 0
    ORIGINAL = 1
    WARPED = 2
    RECONSTRUCTED = 3


@dataclass(frozen=True)
class SamplingMask:
    """Boolean grid over the HR lattice; true = sensor sample present."""

    flags: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(np.asarray(self.flags, dtype=bool))
        if arr.ndim != 2:
            raise DimensionError(f"mask must be 2-D, got shape {arr.shape}")
        if arr.shape[0] % 2 or arr.shape[1] % 2 or arr.shape[0] < 2 or arr.shape[1] < 2:
            raise DimensionError(f"mask dimensions must be even and positive, got {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "flags", arr)

    @property
    def width(self) -> int:
        return self.flags.shape[1]

    @property
    def height(self) -> int:
        return self.flags.shape[0]

    def density(self) -> float:
        return float(self.flags.mean())


@dataclass(frozen=True)
class SampledView:
    """An image whose values are defined only where the mask is true.

    weight_class tracks per-pixel provenance; mask true corresponds exactly
    to ORIGINAL or WARPED, mask false to ABSENT (value is a placeholder that
    no algorithm may read) or, after reconstruction feedback, RECONSTRUCTED.
    """

    image: RasterImage
    mask: SamplingMask
    weight_class: np.ndarray

    def __post_init__(self):
        wc = np.ascontiguousarray(np.asarray(self.weight_class, dtype=np.uint8))
        if wc.shape != self.image.shape or self.mask.flags.shape != self.image.shape:
            raise DimensionError(
                f"view components disagree: image {self.image.shape}, "
                f"mask {self.mask.flags.shape}, classes {wc.shape}"
            )
        present = (wc == WeightClass.ORIGINAL) | (wc == WeightClass.WARPED)
        if not np.array_equal(present, self.mask.flags):
            raise DimensionError("mask flags must match ORIGINAL/WARPED weight classes exactly")
        wc.setflags(write=False)
        object.__setattr__(self, "weight_class", wc)


# splitmix64 finalizer constants
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)


def _hash_cells(n_cells: int, seed: int) -> np.ndarray:
    """splitmix64-style hash of cell counters, mixed with the seed."""
    x = np.arange(n_cells, dtype=np.uint64)
    x = (x + np.uint64(1)) * _GOLDEN + np.uint64(seed & 0xFFFFFFFFFFFFFFFF)
    x = (x ^ (x >> np.uint64(30))) * _MIX1
    x = (x ^ (x >> np.uint64(27))) * _MIX2
    return x ^ (x >> np.uint64(31))


def _generate_mask_cells(lr_width: int, lr_height: int, seed: int, cell: int = 2) -> np.ndarray:
    # One surviving quadrant per cell x cell block; only cell=2 is exposed.
    if lr_width < 1 or lr_height < 1:
        raise DimensionError(f"LR dimensions must be positive, got {lr_width}x{lr_height}")
    choice = _hash_cells(lr_width * lr_height, seed) % np.uint64(cell * cell)
    choice = choice.reshape(lr_height, lr_width).astype(np.int64)
    flags = np.zeros((lr_height * cell, lr_width * cell), dtype=bool)
    cy, cx = np.divmod(choice, cell)
    rows = np.arange(lr_height)[:, None] * cell + cy
    cols = np.arange(lr_width)[None, :] * cell + cx
    flags[rows, cols] = True
    return flags


def generate_mask(lr_width: int, lr_height: int, seed: int) -> SamplingMask:
    """Quarter-sampling mask of size (2*lr_width) x (2*lr_height).

    Exactly one flag is set per aligned 2x2 cell; identical (dims, seed)
    always produce the identical mask.
    """
    return SamplingMask(_generate_mask_cells(lr_width, lr_height, seed, cell=2))


def apply_mask(hr_image: RasterImage, mask: SamplingMask) -> SampledView:
    """Simulate a masked-sensor capture: keep samples where the mask is true.

    Covered positions get placeholder value 0 and class ABSENT; kept
    positions copy the HR sample bit-exactly with class ORIGINAL.
    """
    if mask.flags.shape != hr_image.shape:
        raise DimensionError(f"mask {mask.flags.shape} does not match image {hr_image.shape}")
    samples = np.where(mask.flags, hr_image.samples, 0.0)
    classes = np.where(mask.flags, np.uint8(WeightClass.ORIGINAL), np.uint8(WeightClass.ABSENT))
    return SampledView(RasterImage(samples), mask, classes)


def simulate_lr(hr_image: RasterImage) -> RasterImage:
    """Plain LR capture: each output pixel is the mean of its 2x2 HR cell."""
    h, w = hr_image.shape
    if h % 2 or w % 2:
        raise DimensionError(f"LR simulation needs even dimensions, got {w}x{h}")
    s = hr_image.samples
    lr = (s[0::2, 0::2] + s[0::2, 1::2] + s[1::2, 0::2] + s[1::2, 1::2]) / 4.0
    return RasterImage(lr)


def mask_to_image(mask: SamplingMask) -> RasterImage:
    """Render a mask for visual inspection: 255 = sample present, 0 = covered."""
    return RasterImage(np.where(mask.flags, 255.0, 0.0))


def classes_to_image(view: SampledView) -> RasterImage:
    """Render provenance classes: ORIGINAL 255, WARPED 128, RECONSTRUCTED 64, ABSENT 0."""
    lut = np.array([0.0, 255.0, 128.0, 64.0])
    return RasterImage(lut[view.weight_class])
