"""Block-wise sparse spectral extrapolation of irregularly sampled images.

Each block is modelled as a sparse sum of 2-D Fourier basis functions fitted
to the weighted samples of its surrounding support area. Basis functions are
selected greedily, one per iteration, by maximising the weighted residual
energy they can remove. Selecting a frequency together with its conjugate
mirror keeps the model real-valued.

All spectral bookkeeping happens in the frequency domain: with W = FFT(w)
the weighted projection of every basis candidate is available at once as
R = FFT(w * (f - g)), and subtracting an updated coefficient from R is a
circular shift of W. One FFT per block, O(fft_size^2) per iteration.
"""

from dataclasses import dataclass, field, replace
from functools import lru_cache
import math
import os

import numpy as np
from scipy.spatial import cKDTree

from .errors import DimensionError, InputError, UnsupportedBlockError
from .raster import RasterImage
from .sampling import SampledView, SamplingMask, WeightClass

try:
    from ._kernels import greedy_select as _greedy_jit
except ImportError:  # pragma: no cover
    _greedy_jit = None

_USE_JIT = _greedy_jit is not None and not os.environ.get("NRSTEREO_NO_NUMBA")


@dataclass(frozen=True)
class FseParams:
    """Parameters of the block-wise spectral extrapolation.

    Defaults correspond to quarter-sampled data: 4x4 blocks estimated from
    centred 28x28 support areas, transformed at size 32.
    """

    block_size: int = 4
    area_size: int = 28
    fft_size: int = 32
    iterations: int = 100
    spatial_decay: float = 0.7
    recon_weight: float = 0.5
    odc_factor: float = 0.5
    freq_weight_decay: float = 0.5

    def __post_init__(self):
        if not (1 <= self.block_size <= self.area_size <= self.fft_size):
            raise InputError(
                "need 1 <= block_size <= area_size <= fft_size, got "
                f"{self.block_size}/{self.area_size}/{self.fft_size}"
            )
        if self.iterations < 1:
            raise InputError(f"iterations must be >= 1, got {self.iterations}")
        for name in ("spatial_decay", "recon_weight", "odc_factor", "freq_weight_decay"):
            v = getattr(self, name)
            if not (0.0 < v <= 1.0):
                raise InputError(f"{name} must be in (0, 1], got {v}")

    @property
    def border(self):
        """Margin of the support area around the block on each side."""
        return (self.area_size - self.block_size) // 2


@dataclass
class BlockModel:
    """Sparse spectral model of one block.

    coefficients is a full fft_size x fft_size complex grid; only the
    selected frequencies (and their conjugate mirrors) are non-zero.
    selected lists the canonical picks in selection order, without repeats.
    """

    coefficients: np.ndarray
    selected: list = field(default_factory=list)

    def evaluate(self):
        """Spatial-domain model signal on the full transform frame."""
        n = self.coefficients.shape[0]
        return np.fft.ifft2(self.coefficients) * (n * n)


@lru_cache(maxsize=8)
def _spatial_window(block_size, area_size, fft_size, spatial_decay):
    """Isotropic decay window rho^d on the transform frame.

    d is the Euclidean distance to the block centre; the support area sits
    in the top-left corner of the frame, the rest stays zero.
    """
    a = area_size
    # block anchor uses floor division, so the centre must too
    centre = (a - block_size) // 2 + (block_size - 1) / 2.0
    yy, xx = np.mgrid[0:a, 0:a]
    d = np.hypot(yy - centre, xx - centre)
    w = np.zeros((fft_size, fft_size))
    w[:a, :a] = spatial_decay ** d
    return w


@lru_cache(maxsize=8)
def _frequency_weights(fft_size, decay):
    """Low-frequency preference rho_f^r with wrap-around radial distance."""
    k = np.arange(fft_size)
    fk = np.minimum(k, fft_size - k)
    r = np.hypot(fk[:, None], fk[None, :])
    return decay ** r


def support_weights(classes, params, warped_weight=1.0):
    """Per-sample weights on the transform frame.

    classes is a frame-sized uint8 grid of WeightClass values (positions
    outside the image or inside the block to estimate are ABSENT). The
    weight is the spatial decay window scaled per provenance class:
    original 1.0, warped `warped_weight`, reconstructed params.recon_weight,
    absent 0.
    """
    n = params.fft_size
    if classes.shape != (n, n):
        raise DimensionError(f"classes must be {n}x{n}, got {classes.shape}")
    mult = np.array([0.0, 1.0, warped_weight, params.recon_weight])
    base = _spatial_window(
        params.block_size, params.area_size, n, params.spatial_decay
    )
    return base * mult[classes]


def _greedy_numpy(R, W, wf, sumw, odc, iters, callback=None):
    """Greedy selection loop, pure numpy. Modifies R in place.

    Per iteration: pick the frequency maximising wf * |R|^2, update its
    coefficient by odc * R[k] / sum(w), subtract the weighted basis pair
    from R as circular shifts of W. Returns the coefficient grid and the
    (n, 2) array of canonical picks.
    """
    n = R.shape[0]
    C = np.zeros((n, n), np.complex128)
    sel = []
    for _ in range(iters):
        crit = wf * (R.real * R.real + R.imag * R.imag)
        flat = int(np.argmax(crit))
        if crit.flat[flat] <= 0.0:
            break
        ky, kx = divmod(flat, n)
        cky = (n - ky) % n
        ckx = (n - kx) % n
        dc = odc * R[ky, kx] / sumw
        if (cky, ckx) == (ky, kx):
            dc = complex(dc.real, 0.0)
            C[ky, kx] += dc
            R -= dc * np.roll(W, (ky, kx), (0, 1))
        else:
            C[ky, kx] += dc
            C[cky, ckx] += np.conj(dc)
            R -= dc * np.roll(W, (ky, kx), (0, 1)) + np.conj(dc) * np.roll(
                W, (cky, ckx), (0, 1)
            )
        sel.append((ky, kx))
        if callback is not None:
            callback(C)
    return C, np.array(sel, np.int64).reshape(len(sel), 2)


def model_block(values, weights, params, trace=False):
    """Fit the sparse spectral model of one block (reference implementation).

    values and weights are frame-sized (fft_size square); weights are zero
    outside the support. Returns a BlockModel, or (BlockModel, energies)
    when trace is set, where energies[i] is the weighted residual energy
    after i iterations (energies[0] is the initial energy).

    pre: weights.sum() > 0.
    """
    n = params.fft_size
    if values.shape != (n, n) or weights.shape != (n, n):
        raise DimensionError(f"values and weights must be {n}x{n}")
    sumw = float(weights.sum())
    if sumw <= 0.0:
        raise UnsupportedBlockError("support weights sum to zero, nothing to model")
    f = np.asarray(values, np.float64)
    w = np.asarray(weights, np.float64)
    R = np.fft.fft2(w * f)
    W = np.fft.fft2(w)
    wf = _frequency_weights(n, params.freq_weight_decay)

    energies = []
    if trace:
        energies.append(float(np.sum(w * f * f)))

        def record(C):
            g = np.fft.ifft2(C).real * (n * n)
            energies.append(float(np.sum(w * (f - g) ** 2)))

        callback = record
    else:
        callback = None

    C, sel = _greedy_numpy(R, W, wf, sumw, params.odc_factor, params.iterations, callback)
    model = BlockModel(C, list(dict.fromkeys(map(tuple, sel))))
    if trace:
        return model, np.array(energies)
    return model


def processing_order(mask, params):
    """Block coordinates sorted by decreasing support population.

    Counts the present samples in each block's clipped support area via an
    integral image. Ties keep row-major order. Returns an (n_blocks, 2)
    array of (block_row, block_col).
    """
    h, w = mask.flags.shape
    b = params.block_size
    if h % b or w % b:
        raise DimensionError(f"mask {w}x{h} not divisible by block size {b}")
    ob = params.border
    a = params.area_size
    s = np.zeros((h + 1, w + 1), np.int64)
    np.cumsum(np.cumsum(mask.flags, 0), 1, out=s[1:, 1:])
    rows = np.arange(h // b) * b - ob
    cols = np.arange(w // b) * b - ob
    y0 = np.clip(rows, 0, h)
    y1 = np.clip(rows + a, 0, h)
    x0 = np.clip(cols, 0, w)
    x1 = np.clip(cols + a, 0, w)
    counts = s[y1][:, x1] - s[y0][:, x1] - s[y1][:, x0] + s[y0][:, x0]
    flat = counts.ravel()
    order = np.lexsort((np.arange(flat.size), -flat))
    return np.column_stack(np.unravel_index(order, counts.shape))


def reconstruct(view, params=None, warped_weight=1.0):
    """Fill the absent samples of a quarter-sampled view block by block.

    Blocks are processed in decreasing order of support population; samples
    reconstructed by earlier blocks join later support areas with the
    RECONSTRUCTED class weight. Present samples are never altered. Blocks
    whose support is entirely empty fall back to the mean of all present
    samples.

    pre: view dimensions divisible by params.block_size; at least one
    present sample.
    """
    if params is None:
        params = FseParams()
    img = view.image.samples
    h, w = img.shape
    b = params.block_size
    if h % b or w % b:
        raise DimensionError(
            f"image {w}x{h} not divisible by block size {b}; pad first"
        )
    if not view.mask.flags.any():
        raise InputError("mask has no present samples")
    n = params.fft_size
    ob = params.border
    wf = _frequency_weights(n, params.freq_weight_decay)
    base = _spatial_window(b, params.area_size, n, params.spatial_decay)
    mult = np.array([0.0, 1.0, warped_weight, params.recon_weight])

    out = img.copy()
    classes = view.weight_class.copy()
    fallback = float(img[view.mask.flags].mean())
    order = processing_order(view.mask, params)

    # the block sits at a fixed offset inside the frame; clipped area parts
    # keep weight zero
    blk = slice(ob, ob + b)
    f_frame = np.empty((n, n))
    w_frame = np.empty((n, n))
    for brow, bcol in order:
        by = int(brow) * b
        bx = int(bcol) * b
        absent = classes[by:by + b, bx:bx + b] == WeightClass.ABSENT
        if not absent.any():
            continue
        ys = slice(max(by - ob, 0), min(by - ob + params.area_size, h))
        xs = slice(max(bx - ob, 0), min(bx - ob + params.area_size, w))
        fy = slice(ys.start - (by - ob), ys.stop - (by - ob))
        fx = slice(xs.start - (bx - ob), xs.stop - (bx - ob))
        f_frame[:] = 0.0
        w_frame[:] = 0.0
        f_frame[fy, fx] = out[ys, xs]
        w_frame[fy, fx] = mult[classes[ys, xs]]
        w_frame *= base
        sumw = float(w_frame.sum())
        if sumw <= 0.0:
            out[by:by + b, bx:bx + b][absent] = fallback
            classes[by:by + b, bx:bx + b][absent] = WeightClass.RECONSTRUCTED
            continue
        R = np.fft.fft2(w_frame * f_frame)
        W = np.fft.fft2(w_frame)
        if _USE_JIT:
            C, _ = _greedy_jit(R, W, wf, sumw, params.odc_factor, params.iterations)
        else:
            C, _ = _greedy_numpy(R, W, wf, sumw, params.odc_factor, params.iterations)
        g = np.fft.ifft2(C).real * (n * n)
        block = out[by:by + b, bx:bx + b]
        block[absent] = g[blk, blk][absent]
        classes[by:by + b, bx:bx + b][absent] = WeightClass.RECONSTRUCTED
    return RasterImage(out)


def linear_reconstruct(view):
    """Inverse-distance interpolation baseline over the nearest samples.

    Each absent position takes the inverse-distance weighted mean of its
    four nearest present samples (Euclidean pixel distance). Present
    samples pass through unchanged.
    """
    img = view.image.samples
    mask = view.mask.flags
    if not mask.any():
        raise InputError("mask has no present samples")
    out = img.copy()
    present = np.argwhere(mask)
    absent = np.argwhere(~mask)
    if absent.size == 0:
        return RasterImage(out)
    tree = cKDTree(present)
    k = min(4, len(present))
    dist, idx = tree.query(absent, k=k)
    if k == 1:
        dist = dist[:, None]
        idx = idx[:, None]
    vals = img[mask][idx]
    wts = 1.0 / dist
    out[~mask] = (wts * vals).sum(1) / wts.sum(1)
    return RasterImage(out)


def pad_to_block(view, params):
    """Extend a view so both dimensions divide the block size.

    Padding replicates edge sample values but is marked absent, so it gets
    reconstructed rather than trusted. Padded dimensions stay even. Returns
    (padded_view, (height, width)) with the original size for cropping.
    """
    h, w = view.image.shape
    step = math.lcm(params.block_size, 2)
    ph = -h % step
    pw = -w % step
    if ph == 0 and pw == 0:
        return view, (h, w)
    img = np.pad(view.image.samples, ((0, ph), (0, pw)), mode="edge")
    flags = np.pad(view.mask.flags, ((0, ph), (0, pw)))
    classes = np.pad(view.weight_class, ((0, ph), (0, pw)))
    padded = SampledView(RasterImage(img), SamplingMask(flags), classes)
    return padded, (h, w)


def reconstruct_any(view, params=None, warped_weight=1.0, method="fse"):
    """Reconstruct a view of arbitrary size, padding when needed.

    method selects the spectral model ("fse") or the inverse-distance
    baseline ("linear").
    """
    if params is None:
        params = FseParams()
    if method == "linear":
        full = linear_reconstruct(view)
        return full
    padded, (h, w) = pad_to_block(view, params)
    full = reconstruct(padded, params, warped_weight)
    if full.shape == (h, w):
        return full
    return RasterImage(full.samples[:h, :w])
