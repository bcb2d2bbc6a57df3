"""Quality metrics and experiment reporting.

PSNR follows the storage convention: the image under test is quantized to
8 bit before comparison, the reference is taken as-is. SSIM uses Gaussian
window weights and population statistics.
"""

from dataclasses import dataclass
import math

import numpy as np
from scipy.ndimage import gaussian_filter

from .errors import DimensionError, InputError
from .raster import quantize

_SSIM_SIGMA = 1.5
_SSIM_TRUNCATE = 3.5
_SSIM_PAD = 5
_K1 = 0.01
_K2 = 0.03
_L = 255.0


def psnr(reference, test):
    """Peak signal-to-noise ratio in dB, 10*log10(255^2 / MSE).

    The test image is quantized to its 8-bit storage form first. Identical
    images give math.inf.
    """
    if reference.shape != test.shape:
        raise DimensionError(f"shapes disagree: {reference.shape} vs {test.shape}")
    t = quantize(test.samples).astype(np.float64)
    mse = float(np.mean((reference.samples - t) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(_L * _L / mse)


def ssim(reference, test):
    """Mean structural similarity with an 11x11 Gaussian window, sigma 1.5.

    Covariances are population covariances of the window-weighted
    statistics; a 5-pixel border is cropped before averaging. Values are
    compared at full float precision (no quantization).
    """
    if reference.shape != test.shape:
        raise DimensionError(f"shapes disagree: {reference.shape} vs {test.shape}")
    h, w = reference.shape
    if h <= 2 * _SSIM_PAD or w <= 2 * _SSIM_PAD:
        raise InputError(f"image {w}x{h} too small for the 11x11 window")
    x = reference.samples
    y = test.samples

    def blur(a):
        return gaussian_filter(a, _SSIM_SIGMA, truncate=_SSIM_TRUNCATE)

    ux = blur(x)
    uy = blur(y)
    vx = blur(x * x) - ux * ux
    vy = blur(y * y) - uy * uy
    cov = blur(x * y) - ux * uy
    c1 = (_K1 * _L) ** 2
    c2 = (_K2 * _L) ** 2
    s = ((2 * ux * uy + c1) * (2 * cov + c2)) / (
        (ux * ux + uy * uy + c1) * (vx + vy + c2)
    )
    core = s[_SSIM_PAD:-_SSIM_PAD, _SSIM_PAD:-_SSIM_PAD]
    return float(core.mean())


@dataclass(frozen=True)
class QualityEntry:
    """One evaluated view: single-view baseline vs stereo-assisted result."""

    name: str
    view: str
    sensor_distance_mm: int
    psnr_sv: float
    psnr_prop: float
    ssim_sv: float
    ssim_prop: float

    @property
    def delta_psnr(self):
        return self.psnr_prop - self.psnr_sv

    @property
    def delta_ssim(self):
        return self.ssim_prop - self.ssim_sv


@dataclass(frozen=True)
class QualityReport:
    """Full experiment outcome: per-view entries plus skipped scenes."""

    entries: tuple
    skipped: tuple = ()

    def to_csv(self, path):
        write_csv(self.entries, path)

    def to_markdown(self):
        text = format_markdown(self.entries)
        if self.skipped:
            text += "\nSkipped scenes: " + ", ".join(self.skipped) + "\n"
        return text


def build_report(entries, skipped=()):
    return QualityReport(tuple(entries), tuple(sorted(skipped)))


CSV_HEADER = (
    "name,view,sensor_distance_mm,psnr_sv,psnr_prop,delta_psnr,"
    "ssim_sv,ssim_prop,delta_ssim"
)


def _fmt_db(v):
    return f"{v:.4f}"


def _fmt_ssim(v):
    return f"{v:.6f}"


def entry_csv_row(e):
    return ",".join(
        [
            e.name,
            e.view,
            str(e.sensor_distance_mm),
            _fmt_db(e.psnr_sv),
            _fmt_db(e.psnr_prop),
            _fmt_db(e.delta_psnr),
            _fmt_ssim(e.ssim_sv),
            _fmt_ssim(e.ssim_prop),
            _fmt_ssim(e.delta_ssim),
        ]
    )


def write_csv(entries, path):
    """Write the per-view results table; one data row per entry, no means."""
    lines = [CSV_HEADER] + [entry_csv_row(e) for e in entries]
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def summarize(entries):
    """Mean PSNR/SSIM deltas over entries with finite PSNR numbers.

    Returns (mean_delta_psnr, mean_delta_ssim, n_used, n_skipped).
    """
    finite = [
        e
        for e in entries
        if math.isfinite(e.psnr_sv) and math.isfinite(e.psnr_prop)
    ]
    skipped = len(entries) - len(finite)
    if not finite:
        return math.nan, math.nan, 0, skipped
    dp = sum(e.delta_psnr for e in finite) / len(finite)
    ds = sum(e.delta_ssim for e in finite) / len(finite)
    return dp, ds, len(finite), skipped


def format_markdown(entries):
    """Render the results as a markdown table with a trailing mean row."""
    head = (
        "| scene | view | distance (mm) | PSNR sv (dB) | PSNR stereo (dB) "
        "| dPSNR (dB) | SSIM sv | SSIM stereo | dSSIM |"
    )
    rule = "|---|---|---|---|---|---|---|---|---|"
    rows = [head, rule]
    for e in entries:
        rows.append(
            "| {} | {} | {} | {} | {} | {} | {} | {} | {} |".format(
                e.name,
                e.view,
                e.sensor_distance_mm,
                _fmt_db(e.psnr_sv),
                _fmt_db(e.psnr_prop),
                _fmt_db(e.delta_psnr),
                _fmt_ssim(e.ssim_sv),
                _fmt_ssim(e.ssim_prop),
                _fmt_ssim(e.delta_ssim),
            )
        )
    dp, ds, used, skipped = summarize(entries)
    if used:
        rows.append(
            "| mean | | | | | {} | | | {} |".format(_fmt_db(dp), _fmt_ssim(ds))
        )
    if skipped:
        rows.append("")
        rows.append(f"Means exclude {skipped} entries with non-finite PSNR.")
    return "\n".join(rows) + "\n"
