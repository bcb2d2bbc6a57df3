"""scikit-learn style wrappers around the reconstruction core.

Both estimators treat X as a single 2-D image whose missing samples are
NaN, in the spirit of sklearn imputers. fit validates parameters (there is
nothing to learn from data), transform fills the missing positions. They
compose with sklearn pipelines and clone correctly because constructor
arguments are stored verbatim.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import InputError
from .fse import FseParams, linear_reconstruct, reconstruct_any
from .raster import RasterImage
from .sampling import SampledView, SamplingMask, WeightClass


def _view_from_nan(X):
    """Interpret NaN entries as missing samples; pads odd shapes."""
    X = np.asarray(X, np.float64)
    if X.ndim != 2 or X.shape[0] < 2 or X.shape[1] < 2:
        raise InputError(f"X must be a 2-D array of at least 2x2, got {X.shape}")
    h, w = X.shape
    ph, pw = h % 2, w % 2
    if ph or pw:
        X = np.pad(X, ((0, ph), (0, pw)), constant_values=np.nan)
    present = np.isfinite(X)
    if not present.any():
        raise InputError("X contains no finite samples")
    values = np.where(present, X, 0.0)
    classes = np.where(present, np.uint8(WeightClass.ORIGINAL), np.uint8(0))
    view = SampledView(RasterImage(values), SamplingMask(present), classes)
    return view, (h, w)


class FseReconstructor(TransformerMixin, BaseEstimator):
    """Fill NaN samples of a 2-D array with the sparse spectral model."""

    def __init__(
        self,
        block_size=4,
        area_size=28,
        fft_size=32,
        iterations=100,
        spatial_decay=0.7,
        recon_weight=0.5,
        odc_factor=0.5,
        freq_weight_decay=0.5,
    ):
        self.block_size = block_size
        self.area_size = area_size
        self.fft_size = fft_size
        self.iterations = iterations
        self.spatial_decay = spatial_decay
        self.recon_weight = recon_weight
        self.odc_factor = odc_factor
        self.freq_weight_decay = freq_weight_decay

    def _params(self):
        return FseParams(
            block_size=self.block_size,
            area_size=self.area_size,
            fft_size=self.fft_size,
            iterations=self.iterations,
            spatial_decay=self.spatial_decay,
            recon_weight=self.recon_weight,
            odc_factor=self.odc_factor,
            freq_weight_decay=self.freq_weight_decay,
        )

    def fit(self, X=None, y=None):
        self.params_ = self._params()
        return self

    def transform(self, X):
        if not hasattr(self, "params_"):
            raise InputError("estimator is not fitted; call fit first")
        view, (h, w) = _view_from_nan(X)
        out = reconstruct_any(view, self.params_)
        return out.samples[:h, :w].copy()


class LinearReconstructor(TransformerMixin, BaseEstimator):
    """Fill NaN samples with inverse-distance weighted nearest neighbours."""

    def fit(self, X=None, y=None):
        self.fitted_ = True
        return self

    def transform(self, X):
        if not hasattr(self, "fitted_"):
            raise InputError("estimator is not fitted; call fit first")
        view, (h, w) = _view_from_nan(X)
        out = linear_reconstruct(view)
        return out.samples[:h, :w].copy()
