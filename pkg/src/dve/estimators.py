"""Scikit-learn style wrappers around the saliency pipeline.

These let the explanation step slot into sklearn pipelines and grid search:
parameters live in ``__init__``, ``fit`` only validates, and ``transform``
maps a K x M x N activation stack to an M x N saliency map.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .dve_core import explain_stack, gradcam_map, targeted_refine
from .spectral import gaussian_mask
from .tensor_io import FeatureMapStack

DEFAULT_SIGMA_LOW = 1.0
DEFAULT_SIGMA_HIGH = 1.5


def _as_stack(X, layer_name: str = "input") -> FeatureMapStack:
    if isinstance(X, FeatureMapStack):
        return X
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 3:
        raise ValueError(f"expected a K x M x N activation stack, got shape {X.shape}")
    return FeatureMapStack(layer_name=layer_name, maps=X)


class DveExplainer(BaseEstimator, TransformerMixin):
    """Band-pass saliency transformer over convolutional activation stacks.

    Parameters
    ----------
    sigma_low : float, width of the low-pass Gaussian, in frequency bins.
    sigma_high : float, width of the high-pass notch Gaussian.
    noise_filter : bool, rescale each per-map term by its pairwise kernel.
    targeted : bool, apply one more band-pass pass to the aggregate map.
    """

    def __init__(self, sigma_low=DEFAULT_SIGMA_LOW, sigma_high=DEFAULT_SIGMA_HIGH,
                 noise_filter=True, targeted=False):
        self.sigma_low = sigma_low
        self.sigma_high = sigma_high
        self.noise_filter = noise_filter
        self.targeted = targeted

    def fit(self, X, y=None):
        stack = _as_stack(X)
        m, n = stack.spatial_shape
        if m != n:
            raise ValueError(f"activation maps must be square, got {m}x{n}")
        if self.sigma_low <= 0 or self.sigma_high <= 0:
            raise ValueError("sigma_low and sigma_high must be > 0")
        self.n_features_in_ = stack.k
        self.map_shape_ = (m, n)
        return self

    def transform(self, X):
        if not hasattr(self, "map_shape_"):
            raise NotFittedError("call fit before transform")
        stack = _as_stack(X)
        m, n = self.map_shape_
        low = gaussian_mask(m, n, self.sigma_low)
        high = gaussian_mask(m, n, self.sigma_high)
        result = explain_stack(stack, low, high, noise_filter=self.noise_filter)
        if self.targeted:
            result = targeted_refine(result, low, high)
        return result.values

    def explain(self, X):
        """One-shot fit + transform returning the raw saliency map."""
        return self.fit(X).transform(X)


class GradCamExplainer(BaseEstimator, TransformerMixin):
    """Baseline: rectified channel sum weighted by precomputed gradients.

    The per-channel weights are supplied at transform time (they come from
    the exporter, not from this engine).
    """

    def __init__(self):
        pass

    def fit(self, X, y=None):
        stack = _as_stack(X)
        self.n_features_in_ = stack.k
        return self

    def transform(self, X, weights=None):
        if weights is None:
            raise ValueError("gradcam requires per-channel weights")
        stack = _as_stack(X)
        return gradcam_map(stack, np.asarray(weights, dtype=np.float64)).values
