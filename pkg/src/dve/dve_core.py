"""Core saliency algorithm: band-pass evidence per feature map, a pairwise
noise kernel that amplifies contributing activations, accumulation over the
stack, an optional second targeted pass, and the Grad-CAM baseline."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import FrequencyMask, bandpass_stack, bandpass_term
from .tensor_io import FeatureMapStack


@dataclass(frozen=True)
class SaliencyMap:
    values: np.ndarray  # (M, N) float64
    layer_name: str
    class_index: int
    kind: str  # dve | targeted_dve | gradcam

    def __post_init__(self):
        if self.kind not in ("dve", "targeted_dve", "gradcam"):
            raise ValueError(f"unknown saliency kind {self.kind!r}")
        if not np.isfinite(self.values).all():
            raise ValueError("saliency map contains non-finite values")
        if self.kind == "gradcam" and self.values.min(initial=0.0) < 0:
            raise ValueError("gradcam map must be non-negative")


@dataclass(frozen=True)
class NoiseKernel:
    """Pairwise attenuation kernel of a square map.

    ``V[i]`` is the energy of row i, ``D[i, j] = V[i] + V[j] - <row_i, row_j>``
    (symmetric and non-negative by Cauchy-Schwarz), and ``K = 1 / (1 + D)``
    elementwise, so K lies in (0, 1].
    """

    V: np.ndarray  # (M,)
    D: np.ndarray  # (M, M)
    K: np.ndarray  # (M, M)


def _require_square(s: np.ndarray) -> np.ndarray:
    s = np.asarray(s, dtype=np.float64)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise ValueError(f"noise kernel requires square maps, got shape {s.shape}")
    if not np.isfinite(s).all():
        raise ValueError("noise kernel input contains non-finite values")
    return s


def noise_kernel(s: np.ndarray) -> NoiseKernel:
    """Build the pairwise kernel for a square M x M map."""
    s = _require_square(s)
    v = np.einsum("ij,ij->i", s, s)
    gram = s @ s.T
    d = v[:, None] + v[None, :] - gram
    return NoiseKernel(V=v, D=d, K=1.0 / (1.0 + d))


def apply_noise_filter(s: np.ndarray) -> np.ndarray:
    """Rescale a map by its own kernel: elementwise s * (1 + D), i.e. s / K."""
    s = _require_square(s)
    v = np.einsum("ij,ij->i", s, s)
    d = v[:, None] + v[None, :] - s @ s.T
    return s * (1.0 + d)


def explain_stack(
    stack: FeatureMapStack,
    low: FrequencyMask,
    high: FrequencyMask,
    noise_filter: bool = True,
    class_index: int = -1,
) -> SaliencyMap:
    """Accumulate per-map evidence into one discriminative localization map.

    Each feature map contributes its band-pass term, rescaled by its own
    noise kernel (skipped with ``noise_filter=False`` for ablation); the
    contributions are summed.  Maps must be square for the kernel step.
    """
    maps = np.asarray(stack.maps)
    if maps.shape[0] == 0:
        raise ValueError("empty feature map stack")
    m, n = maps.shape[1:]
    if m != n:
        raise ValueError(f"noise kernel requires square maps, got {m}x{n}")
    terms = bandpass_stack(maps, low, high)
    if noise_filter:
        v = np.einsum("kij,kij->ki", terms, terms)
        gram = np.einsum("kij,klj->kil", terms, terms)
        d = v[:, :, None] + v[:, None, :] - gram
        terms = terms * (1.0 + d)
    return SaliencyMap(
        values=terms.sum(axis=0),
        layer_name=stack.layer_name,
        class_index=class_index,
        kind="dve",
    )


def targeted_refine(s: SaliencyMap, low: FrequencyMask, high: FrequencyMask) -> SaliencyMap:
    """One more band-pass pass over the aggregate map to sharpen the patch."""
    if s.kind != "dve":
        raise ValueError(f"targeted refinement expects a dve map, got {s.kind!r}")
    if s.values.shape != low.shape:
        raise ValueError(f"shape mismatch: map {s.values.shape}, mask {low.shape}")
    return SaliencyMap(
        values=bandpass_term(s.values, low, high),
        layer_name=s.layer_name,
        class_index=s.class_index,
        kind="targeted_dve",
    )


def gradcam_map(stack: FeatureMapStack, weights: np.ndarray, class_index: int = -1) -> SaliencyMap:
    """Rectified weighted channel sum; weights come from the bundle."""
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (stack.k,):
        raise ValueError(f"weights length {weights.shape} does not match K={stack.k}")
    combined = np.tensordot(weights, np.asarray(stack.maps, dtype=np.float64), axes=1)
    return SaliencyMap(
        values=np.maximum(combined, 0.0),
        layer_name=stack.layer_name,
        class_index=class_index,
        kind="gradcam",
    )
