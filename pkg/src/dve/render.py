"""Turns raw saliency maps into figure-style outputs: min-max normalization,
bilinear upsampling to image resolution, a jet colormap, and alpha-blended
PNG overlays.  8-bit quantization is round-half-up throughout so outputs are
bit-reproducible across implementations."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image


@dataclass(frozen=True)
class RgbImage:
    width: int
    height: int
    pixels: np.ndarray  # (height, width, 3) uint8

    def __post_init__(self):
        if self.pixels.shape != (self.height, self.width, 3):
            raise ValueError(f"pixel buffer {self.pixels.shape} does not match {self.height}x{self.width}x3")


def normalize_map(s: np.ndarray) -> np.ndarray:
    """Affine rescale to [0, 1]; a constant map becomes all zeros."""
    s = np.asarray(s, dtype=np.float64)
    lo, hi = s.min(), s.max()
    if hi == lo:
        return np.zeros_like(s)
    return (s - lo) / (hi - lo)


def upsample_bilinear(s: np.ndarray, height: int, width: int) -> np.ndarray:
    """Bilinear resize with pixel-center alignment and clamped borders.

    Target pixel (i, j) samples source coordinate
    ((i + 0.5) * M / H - 0.5, (j + 0.5) * N / W - 0.5).
    """
    s = np.asarray(s, dtype=np.float64)
    m, n = s.shape
    if height < 1 or width < 1:
        raise ValueError("target extents must be >= 1")
    yi = (np.arange(height) + 0.5) * m / height - 0.5
    xj = (np.arange(width) + 0.5) * n / width - 0.5
    y0 = np.clip(np.floor(yi).astype(int), 0, m - 1)
    x0 = np.clip(np.floor(xj).astype(int), 0, n - 1)
    y1 = np.clip(y0 + 1, 0, m - 1)
    x1 = np.clip(x0 + 1, 0, n - 1)
    wy = np.clip(yi - y0, 0.0, 1.0)[:, None]
    wx = np.clip(xj - x0, 0.0, 1.0)[None, :]
    top = s[np.ix_(y0, x0)] * (1 - wx) + s[np.ix_(y0, x1)] * wx
    bottom = s[np.ix_(y1, x0)] * (1 - wx) + s[np.ix_(y1, x1)] * wx
    return top * (1 - wy) + bottom * wy


def _round_half_up(x: np.ndarray) -> np.ndarray:
    return np.floor(np.asarray(x, dtype=np.float64) + 0.5)


def _jet_float(t: np.ndarray) -> np.ndarray:
    """Jet colormap on [0, 1], channels last, unquantized in [0, 255]."""
    t = np.clip(np.asarray(t, dtype=np.float64), 0.0, 1.0)
    r = np.clip(1.5 - np.abs(4.0 * t - 3.0), 0.0, 1.0)
    g = np.clip(1.5 - np.abs(4.0 * t - 2.0), 0.0, 1.0)
    b = np.clip(1.5 - np.abs(4.0 * t - 1.0), 0.0, 1.0)
    return np.stack([r, g, b], axis=-1) * 255.0


def colormap_jet(t: float) -> tuple[int, int, int]:
    """Map a scalar in [0, 1] to an 8-bit jet RGB triple."""
    rgb = _round_half_up(_jet_float(np.float64(t)))
    return tuple(int(c) for c in np.clip(rgb, 0, 255))


def overlay(image: RgbImage, s01: np.ndarray, alpha: float = 0.5) -> RgbImage:
    """Blend a normalized saliency map over an image.

    The heatmap side of the blend uses the colormap's unquantized values;
    quantization to 8 bits happens once, after blending.
    """
    s01 = np.asarray(s01, dtype=np.float64)
    if s01.shape != (image.height, image.width):
        raise ValueError(f"saliency shape {s01.shape} does not match image {image.height}x{image.width}")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    if alpha == 0.0:
        return image
    heat = _jet_float(s01)
    blended = (1.0 - alpha) * image.pixels.astype(np.float64) + alpha * heat
    pixels = np.clip(_round_half_up(blended), 0, 255).astype(np.uint8)
    return RgbImage(width=image.width, height=image.height, pixels=pixels)


def image_from_unit_tensor(a: np.ndarray) -> RgbImage:
    """Quantize an H x W x 3 float image in [0, 1] to 8-bit RGB."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 3 or a.shape[2] != 3:
        raise ValueError(f"expected H x W x 3, got {a.shape}")
    pixels = np.clip(_round_half_up(a * 255.0), 0, 255).astype(np.uint8)
    return RgbImage(width=a.shape[1], height=a.shape[0], pixels=pixels)


def write_png(image: RgbImage, path) -> None:
    """8-bit RGB PNG, no alpha, no interlacing."""
    Image.fromarray(image.pixels, mode="RGB").save(path, format="PNG")
