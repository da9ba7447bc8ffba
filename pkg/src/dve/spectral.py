"""2D discrete Fourier transform pair and frequency-domain Gaussian masks.

The forward transform is the unnormalized double sum

    F(u, v) = sum_k sum_j f(k, j) * exp(-i 2 pi (u k / M + v j / N))

and the inverse carries the 1/(M N) factor.  Internally everything runs in
float64 so the oracle tolerances (1e-6 relative) hold; callers get float64
reals back and quantize to float32 only at the storage boundary.
Non-power-of-two extents (7x7, 14x14) are first-class.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class NonRealInverseError(ValueError):
    """Inverse transform of a nominally real-origin spectrum left imaginary residue."""


def _check_finite(x: np.ndarray, what: str) -> np.ndarray:
    x = np.asarray(x)
    if not np.isfinite(x).all():
        raise ValueError(f"{what} contains non-finite values")
    return x


def dft2d(x: np.ndarray) -> np.ndarray:
    """Unnormalized forward 2D DFT of a real M x N grid; returns complex128."""
    x = _check_finite(x, "dft2d input")
    if x.ndim != 2:
        raise ValueError(f"dft2d expects a 2-d grid, got shape {x.shape}")
    return np.fft.fft2(x.astype(np.float64))


def idft2d(F: np.ndarray, assert_real: bool = True) -> np.ndarray:
    """Normalized inverse 2D DFT, returning the real part.

    With ``assert_real`` (the default, correct whenever the spectrum came
    from a real signal filtered by conjugate-symmetric masks) the imaginary
    residue must stay below 1e-6 * (1 + max|re|).
    """
    F = _check_finite(F, "idft2d input")
    out = np.fft.ifft2(np.asarray(F, dtype=np.complex128))
    re = out.real
    if assert_real:
        tol = 1e-6 * (1.0 + np.abs(re).max(initial=0.0))
        residue = np.abs(out.imag).max(initial=0.0)
        if residue > tol:
            raise NonRealInverseError(
                f"non-real inverse: imaginary residue {residue:.3e} exceeds {tol:.3e}"
            )
    return re


@dataclass(frozen=True)
class FrequencyMask:
    """Isotropic Gaussian weight per frequency bin, wrap-around symmetric.

    ``values[u, v] = exp(-(du^2 + dv^2) / (2 sigma^2))`` with
    ``du = min(u, M - u)``, ``dv = min(v, N - v)``; the DC bin is exactly 1.
    """

    sigma: float
    values: np.ndarray  # (M, N) float64 in (0, 1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


def gaussian_mask(m: int, n: int, sigma: float) -> FrequencyMask:
    """Gaussian mask in frequency-bin units (resolution-independent sigma)."""
    if sigma <= 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    u = np.arange(m, dtype=np.float64)
    v = np.arange(n, dtype=np.float64)
    du = np.minimum(u, m - u)[:, None]
    dv = np.minimum(v, n - v)[None, :]
    values = np.exp(-(du**2 + dv**2) / (2.0 * sigma**2))
    return FrequencyMask(sigma=float(sigma), values=values)


def bandpass_term(x: np.ndarray, low: FrequencyMask, high: FrequencyMask) -> np.ndarray:
    """Band-pass evidence for one feature map.

    Elementwise product of the low-pass reconstruction (spectrum times the
    ``low`` mask) and the high-pass reconstruction (spectrum times one minus
    the ``high`` mask).  Both filters taper gradually rather than cutting
    hard, and the high-pass zeroes DC exactly, so constant maps map to zero.
    """
    x = np.asarray(x)
    if x.shape != low.shape or x.shape != high.shape:
        raise ValueError(f"shape mismatch: map {x.shape}, masks {low.shape}/{high.shape}")
    spectrum = dft2d(x)
    low_part = idft2d(spectrum * low.values)
    high_part = idft2d(spectrum * (1.0 - high.values))
    return low_part * high_part


def bandpass_stack(maps: np.ndarray, low: FrequencyMask, high: FrequencyMask) -> np.ndarray:
    """Batched ``bandpass_term`` over a (K, M, N) stack; identical results."""
    maps = _check_finite(maps, "bandpass_stack input")
    if maps.ndim != 3:
        raise ValueError(f"expected K x M x N stack, got shape {maps.shape}")
    if maps.shape[1:] != low.shape or maps.shape[1:] != high.shape:
        raise ValueError(f"shape mismatch: maps {maps.shape[1:]}, masks {low.shape}/{high.shape}")
    spectra = np.fft.fft2(maps.astype(np.float64), axes=(-2, -1))
    low_part = np.fft.ifft2(spectra * low.values, axes=(-2, -1)).real
    high_part = np.fft.ifft2(spectra * (1.0 - high.values), axes=(-2, -1)).real
    return low_part * high_part
