"""Frequency-domain band-pass saliency maps for CNN classifications."""

from .dve_core import (
    NoiseKernel,
    SaliencyMap,
    apply_noise_filter,
    explain_stack,
    gradcam_map,
    noise_kernel,
    targeted_refine,
)
from .errors import BundleError, DvtFormatError
from .estimators import DveExplainer, GradCamExplainer
from .render import colormap_jet, normalize_map, overlay, upsample_bilinear
from .spectral import FrequencyMask, bandpass_term, dft2d, gaussian_mask, idft2d
from .tensor_io import (
    ClassPrediction,
    ExplanationBundle,
    FeatureMapStack,
    load_bundle,
    make_synthetic_bundle,
    read_tensor,
    save_bundle,
    write_tensor,
)

__version__ = "0.1.0"

__all__ = [
    "BundleError",
    "ClassPrediction",
    "DveExplainer",
    "DvtFormatError",
    "ExplanationBundle",
    "FeatureMapStack",
    "FrequencyMask",
    "GradCamExplainer",
    "NoiseKernel",
    "SaliencyMap",
    "apply_noise_filter",
    "bandpass_term",
    "colormap_jet",
    "dft2d",
    "explain_stack",
    "gaussian_mask",
    "gradcam_map",
    "idft2d",
    "load_bundle",
    "make_synthetic_bundle",
    "noise_kernel",
    "normalize_map",
    "overlay",
    "read_tensor",
    "save_bundle",
    "targeted_refine",
    "upsample_bilinear",
    "write_tensor",
]
