"""Command-line surface: per-bundle explanations, the Grad-CAM baseline,
blur-robustness sweeps, and per-layer grids.

Exit codes are stable API: 2 bad bundle, 3 non-square layer, 4 missing
gradcam weights, 5 inconsistent sweep, 6 too few layers.  All outputs are
written to a temp file and renamed on success, so error paths never leave
partial files behind.
"""

from __future__ import annotations

import json
import os
import sys
import tempfile
from pathlib import Path

import click
import numpy as np

from .dve_core import SaliencyMap, explain_stack, gradcam_map, targeted_refine
from .errors import BundleError
from .render import (
    image_from_unit_tensor,
    normalize_map,
    overlay,
    upsample_bilinear,
    write_png,
)
from .spectral import gaussian_mask
from .tensor_io import (
    ExplanationBundle,
    load_bundle,
    softmax,
    tensor_to_bytes,
)

EXIT_BAD_BUNDLE = 2
EXIT_NON_SQUARE = 3
EXIT_NO_GRADCAM = 4
EXIT_INCONSISTENT_SWEEP = 5
EXIT_TOO_FEW_LAYERS = 6

DEFAULT_SIGMA_LOW = 1.0
DEFAULT_SIGMA_HIGH = 1.5


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _atomic_png(image, path: Path) -> None:
    import io

    buf = io.BytesIO()
    write_png(image, buf)
    _atomic_write(path, buf.getvalue())


def _thread_limit() -> int:
    raw = os.environ.get("DVE_THREADS", "0")
    try:
        limit = int(raw)
    except ValueError:
        limit = 0
    return max(limit, 0)


def _load(bundle_dir: str) -> ExplanationBundle:
    try:
        return load_bundle(bundle_dir)
    except (BundleError, OSError) as e:
        _fail(EXIT_BAD_BUNDLE, f"cannot load bundle {bundle_dir}: {e}")


def _select_layer(bundle: ExplanationBundle, layer: str | None):
    try:
        stack = bundle.layer(layer)
    except BundleError as e:
        _fail(EXIT_BAD_BUNDLE, str(e))
    m, n = stack.spatial_shape
    if m != n:
        _fail(EXIT_NON_SQUARE, f"layer {stack.layer_name} has non-square maps {m}x{n}")
    return stack


def _render_outputs(bundle: ExplanationBundle, saliency: SaliencyMap, alpha: float,
                    out: str | None, raw_out: str | None) -> None:
    if raw_out:
        _atomic_write(Path(raw_out), tensor_to_bytes(saliency.values.astype(np.float32)))
    if out:
        base = image_from_unit_tensor(bundle.image)
        s01 = upsample_bilinear(normalize_map(saliency.values), base.height, base.width)
        _atomic_png(overlay(base, s01, alpha), Path(out))


def _echo_prediction(bundle: ExplanationBundle) -> None:
    p = bundle.prediction
    click.echo(f"{p.label} (class {p.class_index}, confidence {p.score:.4f})")


def _explain_bundle(bundle: ExplanationBundle, layer: str | None, sigma_low: float,
                    sigma_high: float, noise_filter: bool, targeted: bool) -> SaliencyMap:
    stack = _select_layer(bundle, layer)
    m, n = stack.spatial_shape
    low = gaussian_mask(m, n, sigma_low)
    high = gaussian_mask(m, n, sigma_high)
    result = explain_stack(stack, low, high, noise_filter=noise_filter,
                           class_index=bundle.prediction.class_index)
    if targeted:
        result = targeted_refine(result, low, high)
    return result


_common = [
    click.option("--bundle", required=True, help="bundle directory"),
    click.option("--layer", default=None, help="layer name (default: last layer)"),
    click.option("--sigma-low", default=DEFAULT_SIGMA_LOW, show_default=True, type=float),
    click.option("--sigma-high", default=DEFAULT_SIGMA_HIGH, show_default=True, type=float),
    click.option("--alpha", default=0.5, show_default=True, type=float),
    click.option("--no-noise-filter", is_flag=True, help="plain sum of band-pass terms"),
    click.option("--out", default=None, help="overlay PNG path"),
    click.option("--raw-out", default=None, help="raw saliency DVT path"),
]


def _with_common(cmd):
    for opt in reversed(_common):
        cmd = opt(cmd)
    return cmd


@click.group()
def main():
    """Frequency-domain saliency maps from exported CNN activations."""
    _thread_limit()  # validated here; computation is deterministic regardless


@main.command("explain")
@_with_common
def cmd_explain(bundle, layer, sigma_low, sigma_high, alpha, no_noise_filter, out, raw_out):
    """Aggregate band-pass explanation of the predicted class."""
    b = _load(bundle)
    saliency = _explain_bundle(b, layer, sigma_low, sigma_high, not no_noise_filter, targeted=False)
    _render_outputs(b, saliency, alpha, out, raw_out)
    _echo_prediction(b)


@main.command("targeted")
@_with_common
def cmd_targeted(bundle, layer, sigma_low, sigma_high, alpha, no_noise_filter, out, raw_out):
    """Explanation with one more band-pass pass to sharpen the salient patch."""
    b = _load(bundle)
    saliency = _explain_bundle(b, layer, sigma_low, sigma_high, not no_noise_filter, targeted=True)
    _render_outputs(b, saliency, alpha, out, raw_out)
    _echo_prediction(b)


@main.command("gradcam")
@click.option("--bundle", required=True)
@click.option("--layer", default=None)
@click.option("--alpha", default=0.5, show_default=True, type=float)
@click.option("--out", default=None)
@click.option("--raw-out", default=None)
def cmd_gradcam(bundle, layer, alpha, out, raw_out):
    """Baseline map from exporter-provided channel weights."""
    b = _load(bundle)
    stack = _select_layer(b, layer)
    weights = b.gradcam_weights.get(stack.layer_name)
    if weights is None:
        _fail(EXIT_NO_GRADCAM, "bundle lacks gradcam weights")
    saliency = gradcam_map(stack, weights, class_index=b.prediction.class_index)
    _render_outputs(b, saliency, alpha, out, raw_out)
    _echo_prediction(b)


@main.command("blur-sweep")
@click.option("--bundles", required=True, help="directory of bundle directories")
@click.option("--layer", default=None)
@click.option("--sigma-low", default=DEFAULT_SIGMA_LOW, type=float)
@click.option("--sigma-high", default=DEFAULT_SIGMA_HIGH, type=float)
@click.option("--alpha", default=0.5, type=float)
@click.option("--report", required=True, help="output JSON path")
def cmd_blur_sweep(bundles, layer, sigma_low, sigma_high, alpha, report):
    """Confidence and explanation across a Gaussian-blur series."""
    root = Path(bundles)
    dirs = sorted(d for d in root.iterdir() if (d / "manifest.json").is_file()) if root.is_dir() else []
    if len(dirs) < 2:
        _fail(EXIT_BAD_BUNDLE, f"need >= 2 bundles under {bundles}")
    loaded = [(d, _load(str(d))) for d in dirs]
    model_ids = {b.manifest.get("model_id") for _, b in loaded}
    if len(model_ids) != 1:
        _fail(EXIT_INCONSISTENT_SWEEP, f"inconsistent sweep: model ids {sorted(model_ids)}")

    report_path = Path(report)
    out_dir = report_path.parent if str(report_path.parent) else Path(".")
    entries = []
    for d, b in loaded:
        saliency = _explain_bundle(b, layer, sigma_low, sigma_high, True, targeted=False)
        overlay_path = out_dir / f"{d.name}_overlay.png"
        _render_outputs(b, saliency, alpha, str(overlay_path), None)
        sigma = b.manifest.get("blur_sigma")
        confidence = float(softmax(b.logits)[b.prediction.class_index])
        entries.append({
            "blur_sigma": float(sigma) if sigma is not None else 0.0,
            "predicted_label": b.prediction.label,
            "predicted_index": b.prediction.class_index,
            "confidence": confidence,
            "overlay_path": str(overlay_path),
        })
    entries.sort(key=lambda e: e["blur_sigma"])
    _atomic_write(report_path, (json.dumps({"entries": entries}, indent=2) + "\n").encode())
    click.echo(f"wrote {len(entries)} entries to {report_path}")


@main.command("layers")
@click.option("--bundle", required=True)
@click.option("--sigma-low", default=DEFAULT_SIGMA_LOW, type=float)
@click.option("--sigma-high", default=DEFAULT_SIGMA_HIGH, type=float)
@click.option("--alpha", default=0.5, type=float)
@click.option("--out", required=True, help="horizontal grid PNG path")
@click.option("--report", default=None, help="per-layer stats JSON (default: <out>.json)")
def cmd_layers(bundle, sigma_low, sigma_high, alpha, out, report):
    """Per-layer explanations composed into one grid, shallow to deep."""
    b = _load(bundle)
    if len(b.layers) < 2:
        _fail(EXIT_TOO_FEW_LAYERS, f"need >= 2 layers, bundle has {len(b.layers)}")
    base = image_from_unit_tensor(b.image)
    tiles = []
    stats = []
    for stack in b.layers:
        m, n = stack.spatial_shape
        if m != n:
            _fail(EXIT_NON_SQUARE, f"layer {stack.layer_name} has non-square maps {m}x{n}")
        saliency = _explain_bundle(b, stack.layer_name, sigma_low, sigma_high, True, targeted=False)
        s01 = upsample_bilinear(normalize_map(saliency.values), base.height, base.width)
        tiles.append(overlay(base, s01, alpha).pixels)
        stats.append({
            "layer": stack.layer_name,
            "top_decile_fraction": float(np.mean(s01 >= 0.9)),
        })
    grid = np.concatenate(tiles, axis=1)
    from .render import RgbImage

    _atomic_png(RgbImage(width=grid.shape[1], height=grid.shape[0], pixels=grid), Path(out))
    report_path = Path(report) if report else Path(str(out) + ".json")
    _atomic_write(report_path, (json.dumps({"layers": stats}, indent=2) + "\n").encode())
    click.echo(f"wrote {len(tiles)}-tile grid to {out}")


if __name__ == "__main__":
    main()
