"""Dense tensor carrier, the DVT binary format, and explanation bundles.

A DVT file is the bit-exact interchange unit between the exporter (which
runs inference) and this engine.  Layout, all little-endian:

    magic "DVET" (4 bytes) | version u8 = 1 | ndim u8 in 1..4 |
    ndim x extent u32 | payload f32 x prod(extents), row-major

A bundle is a directory: ``manifest.json``, ``image.dvt``, ``logits.dvt``,
``labels.txt`` (one label per line), one ``<layer>.dvt`` per captured
layer, and optionally ``<layer>.gradw.dvt`` with per-channel weights.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BundleError, DvtFormatError

MAGIC = b"DVET"
VERSION = 1
MAX_NDIM = 4


def _validate_tensor(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float32)
    if not 1 <= a.ndim <= MAX_NDIM:
        raise DvtFormatError(f"tensor must have 1..{MAX_NDIM} dims, got {a.ndim}")
    if any(e <= 0 for e in a.shape):
        raise DvtFormatError(f"tensor extents must be positive, got {a.shape}")
    finite = np.isfinite(a)
    if not finite.all():
        idx = np.unravel_index(int(np.argmin(finite)), a.shape)
        raise DvtFormatError(f"non-finite value at index {tuple(int(i) for i in idx)}")
    return a


def tensor_to_bytes(a: np.ndarray) -> bytes:
    """Serialize a float32 array to the DVT wire format."""
    a = _validate_tensor(a)
    header = MAGIC + struct.pack("<BB", VERSION, a.ndim)
    header += struct.pack(f"<{a.ndim}I", *a.shape)
    payload = np.ascontiguousarray(a, dtype="<f4").tobytes()
    return header + payload


def write_tensor(a: np.ndarray, destination) -> int:
    """Write ``a`` as DVT to a path or binary file object; returns byte count."""
    blob = tensor_to_bytes(a)
    if hasattr(destination, "write"):
        destination.write(blob)
    else:
        Path(destination).write_bytes(blob)
    return len(blob)


def read_tensor(source) -> np.ndarray:
    """Read a DVT tensor from bytes, a path, or a binary file object."""
    if isinstance(source, (bytes, bytearray)):
        data = bytes(source)
    elif hasattr(source, "read"):
        data = source.read()
    else:
        data = Path(source).read_bytes()

    if len(data) < 6 or data[:4] != MAGIC:
        raise DvtFormatError("not a DVT file")
    version, ndim = struct.unpack_from("<BB", data, 4)
    if version != VERSION:
        raise DvtFormatError(f"unsupported version {version}")
    if not 1 <= ndim <= MAX_NDIM:
        raise DvtFormatError(f"bad dimension count {ndim}")
    header_end = 6 + 4 * ndim
    if len(data) < header_end:
        raise DvtFormatError("truncated")
    shape = struct.unpack_from(f"<{ndim}I", data, 6)
    if any(e == 0 for e in shape):
        raise DvtFormatError(f"zero extent in shape {shape}")
    count = int(np.prod(shape))
    if len(data) < header_end + 4 * count:
        raise DvtFormatError("truncated")
    payload = np.frombuffer(data, dtype="<f4", count=count, offset=header_end)
    a = payload.reshape(shape).astype(np.float32)
    if not np.isfinite(a).all():
        raise DvtFormatError("corrupt values")
    return a


@dataclass(frozen=True)
class FeatureMapStack:
    """K feature maps of size M x N captured from one layer."""

    layer_name: str
    maps: np.ndarray  # (K, M, N) float32

    def __post_init__(self):
        m = np.asarray(self.maps)
        if m.ndim != 3:
            raise BundleError(f"layer {self.layer_name}: expected K x M x N maps, got shape {m.shape}")
        k, mm, nn = m.shape
        if k < 1 or mm < 2 or nn < 2:
            raise BundleError(f"layer {self.layer_name}: extents too small {m.shape}")

    @property
    def k(self) -> int:
        return self.maps.shape[0]

    @property
    def spatial_shape(self) -> tuple[int, int]:
        return self.maps.shape[1], self.maps.shape[2]


@dataclass(frozen=True)
class ClassPrediction:
    class_index: int
    label: str
    score: float

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise BundleError(f"prediction score {self.score} outside [0, 1]")


@dataclass(frozen=True)
class ExplanationBundle:
    """In-memory form of a bundle directory, fully validated."""

    manifest: dict
    image: np.ndarray  # (H, W, 3) in [0, 1]
    layers: list[FeatureMapStack]
    logits: np.ndarray  # (C,)
    labels: list[str]
    prediction: ClassPrediction
    gradcam_weights: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if not self.layers:
            raise BundleError("bundle has no layers")
        if int(np.argmax(self.logits)) != self.prediction.class_index:
            raise BundleError("inconsistent bundle: argmax(logits) != predicted class")
        if self.prediction.class_index >= len(self.labels):
            raise BundleError("predicted class index outside label table")
        for name, w in self.gradcam_weights.items():
            layer = self.layer(name)
            if w.shape != (layer.k,):
                raise BundleError(f"gradcam weights for {name}: length {w.shape} != K={layer.k}")

    def layer(self, name: str | None = None) -> FeatureMapStack:
        """Fetch a layer by name; default is the last (deepest) layer."""
        if name is None:
            return self.layers[-1]
        for stack in self.layers:
            if stack.layer_name == name:
                return stack
        raise BundleError(f"no layer named {name!r} in bundle")


def softmax(logits: np.ndarray) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def load_bundle(directory) -> ExplanationBundle:
    """Load and validate a bundle directory; never silently repairs."""
    root = Path(directory)
    manifest_path = root / "manifest.json"
    if not manifest_path.is_file():
        raise BundleError(f"missing file: {manifest_path}")
    manifest = json.loads(manifest_path.read_text())

    def _read(name: str) -> np.ndarray:
        path = root / name
        if not path.is_file():
            raise BundleError(f"missing file: {name}")
        try:
            return read_tensor(path)
        except DvtFormatError as e:
            raise BundleError(f"{name}: {e}") from e

    image = _read("image.dvt")
    if image.ndim != 3 or image.shape[2] != 3:
        raise BundleError(f"image.dvt: expected H x W x 3, got {image.shape}")
    logits = _read("logits.dvt")
    if logits.ndim != 1:
        raise BundleError(f"logits.dvt: expected 1-d, got shape {logits.shape}")

    labels_path = root / "labels.txt"
    if not labels_path.is_file():
        raise BundleError("missing file: labels.txt")
    labels = labels_path.read_text().splitlines()
    if len(labels) != logits.shape[0]:
        raise BundleError(f"labels.txt has {len(labels)} entries but {logits.shape[0]} logits")

    layers = []
    weights = {}
    for entry in manifest.get("layers", []):
        name = entry["name"]
        maps = _read(f"{name}.dvt")
        expected = (entry["k"], entry["m"], entry["n"])
        if maps.shape != expected:
            raise BundleError(f"shape mismatch: {name}.dvt is {maps.shape}, manifest says {expected}")
        layers.append(FeatureMapStack(layer_name=name, maps=maps))
        if entry.get("gradcam_weights"):
            w = _read(f"{name}.gradw.dvt")
            if w.shape != (entry["k"],):
                raise BundleError(f"shape mismatch: {name}.gradw.dvt is {w.shape}, expected ({entry['k']},)")
            weights[name] = w

    predicted = int(manifest["predicted_class"])
    if predicted != int(np.argmax(logits)):
        raise BundleError("inconsistent bundle: argmax(logits) != predicted class")
    score = float(softmax(logits)[predicted])
    prediction = ClassPrediction(class_index=predicted, label=labels[predicted], score=score)

    return ExplanationBundle(
        manifest=manifest,
        image=image,
        layers=layers,
        logits=logits,
        labels=labels,
        prediction=prediction,
        gradcam_weights=weights,
    )


def save_bundle(bundle: ExplanationBundle, directory) -> Path:
    """Write a bundle directory in the interchange layout."""
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    (root / "manifest.json").write_text(json.dumps(bundle.manifest, indent=2, sort_keys=True) + "\n")
    write_tensor(bundle.image, root / "image.dvt")
    write_tensor(bundle.logits, root / "logits.dvt")
    (root / "labels.txt").write_text("\n".join(bundle.labels) + "\n")
    for stack in bundle.layers:
        write_tensor(stack.maps, root / f"{stack.layer_name}.dvt")
        if stack.layer_name in bundle.gradcam_weights:
            write_tensor(bundle.gradcam_weights[stack.layer_name], root / f"{stack.layer_name}.gradw.dvt")
    return root


_MASK64 = (1 << 64) - 1


class SplitMix64:
    """Tiny seed-stable PRNG; uniform draws are ``(z >> 11) * 2**-53``."""

    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def next_float(self) -> float:
        """Uniform in [0, 1)."""
        return (self.next_u64() >> 11) * 2.0**-53

    def floats(self, n: int) -> np.ndarray:
        return np.array([self.next_float() for _ in range(n)], dtype=np.float64)


def make_synthetic_bundle(seed: int, k: int, m: int, n: int, c: int) -> ExplanationBundle:
    """Deterministic pseudo-random bundle for tests and golden runs.

    One SplitMix64 stream seeded with ``seed`` supplies, in order: the K*M*N
    feature-map values (row-major, uniform [0,1)), then C logits mapped to
    [-4, 4), then K gradcam weights mapped to [-1, 1).  The image is a fixed
    gradient pattern of size 8M x 8N.
    """
    if k < 1 or c < 1:
        raise ValueError("k and c must be >= 1")
    if m != n or m < 2:
        raise ValueError("synthetic maps must be square with m = n >= 2")
    rng = SplitMix64(seed)
    maps = rng.floats(k * m * n).reshape(k, m, n).astype(np.float32)
    logits = (rng.floats(c) * 8.0 - 4.0).astype(np.float32)
    gradw = (rng.floats(k) * 2.0 - 1.0).astype(np.float32)

    h, w = 8 * m, 8 * n
    i = np.arange(h, dtype=np.float64)[:, None] / max(h - 1, 1)
    j = np.arange(w, dtype=np.float64)[None, :] / max(w - 1, 1)
    image = np.stack(
        [np.broadcast_to(i, (h, w)), np.broadcast_to(j, (h, w)), (i + j) / 2.0],
        axis=-1,
    ).astype(np.float32)

    labels = [f"class_{idx}" for idx in range(c)]
    predicted = int(np.argmax(logits))
    layer_name = "features"
    manifest = {
        "model_id": "synthetic",
        "preprocessing": {"resize": [h, w], "mean": [0.0, 0.0, 0.0]},
        "source_image": "synthetic://gradient",
        "blur_sigma": None,
        "predicted_class": predicted,
        "layers": [{"name": layer_name, "k": k, "m": m, "n": n, "gradcam_weights": True}],
    }
    prediction = ClassPrediction(
        class_index=predicted, label=labels[predicted], score=float(softmax(logits)[predicted])
    )
    return ExplanationBundle(
        manifest=manifest,
        image=image,
        layers=[FeatureMapStack(layer_name=layer_name, maps=maps)],
        logits=logits,
        labels=labels,
        prediction=prediction,
        gradcam_weights={layer_name: gradw},
    )
