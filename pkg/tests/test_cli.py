import hashlib
import json

import numpy as np
import pytest
from click.testing import CliRunner

from dve.cli import main
from dve.dve_core import explain_stack, targeted_refine
from dve.spectral import bandpass_term, gaussian_mask
from dve.tensor_io import (
    load_bundle,
    make_synthetic_bundle,
    read_tensor,
    save_bundle,
    softmax,
)


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def bundle42(tmp_path):
    return save_bundle(make_synthetic_bundle(42, 4, 7, 7, 10), tmp_path / "b42")


def _digest(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


class TestExplain:
    def test_deterministic_outputs(self, runner, bundle42, tmp_path):
        digests = []
        for run in range(2):
            raw = tmp_path / f"raw{run}.dvt"
            png = tmp_path / f"o{run}.png"
            result = runner.invoke(main, [
                "explain", "--bundle", str(bundle42),
                "--out", str(png), "--raw-out", str(raw),
            ])
            assert result.exit_code == 0, result.output
            digests.append((_digest(raw), _digest(png)))
        assert digests[0] == digests[1]

    def test_prints_prediction(self, runner, bundle42):
        result = runner.invoke(main, ["explain", "--bundle", str(bundle42)])
        b = load_bundle(bundle42)
        assert b.prediction.label in result.output

    def test_raw_matches_in_process(self, runner, bundle42, tmp_path):
        raw = tmp_path / "raw.dvt"
        result = runner.invoke(main, ["explain", "--bundle", str(bundle42), "--raw-out", str(raw)])
        assert result.exit_code == 0
        b = load_bundle(bundle42)
        low, high = gaussian_mask(7, 7, 1.0), gaussian_mask(7, 7, 1.5)
        want = explain_stack(b.layer(), low, high).values.astype(np.float32)
        np.testing.assert_array_equal(read_tensor(raw), want)

    def test_no_noise_filter_single_map(self, runner, tmp_path):
        bundle = save_bundle(make_synthetic_bundle(5, 1, 7, 7, 3), tmp_path / "b1")
        raw = tmp_path / "raw.dvt"
        result = runner.invoke(main, [
            "explain", "--bundle", str(bundle), "--no-noise-filter", "--raw-out", str(raw),
        ])
        assert result.exit_code == 0
        b = load_bundle(bundle)
        low, high = gaussian_mask(7, 7, 1.0), gaussian_mask(7, 7, 1.5)
        want = bandpass_term(b.layer().maps[0], low, high).astype(np.float32)
        np.testing.assert_array_equal(read_tensor(raw), want)

    def test_missing_bundle_exit_2(self, runner, tmp_path):
        missing = tmp_path / "nope"
        result = runner.invoke(main, ["explain", "--bundle", str(missing)])
        assert result.exit_code == 2
        assert str(missing) in result.output

    def test_no_partial_output_on_error(self, runner, tmp_path):
        out = tmp_path / "o.png"
        runner.invoke(main, ["explain", "--bundle", str(tmp_path / "nope"), "--out", str(out)])
        assert not out.exists()


class TestTargeted:
    def test_matches_in_process_composition(self, runner, bundle42, tmp_path):
        raw = tmp_path / "raw.dvt"
        result = runner.invoke(main, ["targeted", "--bundle", str(bundle42), "--raw-out", str(raw)])
        assert result.exit_code == 0
        b = load_bundle(bundle42)
        low, high = gaussian_mask(7, 7, 1.0), gaussian_mask(7, 7, 1.5)
        want = targeted_refine(explain_stack(b.layer(), low, high), low, high)
        np.testing.assert_array_equal(read_tensor(raw), want.values.astype(np.float32))

    def test_zero_maps_give_zero_output(self, runner, tmp_path):
        bundle = save_bundle(make_synthetic_bundle(3, 1, 7, 7, 2), tmp_path / "bz")
        import dve.tensor_io as tio

        tio.write_tensor(np.zeros((1, 7, 7), dtype=np.float32), bundle / "features.dvt")
        raw = tmp_path / "raw.dvt"
        result = runner.invoke(main, ["targeted", "--bundle", str(bundle), "--raw-out", str(raw)])
        assert result.exit_code == 0
        np.testing.assert_array_equal(read_tensor(raw), np.zeros((7, 7), dtype=np.float32))


class TestGradcam:
    def test_raw_matches_weighted_sum(self, runner, bundle42, tmp_path):
        raw = tmp_path / "raw.dvt"
        result = runner.invoke(main, ["gradcam", "--bundle", str(bundle42), "--raw-out", str(raw)])
        assert result.exit_code == 0
        b = load_bundle(bundle42)
        w = b.gradcam_weights["features"].astype(np.float64)
        want = np.maximum(np.tensordot(w, b.layer().maps.astype(np.float64), axes=1), 0.0)
        np.testing.assert_array_equal(read_tensor(raw), want.astype(np.float32))

    def test_missing_weights_exit_4(self, runner, tmp_path):
        bundle = save_bundle(make_synthetic_bundle(9, 2, 7, 7, 2), tmp_path / "bw")
        (bundle / "features.gradw.dvt").unlink()
        manifest = json.loads((bundle / "manifest.json").read_text())
        manifest["layers"][0]["gradcam_weights"] = False
        (bundle / "manifest.json").write_text(json.dumps(manifest))
        result = runner.invoke(main, ["gradcam", "--bundle", str(bundle)])
        assert result.exit_code == 4
        assert "lacks gradcam weights" in result.output


def _sweep_dir(tmp_path, sigmas, model_ids=None):
    root = tmp_path / "sweep"
    root.mkdir()
    for idx, sigma in enumerate(sigmas):
        b = make_synthetic_bundle(100 + idx, 2, 7, 7, 4)
        b.manifest["blur_sigma"] = sigma
        if model_ids:
            b.manifest["model_id"] = model_ids[idx]
        save_bundle(b, root / f"bundle_{idx}")
    return root


class TestBlurSweep:
    def test_sorted_report(self, runner, tmp_path):
        root = _sweep_dir(tmp_path, [2.0, 0.0])
        report = tmp_path / "out" / "report.json"
        result = runner.invoke(main, ["blur-sweep", "--bundles", str(root), "--report", str(report)])
        assert result.exit_code == 0, result.output
        data = json.loads(report.read_text())
        sigmas = [e["blur_sigma"] for e in data["entries"]]
        assert sigmas == [0.0, 2.0]
        for e in data["entries"]:
            assert 0.0 <= e["confidence"] <= 1.0
            assert (tmp_path / "out" / f"bundle_{0 if e['blur_sigma'] == 2.0 else 1}_overlay.png").exists()

    def test_confidence_is_softmax_of_logits(self, runner, tmp_path):
        root = _sweep_dir(tmp_path, [0.0, 1.0])
        report = tmp_path / "report.json"
        result = runner.invoke(main, ["blur-sweep", "--bundles", str(root), "--report", str(report)])
        assert result.exit_code == 0
        data = json.loads(report.read_text())
        by_sigma = {e["blur_sigma"]: e for e in data["entries"]}
        for idx, sigma in enumerate([0.0, 1.0]):
            b = load_bundle(root / f"bundle_{idx}")
            want = float(softmax(b.logits)[b.prediction.class_index])
            assert by_sigma[sigma]["confidence"] == pytest.approx(want, abs=1e-12)

    def test_mismatched_model_ids_exit_5(self, runner, tmp_path):
        root = _sweep_dir(tmp_path, [0.0, 1.0], model_ids=["a", "b"])
        result = runner.invoke(main, [
            "blur-sweep", "--bundles", str(root), "--report", str(tmp_path / "r.json"),
        ])
        assert result.exit_code == 5
        assert "inconsistent sweep" in result.output

    def test_report_roundtrips(self, runner, tmp_path):
        root = _sweep_dir(tmp_path, [0.0, 3.0])
        report = tmp_path / "report.json"
        runner.invoke(main, ["blur-sweep", "--bundles", str(root), "--report", str(report)])
        data = json.loads(report.read_text())
        assert json.loads(json.dumps(data)) == data


def _two_layer_bundle(tmp_path):
    b = make_synthetic_bundle(21, 2, 7, 7, 4)
    deeper = make_synthetic_bundle(22, 3, 4, 4, 4)
    layers = [b.layers[0], type(b.layers[0])(layer_name="deeper", maps=deeper.layers[0].maps)]
    manifest = dict(b.manifest)
    manifest["layers"] = manifest["layers"] + [
        {"name": "deeper", "k": 3, "m": 4, "n": 4, "gradcam_weights": False}
    ]
    bundle = type(b)(
        manifest=manifest, image=b.image, layers=layers, logits=b.logits,
        labels=b.labels, prediction=b.prediction, gradcam_weights=b.gradcam_weights,
    )
    return save_bundle(bundle, tmp_path / "b2")


class TestLayers:
    def test_grid_width_and_report(self, runner, tmp_path):
        bundle = _two_layer_bundle(tmp_path)
        out = tmp_path / "grid.png"
        result = runner.invoke(main, ["layers", "--bundle", str(bundle), "--out", str(out)])
        assert result.exit_code == 0, result.output
        from PIL import Image

        img = Image.open(out)
        b = load_bundle(bundle)
        assert img.size == (2 * b.image.shape[1], b.image.shape[0])
        stats = json.loads((tmp_path / "grid.png.json").read_text())
        assert [s["layer"] for s in stats["layers"]] == ["features", "deeper"]
        for s in stats["layers"]:
            assert 0.0 <= s["top_decile_fraction"] <= 1.0

    def test_tiles_match_standalone_explain(self, runner, tmp_path):
        bundle = _two_layer_bundle(tmp_path)
        out = tmp_path / "grid.png"
        runner.invoke(main, ["layers", "--bundle", str(bundle), "--out", str(out)])
        from PIL import Image

        grid = np.asarray(Image.open(out))
        b = load_bundle(bundle)
        w = b.image.shape[1]
        for idx, name in enumerate(["features", "deeper"]):
            solo = tmp_path / f"solo_{name}.png"
            result = runner.invoke(main, [
                "explain", "--bundle", str(bundle), "--layer", name, "--out", str(solo),
            ])
            assert result.exit_code == 0
            tile = grid[:, idx * w:(idx + 1) * w]
            np.testing.assert_array_equal(tile, np.asarray(Image.open(solo)))

    def test_single_layer_exit_6(self, runner, tmp_path):
        bundle = save_bundle(make_synthetic_bundle(2, 1, 7, 7, 2), tmp_path / "b1")
        result = runner.invoke(main, [
            "layers", "--bundle", str(bundle), "--out", str(tmp_path / "g.png"),
        ])
        assert result.exit_code == 6


def test_non_square_layer_exits_3(tmp_path):
    runner = CliRunner()
    b = make_synthetic_bundle(2, 2, 6, 6, 2)
    root = save_bundle(b, tmp_path / "b")
    import dve.tensor_io as tio

    manifest = json.loads((root / "manifest.json").read_text())
    manifest["layers"][0].update({"m": 6, "n": 8})
    (root / "manifest.json").write_text(json.dumps(manifest))
    tio.write_tensor(np.zeros((2, 6, 8), dtype=np.float32), root / "features.dvt")
    result = runner.invoke(main, ["explain", "--bundle", str(root)])
    assert result.exit_code == 3
    assert "non-square" in result.output
