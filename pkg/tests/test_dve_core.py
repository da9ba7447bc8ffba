import numpy as np
import pytest

from dve.dve_core import (
    apply_noise_filter,
    explain_stack,
    gradcam_map,
    noise_kernel,
    targeted_refine,
)
from dve.spectral import bandpass_term, gaussian_mask
from dve.tensor_io import FeatureMapStack

from oracles import naive_bandpass, naive_gradcam, naive_noise_rescale

LOW = gaussian_mask(7, 7, 1.0)
HIGH = gaussian_mask(7, 7, 1.5)


def _stack(maps, name="pool"):
    return FeatureMapStack(layer_name=name, maps=np.asarray(maps, dtype=np.float64))


class TestNoiseKernel:
    def test_zero_map(self):
        nk = noise_kernel(np.zeros((3, 3)))
        np.testing.assert_array_equal(nk.V, np.zeros(3))
        np.testing.assert_array_equal(nk.D, np.zeros((3, 3)))
        np.testing.assert_array_equal(nk.K, np.ones((3, 3)))

    def test_identity_2x2(self):
        # hand derivation: V=(1,1); gram=I; D=[[1,2],[2,1]]; K=1/(1+D)
        nk = noise_kernel(np.eye(2))
        np.testing.assert_allclose(nk.V, [1.0, 1.0], atol=1e-12)
        np.testing.assert_allclose(nk.D, [[1.0, 2.0], [2.0, 1.0]], atol=1e-12)
        np.testing.assert_allclose(nk.K, [[0.5, 1 / 3], [1 / 3, 0.5]], atol=1e-12)

    @pytest.mark.parametrize("m", [3, 7, 14])
    def test_properties_random(self, m):
        rng = np.random.default_rng(m)
        nk = noise_kernel(rng.standard_normal((m, m)))
        assert np.abs(nk.D - nk.D.T).max() <= 1e-9
        assert nk.D.min() >= -1e-9
        assert nk.K.min() > 0.0 and nk.K.max() <= 1.0

    def test_rejects_non_square(self):
        with pytest.raises(ValueError, match="square"):
            noise_kernel(np.zeros((3, 4)))


class TestApplyNoiseFilter:
    def test_zero(self):
        np.testing.assert_array_equal(apply_noise_filter(np.zeros((4, 4))), np.zeros((4, 4)))

    def test_identity_2x2(self):
        np.testing.assert_allclose(apply_noise_filter(np.eye(2)), [[2.0, 0.0], [0.0, 2.0]], atol=1e-12)

    @pytest.mark.parametrize("m", [2, 5, 9])
    def test_equals_literal_division(self, m):
        rng = np.random.default_rng(m + 50)
        s = rng.standard_normal((m, m))
        got = apply_noise_filter(s)
        want = naive_noise_rescale(s)
        assert np.abs(got - want).max() <= 1e-9 * max(1.0, np.abs(want).max())

    def test_amplifies_elementwise(self):
        rng = np.random.default_rng(99)
        s = rng.standard_normal((6, 6))
        assert np.all(np.abs(apply_noise_filter(s)) >= np.abs(s) - 1e-12)


class TestExplainStack:
    def test_zero_stack(self):
        out = explain_stack(_stack(np.zeros((5, 7, 7))), LOW, HIGH)
        np.testing.assert_array_equal(out.values, np.zeros((7, 7)))
        assert out.kind == "dve"

    def test_single_map_equals_composed_pipeline(self):
        rng = np.random.default_rng(17)
        x = rng.standard_normal((7, 7))
        out = explain_stack(_stack(x[None]), LOW, HIGH)
        want = apply_noise_filter(bandpass_term(x, LOW, HIGH))
        assert np.abs(out.values - want).max() <= 1e-9

    def test_matches_per_map_oracle(self):
        rng = np.random.default_rng(23)
        maps = rng.standard_normal((3, 7, 7))
        want = np.zeros((7, 7))
        for k in range(3):
            term = naive_bandpass(maps[k], LOW.values, HIGH.values)
            want += naive_noise_rescale(term)
        got = explain_stack(_stack(maps), LOW, HIGH).values
        scale = np.abs(want).max()
        assert np.abs(got - want).max() <= 1e-6 * scale

    def test_permutation_invariant(self):
        rng = np.random.default_rng(31)
        maps = rng.standard_normal((5, 7, 7))
        a = explain_stack(_stack(maps), LOW, HIGH).values
        b = explain_stack(_stack(maps[::-1].copy()), LOW, HIGH).values
        assert np.abs(a - b).max() <= 1e-9

    def test_partition_additive(self):
        rng = np.random.default_rng(37)
        maps = rng.standard_normal((6, 7, 7))
        whole = explain_stack(_stack(maps), LOW, HIGH).values
        parts = (explain_stack(_stack(maps[:2]), LOW, HIGH).values
                 + explain_stack(_stack(maps[2:]), LOW, HIGH).values)
        assert np.abs(whole - parts).max() <= 1e-9

    def test_constant_maps_contribute_zero(self):
        rng = np.random.default_rng(41)
        maps = rng.standard_normal((2, 7, 7))
        with_const = np.concatenate([maps, np.full((1, 7, 7), 5.0)])
        a = explain_stack(_stack(maps), LOW, HIGH).values
        b = explain_stack(_stack(with_const), LOW, HIGH).values
        assert np.abs(a - b).max() <= 1e-9

    def test_no_noise_filter_is_plain_sum(self):
        rng = np.random.default_rng(43)
        maps = rng.standard_normal((3, 7, 7))
        got = explain_stack(_stack(maps), LOW, HIGH, noise_filter=False).values
        want = sum(bandpass_term(maps[k], LOW, HIGH) for k in range(3))
        assert np.abs(got - want).max() <= 1e-9

    def test_rejects_non_square(self):
        with pytest.raises(ValueError, match="square"):
            explain_stack(_stack(np.zeros((2, 4, 6))), gaussian_mask(4, 6, 1.0),
                          gaussian_mask(4, 6, 1.5))


class TestTargetedRefine:
    def test_zero_map(self):
        s = explain_stack(_stack(np.zeros((1, 7, 7))), LOW, HIGH)
        out = targeted_refine(s, LOW, HIGH)
        assert out.kind == "targeted_dve"
        np.testing.assert_array_equal(out.values, np.zeros((7, 7)))

    def test_matches_naive_oracle(self):
        rng = np.random.default_rng(47)
        maps = rng.standard_normal((2, 7, 7))
        s = explain_stack(_stack(maps), LOW, HIGH)
        got = targeted_refine(s, LOW, HIGH).values
        want = naive_bandpass(s.values, LOW.values, HIGH.values)
        scale = np.abs(want).max()
        assert np.abs(got - want).max() <= 1e-6 * scale

    def test_rejects_wrong_kind(self):
        s = explain_stack(_stack(np.zeros((1, 7, 7))), LOW, HIGH)
        refined = targeted_refine(s, LOW, HIGH)
        with pytest.raises(ValueError, match="dve"):
            targeted_refine(refined, LOW, HIGH)


class TestGradcamMap:
    def test_zero_weights(self):
        rng = np.random.default_rng(53)
        out = gradcam_map(_stack(rng.standard_normal((4, 7, 7))), np.zeros(4))
        np.testing.assert_array_equal(out.values, np.zeros((7, 7)))
        assert out.kind == "gradcam"

    def test_one_hot_weight(self):
        rng = np.random.default_rng(59)
        maps = rng.standard_normal((3, 5, 5))
        w = np.array([1.0, 0.0, 0.0])
        np.testing.assert_allclose(gradcam_map(_stack(maps), w).values,
                                   np.maximum(maps[0], 0.0), atol=1e-12)

    def test_matches_triple_loop_oracle(self):
        rng = np.random.default_rng(61)
        maps = rng.standard_normal((6, 7, 7))
        w = rng.standard_normal(6)
        got = gradcam_map(_stack(maps), w).values
        assert np.abs(got - naive_gradcam(maps, w)).max() <= 1e-7
        assert got.min() >= 0.0

    def test_rejects_length_mismatch(self):
        with pytest.raises(ValueError, match="length"):
            gradcam_map(_stack(np.zeros((3, 4, 4))), np.zeros(2))
