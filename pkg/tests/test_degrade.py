import numpy as np
import pytest

from specforge import (
    CodecError,
    DegradationConfig,
    QuantizationSpec,
    RGBImage,
    ValidationError,
    apply_chain,
    poisson_noise,
)


class TestPoissonNoise:
    def test_npe_zero_is_identity(self, rng):
        image = RGBImage(rng.random((3, 8, 8)))
        out = poisson_noise(image, 0.0, np.random.default_rng(0))
        assert np.array_equal(out.data, image.data)

    def test_npe_zero_still_clamps(self):
        image = RGBImage(np.array([[[1.7]], [[-0.3]], [[0.5]]]))
        out = poisson_noise(image, 0.0, np.random.default_rng(0))
        assert np.array_equal(out.data, np.array([[[1.0]], [[0.0]], [[0.5]]]))

    def test_zero_signal_stays_zero(self):
        image = RGBImage(np.zeros((3, 50, 50)))
        out = poisson_noise(image, 1000.0, np.random.default_rng(1))
        assert np.all(out.data == 0.0)

    def test_moment_statistics(self):
        # Poisson(v*npe)/npe has mean v and variance v/npe
        npe = 1000.0
        image = RGBImage(np.full((3, 200, 167), 0.5))
        out = poisson_noise(image, npe, np.random.default_rng(42))
        samples = out.data.ravel()
        assert samples.size >= 100_000
        assert abs(samples.mean() - 0.5) < 0.003
        expected_var = 0.5 / npe
        assert abs(samples.var() - expected_var) < 0.15 * expected_var

    def test_deterministic_for_seed(self, rng):
        image = RGBImage(rng.random((3, 10, 10)))
        a = poisson_noise(image, 500.0, np.random.default_rng(9))
        b = poisson_noise(image, 500.0, np.random.default_rng(9))
        assert np.array_equal(a.data, b.data)

    def test_different_seeds_differ(self, rng):
        image = RGBImage(0.25 + 0.5 * rng.random((3, 16, 16)))
        a = poisson_noise(image, 200.0, np.random.default_rng(1))
        b = poisson_noise(image, 200.0, np.random.default_rng(2))
        assert np.any(a.data != b.data)

    def test_negative_npe_rejected(self, rng):
        with pytest.raises(ValidationError):
            poisson_noise(RGBImage(rng.random((3, 2, 2))), -1.0, np.random.default_rng(0))

    def test_dims_preserved(self, rng):
        image = RGBImage(rng.random((3, 5, 9)))
        out = poisson_noise(image, 100.0, np.random.default_rng(0))
        assert out.data.shape == image.data.shape


class TestApplyChain:
    def test_all_none_is_clamp_only(self):
        image = RGBImage(np.array([[[1.4]], [[-0.1]], [[0.6]]]))
        out = apply_chain(image, DegradationConfig())
        assert np.array_equal(out.data, np.array([[[1.0]], [[0.0]], [[0.6]]]))

    def test_noiseless_quantization_composes(self):
        image = RGBImage(np.full((3, 2, 2), 0.5))
        config = DegradationConfig(npe=0.0, quant=QuantizationSpec(8))
        out = apply_chain(image, config)
        assert np.all(out.data == 128.0 / 255.0)

    def test_fixed_seed_reproducible(self, rng):
        image = RGBImage(rng.random((3, 12, 12)))
        config = DegradationConfig(npe=1000.0, quant=QuantizationSpec(16), seed=77)
        a = apply_chain(image, config)
        b = apply_chain(image, config)
        assert np.array_equal(a.data, b.data)

    def test_dims_invariant(self, rng):
        image = RGBImage(rng.random((3, 7, 11)))
        out = apply_chain(image, DegradationConfig(npe=300.0, quant=QuantizationSpec(8)))
        assert out.data.shape == (3, 7, 11)

    def test_negative_npe_rejected(self):
        with pytest.raises(ValidationError):
            DegradationConfig(npe=-5.0)


class TestCodecStage:
    def test_copy_codec_roundtrips(self, rng):
        image = RGBImage(rng.random((3, 6, 6)))
        config = DegradationConfig(quant=QuantizationSpec(16), codec="cp {in} {out}")
        out = apply_chain(image, config)
        expected = apply_chain(image, DegradationConfig(quant=QuantizationSpec(16)))
        assert np.array_equal(out.data, expected.data)

    def test_failing_codec_raises_with_status(self, rng):
        image = RGBImage(rng.random((3, 4, 4)))
        config = DegradationConfig(quant=QuantizationSpec(8), codec="exit 3")
        with pytest.raises(CodecError) as excinfo:
            apply_chain(image, config)
        assert excinfo.value.exit_status == 3

    def test_codec_without_output_raises(self, rng):
        image = RGBImage(rng.random((3, 4, 4)))
        config = DegradationConfig(quant=QuantizationSpec(8), codec="true")
        with pytest.raises(CodecError):
            apply_chain(image, config)
