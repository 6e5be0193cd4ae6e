"""Latent-model loading, sampling determinism, and density checks."""

import json
import math

import numpy as np
import pytest
from scipy.integrate import quad

from latentcert import (
    FormatError,
    GaussianLatentModel,
    SampleStream,
    ValidationError,
    load_model,
    log_density,
    sample,
    save_model,
)


def write_model(path, doc):
    path.write_text(json.dumps(doc))
    return str(path)


VALID_DOC = {
    "dim": 2,
    "mean": [0.0, 0.0],
    "cov_type": "full",
    "cov": [[1.0, 0.0], [0.0, 1.0]],
    "label": "identity",
}


class TestLoadModel:
    def test_identity_case(self, tmp_path):
        model = load_model(write_model(tmp_path / "m.json", VALID_DOC))
        assert model.dim == 2
        assert model.label == "identity"
        assert np.allclose(model.covariance_matrix(), np.eye(2))

    def test_non_spd_rejected(self, tmp_path):
        doc = dict(VALID_DOC, cov=[[1.0, 2.0], [2.0, 1.0]])  # eigenvalues 3, -1
        with pytest.raises(ValidationError, match="positive definite"):
            load_model(write_model(tmp_path / "m.json", doc))

    def test_diag_variant(self, tmp_path):
        doc = {"dim": 3, "mean": [1.0, 2.0, 3.0], "cov_type": "diag", "cov": [1.0, 4.0, 9.0], "label": "d"}
        model = load_model(write_model(tmp_path / "m.json", doc))
        assert model.diagonal
        assert np.allclose(model.covariance_matrix(), np.diag([1.0, 4.0, 9.0]))

    def test_diag_nonpositive_rejected(self, tmp_path):
        doc = {"dim": 2, "mean": [0.0, 0.0], "cov_type": "diag", "cov": [1.0, 0.0], "label": "d"}
        with pytest.raises(ValidationError, match="positive definite"):
            load_model(write_model(tmp_path / "m.json", doc))

    @pytest.mark.parametrize("field", ["dim", "mean", "cov_type", "cov", "label"])
    def test_missing_field_named(self, tmp_path, field):
        doc = dict(VALID_DOC)
        del doc[field]
        with pytest.raises(FormatError, match=field):
            load_model(write_model(tmp_path / "m.json", doc))

    def test_bad_dim(self, tmp_path):
        with pytest.raises(FormatError, match="dim"):
            load_model(write_model(tmp_path / "m.json", dict(VALID_DOC, dim="two")))

    def test_mean_length_mismatch(self, tmp_path):
        with pytest.raises(FormatError, match="mean"):
            load_model(write_model(tmp_path / "m.json", dict(VALID_DOC, mean=[0.0])))

    def test_bad_cov_type(self, tmp_path):
        with pytest.raises(FormatError, match="cov_type"):
            load_model(write_model(tmp_path / "m.json", dict(VALID_DOC, cov_type="dense")))

    def test_not_json(self, tmp_path):
        p = tmp_path / "m.json"
        p.write_text("not json {")
        with pytest.raises(FormatError):
            load_model(str(p))

    def test_round_trip(self, tmp_path):
        model = GaussianLatentModel(
            dim=2,
            mean=np.array([0.1, -0.7]),
            cov=np.array([[2.0, 0.3], [0.3, 1.0]]),
            diagonal=False,
            label="rt",
        )
        save_model(model, tmp_path / "rt.json")
        back = load_model(tmp_path / "rt.json")
        assert np.array_equal(back.mean, model.mean)
        assert np.array_equal(back.cov, model.cov)
        assert back.label == "rt"

    def test_dim16_exporter_style_file(self, tmp_path):
        # shape of the files the VAE exporter writes at its default width
        doc = {
            "dim": 16,
            "mean": [0.0] * 16,
            "cov_type": "diag",
            "cov": [1.0] * 16,
            "label": "vae-prior",
        }
        model = load_model(write_model(tmp_path / "m.json", doc))
        assert model.dim == 16
        draws = sample(model, 4, SampleStream(seed=1, stream_index=0))
        assert draws.shape == (4, 16)

    def test_arrays_immutable(self, tmp_path):
        model = load_model(write_model(tmp_path / "m.json", VALID_DOC))
        with pytest.raises(ValueError):
            model.mean[0] = 5.0


class TestSampling:
    def test_determinism(self, std_model_2d):
        stream = SampleStream(seed=99, stream_index=3)
        a = sample(std_model_2d, 50, stream)
        b = sample(std_model_2d, 50, stream)
        assert np.array_equal(a, b)

    def test_single_draw_repeatable(self, std_model_2d):
        stream = SampleStream(seed=7, stream_index=0)
        assert np.array_equal(sample(std_model_2d, 1, stream), sample(std_model_2d, 1, stream))

    def test_prefix_property(self, std_model_2d):
        # drawing more samples extends, never changes, the earlier ones
        stream = SampleStream(seed=11, stream_index=2)
        short = sample(std_model_2d, 10, stream)
        long = sample(std_model_2d, 25, stream)
        assert np.array_equal(long[:10], short)

    def test_distinct_substreams_differ(self, std_model_2d):
        a = sample(std_model_2d, 20, SampleStream(seed=5, stream_index=0))
        b = sample(std_model_2d, 20, SampleStream(seed=5, stream_index=1))
        assert not np.array_equal(a, b)

    def test_n_zero_rejected(self, std_model_2d):
        with pytest.raises(ValueError):
            sample(std_model_2d, 0, SampleStream())

    def test_moments_1d(self):
        model = GaussianLatentModel.standard(1)
        draws = sample(model, 100_000, SampleStream(seed=2024, stream_index=0))[:, 0]
        assert abs(draws.mean()) <= 0.02
        assert abs(draws.var() - 1.0) <= 0.03

    def test_degenerate_concentration(self):
        model = GaussianLatentModel(
            dim=2, mean=np.array([5.0, 5.0]), cov=np.full(2, 1e-12), diagonal=True, label="tight"
        )
        draws = sample(model, 1000, SampleStream(seed=0, stream_index=0))
        assert np.all(np.abs(draws - 5.0) < 1e-5)

    def test_affine_correctness(self):
        cov = np.array([[2.0, 0.6, 0.0], [0.6, 1.5, -0.4], [0.0, -0.4, 1.0]])
        model = GaussianLatentModel(dim=3, mean=np.array([1.0, -2.0, 0.5]), cov=cov, diagonal=False, label="affine")
        n = 100_000
        draws = sample(model, n, SampleStream(seed=31, stream_index=0))
        emp = np.cov(draws, rowvar=False)
        assert np.max(np.abs(emp - cov)) < 5.0 * 3 / math.sqrt(n)

    def test_stream_validation(self):
        with pytest.raises(ValueError):
            SampleStream(seed=-1)
        with pytest.raises(ValueError):
            SampleStream(seed=0, stream_index=-2)
        assert SampleStream(seed=1, stream_index=4).substream(3).stream_index == 7


class TestLogDensity:
    def test_standard_normal_1d_origin(self):
        model = GaussianLatentModel.standard(1)
        assert log_density(model, np.array([0.0])) == pytest.approx(-0.5 * math.log(2 * math.pi), abs=1e-12)

    def test_standard_normal_2d_origin(self, std_model_2d):
        assert log_density(std_model_2d, np.array([0.0, 0.0])) == pytest.approx(-math.log(2 * math.pi), abs=1e-12)

    def test_at_mean_arbitrary_spd(self):
        cov = np.array([[1.3, 0.4], [0.4, 0.9]])
        model = GaussianLatentModel(dim=2, mean=np.array([3.0, -1.0]), cov=cov, diagonal=False, label="spd")
        sign, logdet = np.linalg.slogdet(cov)
        expected = -0.5 * (2 * math.log(2 * math.pi) + logdet)
        assert log_density(model, model.mean) == pytest.approx(expected, rel=1e-12)

    def test_batch_matches_single(self, std_model_2d, rng):
        xs = rng.normal(size=(8, 2))
        batched = log_density(std_model_2d, xs)
        singles = [log_density(std_model_2d, x) for x in xs]
        assert np.allclose(batched, singles, rtol=0, atol=0)

    def test_dimension_mismatch(self, std_model_2d):
        with pytest.raises(ValueError):
            log_density(std_model_2d, np.array([0.0, 0.0, 0.0]))

    def test_integrates_to_one_1d(self):
        model = GaussianLatentModel(dim=1, mean=np.array([2.0]), cov=np.array([2.25]), diagonal=True, label="q")
        sigma = 1.5
        total, _ = quad(lambda t: math.exp(log_density(model, np.array([t]))), 2.0 - 10 * sigma, 2.0 + 10 * sigma)
        assert abs(total - 1.0) < 1e-6
