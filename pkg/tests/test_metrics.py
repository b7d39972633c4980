import json
import math

import numpy as np
import pytest
import scipy.linalg

from ii2s.errors import InvalidInputError
from ii2s.metrics import GaussianMoments, evaluate, extract_features, fid, psnr, rmse, ssim
from ii2s.perceptual import IdentityExtractor, RandomConvExtractor

skimage_metrics = pytest.importorskip("skimage.metrics")
skimage_data = pytest.importorskip("skimage.data")


def _natural(size=64):
    img = skimage_data.astronaut()[::4, ::4][:size, :size] / 255.0
    return np.transpose(img, (2, 0, 1))


def fid_oracle(p, q):
    covmean = scipy.linalg.sqrtm(p.covariance @ q.covariance).real
    diff = p.mean - q.mean
    return diff @ diff + np.trace(p.covariance + q.covariance - 2 * covmean)


def test_rmse_psnr_closed_forms():
    zeros, ones = np.zeros((3, 4, 4)), np.ones((3, 4, 4))
    assert rmse(zeros, ones) == 1.0 and psnr(zeros, ones) == 0.0
    assert rmse(zeros, zeros) == 0.0 and math.isinf(psnr(zeros, zeros))
    assert psnr(zeros, np.full((3, 4, 4), 0.1)) == pytest.approx(20.0)
    with pytest.raises(InvalidInputError):
        rmse(zeros, np.zeros((3, 4, 5)))


def test_ssim_matches_skimage(rng):
    a = _natural()
    b = np.clip(a + rng.normal(scale=0.05, size=a.shape), 0, 1)
    gray = lambda x: np.tensordot([0.299, 0.587, 0.114], x, axes=([0], [0]))  # noqa: E731
    expected = skimage_metrics.structural_similarity(
        gray(a), gray(b), gaussian_weights=True, sigma=1.5, use_sample_covariance=False, data_range=1.0
    )
    assert ssim(a, b) == pytest.approx(expected, abs=1e-10)


def test_ssim_properties(rng):
    a = _natural()
    b = np.clip(a + rng.normal(scale=0.1, size=a.shape), 0, 1)
    assert ssim(a, a) == pytest.approx(1.0)
    assert ssim(a, b) == pytest.approx(ssim(b, a))
    assert ssim(a, 1 - a) < 0.5
    with pytest.raises(InvalidInputError):
        ssim(np.zeros((3, 8, 8)), np.zeros((3, 8, 8)))


def test_fid_matches_sqrtm_oracle(rng):
    x = rng.normal(size=(400, 6)) @ rng.normal(size=(6, 6))
    y = rng.normal(size=(300, 6)) @ rng.normal(size=(6, 6)) + 0.5
    p, q = GaussianMoments.from_samples(x), GaussianMoments.from_samples(y)
    assert fid(p, q) == pytest.approx(fid_oracle(p, q), rel=1e-8)
    assert fid(p, q) == pytest.approx(fid(q, p), rel=1e-8)


def test_fid_closed_forms(rng):
    d = 10
    p = GaussianMoments(np.zeros(d), np.eye(d), 100)
    assert fid(p, p) < 1e-6
    delta = rng.normal(size=d)
    assert fid(p, GaussianMoments(delta, np.eye(d), 100)) == pytest.approx(delta @ delta, rel=1e-10)
    assert fid(p, GaussianMoments(np.zeros(d), 4 * np.eye(d), 100)) == pytest.approx(d, rel=1e-10)
    with pytest.raises(InvalidInputError):
        fid(p, GaussianMoments(np.zeros(3), np.eye(3), 10))


def test_fid_clamps_rank_deficient_covariances():
    p = GaussianMoments(np.zeros(3), np.diag([1.0, 0.0, 0.0]), 5)
    assert fid(p, p) == pytest.approx(0.0, abs=1e-12)


def test_moments_merge_and_order(rng):
    x = rng.normal(size=(500, 4))
    whole = GaussianMoments.from_samples(x)
    merged = GaussianMoments.from_samples(x[:120]).merge(GaussianMoments.from_samples(x[120:]))
    np.testing.assert_allclose(merged.mean, whole.mean, rtol=1e-12)
    np.testing.assert_allclose(merged.covariance, whole.covariance, rtol=1e-10, atol=1e-14)
    assert merged.n == 500
    shuffled = GaussianMoments.from_samples(rng.permutation(x))
    assert np.array_equal(shuffled.mean, whole.mean) and np.array_equal(shuffled.covariance, whole.covariance)


def test_repeated_image_has_zero_covariance():
    img = _natural(32)
    m = extract_features(np.stack([img] * 5), RandomConvExtractor())
    np.testing.assert_allclose(m.covariance, 0.0, atol=1e-20)
    assert m.dim == 16 + 32 + 32


def test_evaluate_report(tmp_path, rng):
    refs = np.stack([_natural(32)] * 3)
    gens = refs.copy()
    gens[1] = np.clip(gens[1] + rng.normal(scale=0.1, size=gens[1].shape), 0, 1)
    report = evaluate(refs, gens, ids=["a", "b", "c"], vgg=IdentityExtractor(normalize=False), fid_extractor=IdentityExtractor())
    assert report.rmse[0] == 0 and report.rmse[1] > 0
    d = report.to_dict()
    assert d["per_image"][0]["psnr"] == "inf" and d["aggregate"]["psnr"] == "inf"
    assert report.perceptual_lpips is None and "perceptual_lpips" not in d["per_image"][0]
    path = report.write_json(tmp_path / "sub" / "m.json")
    assert json.loads(path.read_text())["fid_samples"] == 3
    lines = report.write_csv(tmp_path / "m.csv").read_text().splitlines()
    assert lines[0].startswith("id,ssim,rmse,psnr,perceptual_vgg") and len(lines) == 4
    with pytest.raises(InvalidInputError):
        evaluate(refs, gens[:2])
