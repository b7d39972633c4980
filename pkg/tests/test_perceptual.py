import numpy as np
import pytest
import torch

from ii2s.errors import InvalidInputError
from ii2s.perceptual import IdentityExtractor, RandomConvExtractor, make_extractor, perceptual_distance


def _batch(rng, n=10, size=16):
    return torch.tensor(rng.uniform(0.2, 0.8, size=(n, 3, size, size)))


def test_self_distance_is_zero(rng):
    x = _batch(rng)
    e = RandomConvExtractor()
    assert torch.all(perceptual_distance(x, x, e, reduction="none") == 0)


def test_grows_with_noise(rng):
    x = _batch(rng)
    e = RandomConvExtractor()
    noise = torch.tensor(rng.normal(size=x.shape))
    dists = [perceptual_distance(x, (x + s * noise).clamp(0, 1), e, reduction="none") for s in (0.02, 0.05, 0.1, 0.2)]
    monotone = torch.all(torch.stack([b > a for a, b in zip(dists, dists[1:])]), dim=0)
    assert monotone.sum() >= 9


def test_identity_extractor_without_normalization_is_channel_summed_mse(rng):
    a, b = _batch(rng, 2), _batch(rng, 2)
    e = IdentityExtractor(normalize=False)
    expected = ((a - b) ** 2).sum(dim=1).mean(dim=(1, 2))
    torch.testing.assert_close(perceptual_distance(a, b, e, reduction="none"), expected)
    assert perceptual_distance(a, b, e).item() == pytest.approx(expected.mean().item())


def test_symmetry_and_seed_determinism(rng):
    a, b = _batch(rng, 3), _batch(rng, 3)
    e1, e2 = RandomConvExtractor(seed=4), RandomConvExtractor(seed=4)
    assert torch.equal(perceptual_distance(a, b, e1), perceptual_distance(a, b, e2))
    torch.testing.assert_close(perceptual_distance(a, b, e1), perceptual_distance(b, a, e1))
    assert not torch.equal(perceptual_distance(a, b, e1), perceptual_distance(a, b, RandomConvExtractor(seed=5)))


def test_extractor_leaves_global_rng_alone():
    torch.manual_seed(0)
    expected = torch.rand(1)
    torch.manual_seed(0)
    RandomConvExtractor(seed=3)
    assert torch.equal(torch.rand(1), expected)


def test_gradients_flow_to_generated_side(rng):
    a = _batch(rng, 1)
    b = _batch(rng, 1).requires_grad_(True)
    perceptual_distance(a, b, make_extractor("random_conv")).backward()
    assert torch.all(torch.isfinite(b.grad)) and b.grad.abs().sum() > 0


def test_input_validation(rng):
    e = RandomConvExtractor()
    with pytest.raises(InvalidInputError):
        perceptual_distance(_batch(rng, 1), _batch(rng, 2), e)
    with pytest.raises(InvalidInputError):
        perceptual_distance(torch.zeros(1, 1, 8, 8), torch.zeros(1, 1, 8, 8), e)
    with pytest.raises(InvalidInputError):
        perceptual_distance(torch.zeros(1, 3, 2, 2), torch.zeros(1, 3, 2, 2), e)
    with pytest.raises(InvalidInputError):
        make_extractor("alexnet")
