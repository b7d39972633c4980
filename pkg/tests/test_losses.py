import numpy as np
import pytest
import torch

from ii2s.errors import InvalidInputError
from ii2s.latent_spaces import PnPlusCode, leaky_p_to_w, unwhiten
from ii2s.losses import LossWeights, pixel_l2, prepare_reference, to_unit_range, total_loss
from ii2s.perceptual import IdentityExtractor, RandomConvExtractor


def test_worked_example_zero_images():
    zeros = torch.zeros(3, 8, 8, dtype=torch.float64)
    v = np.zeros((6, 4))
    v[0, :] = [2.0, 1.0, 1.0, 1.0]  # ‖v‖² = 7
    total, comps = total_loss(zeros, zeros, PnPlusCode(v), LossWeights(lam=1.0), RandomConvExtractor())
    assert total.item() == pytest.approx(7.0)
    assert comps["v_norm_sq"].item() == 7.0
    assert comps["perceptual"].item() == 0 and comps["pixel"].item() == 0


def test_components_sum_to_total(rng):
    a = torch.tensor(rng.random((3, 16, 16)))
    b = torch.tensor(rng.random((3, 16, 16)))
    v = torch.tensor(rng.normal(size=(6, 16)))
    w = LossWeights(0.7, 1.3, 0.01)
    total, comps = total_loss(a, b, v, w, RandomConvExtractor())
    parts = comps["perceptual"] + comps["pixel"] + comps["regularizer"]
    assert total.item() == pytest.approx(parts.item(), rel=1e-14)
    assert comps["pixel"].item() == pytest.approx(1.3 * pixel_l2(a.numpy(), b.numpy()))
    assert comps["regularizer"].item() == pytest.approx(0.01 * float((v**2).sum()))


def test_regularizer_gradient_is_exactly_two_lambda_v(rng):
    lam = 0.005
    v = torch.tensor(rng.normal(size=(6, 16)), requires_grad=True)
    img = torch.zeros(3, 8, 8, dtype=torch.float64)
    _, comps = total_loss(img, img, v, LossWeights(lam=lam), IdentityExtractor())
    (grad,) = torch.autograd.grad(comps["regularizer"], v)
    assert torch.equal(grad, 2 * lam * v.detach())


def test_gradient_through_generator_and_whitening_map(toy, toy_model):
    rng = np.random.default_rng(8)
    ref = torch.tensor(rng.random((1, 3, 16, 16)))
    weights = LossWeights(lam=0.005)
    extractor = RandomConvExtractor()

    def objective(v):
        w_plus = leaky_p_to_w(unwhiten(v, toy_model))
        gen = to_unit_range(toy.synthesize_tensor(w_plus[None]))
        return total_loss(ref, gen, v, weights, extractor)[0]

    v0 = torch.tensor(rng.normal(size=(6, 16)), requires_grad=True)
    (grad,) = torch.autograd.grad(objective(v0), v0)
    h = 1e-5
    with torch.no_grad():
        for _ in range(20):
            k, j = rng.integers(6), rng.integers(16)
            e = torch.zeros_like(v0)
            e[k, j] = h
            fd = (objective(v0 + e) - objective(v0 - e)).item() / (2 * h)
            assert grad[k, j].item() == pytest.approx(fd, rel=1e-4, abs=1e-9)


def test_reference_downsampled_only_when_larger(rng):
    ref = torch.tensor(rng.random((1, 3, 32, 32)))
    assert prepare_reference(ref, 16).shape[-1] == 16
    assert prepare_reference(ref, 64).shape[-1] == 32
    assert prepare_reference(ref, None) is not None


def test_weight_validation():
    with pytest.raises(InvalidInputError):
        LossWeights(lam=-1)
    with pytest.raises(InvalidInputError):
        LossWeights(0, 0, 1)
    with pytest.raises(InvalidInputError):
        pixel_l2(np.zeros((3, 4, 4)), np.zeros((3, 4, 5)))
