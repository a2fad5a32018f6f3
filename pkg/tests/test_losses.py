"""
Tests for adversarial and reconstruction losses.
"""
import math

import pytest
import torch

from models.discriminator import D1_CHANNELS, D2_CHANNELS, DiscriminatorSpec, PatchDiscriminator, conditional_bundle
from models.wnet import GeneratorSpec, WNetGenerator, generator_forward
from tests.test_wnet import generator_inputs
from training.losses import (DEFAULT_EPS, adversarial_value, cgan_loss, discriminator_loss, gan_loss,
                             generator_adversarial_loss, generator_objective, l1_loss, total_objective)
from utils.exceptions import InvalidArgumentError


def scores(value, shape=(2, 1, 4, 2)):
    return torch.full(shape, value, dtype=torch.float64)


@pytest.mark.parametrize("loss", [cgan_loss, gan_loss])
class TestAdversarialValue:
    """Conditional and unconditional adversarial values."""

    def test_undecided_discriminator(self, loss):
        assert float(loss(scores(0.5), scores(0.5))) == pytest.approx(-1.386294, abs=1e-6)

    def test_perfect_discriminator(self, loss):
        value = float(loss(scores(1 - DEFAULT_EPS), scores(DEFAULT_EPS)))
        assert value == pytest.approx(0.0, abs=1e-6)

    def test_worst_discriminator_is_finite(self, loss):
        value = float(loss(scores(DEFAULT_EPS), scores(1 - DEFAULT_EPS)))
        assert math.isfinite(value)
        assert value == pytest.approx(2 * math.log(DEFAULT_EPS), rel=1e-6)

    def test_exact_zero_and_one_are_clamped(self, loss):
        assert math.isfinite(float(loss(scores(0.0), scores(1.0))))
        assert math.isfinite(float(loss(scores(1.0), scores(0.0))))


def test_discriminator_loss_is_negated_value():
    real, fake = scores(0.7), scores(0.2)
    assert float(discriminator_loss(real, fake)) == pytest.approx(-float(adversarial_value(real, fake)))


def test_non_saturating_generator_term():
    assert float(generator_adversarial_loss(scores(0.5))) == pytest.approx(math.log(2.0))
    assert math.isfinite(float(generator_adversarial_loss(scores(0.0))))


class TestL1:
    """Mean absolute reconstruction error."""

    def test_identical(self):
        image = torch.rand(1, 3, 8, 4)
        assert float(l1_loss(image, image)) == 0.0

    def test_constant_offset(self):
        target = torch.rand(2, 3, 8, 4, dtype=torch.float64)
        assert float(l1_loss(target + 0.5, target)) == pytest.approx(0.5)

    def test_single_pixel(self):
        target = torch.zeros(1, 3, 128, 64, dtype=torch.float64)
        generated = target.clone()
        generated[0, 1, 40, 20] = 1.0
        assert float(l1_loss(generated, target)) == pytest.approx(4.0690e-5, rel=1e-4)

    def test_shape_mismatch(self):
        with pytest.raises(InvalidArgumentError):
            l1_loss(torch.zeros(1, 3, 8, 4), torch.zeros(1, 3, 4, 8))


def test_total_objective_weights():
    assert total_objective(-1.0, -1.0, 0.5, lambda1=1.0, lambda2=0.01) == pytest.approx(-1.995)


class TestGeneratorObjective:
    """Combined generator loss and its gradients."""

    def _inputs(self, seed=0):
        gen = torch.Generator().manual_seed(seed)
        d1_fake = (torch.rand(2, 1, 2, 1, generator=gen, dtype=torch.float64) * 0.8 + 0.1).requires_grad_()
        d2_fake = (torch.rand(2, 1, 2, 1, generator=gen, dtype=torch.float64) * 0.8 + 0.1).requires_grad_()
        generated = (torch.rand(1, 1, 4, 5, generator=gen, dtype=torch.float64) * 2 - 1).requires_grad_()
        target = torch.rand(1, 1, 4, 5, generator=gen, dtype=torch.float64) * 2 - 1
        return d1_fake, d2_fake, generated, target

    def test_parts(self):
        d1_fake, d2_fake, generated, target = self._inputs()
        parts = generator_objective(d1_fake, d2_fake, generated, target, lambda1=2.0, lambda2=0.1)
        expected = parts["cgan"] + 2.0 * parts["gan"] + 0.1 * parts["l1"]
        assert float(parts["total"]) == pytest.approx(float(expected))

    def test_gradcheck(self):
        d1_fake, d2_fake, generated, target = self._inputs(seed=1)
        # keep every |generated - target| away from the kink at zero
        target = (generated.detach() + torch.where(generated.detach() > 0, -0.3, 0.3)).detach()

        def objective(d1, d2, g):
            return generator_objective(d1, d2, g, target, lambda1=1.0, lambda2=0.5)["total"]

        # 4 + 4 + 20 inputs, 20 of them image values
        assert torch.autograd.gradcheck(objective, (d1_fake, d2_fake, generated),
                                        eps=1e-6, atol=1e-8, rtol=1e-3)

    def test_zero_l1_weight_cuts_reconstruction_gradient(self):
        d1_fake, d2_fake, generated, target = self._inputs(seed=2)
        generator_objective(d1_fake, d2_fake, generated, target, lambda1=1.0, lambda2=0.0)["total"].backward()
        assert not generated.grad.any()

    def test_zero_gan_weight_cuts_d2_gradient(self):
        d1_fake, d2_fake, generated, target = self._inputs(seed=3)
        generator_objective(d1_fake, d2_fake, generated, target, lambda1=0.0, lambda2=0.01)["total"].backward()
        assert not d2_fake.grad.any()
        assert d1_fake.grad.abs().sum() > 0


class TestLossesOnMicroModels:
    """Finite differences through the final layers of micro networks, in double precision."""

    @pytest.fixture
    def micro(self):
        torch.manual_seed(0)
        generator = WNetGenerator(GeneratorSpec(image_size=(64, 32), base_channels=2)).double()
        d1 = PatchDiscriminator(DiscriminatorSpec(in_channels=D1_CHANNELS, base_channels=2)).double()
        d2 = PatchDiscriminator(DiscriminatorSpec(in_channels=D2_CHANNELS, base_channels=2)).double()
        src_in, tgt_in, masks, affines = (t.double() for t in generator_inputs(2, 64, 32, seed=5))
        target = torch.rand(2, 3, 64, 32, generator=torch.Generator().manual_seed(6), dtype=torch.float64) * 2 - 1
        return generator, d1, d2, (src_in, tgt_in, masks, affines), target

    @staticmethod
    def _assert_directional_derivative(loss_fn, param, seed=0):
        loss = loss_fn()
        (grad,) = torch.autograd.grad(loss, param)
        direction = torch.randn(param.shape, generator=torch.Generator().manual_seed(seed), dtype=param.dtype)
        h = 1e-6
        with torch.no_grad():
            param.add_(h * direction)
            upper = float(loss_fn())
            param.sub_(2 * h * direction)
            lower = float(loss_fn())
            param.add_(h * direction)
        numeric = (upper - lower) / (2 * h)
        assert float((grad * direction).sum()) == pytest.approx(numeric, rel=1e-4, abs=1e-9)

    def test_cgan_loss_gradient(self, micro):
        generator, d1, _, (src_in, tgt_in, masks, affines), target = micro
        with torch.no_grad():
            fake = generator_forward(generator, src_in, tgt_in, masks, affines)
        real_bundle = conditional_bundle(src_in[:, :3], src_in[:, 3:], target, tgt_in[:, 3:])
        fake_bundle = conditional_bundle(src_in[:, :3], src_in[:, 3:], fake, tgt_in[:, 3:])
        self._assert_directional_derivative(lambda: cgan_loss(d1(real_bundle), d1(fake_bundle)),
                                            d1.final_conv.weight)

    def test_gan_loss_gradient(self, micro):
        generator, _, d2, (src_in, tgt_in, masks, affines), target = micro
        with torch.no_grad():
            fake = generator_forward(generator, src_in, tgt_in, masks, affines)
        self._assert_directional_derivative(lambda: gan_loss(d2(target), d2(fake)), d2.final_conv.weight, seed=1)

    def test_l1_loss_gradient(self, micro):
        generator, _, _, inputs, target = micro
        self._assert_directional_derivative(lambda: l1_loss(generator_forward(generator, *inputs), target),
                                            generator.decoder.head[0].weight, seed=2)
