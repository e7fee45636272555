import math

import numpy as np
import pytest
import torch

from uvseg.errors import InvalidInputError
from uvseg.training.losses import (
    LossConfig,
    cross_entropy_loss,
    dice_loss,
    focal_loss,
    mse_loss,
    total_loss,
)

from oracles import central_difference_grad, max_relative_error


def random_pair(rng, shape=(8, 8)):
    probs = torch.tensor(rng.uniform(0.02, 0.98, shape))
    gt = torch.tensor(rng.integers(0, 2, shape).astype(np.float64))
    return probs, gt


class TestFocal:
    def test_gamma_zero_is_alpha_weighted_bce(self, rng):
        for _ in range(50):
            probs, gt = random_pair(rng)
            p_t = probs * gt + (1 - probs) * (1 - gt)
            bce = -(p_t.clamp(1e-7, 1 - 1e-7).log()).mean()
            got = focal_loss(probs, gt, gamma=0.0, alpha=0.5)
            assert abs(got.item() - 0.5 * bce.item()) < 1e-9

    def test_perfect_prediction_vanishes(self):
        gt = torch.ones(16, 16)
        assert focal_loss(gt.clone(), gt).item() < 1e-5

    def test_single_pixel_hand_value(self):
        # p_t = 0.5, gamma = 2, alpha = 0.25 -> 0.25 * 0.25 * ln 2
        got = focal_loss(torch.tensor([[0.5]]), torch.tensor([[1.0]]))
        assert got.item() == pytest.approx(0.25 * 0.25 * math.log(2), abs=1e-9)
        assert got.item() == pytest.approx(0.043322, abs=1e-5)

    def test_shape_mismatch(self):
        with pytest.raises(InvalidInputError):
            focal_loss(torch.rand(4, 4), torch.zeros(5, 5))

    def test_nonnegative(self, rng):
        for _ in range(20):
            probs, gt = random_pair(rng)
            assert focal_loss(probs, gt).item() >= 0


class TestDice:
    def test_perfect_overlap(self):
        gt = torch.zeros(64, 64)
        gt[:32] = 1.0  # 2048 foreground pixels
        assert dice_loss(gt.clone(), gt).item() < 1e-3

    def test_disjoint_hard_masks(self):
        a = torch.zeros(8, 8)
        b = torch.zeros(8, 8)
        a[:4] = 1.0
        b[4:] = 1.0
        assert dice_loss(a, b, smooth=1e-12).item() == pytest.approx(1.0, abs=1e-9)

    def test_hand_computed_4x4(self):
        # gt: top half foreground (8 px); probs match on the left half of it
        gt = torch.zeros(4, 4)
        gt[:2] = 1.0
        probs = torch.zeros(4, 4)
        probs[:2, :2] = 1.0
        # 1 - (2*4 + 1) / (4 + 8 + 1) = 1 - 9/13
        assert dice_loss(probs, gt, smooth=1.0).item() == pytest.approx(1 - 9 / 13)

    def test_bounded(self, rng):
        for _ in range(50):
            probs, gt = random_pair(rng)
            v = dice_loss(probs, gt).item()
            assert 0.0 <= v <= 1.0


class TestMse:
    def test_identity(self):
        gt = torch.rand(6, 6)
        assert mse_loss(gt.clone(), gt).item() == 0.0

    def test_constant_half_vs_binary(self, rng):
        gt = torch.tensor(rng.integers(0, 2, (8, 8)).astype(np.float64))
        assert mse_loss(torch.full((8, 8), 0.5, dtype=torch.float64), gt).item() == pytest.approx(0.25, abs=1e-12)

    def test_matches_elementwise_oracle(self, rng):
        probs, gt = random_pair(rng)
        ref = float(np.mean((probs.numpy() - gt.numpy()) ** 2))
        assert mse_loss(probs, gt).item() == pytest.approx(ref, abs=1e-9)


class TestTotal:
    def test_lambda_zero_leaves_ce_only(self, rng):
        probs, gt = random_pair(rng)
        logits = torch.tensor(rng.normal(size=(2, 8, 8)))
        total, terms = total_loss(probs, logits, gt, LossConfig(lam=0.0))
        assert total.item() == pytest.approx(terms["ce"].item(), abs=1e-12)

    def test_recomposes_from_terms(self, rng):
        probs, gt = random_pair(rng)
        logits = torch.tensor(rng.normal(size=(2, 8, 8)))
        cfg = LossConfig(lam=1.0)
        total, terms = total_loss(probs, logits, gt, cfg)
        ref = (
            focal_loss(probs, gt, cfg.focal_gamma, cfg.focal_alpha)
            + dice_loss(probs, gt, cfg.dice_smooth)
            + mse_loss(probs, gt)
            + cross_entropy_loss(logits, gt)
        )
        assert total.item() == pytest.approx(ref.item(), abs=1e-9)

    def test_lambda_linearity(self, rng):
        probs, gt = random_pair(rng)
        logits = torch.tensor(rng.normal(size=(2, 8, 8)))
        t1, terms1 = total_loss(probs, logits, gt, LossConfig(lam=1.0))
        t2, _ = total_loss(probs, logits, gt, LossConfig(lam=2.0))
        ce = terms1["ce"].item()
        assert (t2.item() - ce) == pytest.approx(2 * (t1.item() - ce), rel=1e-12)

    def test_monotone_in_lambda(self, rng):
        probs, gt = random_pair(rng)
        logits = torch.tensor(rng.normal(size=(2, 8, 8)))
        values = [
            total_loss(probs, logits, gt, LossConfig(lam=lam))[0].item()
            for lam in (0.1, 1.0, 10.0)
        ]
        assert values == sorted(values)

    def test_quality_target_requires_prediction(self, rng):
        probs, gt = random_pair(rng)
        logits = torch.tensor(rng.normal(size=(2, 8, 8)))
        with pytest.raises(InvalidInputError):
            total_loss(probs, logits, gt, LossConfig(mse_target="quality"))
        total, terms = total_loss(
            probs, logits, gt, LossConfig(mse_target="quality"),
            quality_pred=torch.tensor(0.5),
        )
        assert math.isfinite(total.item())


@pytest.mark.parametrize(
    "name,fn",
    [
        ("focal", lambda p, g: focal_loss(p, g, 2.0, 0.25)),
        ("dice", lambda p, g: dice_loss(p, g, 1.0)),
        ("mse", mse_loss),
    ],
)
def test_loss_gradients_match_finite_differences(rng, name, fn):
    probs = torch.tensor(rng.uniform(0.05, 0.95, (8, 8)), requires_grad=True)
    gt = torch.tensor(rng.integers(0, 2, (8, 8)).astype(np.float64))
    fn(probs, gt).backward()
    numeric = central_difference_grad(
        lambda p: fn(p, gt), probs.detach().clone()
    )
    assert max_relative_error(probs.grad, numeric) < 1e-4
