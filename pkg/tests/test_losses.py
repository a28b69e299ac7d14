import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spoofcm import autograd as ag
from spoofcm.autograd import parameter
from spoofcm.losses import (AM_SOFTMAX, CE_SOFTMAX, OC_SOFTMAX, PER_CLASS, PRESETS, InvalidCosine,
                            LossConfig, cross_entropy, dataset_loss, inference_score,
                            margin_softmax_loss, margin_softmax_probs, p2sgrad_mse, preset,
                            sigmoid_binary, sigmoid_head_logit, trial_loss)
from spoofcm.nn_core import cosine_scores

# frozen with 40-digit arithmetic
AM_EXAMPLE_P1 = 0.017986209962091558      # e^-2 / (e^-2 + e^2)
SIGMOID_LOSS_LOGIT_2 = 0.12692801104297249  # log(1 + e^-2)

cosines = st.lists(st.floats(-1.0, 1.0), min_size=2, max_size=6).map(np.array)


def test_am_worked_example():
    probs = margin_softmax_probs(np.array([0.8, 0.1]), 1, preset("am")).data
    assert abs(probs[0] - AM_EXAMPLE_P1) < 1e-12
    loss = margin_softmax_loss(np.array([0.8, 0.1]), 1, preset("am")).data
    assert abs(loss - (-math.log(AM_EXAMPLE_P1))) < 1e-12


def test_sigmoid_worked_example():
    prob, loss = sigmoid_binary(2.0, 1)
    assert abs(loss.data - SIGMOID_LOSS_LOGIT_2) < 1e-15
    assert abs(prob.data - 1 / (1 + math.exp(-2))) < 1e-15
    _, spoof_loss = sigmoid_binary(2.0, 2)
    assert abs(spoof_loss.data - (2.0 + SIGMOID_LOSS_LOGIT_2)) < 1e-14


def test_sigmoid_extreme_logits_are_finite():
    for logit in (-1000.0, 1000.0):
        for y in (1, 2):
            assert np.isfinite(sigmoid_binary(logit, y)[1].data)


def test_sigmoid_head_logit():
    c = np.array([[1.0, 2.0], [0.5, -1.0]])
    assert sigmoid_head_logit(np.array([2.0, 1.0]), c, 0.25).data == pytest.approx(4.25)


@settings(max_examples=200, deadline=None)
@given(cosines, st.integers(1, 6))
def test_plain_scaled_softmax_reduction(cos, y):
    y = 1 + (y - 1) % cos.size
    cfg = LossConfig(CE_SOFTMAX, alpha=7.0, m1=1.0, m2=0.0, m3=(0.0,) * cos.size)
    logits = 7.0 * cos
    ref = np.exp(logits - logits.max())
    ref /= ref.sum()
    np.testing.assert_allclose(margin_softmax_probs(cos, y, cfg).data, ref, atol=1e-12)


def test_am_margin_lowers_target_probability():
    plain = LossConfig(CE_SOFTMAX, alpha=20.0)
    cos = np.array([0.3, 0.2])
    assert (margin_softmax_probs(cos, 1, preset("am")).data[0]
            < margin_softmax_probs(cos, 1, plain).data[0])


def test_oc_one_class_logits():
    cfg = preset("oc")
    # bonafide: alpha*(cos1 - 0.9) vs 0; spoof: alpha*(cos1 - 0.2) vs 0, target slot 1
    bona = margin_softmax_loss(np.array([0.9, -0.3]), 1, cfg).data
    assert bona == pytest.approx(math.log(2.0), abs=1e-15)
    spoof = margin_softmax_loss(np.array([0.2, 0.7]), 2, cfg).data
    assert spoof == pytest.approx(math.log(2.0), abs=1e-15)


def test_oc_per_class_variant():
    cfg = LossConfig(OC_SOFTMAX, alpha=20.0, m3=(0.9, 0.2), oc_variant=PER_CLASS)
    p = margin_softmax_probs(np.array([0.1, 0.4]), 2, cfg).data
    assert p[1] == pytest.approx(1 / (1 + math.exp(20 * 0.1 - 20 * 0.2)))


def test_angular_margin_m1():
    cfg = LossConfig(AM_SOFTMAX, alpha=1.0, m1=2.0, m3=(0.0, 0.0))
    cos = np.array([math.cos(0.3), 0.0])
    logits_target = math.cos(0.6)
    p = margin_softmax_probs(cos, 1, cfg).data[0]
    assert p == pytest.approx(math.exp(logits_target) / (math.exp(logits_target) + 1.0))


def test_p2sgrad_value():
    assert p2sgrad_mse(np.array([0.5, -0.5]), 1).data == pytest.approx(0.5)
    assert p2sgrad_mse(np.array([1.0, 0.0]), 1).data == 0.0


def test_p2sgrad_gradient_is_twice_residual():
    c = parameter(np.array([0.3, 0.6]))
    p2sgrad_mse(c, 2).backward()
    np.testing.assert_allclose(c.grad, [0.6, -0.8])


def test_cross_entropy_floor():
    assert cross_entropy(np.array([0.0, 1.0]), 1).data == pytest.approx(-math.log(1e-30))


def test_invalid_cosine():
    with pytest.raises(InvalidCosine):
        p2sgrad_mse(np.array([1.5, 0.0]), 1)
    with pytest.raises(ValueError):
        margin_softmax_loss(np.array([0.1, 0.2]), 3, preset("am"))


def test_bad_configs():
    with pytest.raises(ValueError):
        LossConfig("hinge")
    with pytest.raises(ValueError):
        LossConfig(AM_SOFTMAX, alpha=0.0)
    with pytest.raises(ValueError):
        LossConfig(AM_SOFTMAX, m1=0.5)
    with pytest.raises(ValueError):
        preset("arcface")


def test_dataset_loss_is_mean():
    cfg = preset("p2sgrad")
    outs = [np.array([0.5, 0.0]), np.array([0.0, 0.0])]
    assert dataset_loss(outs, [1, 2], cfg).data == pytest.approx((0.25 + 1.0) / 2)


def test_inference_scores():
    assert inference_score(np.array([0.4, -0.2]), preset("am")) == 0.4
    assert inference_score(np.array(0.0), preset("sigmoid")) == 0.5


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_losses_non_negative_and_differentiable(name):
    cfg = PRESETS[name]
    rng = np.random.default_rng(5)
    for _ in range(10):
        o = parameter(rng.standard_normal(4))
        c = parameter(rng.standard_normal((2, 4)))
        out = sigmoid_head_logit(o, c) if cfg.head == "sigmoid" else cosine_scores(o, c)
        loss = trial_loss(out, int(rng.integers(1, 3)), cfg)
        assert loss.data >= 0.0
        loss.backward()
        assert np.all(np.isfinite(o.grad))


def test_p2sgrad_direction_single_instance():
    o = parameter(np.array([0.2, 1.0, -0.4]))
    c = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    p2sgrad_mse(cosine_scores(o, c), 1).backward()
    o2 = parameter(o.data.copy())
    cosine_scores(o2, c)[0].backward()
    assert float(-o.grad @ o2.grad) > 0.0


def test_clip_keeps_gradient_inside_range():
    x = parameter(np.array([0.5]))
    ag.clip(x, -1, 1).sum().backward()
    assert x.grad[0] == 1.0
