"""Differentiable building blocks shared by the back ends and the losses."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from .autograd import Tensor, as_tensor

COS_CLAMP = 1e-12


class ZeroVector(ValueError):
    pass


class EmptySequence(ValueError):
    pass


class OddWidth(ValueError):
    pass


class NonFiniteLoss(ArithmeticError):
    pass


def length_normalize(v, axis=-1):
    """v / ||v|| along ``axis``; gradients flow through the norm."""
    v = as_tensor(v)
    norm = ag.sqrt((v * v).sum(axis=axis, keepdims=True))
    if np.any(norm.data == 0.0):
        raise ZeroVector("cannot normalize a zero vector")
    return v / norm


def cosine_scores(o, weights):
    """Cosine of ``o`` (D,) against each row of ``weights`` (C, D).

    Results are clamped into [-1 - 1e-12, 1 + 1e-12] to absorb roundoff.
    """
    o_hat = length_normalize(o)
    w_hat = length_normalize(weights, axis=1)
    return ag.clip(w_hat @ o_hat, -1.0 - COS_CLAMP, 1.0 + COS_CLAMP)


def mean_pool(h):
    h = as_tensor(h)
    if h.shape[0] < 1:
        raise EmptySequence("cannot pool an empty sequence")
    return h.mean(axis=0)


def attention_pool(h, w_att, b_att, u_att):
    """Additive single-head attention pooling.

    Frame scores are ``u . tanh(W h_m + b)``; the weights are their softmax
    over time. Returns ``(embedding, weights)``.
    """
    h = as_tensor(h)
    if h.shape[0] < 1:
        raise EmptySequence("cannot pool an empty sequence")
    scores = ag.tanh(h @ ag.transpose(as_tensor(w_att)) + b_att) @ u_att
    weights = ag.softmax(scores, axis=0)
    return weights @ h, weights


@dataclass
class GRUParams:
    """Input, recurrent and bias weights for the update/reset/candidate gates.

    ``w_in`` is (3H, D_in), ``w_rec`` is (3H, H), ``bias`` is (3H,), gates
    ordered (update, reset, candidate).
    """
    w_in: Tensor
    w_rec: Tensor
    bias: Tensor

    @classmethod
    def zeros(cls, d_in, hidden):
        return cls(ag.parameter(np.zeros((3 * hidden, d_in))),
                   ag.parameter(np.zeros((3 * hidden, hidden))),
                   ag.parameter(np.zeros(3 * hidden)))

    def tensors(self):
        return [self.w_in, self.w_rec, self.bias]


def gru_sequence(x, p: GRUParams, reverse=False):
    x = as_tensor(x)
    n = x.shape[0]
    hidden = p.w_rec.shape[1]
    proj = x @ ag.transpose(p.w_in) + p.bias
    w_zr = p.w_rec[:2 * hidden]
    w_c = p.w_rec[2 * hidden:]
    state = as_tensor(np.zeros(hidden))
    outputs = [None] * n
    steps = range(n - 1, -1, -1) if reverse else range(n)
    for t in steps:
        row = proj[t]
        zr = ag.sigmoid(row[:2 * hidden] + w_zr @ state)
        z, r = zr[:hidden], zr[hidden:]
        cand = ag.tanh(row[2 * hidden:] + r * (w_c @ state))
        state = (1.0 - z) * cand + z * state
        outputs[t] = state
    return ag.stack(outputs, axis=0)


def bidirectional_gru(x, forward: GRUParams, backward: GRUParams):
    return ag.concat([gru_sequence(x, forward), gru_sequence(x, backward, reverse=True)],
                     axis=1)


def recurrent_layer(h, layers):
    """Stacked bidirectional GRU layers with one skip over the whole stack.

    ``layers`` is a list of (forward, backward) GRUParams pairs, each with
    hidden size D_h/2 so the concatenated output keeps width D_h.
    """
    h = as_tensor(h)
    if h.shape[0] < 1:
        raise EmptySequence("recurrent layer needs at least one frame")
    if h.shape[1] % 2:
        raise OddWidth(f"hidden width {h.shape[1]} must be even")
    out = h
    for fwd, bwd in layers:
        out = bidirectional_gru(out, fwd, bwd)
    return out + h


@dataclass
class GradCheckReport:
    max_rel_error: float
    checked: int
    skipped_kinks: int


def gradient_check(loss_fn, params, eps=1e-5, max_coords=None, rng=None):
    """Compare autodiff gradients of ``loss_fn`` with central differences.

    ``params`` maps names to arrays; ``loss_fn`` receives a dict of Tensors
    and returns a scalar Tensor. When ``max_coords`` is set, at most that many
    coordinates per parameter are sampled with ``rng``. Coordinates whose
    perturbation flips a leaky-ReLU pre-activation sign are skipped and
    counted, since the difference quotient straddles a kink there.
    """
    if not 0 < eps <= 1e-3:
        raise ValueError("eps must lie in (0, 1e-3]")
    rng = np.random.default_rng(0) if rng is None else rng
    base = {k: np.array(v, dtype=np.float64) for k, v in params.items()}

    tensors = {k: ag.parameter(v, name=k) for k, v in base.items()}
    with ag.record_kinks() as ref_kinks:
        loss = loss_fn(tensors)
    if not np.isfinite(loss.data):
        raise NonFiniteLoss("loss is not finite at the base point")
    loss.backward()
    analytic = {k: (t.grad if t.grad is not None else np.zeros_like(t.data))
                for k, t in tensors.items()}

    def evaluate(values):
        with ag.record_kinks() as kinks:
            value = float(loss_fn({k: Tensor(v) for k, v in values.items()}).data)
        if not np.isfinite(value):
            raise NonFiniteLoss("loss is not finite under perturbation")
        same = len(kinks) == len(ref_kinks) and all(
            np.array_equal(a, b) for a, b in zip(kinks, ref_kinks))
        return value, same

    worst, checked, skipped = 0.0, 0, 0
    for name, value in base.items():
        flat = value.reshape(-1)
        coords = np.arange(flat.size)
        if max_coords is not None and flat.size > max_coords:
            coords = np.sort(rng.choice(flat.size, max_coords, replace=False))
        for i in coords:
            orig = flat[i]
            flat[i] = orig + eps
            f_plus, ok_plus = evaluate(base)
            flat[i] = orig - eps
            f_minus, ok_minus = evaluate(base)
            flat[i] = orig
            if not (ok_plus and ok_minus):
                skipped += 1
                continue
            numeric = (f_plus - f_minus) / (2 * eps)
            a = analytic[name].reshape(-1)[i]
            worst = max(worst, abs(a - numeric) / max(1.0, abs(a), abs(numeric)))
            checked += 1
    return GradCheckReport(worst, checked, skipped)


def finite_difference_check(loss_fn, params, eps=1e-5, max_coords=None, rng=None) -> float:
    """Maximum relative error between analytic and central-difference gradients."""
    return gradient_check(loss_fn, params, eps, max_coords, rng).max_rel_error


def glorot_uniform(rng, shape, fan_in=None, fan_out=None):
    fan_in = shape[-1] if fan_in is None else fan_in
    fan_out = shape[0] if fan_out is None else fan_out
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)
