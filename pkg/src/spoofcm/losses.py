"""Training criteria: cross entropy over (margin) softmax, sigmoid, and P2SGrad MSE.

Class labels are 1-based: ``y = 1`` is bonafide, ``y = 2`` is spoof.
Cosine-based criteria consume the per-class cosines produced by
:func:`spoofcm.nn_core.cosine_scores`; the sigmoid criterion consumes the
scalar logit ``(c1 - c2) . o + b``.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import autograd as ag
from .autograd import Tensor, as_tensor
from .nn_core import COS_CLAMP

CE_SOFTMAX = "ce_softmax"
CE_SIGMOID = "ce_sigmoid"
AM_SOFTMAX = "am_softmax"
OC_SOFTMAX = "oc_softmax"
P2SGRAD = "p2sgrad"
KINDS = (CE_SOFTMAX, CE_SIGMOID, AM_SOFTMAX, OC_SOFTMAX, P2SGRAD)
SOFTMAX_KINDS = (CE_SOFTMAX, AM_SOFTMAX, OC_SOFTMAX)

# OC-softmax orientations. "one_class" scores only the bonafide cosine and
# asks for cos > m_{3,1} on bonafide and cos < m_{3,2} on spoof; "per_class"
# subtracts m_{3,y} from the target's own cosine logit in a 2-way softmax.
ONE_CLASS = "one_class"
PER_CLASS = "per_class"

PROB_FLOOR = 1e-30
BONAFIDE, SPOOF = 1, 2


class InvalidCosine(ValueError):
    pass


@dataclass(frozen=True)
class LossConfig:
    kind: str = P2SGRAD
    alpha: float = 20.0
    m1: float = 1.0
    m2: float = 0.0
    m3: tuple = (0.0, 0.0)
    oc_variant: str = ONE_CLASS

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown loss kind {self.kind!r}")
        object.__setattr__(self, "m3", tuple(float(m) for m in self.m3))
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.m1 < 1 or self.m2 < 0:
            raise ValueError("need m1 >= 1 and m2 >= 0")
        if self.oc_variant not in (ONE_CLASS, PER_CLASS):
            raise ValueError(f"unknown OC variant {self.oc_variant!r}")

    @property
    def head(self) -> str:
        return "sigmoid" if self.kind == CE_SIGMOID else "cosine"

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "LossConfig":
        return cls(**d)


PRESETS = {
    "am": LossConfig(AM_SOFTMAX, alpha=20.0, m3=(0.9, 0.9)),
    "oc": LossConfig(OC_SOFTMAX, alpha=20.0, m3=(0.9, 0.2)),
    "sigmoid": LossConfig(CE_SIGMOID),
    "p2sgrad": LossConfig(P2SGRAD),
    "ce": LossConfig(CE_SOFTMAX, alpha=20.0, m3=(0.0, 0.0)),
}


def preset(name: str) -> LossConfig:
    try:
        return PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown loss preset {name!r}; choose from {sorted(PRESETS)}") from None


def _check_cosines(cosines):
    values = as_tensor(cosines).data
    if not np.all(np.abs(values) <= 1.0 + COS_CLAMP):
        raise InvalidCosine(f"cosines outside [-1, 1]: {values}")


def _target_cos(c, cfg):
    if cfg.m1 == 1.0 and cfg.m2 == 0.0:
        return c
    lim = 1.0 - 1e-12
    return ag.cos(cfg.m1 * ag.arccos(ag.clip(c, -lim, lim)) + cfg.m2)


def margin_logits(cosines, y: int, cfg: LossConfig) -> Tensor:
    """Logits whose softmax gives the margin-softmax class probabilities."""
    if cfg.kind not in SOFTMAX_KINDS:
        raise ValueError(f"{cfg.kind} is not a softmax criterion")
    cos = as_tensor(cosines)
    _check_cosines(cos)
    n_classes = cos.shape[0]
    if not 1 <= y <= n_classes:
        raise ValueError(f"label {y} outside 1..{n_classes}")
    m3 = cfg.m3 if len(cfg.m3) == n_classes else (cfg.m3[0],) * n_classes
    k = y - 1

    if cfg.kind == OC_SOFTMAX and cfg.oc_variant == ONE_CLASS:
        own = cfg.alpha * (cos[0] - m3[k])
        return ag.concat([own.reshape(1), as_tensor(np.zeros(1))])

    target = cfg.alpha * (_target_cos(cos[k], cfg) - m3[k])
    parts = []
    if k > 0:
        parts.append(cfg.alpha * cos[:k])
    parts.append(target.reshape(1))
    if k < n_classes - 1:
        parts.append(cfg.alpha * cos[k + 1:])
    return ag.concat(parts)


def margin_softmax_probs(cosines, y: int, cfg: LossConfig) -> Tensor:
    return ag.softmax(margin_logits(cosines, y, cfg))


def _class_position(cfg, y):
    # one_class logits keep the bonafide score in slot 0 regardless of target
    if cfg.kind == OC_SOFTMAX and cfg.oc_variant == ONE_CLASS:
        return 0 if y == BONAFIDE else 1
    return y - 1


def cross_entropy(probs, y: int, cfg: LossConfig | None = None):
    """-log P_y with the probability floored at 1e-30."""
    probs = as_tensor(probs)
    k = y - 1 if cfg is None else _class_position(cfg, y)
    return -ag.log(ag.clip(probs[k], PROB_FLOOR, 1.0))


def margin_softmax_loss(cosines, y: int, cfg: LossConfig) -> Tensor:
    """Cross entropy of the margin softmax, via a stable log-softmax."""
    logp = ag.log_softmax(margin_logits(cosines, y, cfg))
    return -logp[_class_position(cfg, y)]


def sigmoid_binary(logit, y: int):
    """Bonafide probability and binary CE loss for the sigmoid head."""
    logit = as_tensor(logit)
    prob = ag.sigmoid(logit)
    loss = ag.softplus(-logit) if y == BONAFIDE else ag.softplus(logit)
    return prob, loss


def sigmoid_head_logit(o, c, bias=0.0):
    """(c1 - c2) . o + b for a two-row class matrix ``c``."""
    c = as_tensor(c)
    return (c[0] - c[1]) @ as_tensor(o) + bias


def p2sgrad_mse(cosines, y: int) -> Tensor:
    """sum_k (cos_k - 1[y = k])^2 for one trial."""
    cos = as_tensor(cosines)
    _check_cosines(cos)
    target = np.zeros(cos.shape[0])
    target[y - 1] = 1.0
    diff = cos - target
    return (diff * diff).sum()


def trial_loss(output, y: int, cfg: LossConfig) -> Tensor:
    """Per-trial loss for the configured criterion."""
    if cfg.kind == CE_SIGMOID:
        return sigmoid_binary(output, y)[1]
    if cfg.kind == P2SGRAD:
        return p2sgrad_mse(output, y)
    return margin_softmax_loss(output, y, cfg)


def dataset_loss(outputs, labels, cfg: LossConfig) -> Tensor:
    """Mean of per-trial losses, summed in ascending trial order."""
    total = None
    for out, y in zip(outputs, labels):
        term = trial_loss(out, y, cfg)
        total = term if total is None else total + term
    return total * (1.0 / len(labels))


def inference_score(output, cfg: LossConfig) -> float:
    """Higher means more bonafide: P_{j,1} for sigmoid, cos(theta_{j,1}) otherwise."""
    value = as_tensor(output).data
    if cfg.kind == CE_SIGMOID:
        return float(0.5 * (1.0 + np.tanh(0.5 * value)))
    return float(value[0])
