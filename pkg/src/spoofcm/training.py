"""Deterministic training harness and a synthetic stand-in corpus.

One ``numpy.random.Generator`` per run, seeded with the run seed, is consumed
in this fixed order: parameter initialisation, then for every epoch the batch
shuffle followed by trim/pad window draws in batch order. Scoring uses its
own generator seeded with the evaluation seed.
"""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.signal

from . import autograd as ag
from .audio_io import SignalBuffer
from .backend_models import BackendConfig, init_params, model_inputs, backend_forward, head_forward
from .frontend import FrontendConfig, build_linear_filterbank, extract_features, SPEC
from .losses import BONAFIDE, SPOOF, LossConfig, inference_score, trial_loss
from .metrics import BONAFIDE_KEY, SPOOF_KEY, ScoreRecord

log = logging.getLogger(__name__)


class NonFiniteGradient(ArithmeticError):
    pass


class DivergedLoss(ArithmeticError):
    pass


@dataclass
class OptimizerState:
    m: dict
    v: dict
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, params: dict) -> "OptimizerState":
        return cls({k: np.zeros_like(v) for k, v in params.items()},
                   {k: np.zeros_like(v) for k, v in params.items()})


def adam_step(params: dict, grads: dict, state: OptimizerState, lr: float):
    """One bias-corrected Adam update. Returns new (params, state); inputs untouched."""
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradient(f"non-finite gradient for {name}")
    t = state.t + 1
    b1, b2 = state.beta1, state.beta2
    new_params, new_m, new_v = {}, {}, {}
    for name, value in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(value)
        m = b1 * state.m[name] + (1 - b1) * g
        v = b2 * state.v[name] + (1 - b2) * g * g
        m_hat = m / (1 - b1 ** t)
        v_hat = v / (1 - b2 ** t)
        new_params[name] = value - lr * m_hat / (np.sqrt(v_hat) + state.eps)
        new_m[name], new_v[name] = m, v
    return new_params, OptimizerState(new_m, new_v, t, b1, b2, state.eps)


def lr_at_epoch(epoch: int, lr0: float = 3e-4, halve_every: int = 10) -> float:
    if epoch < 0:
        raise ValueError("epoch must be non-negative")
    return lr0 * 0.5 ** (epoch // halve_every)


def run_seed(k: int) -> int:
    """Seed of the k-th training run (1-based): 10^(k-1)."""
    if k < 1:
        raise ValueError("run index is 1-based")
    return 10 ** (k - 1)


def make_batches(durations, batch_size: int, rng) -> list:
    """Sort by duration, cut into contiguous batches, shuffle the batch order."""
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    order = np.argsort(np.asarray(durations), kind="stable")
    batches = [order[i:i + batch_size].tolist() for i in range(0, order.size, batch_size)]
    return [batches[i] for i in rng.permutation(len(batches))]


@dataclass
class Trial:
    trial_id: str
    attack_id: str
    key: str
    signal: SignalBuffer
    speaker_id: str = "SYN"

    @property
    def label(self) -> int:
        return BONAFIDE if self.key == BONAFIDE_KEY else SPOOF


def quantize(samples, bits: int = 4) -> np.ndarray:
    """Uniform mid-tread quantizer on [-1, 1) with 2^bits levels."""
    step = 2.0 / 2 ** bits
    q = np.round(np.asarray(samples) / step) * step
    return np.clip(q, -1.0, 1.0 - step)


def _bonafide_waveform(rng, n: int, sample_rate: int) -> np.ndarray:
    t = np.arange(n) / sample_rate
    f0 = rng.uniform(100.0, 400.0)
    x = np.zeros(n)
    for k in (1, 2, 3):
        x += rng.uniform(0.2, 1.0) * np.sin(2 * np.pi * k * f0 * t + rng.uniform(0, 2 * np.pi))
    b, a = scipy.signal.butter(4, 1000.0 / (sample_rate / 2))
    x += 0.3 * scipy.signal.lfilter(b, a, rng.standard_normal(n))
    return 0.8 * x / np.max(np.abs(x))


def generate_synthetic_dataset(seed: int, n_per_class: int, sample_rate: int = 16000,
                               duration_range=(1.0, 4.0), bits: int = 4) -> list:
    """Paired bonafide/spoof trials.

    Bonafide trial ``i`` is three harmonics of a random fundamental plus
    low-pass noise; spoof trial ``i`` is the same waveform quantized to
    ``bits`` bits. Trials are returned bonafide first, then spoof.
    """
    if n_per_class < 1:
        raise ValueError("n_per_class must be >= 1")
    rng = np.random.default_rng(seed)
    bona, spoof = [], []
    for i in range(n_per_class):
        n = int(round(rng.uniform(*duration_range) * sample_rate))
        x = _bonafide_waveform(rng, n, sample_rate)
        bona.append(Trial(f"SYN_B_{i:05d}", "-", BONAFIDE_KEY, SignalBuffer(x, sample_rate)))
        spoof.append(Trial(f"SYN_S_{i:05d}", f"Q{bits}", SPOOF_KEY,
                           SignalBuffer(quantize(x, bits), sample_rate)))
    return bona + spoof


def split_corpus(corpus, n_test_per_class: int):
    """Hold out the last ``n_test_per_class`` trials of each class."""
    bona = [t for t in corpus if t.key == BONAFIDE_KEY]
    spoof = [t for t in corpus if t.key == SPOOF_KEY]
    k = n_test_per_class
    return bona[:-k] + spoof[:-k], bona[-k:] + spoof[-k:]


@dataclass(frozen=True)
class TrainRunConfig:
    seed: int = 1
    batch_size: int = 8
    epochs: int = 30
    lr0: float = 3e-4
    halve_every: int = 10
    eval_seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch_size and epochs must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainRunConfig":
        return cls(**d)


@dataclass
class TrainResult:
    params: dict
    log: list = field(default_factory=list)

    def log_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["epoch", "lr", "mean_loss"])
        for epoch, lr, loss in self.log:
            writer.writerow([epoch, repr(lr), repr(loss)])
        return buf.getvalue()


def extract_corpus(corpus, frontend: FrontendConfig) -> list:
    return [extract_features(t.signal, frontend) for t in corpus]


def _trial_objective(x, y, backend, loss_cfg, tensors, rng):
    outputs = [head_forward(backend_forward(inp, backend, tensors), tensors, loss_cfg.head)
               for inp in model_inputs(x, backend, rng)]
    total = trial_loss(outputs[0], y, loss_cfg)
    for out in outputs[1:]:
        total = total + trial_loss(out, y, loss_cfg)
    return total * (1.0 / len(outputs))


def init_model(backend: BackendConfig, loss_cfg: LossConfig, input_dim: int, rng,
               frontend: FrontendConfig | None = None) -> dict:
    filterbank = None
    if backend.compress_input and frontend is not None and frontend.kind == SPEC:
        filterbank = build_linear_filterbank(backend.compress_dim, frontend.nfft,
                                             frontend.sample_rate)
    return init_params(backend, input_dim, loss_cfg.head, rng, filterbank)


def train_model(corpus, frontend: FrontendConfig, backend: BackendConfig,
                loss_cfg: LossConfig, run: TrainRunConfig, features=None) -> TrainResult:
    """Train one countermeasure. ``features`` may carry precomputed matrices."""
    features = extract_corpus(corpus, frontend) if features is None else features
    labels = [t.label for t in corpus]
    durations = [f.shape[0] for f in features]
    rng = np.random.default_rng(run.seed)
    params = init_model(backend, loss_cfg, features[0].shape[1], rng, frontend)
    state = OptimizerState.zeros_like(params)
    result = TrainResult(params)

    for epoch in range(run.epochs):
        lr = lr_at_epoch(epoch, run.lr0, run.halve_every)
        epoch_total = 0.0
        for batch in make_batches(durations, run.batch_size, rng):
            tensors = {k: ag.parameter(v, name=k) for k, v in params.items()}
            loss = None
            for idx in sorted(batch):  # ascending trial order
                term = _trial_objective(features[idx], labels[idx], backend, loss_cfg,
                                        tensors, rng)
                loss = term if loss is None else loss + term
            value = float(loss.data)
            if not np.isfinite(value):
                raise DivergedLoss(f"loss became {value} at epoch {epoch}")
            epoch_total += value
            (loss * (1.0 / len(batch))).backward()
            grads = {k: t.grad for k, t in tensors.items() if t.grad is not None}
            params, state = adam_step(params, grads, state, lr)
        mean_loss = epoch_total / len(features)
        result.log.append((epoch, lr, mean_loss))
        log.info("epoch %d lr %.3g loss %.5f", epoch, lr, mean_loss)

    result.params = params
    return result


def score_features(features, params, backend: BackendConfig, loss_cfg: LossConfig,
                   eval_seed: int = 0) -> list:
    """Bonafide-ness score for each feature matrix (chunk scores averaged)."""
    rng = np.random.default_rng(eval_seed)
    scores = []
    for x in features:
        chunk_scores = [inference_score(head_forward(backend_forward(inp, backend, params),
                                                     params, loss_cfg.head), loss_cfg)
                        for inp in model_inputs(x, backend, rng)]
        scores.append(float(np.mean(chunk_scores)))
    return scores


def score_trials(corpus, params, frontend: FrontendConfig, backend: BackendConfig,
                 loss_cfg: LossConfig, eval_seed: int = 0, features=None) -> list:
    features = extract_corpus(corpus, frontend) if features is None else features
    scores = score_features(features, params, backend, loss_cfg, eval_seed)
    return [ScoreRecord(t.trial_id, t.attack_id, t.key, s) for t, s in zip(corpus, scores)]
