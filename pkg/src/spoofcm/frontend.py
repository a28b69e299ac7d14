"""Spectrogram, linear filter-bank (LFB) and LFCC front ends.

All three share the same framing: 20 ms frames, 10 ms shift, 512-point FFT.
Computation is float64 throughout; see ``audio_io`` for the float32 cache.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from functools import lru_cache

import numpy as np
import scipy.fft
import scipy.signal

from .audio_io import SignalBuffer

SPEC, LFB, LFCC = "SPEC", "LFB", "LFCC"
FEATURE_DIMS = {SPEC: 257, LFB: 60, LFCC: 60}


class FrontendError(ValueError):
    pass


class EmptySignal(FrontendError):
    pass


class FrameTooLong(FrontendError):
    pass


class TooManyFilters(FrontendError):
    pass


@dataclass(frozen=True)
class FrontendConfig:
    sample_rate: int = 16000
    frame_len_ms: float = 20.0
    frame_shift_ms: float = 10.0
    nfft: int = 512
    kind: str = LFCC
    lfb_channels: int = 60
    lfcc_channels: int = 20
    lfcc_ceps: int = 20
    delta_window: int = 2
    log_floor: float = 1e-12
    window: str = "hann"

    def __post_init__(self):
        if self.kind not in FEATURE_DIMS:
            raise FrontendError(f"unknown front end {self.kind!r}")
        if self.frame_len_samples > self.nfft:
            raise FrameTooLong(
                f"frame of {self.frame_len_samples} samples exceeds nfft={self.nfft}")
        if self.frame_shift_samples < 1:
            raise FrontendError("frame shift must be at least one sample")
        if self.lfcc_ceps > self.lfcc_channels:
            raise FrontendError("lfcc_ceps must not exceed lfcc_channels")
        if self.delta_window < 1:
            raise FrontendError("delta_window must be >= 1")
        if self.log_floor <= 0:
            raise FrontendError("log_floor must be positive")

    @property
    def frame_len_samples(self) -> int:
        return int(round(self.sample_rate * self.frame_len_ms / 1000.0))

    @property
    def frame_shift_samples(self) -> int:
        return int(round(self.sample_rate * self.frame_shift_ms / 1000.0))

    @property
    def dim(self) -> int:
        if self.kind == SPEC:
            return self.nfft // 2 + 1
        if self.kind == LFB:
            return self.lfb_channels
        return 3 * self.lfcc_ceps

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "FrontendConfig":
        return cls(**d)


def frame_signal(signal, frame_len: int, shift: int) -> np.ndarray:
    """Slice a signal into overlapping frames, zero-padding the tail.

    Frame ``m`` starts at ``m * shift``; one frame is emitted for every start
    index inside the signal, so there are ``ceil(len / shift)`` frames.
    """
    x = signal.samples if isinstance(signal, SignalBuffer) else np.asarray(signal, float)
    if x.size < 1:
        raise EmptySignal("cannot frame an empty signal")
    n_frames = math.ceil(x.size / shift)
    padded = np.zeros((n_frames - 1) * shift + frame_len)
    padded[:x.size] = x[:padded.size]
    idx = np.arange(frame_len)[None, :] + shift * np.arange(n_frames)[:, None]
    return padded[idx]


@lru_cache(maxsize=32)
def _window(name: str, length: int) -> np.ndarray:
    if name in ("rect", "rectangular", "boxcar"):
        w = np.ones(length)
    else:
        w = scipy.signal.get_window(name, length, fftbins=True)
    w.setflags(write=False)
    return w


def power_spectrum(frames, nfft: int = 512, window: str = "hann") -> np.ndarray:
    """|DFT|^2 of windowed, zero-padded frames for bins 0..nfft/2.

    Accepts a single frame (1-d) or a stack of frames (2-d, one per row).
    """
    frames = np.asarray(frames, dtype=np.float64)
    if frames.shape[-1] > nfft:
        raise FrameTooLong(f"frame length {frames.shape[-1]} > nfft {nfft}")
    windowed = frames * _window(window, frames.shape[-1])
    spec = np.fft.rfft(windowed, n=nfft, axis=-1)
    return spec.real ** 2 + spec.imag ** 2


@lru_cache(maxsize=16)
def _filterbank(num_filters: int, nfft: int, sample_rate: int) -> np.ndarray:
    n_bins = nfft // 2 + 1
    edges_hz = np.linspace(0.0, sample_rate / 2.0, num_filters + 2)
    edges = np.round(edges_hz * nfft / sample_rate).astype(int)
    if np.any(np.diff(edges) < 1):
        raise TooManyFilters(
            f"{num_filters} filters collide on a {nfft}-point FFT grid")
    fb = np.zeros((num_filters, n_bins))
    bins = np.arange(n_bins)
    for i in range(num_filters):
        lo, mid, hi = edges[i], edges[i + 1], edges[i + 2]
        rise = (bins - lo) / (mid - lo)
        fall = (hi - bins) / (hi - mid)
        fb[i] = np.clip(np.minimum(rise, fall), 0.0, None)
    fb.setflags(write=False)
    return fb


def build_linear_filterbank(num_filters: int, nfft: int = 512,
                            sample_rate: int = 16000) -> np.ndarray:
    """Triangular filters with linearly spaced edges from 0 Hz to Nyquist.

    Each row peaks at exactly 1.0 on its (rounded) center bin and falls to 0
    at the neighbouring centers.
    """
    if num_filters < 1:
        raise TooManyFilters("need at least one filter")
    return _filterbank(num_filters, nfft, sample_rate).copy()


def dct_ii(v, n_out: int | None = None) -> np.ndarray:
    """Orthonormal DCT-II along the last axis, truncated to ``n_out`` terms."""
    v = np.asarray(v, dtype=np.float64)
    m = v.shape[-1]
    n_out = m if n_out is None else n_out
    if not 1 <= n_out <= m:
        raise ValueError(f"n_out must be in [1, {m}], got {n_out}")
    return scipy.fft.dct(v, type=2, norm="ortho", axis=-1)[..., :n_out]


def compute_deltas(static, window: int = 2) -> np.ndarray:
    """Regression deltas over time (rows), replicating the edge frames."""
    x = np.asarray(static, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 1:
        raise ValueError("expected an N x d matrix with N >= 1")
    n = x.shape[0]
    padded = np.concatenate([np.repeat(x[:1], window, axis=0), x,
                             np.repeat(x[-1:], window, axis=0)])
    out = np.zeros_like(x)
    for w in range(1, window + 1):
        out += w * (padded[window + w:window + w + n] - padded[window - w:window - w + n])
    return out / (2.0 * sum(w * w for w in range(1, window + 1)))


def extract_features(signal: SignalBuffer, cfg: FrontendConfig = FrontendConfig()) -> np.ndarray:
    """Compute an N x D feature matrix for one trial."""
    if signal.sample_rate != cfg.sample_rate:
        raise FrontendError(
            f"signal at {signal.sample_rate} Hz, front end expects {cfg.sample_rate} Hz")
    frames = frame_signal(signal, cfg.frame_len_samples, cfg.frame_shift_samples)
    power = power_spectrum(frames, cfg.nfft, cfg.window)
    floor = cfg.log_floor

    if cfg.kind == SPEC:
        return np.log(power + floor)
    if cfg.kind == LFB:
        fb = _filterbank(cfg.lfb_channels, cfg.nfft, cfg.sample_rate)
        return np.log(power @ fb.T + floor)

    fb = _filterbank(cfg.lfcc_channels, cfg.nfft, cfg.sample_rate)
    static = dct_ii(np.log(power @ fb.T + floor), cfg.lfcc_ceps)
    static[:, 0] = np.log(power.sum(axis=1) + floor)
    delta = compute_deltas(static, cfg.delta_window)
    delta2 = compute_deltas(delta, cfg.delta_window)
    return np.concatenate([static, delta, delta2], axis=1)
