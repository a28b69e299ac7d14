import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spoofcm.audio_io import SignalBuffer
from spoofcm.frontend import (LFB, LFCC, SPEC, EmptySignal, FrameTooLong, FrontendConfig,
                              FrontendError, TooManyFilters, build_linear_filterbank,
                              compute_deltas, dct_ii, extract_features, frame_signal,
                              power_spectrum)


def naive_power(frame, nfft):
    n = np.arange(nfft)
    padded = np.zeros(nfft)
    padded[:len(frame)] = frame
    return np.array([abs(np.sum(padded * np.exp(-2j * np.pi * k * n / nfft))) ** 2
                     for k in range(nfft // 2 + 1)])


def naive_dct(v):
    m = len(v)
    k = np.arange(m)[:, None]
    n = np.arange(m)[None, :]
    basis = np.cos(np.pi * k * (2 * n + 1) / (2 * m))
    scale = np.full(m, np.sqrt(2.0 / m))
    scale[0] = np.sqrt(1.0 / m)
    return scale * (basis @ v)


def tone(seconds=0.5, sr=16000):
    t = np.arange(int(seconds * sr)) / sr
    return SignalBuffer(0.3 * np.sin(2 * np.pi * 1000 * t), sr)


@pytest.mark.parametrize("kind,dim", [(LFCC, 60), (LFB, 60), (SPEC, 257)])
def test_feature_dimensions(kind, dim):
    feats = extract_features(tone(), FrontendConfig(kind=kind))
    assert feats.shape == (50, dim)
    assert np.all(np.isfinite(feats))


def test_frame_count_and_layout():
    x = np.arange(10.0)
    frames = frame_signal(x, 4, 3)
    assert frames.shape == (4, 4)
    np.testing.assert_array_equal(frames[0], [0, 1, 2, 3])
    np.testing.assert_array_equal(frames[3], [9, 0, 0, 0])


def test_frame_single_sample():
    assert frame_signal(np.array([0.5]), 320, 160).shape == (1, 320)


def test_empty_signal_rejected():
    with pytest.raises(EmptySignal):
        frame_signal(np.array([]), 4, 2)


def test_frame_longer_than_fft_rejected():
    with pytest.raises(FrameTooLong):
        FrontendConfig(frame_len_ms=40.0)


def test_sample_rate_mismatch():
    with pytest.raises(FrontendError):
        extract_features(SignalBuffer(np.zeros(800), 8000))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 64), st.integers(0, 2 ** 31 - 1))
def test_power_spectrum_matches_naive_dft(length, seed):
    frame = np.random.default_rng(seed).standard_normal(length)
    fast = power_spectrum(frame, 64, "rect")
    np.testing.assert_allclose(fast, naive_power(frame, 64), rtol=0, atol=1e-9)
    # Parseval on the one-sided spectrum
    full = 2 * fast.sum() - fast[0] - fast[-1]
    assert abs(full / 64 - np.sum(frame ** 2)) < 1e-9


def test_power_spectrum_of_impulse_is_flat():
    frame = np.zeros(16)
    frame[0] = 1.0
    np.testing.assert_allclose(power_spectrum(frame, 32, "rect"), np.ones(17))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 64), st.integers(0, 2 ** 31 - 1))
def test_dct_matches_naive(m, seed):
    v = np.random.default_rng(seed).standard_normal(m)
    np.testing.assert_allclose(dct_ii(v), naive_dct(v), rtol=0, atol=1e-10)


def test_dct_of_constant():
    out = dct_ii(np.ones(4))
    np.testing.assert_allclose(out, [2.0, 0.0, 0.0, 0.0], atol=1e-15)


def test_dct_truncation():
    v = np.arange(8.0)
    np.testing.assert_array_equal(dct_ii(v, 3), dct_ii(v)[:3])
    with pytest.raises(ValueError):
        dct_ii(v, 9)


def test_deltas_of_constant_are_zero():
    np.testing.assert_array_equal(compute_deltas(np.full((7, 3), 4.2)), 0.0)


def test_deltas_of_ramp_equal_slope_in_interior():
    ramp = np.arange(12.0)[:, None] * np.array([[0.5, -2.0]])
    d = compute_deltas(ramp, 2)
    np.testing.assert_allclose(d[2:-2], np.tile([0.5, -2.0], (8, 1)), atol=1e-12)


def test_delta_edge_replication_frozen():
    # ramp 0..4, W=2: first frame sees (0,0,0,1,2) -> (1*(1-0) + 2*(2-0)) / 10
    d = compute_deltas(np.arange(5.0)[:, None], 2)
    np.testing.assert_allclose(d[:, 0], [0.5, 0.8, 1.0, 0.8, 0.5])


def test_filterbank_shape_and_peaks():
    fb = build_linear_filterbank(20, 512, 16000)
    assert fb.shape == (20, 257)
    assert np.all(fb >= 0)
    for i in range(20):
        centre = round((i + 1) * 8000 / 21 * 512 / 16000)
        assert fb[i, centre] == 1.0
        assert np.argmax(fb[i]) == centre


def test_filterbank_collision_rejected():
    with pytest.raises(TooManyFilters):
        build_linear_filterbank(300, 512, 16000)


def test_lfcc_first_coefficient_is_log_spectral_energy():
    sig = tone()
    cfg = FrontendConfig()
    feats = extract_features(sig, cfg)
    frames = frame_signal(sig, cfg.frame_len_samples, cfg.frame_shift_samples)
    energy = np.log(power_spectrum(frames, cfg.nfft, cfg.window).sum(axis=1) + cfg.log_floor)
    np.testing.assert_allclose(feats[:, 0], energy, rtol=1e-12)


def test_doubling_amplitude_shifts_energy_by_log4():
    sig = tone()
    a = extract_features(sig)
    b = extract_features(SignalBuffer(2 * sig.samples, sig.sample_rate))
    np.testing.assert_allclose(b[:, 0] - a[:, 0], np.log(4.0), atol=1e-9)
    np.testing.assert_allclose(b[10:40, 20], a[10:40, 20], atol=1e-9)


def test_on_bin_tone_concentrates_in_bin_one():
    t = np.arange(512)
    frame = np.cos(2 * np.pi * t / 512)
    spec = power_spectrum(frame, 512, "rect")
    assert np.argmax(spec) == 1
    np.testing.assert_allclose(spec[1], 256.0 ** 2, rtol=1e-12)
    assert np.max(np.delete(spec, 1)) < 1e-18


def test_lfcc_dynamics_are_deltas_of_statics():
    feats = extract_features(tone())
    np.testing.assert_allclose(feats[:, 20:40], compute_deltas(feats[:, :20]), atol=1e-12)
    np.testing.assert_allclose(feats[:, 40:60], compute_deltas(feats[:, 20:40]), atol=1e-12)


def test_silence_hits_log_floor():
    feats = extract_features(SignalBuffer(np.zeros(1600), 16000), FrontendConfig(kind=LFB))
    np.testing.assert_allclose(feats, np.log(1e-12))


def test_extraction_deterministic():
    a = extract_features(tone())
    b = extract_features(tone())
    assert a.tobytes() == b.tobytes()


def test_config_round_trip():
    cfg = FrontendConfig(kind=SPEC, window="hamming")
    assert FrontendConfig.from_dict(cfg.to_dict()) == cfg
    assert cfg.dim == 257
