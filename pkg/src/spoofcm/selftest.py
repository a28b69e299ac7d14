"""Quick gradient-check and oracle suite behind ``spoofcm selftest``."""
from __future__ import annotations

import numpy as np

from .backend_models import POOL_ATTENTION, POOL_MEAN, TRIM_PAD, BackendConfig, init_params, model_outputs
from .frontend import build_linear_filterbank, compute_deltas, dct_ii, power_spectrum
from .losses import PRESETS, trial_loss
from .metrics import compute_eer_arrays
from .nn_core import finite_difference_check
from .stats import holm_bonferroni, normal_cdf, normal_quantile


def _naive_dct(v, n_out):
    m = len(v)
    out = np.zeros(n_out)
    for k in range(n_out):
        scale = np.sqrt(1.0 / m) if k == 0 else np.sqrt(2.0 / m)
        out[k] = scale * sum(v[n] * np.cos(np.pi * k * (2 * n + 1) / (2 * m)) for n in range(m))
    return out


def _naive_power(frame, nfft):
    n = np.arange(nfft)
    padded = np.zeros(nfft)
    padded[:len(frame)] = frame
    return np.array([abs(np.sum(padded * np.exp(-2j * np.pi * k * n / nfft))) ** 2
                     for k in range(nfft // 2 + 1)])


def check_gradients(rng):
    worst = 0.0
    for strategy in (POOL_MEAN, POOL_ATTENTION, TRIM_PAD):
        cfg = BackendConfig(strategy=strategy, trim_len=8, conv_widths=(4, 4), embed_dim=6)
        for name, loss_cfg in PRESETS.items():
            params = init_params(cfg, 5, loss_cfg.head, rng)
            x = rng.standard_normal((7, 5))
            y = int(rng.integers(1, 3))

            def fn(p, x=x, y=y, cfg=cfg, loss_cfg=loss_cfg):
                return trial_loss(model_outputs(x, cfg, p, loss_cfg.head)[0], y, loss_cfg)

            worst = max(worst, finite_difference_check(fn, params, max_coords=6, rng=rng))
    return worst < 1e-5, f"max relative error {worst:.2e}"


def check_frontend(rng):
    frame = rng.standard_normal(40)
    spec_err = np.max(np.abs(power_spectrum(frame, 64, "rect") - _naive_power(frame, 64)))
    v = rng.standard_normal(8)
    dct_err = np.max(np.abs(dct_ii(v, 8) - _naive_dct(v, 8)))
    ramp = np.arange(10.0)[:, None] * 0.5
    delta_err = np.max(np.abs(compute_deltas(ramp, 2)[2:-2] - 0.5))
    fb = build_linear_filterbank(20, 512, 16000)
    ok = spec_err < 1e-9 and dct_err < 1e-10 and delta_err < 1e-12 and fb.max() == 1.0
    return ok, f"dft {spec_err:.1e}, dct {dct_err:.1e}, delta {delta_err:.1e}"


def check_metrics(rng):
    eer, _ = compute_eer_arrays(np.array([0.9, 0.8, 0.3]), np.array([0.7, 0.2, 0.1]))
    flags = holm_bonferroni([0.01, 0.02, 0.2], 0.05)
    q = normal_quantile(0.975)
    ok = (abs(eer - 1 / 3) < 1e-12 and flags.tolist() == [True, True, False]
          and abs(q - 1.959964) < 1e-5 and abs(normal_cdf(q) - 0.975) < 1e-10)
    return ok, f"eer {eer:.6f}, q(0.975) {q:.6f}"


CHECKS = {
    "gradients": check_gradients,
    "frontend": check_frontend,
    "metrics": check_metrics,
}


def run_selftest(seed: int = 0, out=print) -> bool:
    rng = np.random.default_rng(seed)
    passed = True
    for name, check in CHECKS.items():
        ok, detail = check(rng)
        out(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
        passed &= ok
    return passed
