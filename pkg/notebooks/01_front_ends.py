"""
Front ends on a synthetic trial
===============================

A bonafide trial and its 4-bit quantized twin go through the three
front ends. The quantization noise is broadband, so it shows up in the
high-frequency filterbank channels.
"""

# %%
import numpy as np

from spoofcm.frontend import LFB, LFCC, SPEC, FrontendConfig, extract_features
from spoofcm.training import generate_synthetic_dataset

bona, spoof = generate_synthetic_dataset(seed=0, n_per_class=1, duration_range=(1.0, 1.0))
print(bona.trial_id, len(bona.signal), "samples")

# %%
# Shapes: one row per 10 ms frame.
for kind in (SPEC, LFB, LFCC):
    feats = extract_features(bona.signal, FrontendConfig(kind=kind))
    print(f"{kind:5s} {feats.shape}")

# %%
# Mean log energy per LFB channel, low and high bands.
cfg = FrontendConfig(kind=LFB)
fb_bona = extract_features(bona.signal, cfg).mean(axis=0)
fb_spoof = extract_features(spoof.signal, cfg).mean(axis=0)
print("channels  0-9  bona %.2f  spoof %.2f" % (fb_bona[:10].mean(), fb_spoof[:10].mean()))
print("channels 50-59 bona %.2f  spoof %.2f" % (fb_bona[50:].mean(), fb_spoof[50:].mean()))

# %%
# LFCC layout: 20 statics (first one is log energy), 20 deltas, 20 delta-deltas.
lfcc = extract_features(bona.signal)
print("energy track (first 5 frames):", np.round(lfcc[:5, 0], 2))
print("delta block mean |x|:", np.abs(lfcc[:, 20:40]).mean().round(3))
