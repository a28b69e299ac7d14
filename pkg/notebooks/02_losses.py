"""
Training criteria side by side
==============================

Cosine logits with and without margins, the one-class variant, and the
P2SGrad MSE loss.
"""

# %%
import math

import numpy as np

from spoofcm.autograd import parameter
from spoofcm.losses import margin_softmax_loss, margin_softmax_probs, p2sgrad_mse, preset
from spoofcm.nn_core import cosine_scores

cos = np.array([0.8, 0.1])

# %%
# AM-softmax: alpha = 20 and a margin of 0.9 on the target class.
p = margin_softmax_probs(cos, 1, preset("am")).data
print("AM  P(bonafide) =", p[0], " closed form", math.exp(-2) / (math.exp(-2) + math.exp(2)))
print("CE  P(bonafide) =", margin_softmax_probs(cos, 1, preset("ce")).data[0])

# %%
# OC-softmax only looks at the bonafide cosine: pushed above 0.9 for
# bonafide trials, below 0.2 for spoofs.
for c1 in (0.95, 0.5, 0.1):
    b = margin_softmax_loss(np.array([c1, 0.0]), 1, preset("oc")).data
    s = margin_softmax_loss(np.array([c1, 0.0]), 2, preset("oc")).data
    print(f"cos1={c1:4.2f}  loss if bonafide {b:7.3f}  loss if spoof {s:7.3f}")

# %%
# P2SGrad: squared distance between cosines and the one-hot target.
rng = np.random.default_rng(0)
o = parameter(rng.standard_normal(64))
classes = rng.standard_normal((2, 64))
cosines = cosine_scores(o, classes)
loss = p2sgrad_mse(cosines, 1)
loss.backward()
print("cosines", np.round(cosines.data, 3), "loss", round(float(loss.data), 4))

# A small step against the gradient raises the target cosine.
stepped = cosine_scores(o.data - 0.05 * o.grad, classes).data
print("target cosine before %.4f after %.4f" % (cosines.data[0], stepped[0]))
