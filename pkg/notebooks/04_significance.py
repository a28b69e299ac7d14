"""
Is one run really better than another?
======================================

Pairwise z-tests between EERs, corrected for the number of comparisons.
The counts mimic an evaluation set with 7355 bonafide and 63882 spoof trials.
"""

# %%
import numpy as np

from spoofcm.stats import (EERObservation, intra_model_summary, significance_matrix,
                           two_sided_p, z_statistic)

z = z_statistic(0.0192, 0.05, 1000, 9000)
print("z = %.4f, two-sided p = %.2e" % (z, two_sided_p(z)))

# %%
eers = {"lfcc-p2s": [0.0192, 0.0211, 0.0305, 0.0198, 0.0240, 0.0225],
        "lfb-sig": [0.0455, 0.0380, 0.0512, 0.0391, 0.0420, 0.0468]}
obs = [EERObservation(model, k, e, 7355, 63882)
       for model, runs in eers.items() for k, e in enumerate(runs, 1)]
matrix = significance_matrix(obs, alpha_level=0.05)

# %%
# Text rendering of the grid: '#' marks a significant difference.
for label, row in zip(matrix.labels, matrix.reject):
    print(f"{label:14s}", "".join("#" if r else "." for r in row))

# %%
for model, entry in intra_model_summary(obs, matrix).items():
    print(model, "EER spread %.2f %%," % (100 * entry["spread"]),
          entry["significant_pairs"], "significant run pairs")
print("significant pairs overall:", int(np.triu(matrix.reject, 1).sum()), "of",
      len(obs) * (len(obs) - 1) // 2)
