"""Pairwise EER significance tests with Holm-Bonferroni correction."""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path

import numpy as np

SQRT2 = math.sqrt(2.0)


class DegenerateVariance(ZeroDivisionError):
    pass


class OutOfRange(ValueError):
    pass


@dataclass(frozen=True)
class EERObservation:
    model_id: str
    run_index: int
    eer: float
    n_bona: int
    n_spoof: int

    def __post_init__(self):
        if self.n_bona <= 0 or self.n_spoof <= 0:
            raise ValueError("trial counts must be positive")
        if not 0.0 <= self.eer <= 1.0:
            raise ValueError(f"EER {self.eer} outside [0, 1]")

    @property
    def label(self) -> str:
        return f"{self.model_id}/{roman(self.run_index)}"


def roman(n: int) -> str:
    table = [(10, "X"), (9, "IX"), (5, "V"), (4, "IV"), (1, "I")]
    out = ""
    for value, glyph in table:
        while n >= value:
            out += glyph
            n -= value
    return out


def z_statistic(eer_a, eer_b, n_bona, n_spoof) -> float:
    """Two-proportion z value for the difference of two EERs."""
    if n_bona <= 0 or n_spoof <= 0:
        raise ValueError("trial counts must be positive")
    var = (eer_a * (1 - eer_a) + eer_b * (1 - eer_b)) * (n_bona + n_spoof) / (n_bona * n_spoof)
    if var <= 0:
        raise DegenerateVariance(f"zero variance for EERs {eer_a}, {eer_b}")
    return 2.0 * abs(eer_a - eer_b) / math.sqrt(var)


def normal_cdf(z: float) -> float:
    return 0.5 * math.erfc(-z / SQRT2)


def normal_sf(z: float) -> float:
    """Upper tail 1 - Phi(z), accurate far into the tail."""
    return 0.5 * math.erfc(z / SQRT2)


def normal_quantile(p: float) -> float:
    """Inverse standard normal CDF by bisection followed by Newton polishing."""
    if not 0.0 < p < 1.0:
        raise OutOfRange(f"p must lie in (0, 1), got {p}")
    lo, hi = -40.0, 40.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if normal_cdf(mid) < p:
            lo = mid
        else:
            hi = mid
    z = 0.5 * (lo + hi)
    for _ in range(3):
        # work in the smaller tail to keep the residual well conditioned
        resid = normal_cdf(z) - p if p < 0.5 else (1.0 - p) - normal_sf(z)
        z -= resid / (math.exp(-0.5 * z * z) / math.sqrt(2 * math.pi))
    return z


def two_sided_p(z: float) -> float:
    return math.erfc(abs(z) / SQRT2)


def holm_bonferroni(p_values, alpha_level=0.05) -> np.ndarray:
    """Step-down Holm procedure; reject flags in the input order."""
    p = np.asarray(p_values, dtype=np.float64)
    m = p.size
    reject = np.zeros(m, dtype=bool)
    for rank, idx in enumerate(np.argsort(p, kind="stable")):
        if p[idx] > alpha_level / (m - rank):
            break
        reject[idx] = True
    return reject


@dataclass
class SignificanceMatrix:
    labels: list
    z: np.ndarray
    p: np.ndarray
    reject: np.ndarray
    alpha_level: float

    def to_dict(self) -> dict:
        return {
            "alpha_level": self.alpha_level,
            "labels": list(self.labels),
            "z": np.where(np.isfinite(self.z), self.z, None).tolist(),
            "p": self.p.tolist(),
            "reject": self.reject.tolist(),
        }

    def to_pgm(self, cell: int = 8, dark: int = 64) -> bytes:
        """Binary PGM: significant cells dark grey, everything else white."""
        grid = np.where(self.reject, dark, 255).astype(np.uint8)
        img = np.kron(grid, np.ones((cell, cell), dtype=np.uint8))
        h, w = img.shape
        return f"P5\n{w} {h}\n255\n".encode("ascii") + img.tobytes()

    def write_pgm(self, path, cell: int = 8) -> None:
        Path(path).write_bytes(self.to_pgm(cell))


def _pair_z(a: EERObservation, b: EERObservation) -> float:
    try:
        return z_statistic(a.eer, b.eer, a.n_bona, a.n_spoof)
    except DegenerateVariance:
        return 0.0 if a.eer == b.eer else math.inf


def significance_matrix(observations, alpha_level=0.05) -> SignificanceMatrix:
    """Pairwise z tests over all observations, Holm-corrected as one family."""
    obs = list(observations)
    if len(obs) < 2:
        raise ValueError("need at least two observations")
    if len({(o.n_bona, o.n_spoof) for o in obs}) != 1:
        raise ValueError("observations must share trial counts")
    n = len(obs)
    z = np.zeros((n, n))
    p = np.ones((n, n))
    pairs = list(combinations(range(n), 2))
    pvals = []
    for i, j in pairs:
        z[i, j] = z[j, i] = _pair_z(obs[i], obs[j])
        p[i, j] = p[j, i] = two_sided_p(z[i, j])
        pvals.append(p[i, j])
    flags = holm_bonferroni(pvals, alpha_level)
    reject = np.zeros((n, n), dtype=bool)
    for (i, j), flag in zip(pairs, flags):
        reject[i, j] = reject[j, i] = flag
    return SignificanceMatrix([o.label for o in obs], z, p, reject, alpha_level)


def intra_model_summary(observations, matrix: SignificanceMatrix | None = None) -> dict:
    """Per-model EER range over runs and the number of significant run pairs."""
    obs = list(observations)
    out = {}
    for model in dict.fromkeys(o.model_id for o in obs):
        idx = [i for i, o in enumerate(obs) if o.model_id == model]
        eers = [obs[i].eer for i in idx]
        entry = {"runs": len(idx), "min_eer": min(eers), "max_eer": max(eers),
                 "spread": max(eers) - min(eers)}
        if matrix is not None:
            entry["significant_pairs"] = int(sum(
                matrix.reject[i, j] for i, j in combinations(idx, 2)))
        out[model] = entry
    return out
