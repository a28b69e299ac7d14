"""Countermeasure evaluation: EER, legacy min t-DCF, per-attack EER, score fusion.

Convention throughout: a trial is accepted as bonafide iff ``score >= t``.
"""
from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np

BONAFIDE_KEY = "bonafide"
SPOOF_KEY = "spoof"


class SingleClass(ValueError):
    pass


class DegenerateCost(ValueError):
    pass


class TrialMismatch(ValueError):
    pass


class ScoreRecord(NamedTuple):
    trial_id: str
    attack_id: str
    key: str
    score: float


def split_scores(records):
    """(bonafide scores, spoof scores) as float arrays."""
    bona = np.array([r.score for r in records if r.key == BONAFIDE_KEY], dtype=np.float64)
    spoof = np.array([r.score for r in records if r.key == SPOOF_KEY], dtype=np.float64)
    return bona, spoof


def operating_points(bona, spoof):
    """FRR and FAR at every distinct score and at +inf, thresholds ascending.

    The first point (lowest score) accepts everything; the last (+inf)
    rejects everything.
    """
    bona = np.sort(np.asarray(bona, dtype=np.float64))
    spoof = np.sort(np.asarray(spoof, dtype=np.float64))
    if bona.size == 0 or spoof.size == 0:
        raise SingleClass("need at least one bonafide and one spoof score")
    thresholds = np.unique(np.concatenate([bona, spoof]))
    n_rejected = np.searchsorted(bona, thresholds, side="left")
    n_accepted = spoof.size - np.searchsorted(spoof, thresholds, side="left")
    thresholds = np.append(thresholds, np.inf)
    return (np.append(n_rejected, bona.size) / bona.size,
            np.append(n_accepted, 0) / spoof.size, thresholds)


def eer_from_curve(frr, far, thresholds):
    """Crossing of FRR and FAR along an ascending threshold sweep.

    An operating point with FRR == FAR gives the EER directly; otherwise the
    EER is the mean of (FRR + FAR) / 2 at the two points bracketing the sign
    change of FRR - FAR, and the threshold is the midpoint between them.
    """
    diff = frr - far
    exact = np.flatnonzero(np.isclose(diff, 0.0, rtol=0.0, atol=1e-12))
    if exact.size:
        i = exact[0]
        return float(frr[i]), float(thresholds[i])
    i = int(np.flatnonzero(diff > 0.0)[0]) - 1
    eer = 0.5 * (0.5 * (frr[i] + far[i]) + 0.5 * (frr[i + 1] + far[i + 1]))
    hi = thresholds[i + 1]
    if not np.isfinite(hi):
        hi = np.nextafter(thresholds[i], np.inf)
    return float(eer), float(0.5 * (thresholds[i] + hi))


def compute_eer_arrays(bona, spoof):
    eer, threshold = eer_from_curve(*operating_points(bona, spoof))
    if eer > 0.5:
        warnings.warn(f"EER {eer:.4f} exceeds 0.5; scores may be inverted", stacklevel=3)
    return eer, threshold


def compute_eer(records):
    """Equal error rate and its threshold for a collection of ScoreRecords."""
    return compute_eer_arrays(*split_scores(records))


@dataclass(frozen=True)
class TDCFCostModel:
    """Priors, costs and fixed ASV operating rates of the legacy t-DCF.

    Priors and costs default to the ASVspoof 2019 evaluation-plan values.
    The ASV rates depend on the ASV system and its score files and must be
    supplied; the defaults here are illustrative only.
    """
    p_tar: float = 0.95 * 0.99
    p_non: float = 0.95 * 0.01
    p_spoof: float = 0.05
    c_miss_asv: float = 1.0
    c_fa_asv: float = 10.0
    c_miss_cm: float = 1.0
    c_fa_cm: float = 10.0
    p_fa_asv: float = 0.01
    p_miss_asv: float = 0.01
    p_miss_spoof_asv: float = 0.1

    def __post_init__(self):
        priors = (self.p_tar, self.p_non, self.p_spoof)
        if min(priors) < 0 or abs(sum(priors) - 1.0) > 1e-9:
            raise ValueError("priors must be non-negative and sum to 1")
        costs = (self.c_miss_asv, self.c_fa_asv, self.c_miss_cm, self.c_fa_cm)
        if min(costs) <= 0:
            raise ValueError("costs must be positive")
        rates = (self.p_fa_asv, self.p_miss_asv, self.p_miss_spoof_asv)
        if min(rates) < 0 or max(rates) > 1:
            raise ValueError("ASV rates must lie in [0, 1]")

    def coefficients(self):
        """(C1, C2) weighting the CM miss and false-alarm rates."""
        c1 = (self.p_tar * (self.c_miss_cm - self.c_miss_asv * self.p_miss_asv)
              - self.p_non * self.c_fa_asv * self.p_fa_asv)
        c2 = self.c_fa_cm * self.p_spoof * (1.0 - self.p_miss_spoof_asv)
        return c1, c2

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TDCFCostModel":
        return cls(**d)


def tdcf_curve(bona, spoof, cost: TDCFCostModel):
    """Normalized t-DCF at every CM operating point, with the thresholds."""
    c1, c2 = cost.coefficients()
    if c1 <= 0 or c2 <= 0:
        raise DegenerateCost(f"t-DCF coefficients must be positive, got C1={c1}, C2={c2}")
    p_miss, p_fa, thresholds = operating_points(bona, spoof)
    return (c1 * p_miss + c2 * p_fa) / min(c1, c2), thresholds


def compute_min_tdcf(records, cost: TDCFCostModel = TDCFCostModel()):
    """Minimum normalized legacy t-DCF over all CM thresholds."""
    curve, _ = tdcf_curve(*split_scores(records), cost)
    return float(curve.min())


def per_attack_breakdown(records) -> dict:
    """EER per attack (all bonafide vs that attack's spoofs) plus ``pooled``."""
    records = list(records)
    bona = [r for r in records if r.key == BONAFIDE_KEY]
    attacks = sorted({r.attack_id for r in records if r.key == SPOOF_KEY})
    if not attacks:
        raise SingleClass("no spoof records to break down")
    out = {}
    for attack in attacks:
        subset = bona + [r for r in records if r.key == SPOOF_KEY and r.attack_id == attack]
        out[attack] = compute_eer(subset)[0]
    out["pooled"] = compute_eer(records)[0]
    return out


def fuse_scores(score_sets) -> list:
    """Per-trial arithmetic mean of scores across systems."""
    score_sets = [list(s) for s in score_sets]
    if not score_sets:
        raise TrialMismatch("nothing to fuse")
    first = score_sets[0]
    lookups = []
    for s in score_sets:
        table = {r.trial_id: r for r in s}
        if len(table) != len(s) or table.keys() != {r.trial_id for r in first}:
            raise TrialMismatch("score sets cover different trials")
        lookups.append(table)
    fused = []
    for r in first:
        mean = float(np.mean([t[r.trial_id].score for t in lookups]))
        fused.append(ScoreRecord(r.trial_id, r.attack_id, r.key, mean))
    return fused


@dataclass
class EvalReport:
    eer: float
    eer_threshold: float
    min_tdcf: float | None
    per_attack: dict = field(default_factory=dict)
    n_bonafide: int = 0
    n_spoof: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def evaluate(records, cost: TDCFCostModel | None = TDCFCostModel()) -> EvalReport:
    records = list(records)
    bona, spoof = split_scores(records)
    eer, threshold = compute_eer_arrays(bona, spoof)
    min_tdcf = None
    if cost is not None:
        min_tdcf = float(tdcf_curve(bona, spoof, cost)[0].min())
    return EvalReport(eer, threshold, min_tdcf, per_attack_breakdown(records),
                      int(bona.size), int(spoof.size))
