"""Speech anti-spoofing countermeasure toolkit.

Front ends (spectrogram, LFB, LFCC), tiny back ends for varied-length input,
margin/sigmoid/P2SGrad training criteria, and the evaluation stack (EER,
legacy min t-DCF, pairwise z-tests with Holm-Bonferroni correction).
"""
from .audio_io import SignalBuffer, read_wav, read_feature_cache, write_feature_cache
from .backend_models import BackendConfig
from .frontend import FrontendConfig, extract_features
from .losses import LossConfig, preset
from .metrics import ScoreRecord, TDCFCostModel, compute_eer, compute_min_tdcf
from .stats import significance_matrix, z_statistic
from .training import TrainRunConfig, generate_synthetic_dataset, train_model, score_trials

__version__ = "0.1.0"

__all__ = [
    "SignalBuffer", "read_wav", "read_feature_cache", "write_feature_cache",
    "BackendConfig", "FrontendConfig", "extract_features", "LossConfig", "preset",
    "ScoreRecord", "TDCFCostModel", "compute_eer", "compute_min_tdcf",
    "significance_matrix", "z_statistic",
    "TrainRunConfig", "generate_synthetic_dataset", "train_model", "score_trials",
]
