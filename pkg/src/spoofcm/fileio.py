"""Protocol, score, config and parameter files.

Protocol lines have five whitespace-separated columns::

    LA_0001 LA_E_1002 - A09 spoof

Score lines have four single-space-separated columns::

    LA_E_1002 A09 spoof -3.14159
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .audio_io import decode_feature_cache, encode_feature_cache
from .backend_models import BackendConfig
from .frontend import FrontendConfig
from .losses import LossConfig, preset
from .metrics import BONAFIDE_KEY, SPOOF_KEY, ScoreRecord, TDCFCostModel
from .training import TrainRunConfig

KEYS = (BONAFIDE_KEY, SPOOF_KEY)


class FormatError(ValueError):
    pass


class MalformedLine(FormatError):
    def __init__(self, line_no, detail):
        super().__init__(f"line {line_no}: {detail}")
        self.line_no = line_no


class DuplicateTrial(FormatError):
    pass


class NonNumericScore(FormatError):
    pass


class TrialRecord(NamedTuple):
    speaker_id: str
    trial_id: str
    attack_id: str
    key: str


def parse_protocol_lines(lines) -> list:
    records, seen = [], set()
    for line_no, line in enumerate(lines, 1):
        cols = line.split()
        if not cols:
            continue
        if len(cols) != 5:
            raise MalformedLine(line_no, f"expected 5 columns, got {len(cols)}")
        speaker, trial, _, attack, key = cols
        if key not in KEYS:
            raise MalformedLine(line_no, f"unknown key {key!r}")
        if (key == BONAFIDE_KEY) != (attack == "-"):
            raise MalformedLine(line_no, "bonafide trials must have attack '-' and spoofs must not")
        if trial in seen:
            raise DuplicateTrial(f"line {line_no}: duplicate trial {trial}")
        seen.add(trial)
        records.append(TrialRecord(speaker, trial, attack, key))
    return records


def parse_protocol(path) -> list:
    with open(path, encoding="utf-8") as fh:
        return parse_protocol_lines(fh)


def write_protocol(path, records) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in records:
            fh.write(f"{r.speaker_id} {r.trial_id} - {r.attack_id} {r.key}\n")


def format_score(score: float) -> str:
    return f"{score:.6g}"


def write_scores(path, records) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        for r in records:
            fh.write(f"{r.trial_id} {r.attack_id} {r.key} {format_score(r.score)}\n")


def read_scores(path) -> list:
    records = []
    with open(path, encoding="ascii") as fh:
        for line_no, line in enumerate(fh, 1):
            cols = line.split()
            if not cols:
                continue
            if len(cols) != 4:
                raise MalformedLine(line_no, f"expected 4 columns, got {len(cols)}")
            trial, attack, key, raw = cols
            if key not in KEYS:
                raise MalformedLine(line_no, f"unknown key {key!r}")
            try:
                score = float(raw)
            except ValueError:
                raise NonNumericScore(f"line {line_no}: {raw!r} is not a number") from None
            records.append(ScoreRecord(trial, attack, key, score))
    return records


def save_params(params: dict, directory) -> None:
    """Write ``params.bin`` (concatenated FMAT records) and ``manifest.json``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    blob, manifest = bytearray(), {}
    for name, value in params.items():
        value = np.asarray(value)
        matrix = value.reshape(1, -1) if value.ndim < 2 else value.reshape(value.shape[0], -1)
        manifest[name] = {"rows": matrix.shape[0], "cols": matrix.shape[1],
                          "offset": len(blob), "shape": list(value.shape)}
        blob += encode_feature_cache(matrix)
    (directory / "params.bin").write_bytes(bytes(blob))
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def load_params(directory) -> dict:
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    blob = (directory / "params.bin").read_bytes()
    params = {}
    for name, entry in manifest.items():
        matrix, _ = decode_feature_cache(blob, entry["offset"])
        if matrix.shape != (entry["rows"], entry["cols"]):
            raise FormatError(f"{name}: manifest shape disagrees with payload")
        params[name] = matrix.astype(np.float64).reshape(entry["shape"])
    return params


@dataclass
class ToolkitConfig:
    frontend: FrontendConfig = field(default_factory=FrontendConfig)
    backend: BackendConfig = field(default_factory=BackendConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    train: TrainRunConfig = field(default_factory=TrainRunConfig)
    tdcf: TDCFCostModel = field(default_factory=TDCFCostModel)
    alpha_level: float = 0.05

    def __post_init__(self):
        if self.backend.compress_input and self.frontend.kind == "SPEC":
            if self.backend.compress_dim != self.frontend.lfb_channels:
                raise ValueError("compression width must equal the LFB channel count")
        if not 0 < self.alpha_level < 1:
            raise ValueError("alpha_level must lie in (0, 1)")

    def to_dict(self) -> dict:
        return {
            "frontend": self.frontend.to_dict(),
            "backend": self.backend.to_dict(),
            "loss": self.loss.to_dict(),
            "train": self.train.to_dict(),
            "tdcf": self.tdcf.to_dict(),
            "alpha_level": self.alpha_level,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ToolkitConfig":
        unknown = set(d) - {"frontend", "backend", "loss", "train", "tdcf", "alpha_level"}
        if unknown:
            raise ValueError(f"unknown config sections: {sorted(unknown)}")
        loss = d.get("loss", {})
        if isinstance(loss, str):
            loss = preset(loss)
        elif "preset" in loss:
            loss = LossConfig.from_dict({**preset(loss["preset"]).to_dict(),
                                         **{k: v for k, v in loss.items() if k != "preset"}})
        else:
            loss = LossConfig.from_dict(loss)
        return cls(
            frontend=FrontendConfig.from_dict(d.get("frontend", {})),
            backend=BackendConfig.from_dict(d.get("backend", {})),
            loss=loss,
            train=TrainRunConfig.from_dict(d.get("train", {})),
            tdcf=TDCFCostModel.from_dict(d.get("tdcf", {})),
            alpha_level=float(d.get("alpha_level", 0.05)),
        )


def load_config(path=None) -> ToolkitConfig:
    if path is None:
        return ToolkitConfig()
    return ToolkitConfig.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def dump_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")
