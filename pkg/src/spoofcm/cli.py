"""Command-line entry point: ``spoofcm <subcommand> ...``.

Exit status is 0 on success, 1 when an operation fails and 2 on usage errors.
"""
from __future__ import annotations

import argparse
import logging
import re
import sys
from pathlib import Path

from . import fileio
from .audio_io import read_wav, write_feature_cache, write_wav
from .backend_models import parameter_counts
from .frontend import extract_features
from .metrics import evaluate, fuse_scores, split_scores, compute_eer_arrays
from .selftest import run_selftest
from .stats import EERObservation, intra_model_summary, significance_matrix
from .training import (Trial, extract_corpus, generate_synthetic_dataset, run_seed, score_trials,
                       split_corpus, train_model)

log = logging.getLogger("spoofcm")


class UsageError(Exception):
    pass


def load_trials(protocol, wav_dir) -> list:
    wav_dir = Path(wav_dir)
    return [Trial(r.trial_id, r.attack_id, r.key, read_wav(wav_dir / f"{r.trial_id}.wav"),
                  r.speaker_id)
            for r in fileio.parse_protocol(protocol)]


def _require(args, *names):
    missing = [f"--{n.replace('_', '-')}" for n in names if getattr(args, n) is None]
    if missing:
        raise UsageError(f"{args.command} requires {', '.join(missing)}")


def cmd_extract(args, cfg):
    _require(args, "protocol", "wav_dir", "out")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for trial in load_trials(args.protocol, args.wav_dir):
        write_feature_cache(extract_features(trial.signal, cfg.frontend),
                            out / f"{trial.trial_id}.fmat")
    return 0


def cmd_synth(args, cfg):
    _require(args, "out")
    out = Path(args.out)
    (out / "wav").mkdir(parents=True, exist_ok=True)
    corpus = generate_synthetic_dataset(args.seed if args.seed is not None else 0,
                                        args.n_per_class, cfg.frontend.sample_rate)
    train, test = split_corpus(corpus, args.n_test)
    for trial in corpus:
        write_wav(out / "wav" / f"{trial.trial_id}.wav", trial.signal)
    fileio.write_protocol(out / "train.txt", [
        fileio.TrialRecord(t.speaker_id, t.trial_id, t.attack_id, t.key) for t in train])
    fileio.write_protocol(out / "eval.txt", [
        fileio.TrialRecord(t.speaker_id, t.trial_id, t.attack_id, t.key) for t in test])
    return 0


def cmd_train(args, cfg):
    _require(args, "protocol", "wav_dir", "out")
    out = Path(args.out)
    corpus = load_trials(args.protocol, args.wav_dir)
    features = extract_corpus(corpus, cfg.frontend)
    eval_corpus = eval_features = None
    if args.eval_protocol:
        eval_corpus = load_trials(args.eval_protocol, args.eval_wav_dir or args.wav_dir)
        eval_features = extract_corpus(eval_corpus, cfg.frontend)

    if args.runs:
        seeds = [(k, run_seed(k)) for k in range(1, args.runs + 1)]
    else:
        seeds = [(1, args.seed if args.seed is not None else cfg.train.seed)]
    for k, seed in seeds:
        run_cfg = fileio.TrainRunConfig.from_dict({**cfg.train.to_dict(), "seed": seed})
        result = train_model(corpus, cfg.frontend, cfg.backend, cfg.loss, run_cfg, features)
        run_dir = out / f"run{k}"
        fileio.save_params(result.params, run_dir)
        (run_dir / "train_log.csv").write_text(result.log_csv(), encoding="utf-8")
        report = {"seed": seed, "eval_seed": run_cfg.eval_seed,
                  "parameter_counts": parameter_counts(result.params),
                  "config": cfg.to_dict()}
        if eval_corpus is not None:
            records = score_trials(eval_corpus, result.params, cfg.frontend, cfg.backend,
                                   cfg.loss, run_cfg.eval_seed, eval_features)
            fileio.write_scores(run_dir / "scores.txt", records)
            report["eer"] = compute_eer_arrays(*split_scores(records))[0]
        fileio.dump_json(report, run_dir / "report.json")
        log.info("run %d (seed %d) written to %s", k, seed, run_dir)
    return 0


def cmd_score(args, cfg):
    _require(args, "protocol", "wav_dir", "params", "out")
    corpus = load_trials(args.protocol, args.wav_dir)
    params = fileio.load_params(args.params)
    eval_seed = args.seed if args.seed is not None else cfg.train.eval_seed
    records = score_trials(corpus, params, cfg.frontend, cfg.backend, cfg.loss, eval_seed)
    fileio.write_scores(args.out, records)
    return 0


def cmd_eval(args, cfg):
    if len(args.scores) != 1:
        raise UsageError("eval takes exactly one score file")
    report = evaluate(fileio.read_scores(args.scores[0]), cfg.tdcf)
    if args.out:
        fileio.dump_json(report.to_dict(), args.out)
    print(f"EER      {100 * report.eer:.4f} %")
    print(f"min tDCF {report.min_tdcf:.6f}")
    for attack, eer in report.per_attack.items():
        print(f"  {attack:<8} {100 * eer:.4f} %")
    return 0


def _observation_id(path: Path, position: int):
    match = re.fullmatch(r"run(\d+)", path.parent.name)
    if match:
        return path.parent.parent.name or "model", int(match.group(1))
    return path.stem, position


def cmd_compare(args, cfg):
    if len(args.scores) < 2:
        raise UsageError("compare needs at least two score files")
    _require(args, "out")
    alpha = args.alpha if args.alpha is not None else cfg.alpha_level
    observations = []
    for pos, name in enumerate(args.scores, 1):
        bona, spoof = split_scores(fileio.read_scores(name))
        eer, _ = compute_eer_arrays(bona, spoof)
        model, run = _observation_id(Path(name), pos)
        observations.append(EERObservation(model, run, eer, args.n_bona or bona.size,
                                           args.n_spoof or spoof.size))
    matrix = significance_matrix(observations, alpha)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    doc = matrix.to_dict()
    doc["eer"] = [o.eer for o in observations]
    doc["intra_model"] = intra_model_summary(observations, matrix)
    fileio.dump_json(doc, out.with_suffix(".json"))
    matrix.write_pgm(out.with_suffix(".pgm"))
    for model, entry in doc["intra_model"].items():
        print(f"{model}: runs={entry['runs']} EER spread={100 * entry['spread']:.4f} % "
              f"significant pairs={entry['significant_pairs']}")
    return 0


def cmd_fuse(args, cfg):
    if not args.scores:
        raise UsageError("fuse needs at least one score file")
    _require(args, "out")
    fused = fuse_scores([fileio.read_scores(p) for p in args.scores])
    fileio.write_scores(args.out, fused)
    return 0


def cmd_selftest(args, cfg):
    return 0 if run_selftest(args.seed or 0) else 1


COMMANDS = {
    "extract": cmd_extract,
    "synth": cmd_synth,
    "train": cmd_train,
    "score": cmd_score,
    "eval": cmd_eval,
    "compare": cmd_compare,
    "fuse": cmd_fuse,
    "selftest": cmd_selftest,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spoofcm", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config")
        p.add_argument("--out")
        p.add_argument("--seed", type=int)
        if name in ("extract", "train", "score"):
            p.add_argument("--protocol")
            p.add_argument("--wav-dir")
        if name == "train":
            p.add_argument("--runs", type=int)
            p.add_argument("--eval-protocol")
            p.add_argument("--eval-wav-dir")
        if name == "score":
            p.add_argument("--params")
        if name in ("eval", "compare", "fuse"):
            p.add_argument("scores", nargs="*")
        if name == "compare":
            p.add_argument("--alpha", type=float)
            p.add_argument("--n-bona", type=int)
            p.add_argument("--n-spoof", type=int)
        if name == "synth":
            p.add_argument("--n-per-class", type=int, default=100)
            p.add_argument("--n-test", type=int, default=50)
    return parser


def run_subcommand(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = fileio.load_config(args.config)
        return COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"spoofcm {args.command}: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - reported as operation failure
        print(f"spoofcm {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(run_subcommand())
