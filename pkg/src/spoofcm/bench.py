"""Micro-benchmarks for feature extraction and training throughput."""
from __future__ import annotations

import argparse
import csv
import io
import time
from dataclasses import dataclass

import numpy as np

from .audio_io import SignalBuffer
from .backend_models import BackendConfig
from .frontend import LFB, LFCC, SPEC, FrontendConfig, extract_features
from .losses import preset
from .training import TrainRunConfig, generate_synthetic_dataset, train_model


class UnknownOp(KeyError):
    pass


@dataclass(frozen=True)
class BenchRecord:
    op: str
    size: float
    median_ns: int
    throughput: float


def _tone(seconds, sample_rate=16000):
    t = np.arange(int(round(seconds * sample_rate))) / sample_rate
    return SignalBuffer(0.5 * np.sin(2 * np.pi * 440.0 * t), sample_rate)


def _extract_job(kind):
    def setup(size):
        signal, cfg = _tone(size), FrontendConfig(kind=kind)
        return (lambda: extract_features(signal, cfg)), signal.samples.size
    return setup


def _train_job(size):
    corpus = generate_synthetic_dataset(0, int(size), duration_range=(1.0, 1.5))
    backend = BackendConfig(conv_widths=(16, 16))
    run = TrainRunConfig(epochs=1)
    return (lambda: train_model(corpus, FrontendConfig(), backend, preset("p2sgrad"), run),
            len(corpus))


# size units: seconds of audio for extraction, trials per class for training
OPS = {
    "lfcc": _extract_job(LFCC),
    "lfb": _extract_job(LFB),
    "spec": _extract_job(SPEC),
    "train_epoch": _train_job,
}


def bench(op: str, size: float, repetitions: int = 5, warmup: bool = True) -> BenchRecord:
    """Median wall time over ``repetitions`` runs; throughput in units/s."""
    if op not in OPS:
        raise UnknownOp(op)
    job, units = OPS[op](size)
    if warmup and repetitions > 1:
        job()
    times = []
    for _ in range(max(1, repetitions)):
        start = time.perf_counter_ns()
        job()
        times.append(time.perf_counter_ns() - start)
    median = int(np.median(times))
    return BenchRecord(op, size, median, units / (max(median, 1) * 1e-9))


def to_csv(records) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["op", "size", "median_ns", "throughput"])
    for r in records:
        writer.writerow([r.op, r.size, r.median_ns, f"{r.throughput:.6g}"])
    return buf.getvalue()


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="python -m spoofcm.bench", description=__doc__)
    parser.add_argument("op", choices=sorted(OPS))
    parser.add_argument("sizes", type=float, nargs="+")
    parser.add_argument("--repetitions", type=int, default=5)
    args = parser.parse_args(argv)
    print(to_csv(bench(args.op, s, args.repetitions) for s in args.sizes), end="")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
