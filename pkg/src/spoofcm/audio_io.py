"""WAV ingestion and the binary feature-cache format.

Only 16-bit PCM mono RIFF/WAVE is accepted. Feature caches are stored as::

    b"FMAT" | rows (u32 LE) | cols (u32 LE) | rows*cols float32 LE, row-major
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

CACHE_MAGIC = b"FMAT"
_HEADER = struct.Struct("<4sII")


class AudioError(Exception):
    pass


class NotWav(AudioError):
    pass


class UnsupportedEncoding(AudioError):
    pass


class TruncatedFile(AudioError):
    pass


class CacheError(Exception):
    pass


class BadMagic(CacheError):
    pass


class ShapeMismatch(CacheError):
    pass


class IoFailure(CacheError):
    pass


@dataclass(frozen=True)
class SignalBuffer:
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1 or samples.size < 1:
            raise ValueError("signal must be a non-empty 1-d array")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        if not np.all(np.isfinite(samples)):
            raise ValueError("signal contains non-finite samples")
        if np.max(np.abs(samples)) >= 1.0 + 2.0 ** -15:
            raise ValueError("samples must lie in [-1, 1)")
        object.__setattr__(self, "samples", samples)

    def __len__(self):
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


def read_wav(path) -> SignalBuffer:
    """Decode a PCM16 mono WAV file into samples scaled by 1/32768."""
    data = Path(path).read_bytes()
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise NotWav(f"{path}: missing RIFF/WAVE header")

    fmt = None
    payload = None
    pos = 12
    while pos + 8 <= len(data):
        chunk_id = data[pos:pos + 4]
        (size,) = struct.unpack_from("<I", data, pos + 4)
        body = data[pos + 8:pos + 8 + size]
        if len(body) < size:
            raise TruncatedFile(f"{path}: chunk {chunk_id!r} truncated")
        if chunk_id == b"fmt ":
            if size < 16:
                raise TruncatedFile(f"{path}: short fmt chunk")
            fmt = struct.unpack_from("<HHIIHH", body)
        elif chunk_id == b"data":
            payload = body
        pos += 8 + size + (size & 1)  # chunks are word aligned

    if fmt is None or payload is None:
        raise TruncatedFile(f"{path}: missing fmt or data chunk")
    audio_format, channels, sample_rate, _, _, bits = fmt
    if audio_format != 1 or channels != 1 or bits != 16:
        raise UnsupportedEncoding(
            f"{path}: format={audio_format} channels={channels} bits={bits}; "
            "only PCM16 mono is supported")
    if len(payload) % 2:
        raise TruncatedFile(f"{path}: odd number of payload bytes")

    pcm = np.frombuffer(payload, dtype="<i2")
    if pcm.size == 0:
        raise TruncatedFile(f"{path}: empty data chunk")
    return SignalBuffer(pcm.astype(np.float64) / 32768.0, int(sample_rate))


def write_wav(path, signal: SignalBuffer) -> None:
    """Encode a signal as PCM16 mono. Samples are rounded and clipped."""
    pcm = np.clip(np.round(signal.samples * 32768.0), -32768, 32767)
    payload = pcm.astype("<i2").tobytes()
    header = b"RIFF" + struct.pack("<I", 36 + len(payload)) + b"WAVE"
    fmt = b"fmt " + struct.pack("<IHHIIHH", 16, 1, 1, signal.sample_rate,
                                signal.sample_rate * 2, 2, 16)
    data = b"data" + struct.pack("<I", len(payload)) + payload
    Path(path).write_bytes(header + fmt + data)


def encode_feature_cache(matrix) -> bytes:
    matrix = np.asarray(matrix)
    if matrix.ndim != 2:
        raise ShapeMismatch(f"expected a 2-d matrix, got shape {matrix.shape}")
    if not np.all(np.isfinite(matrix)):
        raise ValueError("feature matrix contains non-finite values")
    rows, cols = matrix.shape
    body = np.ascontiguousarray(matrix, dtype="<f4").tobytes()
    return _HEADER.pack(CACHE_MAGIC, rows, cols) + body


def decode_feature_cache(blob: bytes, offset: int = 0) -> tuple[np.ndarray, int]:
    """Decode one cache record starting at ``offset``.

    Returns the float32 matrix and the offset just past the record.
    """
    if len(blob) - offset < _HEADER.size:
        raise ShapeMismatch("buffer too short for a cache header")
    magic, rows, cols = _HEADER.unpack_from(blob, offset)
    if magic != CACHE_MAGIC:
        raise BadMagic(f"bad magic {magic!r}")
    start = offset + _HEADER.size
    end = start + 4 * rows * cols
    if end > len(blob):
        raise ShapeMismatch(
            f"header declares {rows}x{cols} but payload holds "
            f"{(len(blob) - start) // 4} values")
    matrix = np.frombuffer(blob, dtype="<f4", count=rows * cols, offset=start)
    return matrix.reshape(rows, cols).astype(np.float32), end


def write_feature_cache(matrix, path) -> None:
    try:
        Path(path).write_bytes(encode_feature_cache(matrix))
    except OSError as exc:
        raise IoFailure(str(exc)) from exc


def read_feature_cache(path) -> np.ndarray:
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    matrix, end = decode_feature_cache(blob)
    if end != len(blob):
        raise ShapeMismatch(f"{len(blob) - end} trailing bytes after payload")
    return matrix
