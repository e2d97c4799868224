"""Waveform I/O, framing, windowing and the forward/inverse STFT.

Everything downstream works on float64 samples at a canonical 16 kHz rate.
``load_wav`` never resamples; call :func:`resample` on ingest instead.
"""
from __future__ import annotations

import os
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.signal as sg
from scipy.io import wavfile

from .errors import (
    CorruptHeader,
    EmptySignal,
    InconsistentMetadata,
    SignalNotFound,
    UnsupportedFormat,
)

CANONICAL_RATE = 16000
DEFAULT_FFT_SIZE = 1024
DEFAULT_FRAME_SHIFT = 0.005
WINDOWS = ("hann", "hamming", "blackman")


@dataclass
class Waveform:
    samples: np.ndarray
    sample_rate: int = CANONICAL_RATE

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64).reshape(-1)
        if int(self.sample_rate) != self.sample_rate or self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be a positive integer, got {self.sample_rate}")
        self.sample_rate = int(self.sample_rate)
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("waveform samples must be finite")

    def __len__(self):
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass
class Spectrogram:
    """F x B complex STFT; frame ``f`` is centred on sample ``f * hop``.

    ``win_length`` defaults to ``fft_size``; shorter windows are centred and
    zero padded to the FFT length.
    """

    frames: np.ndarray
    frame_shift: float
    fft_size: int
    window: str = "hann"
    win_length: Optional[int] = None
    n_samples: Optional[int] = field(default=None)

    def __post_init__(self):
        if self.win_length is None:
            self.win_length = self.fft_size

    @property
    def n_bins(self) -> int:
        return self.fft_size // 2 + 1

    def hop(self, sample_rate: int) -> int:
        return int(round(self.frame_shift * sample_rate))


# ---------------------------------------------------------------------------
# WAV I/O


def load_wav(path) -> Waveform:
    """Read a mono PCM16 or float32 RIFF/WAVE file into [-1, 1] samples."""
    path = os.fspath(path)
    if not os.path.exists(path):
        raise SignalNotFound(path)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", wavfile.WavFileWarning)
            rate, data = wavfile.read(path)
    except ValueError as exc:
        msg = str(exc)
        if "Unknown wave file format" in msg or "not supported" in msg:
            raise UnsupportedFormat(f"{path}: {msg}") from exc
        raise CorruptHeader(f"{path}: {msg}") from exc
    except (EOFError, OSError, UnboundLocalError) as exc:
        # scipy raises UnboundLocalError on a RIFF file without fmt/data chunks
        raise CorruptHeader(f"{path}: {exc}") from exc
    if data.ndim != 1:
        raise UnsupportedFormat(f"{path}: {data.shape[1]} channels, only mono is supported")
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.float32:
        samples = data.astype(np.float64)
    else:
        raise UnsupportedFormat(f"{path}: sample type {data.dtype} (need PCM16 or float32)")
    return Waveform(samples, int(rate))


def save_wav(w: Waveform, path, *, float32: bool = False) -> int:
    """Write ``w`` as PCM16 (default) or float32 and return the clip count.

    Samples outside [-1, 1] are hard clipped; a warning reports how many.
    """
    x = np.asarray(w.samples, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError("cannot save non-finite samples")
    n_clip = int(np.count_nonzero(np.abs(x) > 1.0))
    if n_clip:
        warnings.warn(f"save_wav: clipped {n_clip} samples to [-1, 1]", stacklevel=2)
    x = np.clip(x, -1.0, 1.0)
    if float32:
        data = x.astype(np.float32)
    else:
        data = np.clip(np.round(x * 32768.0), -32768, 32767).astype(np.int16)
    wavfile.write(os.fspath(path), w.sample_rate, data)
    return n_clip


def resample(w: Waveform, target_rate: int = CANONICAL_RATE) -> Waveform:
    """Polyphase windowed-sinc resampling to ``target_rate``."""
    if w.sample_rate == target_rate:
        return Waveform(w.samples.copy(), target_rate)
    g = np.gcd(int(w.sample_rate), int(target_rate))
    up, down = target_rate // g, w.sample_rate // g
    y = sg.resample_poly(w.samples, up, down, window=("kaiser", 5.0))
    return Waveform(y, target_rate)


# ---------------------------------------------------------------------------
# framing


def get_window(name: str, length: int) -> np.ndarray:
    if name not in WINDOWS:
        raise ValueError(f"unknown window {name!r}; choose one of {WINDOWS}")
    return sg.get_window(name, length, fftbins=True).astype(np.float64)


def frame_signal(x: np.ndarray, hop: int, length: int, n_frames: Optional[int] = None) -> np.ndarray:
    """Frames of ``length`` samples centred on ``f * hop``, zero padded at the edges."""
    x = np.asarray(x, dtype=np.float64)
    if n_frames is None:
        n_frames = 1 + (x.size - 1) // hop if x.size else 0
    left = length // 2
    right = length + n_frames * hop
    padded = np.concatenate([np.zeros(left), x, np.zeros(max(right - x.size, 0))])
    idx = np.arange(n_frames)[:, None] * hop + np.arange(length)[None, :]
    return padded[idx]


def _check_stft_args(fft_size, hop, win_length):
    if fft_size <= 0 or fft_size & (fft_size - 1):
        raise ValueError(f"fft_size must be a power of two, got {fft_size}")
    if hop < 1:
        raise ValueError("frame_shift * sample_rate must be at least one sample")
    if not 0 < win_length <= fft_size:
        raise ValueError("win_length must lie in (0, fft_size]")


def stft(w: Waveform, fft_size: int = DEFAULT_FFT_SIZE, frame_shift: float = DEFAULT_FRAME_SHIFT,
         window: str = "hann", win_length: Optional[int] = None) -> Spectrogram:
    if len(w) == 0:
        raise EmptySignal("stft of an empty signal")
    win_length = fft_size if win_length is None else int(win_length)
    hop_f = frame_shift * w.sample_rate
    if hop_f < 1:
        raise ValueError("frame_shift * sample_rate must be at least one sample")
    hop = int(round(hop_f))
    _check_stft_args(fft_size, hop, win_length)
    frames = frame_signal(w.samples, hop, win_length) * get_window(window, win_length)
    if win_length < fft_size:
        off = (fft_size - win_length) // 2
        frames = np.pad(frames, ((0, 0), (off, fft_size - win_length - off)))
    spec = np.fft.rfft(frames, n=fft_size, axis=1)
    return Spectrogram(spec, frame_shift, fft_size, window, win_length, len(w))


def istft(s: Spectrogram, sample_rate: int) -> Waveform:
    """Weighted overlap-add inverse: sum(w * frame) / sum(w**2)."""
    frames = np.asarray(s.frames)
    if frames.ndim != 2 or frames.shape[1] != s.fft_size // 2 + 1:
        raise InconsistentMetadata(
            f"frames shape {frames.shape} does not match fft_size {s.fft_size}")
    hop = s.hop(sample_rate)
    win_length = s.win_length
    if hop < 1 or win_length > s.fft_size:
        raise InconsistentMetadata("bad hop or window length")
    if win_length < 2 * hop and frames.shape[0] > 1:
        raise InconsistentMetadata("overlap below 50% cannot be inverted reliably")
    n_frames = frames.shape[0]
    n_out = s.n_samples if s.n_samples is not None else (n_frames - 1) * hop + 1
    if n_frames == 0:
        return Waveform(np.zeros(n_out), sample_rate)
    win = get_window(s.window, win_length)
    off = (s.fft_size - win_length) // 2
    seg = np.fft.irfft(frames, n=s.fft_size, axis=1)[:, off:off + win_length]
    left = win_length // 2
    total = left + n_frames * hop + win_length
    acc = np.zeros(total)
    norm = np.zeros(total)
    for f in range(n_frames):
        start = f * hop
        acc[start:start + win_length] += seg[f] * win
        norm[start:start + win_length] += win * win
    acc = acc[left:left + n_out]
    norm = norm[left:left + n_out]
    out = np.zeros(n_out)
    ok = norm > 1e-10
    out[ok] = acc[ok] / norm[ok]
    return Waveform(out, sample_rate)


def power_spectrum(frames: np.ndarray, window: np.ndarray, fft_size: int) -> np.ndarray:
    """|rfft(frame * window)|^2 normalised by sum(window**2)."""
    spec = np.fft.rfft(frames * window, n=fft_size, axis=-1)
    return (spec.real ** 2 + spec.imag ** 2) / np.sum(window ** 2)
