"""TD-PSOLA duration modification with pitch preservation.

Grains are Hann windows two local periods long, centred on epochs.  Output
epochs are laid out by walking the output time axis one local source period
at a time; each output epoch copies the source grain nearest to the inverse
time-warped position.  Unvoiced stretches use a fixed 10 ms grain grid.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.signal as sg

from .errors import EmptySignal, FactorOutOfRange
from .signal_core import DEFAULT_FRAME_SHIFT, Waveform

MIN_FACTOR, MAX_FACTOR = 0.25, 4.0
UNVOICED_SPACING = 0.010
EPOCH_LOWPASS = 800.0
SEARCH_TOLERANCE = 0.2


@dataclass
class EpochTrack:
    marks: np.ndarray
    voiced_flags: np.ndarray

    def __post_init__(self):
        self.marks = np.asarray(self.marks, dtype=np.int64)
        self.voiced_flags = np.asarray(self.voiced_flags, dtype=bool)
        if self.marks.shape != self.voiced_flags.shape:
            raise ValueError("marks and voiced_flags must have the same length")
        if np.any(np.diff(self.marks) <= 0):
            raise ValueError("epoch marks must be strictly increasing")

    def __len__(self):
        return self.marks.size


def _local_f0(f0: np.ndarray, n: int, hop: int) -> float:
    i = min(max(int(round(n / hop)), 0), f0.size - 1)
    return float(f0[i])


def detect_epochs(w: Waveform, f0: np.ndarray, frame_shift: float = DEFAULT_FRAME_SHIFT) -> EpochTrack:
    """Glottal epoch estimates from a per-frame F0 track (0 = unvoiced).

    The signal is low-passed at 800 Hz and polarity-normalised so that its
    dominant excursions are negative; candidate epochs are local minima
    (negative-to-positive zero crossings of the smoothed derivative).  Each
    next epoch is the deepest candidate within +-20% of the expected period;
    if there is none the expected position itself is used.
    """
    n = len(w)
    if n == 0:
        raise EmptySignal("detect_epochs of an empty signal")
    sr = w.sample_rate
    hop = int(round(frame_shift * sr))
    f0 = np.asarray(f0, dtype=np.float64)
    grid = int(round(UNVOICED_SPACING * sr))

    sos = sg.butter(4, EPOCH_LOWPASS, btype="lowpass", fs=sr, output="sos")
    y = sg.sosfiltfilt(sos, w.samples) if n > 27 else w.samples.copy()
    if np.max(y, initial=0.0) > -np.min(y, initial=0.0):
        y = -y
    dy = np.convolve(np.diff(y, prepend=y[0]), np.ones(3) / 3.0, mode="same")
    cand = np.nonzero((dy[:-1] < 0) & (dy[1:] >= 0))[0]

    marks, flags = [], []
    pos = 0
    while pos < n:
        hz = _local_f0(f0, pos, hop)
        if hz <= 0:
            marks.append(pos)
            flags.append(False)
            pos += grid
            continue
        period = sr / hz
        if not flags or not flags[-1]:
            # first epoch of a voiced run: deepest minimum within one period
            lo, hi = pos, min(pos + int(np.ceil(period)), n)
            sel = cand[(cand >= lo) & (cand < hi)]
            m = int(sel[np.argmin(y[sel])]) if sel.size else pos
            if marks and m <= marks[-1]:
                m = marks[-1] + 1
        else:
            expected = marks[-1] + period
            lo = marks[-1] + (1 - SEARCH_TOLERANCE) * period
            hi = marks[-1] + (1 + SEARCH_TOLERANCE) * period
            sel = cand[(cand >= lo) & (cand <= hi)]
            m = int(sel[np.argmin(y[sel])]) if sel.size else int(round(expected))
        if m >= n:
            break
        if _local_f0(f0, m, hop) <= 0:
            # crossed into an unvoiced region
            pos = m
            if flags and flags[-1]:
                marks.append(m)
                flags.append(False)
                pos = m + grid
            continue
        marks.append(m)
        flags.append(True)
        pos = m + 1
    return EpochTrack(np.asarray(marks), np.asarray(flags))


def _grain_half_lengths(track: EpochTrack, sr: int, n: int) -> np.ndarray:
    """Local period at each mark: the mean spacing to voiced neighbours, else the grid."""
    marks = track.marks.astype(np.float64)
    v = track.voiced_flags
    grid = UNVOICED_SPACING * sr
    if marks.size == 1:
        return np.array([grid])
    gap = np.diff(marks)
    both = v[:-1] & v[1:]
    left = np.full(marks.size, np.nan)
    right = np.full(marks.size, np.nan)
    left[1:] = np.where(both, gap, np.nan)
    right[:-1] = np.where(both, gap, np.nan)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        half = np.nanmean(np.stack([left, right]), axis=0)
    half = np.where(v & np.isfinite(half), half, grid)
    return np.clip(half, sr / 500.0, 2 * grid)


def psola_stretch(w: Waveform, epochs: EpochTrack, factor: float) -> Waveform:
    """Change duration by ``factor`` (output length round(factor * N)), keeping pitch."""
    if not (MIN_FACTOR <= factor <= MAX_FACTOR):
        raise FactorOutOfRange(f"factor {factor} outside [{MIN_FACTOR}, {MAX_FACTOR}]")
    n = len(w)
    if n == 0:
        raise EmptySignal("psola_stretch of an empty signal")
    sr = w.sample_rate
    n_out = int(round(factor * n))
    if len(epochs) == 0:
        return Waveform(np.zeros(n_out), sr)
    x = w.samples
    marks = epochs.marks
    half = _grain_half_lengths(epochs, sr, n)
    pad = int(np.ceil(half.max())) + 2
    xp = np.concatenate([np.zeros(pad), x, np.zeros(pad)])
    out = np.zeros(n_out + 2 * pad)
    norm = np.zeros(n_out + 2 * pad)

    voiced = epochs.voiced_flags
    t_out = float(marks[0]) * factor
    prev_voiced = False
    while t_out < n_out:
        src = t_out / factor
        i = int(np.searchsorted(marks, src))
        if i == marks.size or (i > 0 and src - marks[i - 1] <= marks[i] - src):
            i -= 1
        if voiced[i] and not prev_voiced:
            # entering a voiced run: start on the mapped position of its next epoch
            # so the periodic part keeps its phase relative to the source
            if marks[i] < src and i + 1 < marks.size and voiced[i + 1]:
                i += 1
            t_out = max(t_out, float(marks[i]) * factor)
            if t_out >= n_out:
                break
        prev_voiced = bool(voiced[i])
        h = half[i]
        hl = int(np.floor(h))
        offs = np.arange(-hl, hl + 1)
        win = 0.5 + 0.5 * np.cos(np.pi * offs / h)
        grain = xp[pad + marks[i] + offs] * win
        centre = int(round(t_out))
        out[pad + centre + offs] += grain
        norm[pad + centre + offs] += win
        t_out += h
    out = out[pad:pad + n_out]
    norm = norm[pad:pad + n_out]
    res = np.where(norm > 0.1, out / np.maximum(norm, 0.1), out)
    return Waveform(res, sr)


def match_duration(source: Waveform, target_len: float, epochs: EpochTrack) -> Waveform:
    """Stretch ``source`` to last ``target_len`` seconds."""
    if target_len <= 0:
        raise ValueError("target_len must be positive")
    return psola_stretch(source, epochs, target_len / source.duration)


def stretch(w: Waveform, factor: float, f0: Optional[np.ndarray] = None) -> Waveform:
    """Convenience wrapper: estimate F0 and epochs, then stretch."""
    from .vocoder import estimate_f0

    if f0 is None:
        f0 = estimate_f0(w)
    return psola_stretch(w, detect_epochs(w, f0), factor)
