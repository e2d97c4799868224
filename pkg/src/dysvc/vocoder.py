"""Source-filter analysis/synthesis: F0, smooth spectral envelope, aperiodicity.

Analysis
    F0 comes from a YIN-style cumulative-mean-normalised difference function.
    Each frame is windowed with a periodic Hann window three pitch periods
    long; the power spectrum is box-smoothed over one harmonic spacing (so a
    unit-power pulse train and unit-variance noise give the same level) and
    then cepstrally liftered.  Aperiodicity is measured per BAP band from the
    normalised autocorrelation at the pitch lag.

Synthesis
    Mixed excitation.  Pitch pulses (fractional-delay, unit power) are shaped by
    the minimum-phase filter of ``sqrt(sp * (1 - ap))``; unit-variance noise is
    shaped frame by frame by ``sqrt(sp * ap)`` and overlap-added.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Union

import numpy as np

from .errors import ContainerFormatError, EmptySignal, InvariantViolation
from .features import bap_band_index
from .signal_core import (
    CANONICAL_RATE,
    DEFAULT_FFT_SIZE,
    DEFAULT_FRAME_SHIFT,
    Waveform,
    frame_signal,
)

F0_FLOOR = 50.0
F0_CEIL = 500.0
YIN_WINDOW = 0.025
YIN_THRESHOLD = 0.15
SP_FLOOR = 1e-12
AP_MIN, AP_MAX = 0.001, 0.999
VOICED_LIFTER = 0.0035
UNVOICED_LIFTER = 0.002
# window / smoothing width used for unvoiced frames
UNVOICED_PSEUDO_F0 = 100.0
N_PERIODS = 3


@dataclass
class VocoderFrames:
    f0: np.ndarray
    sp: np.ndarray
    ap: np.ndarray
    frame_shift: float = DEFAULT_FRAME_SHIFT
    fft_size: int = DEFAULT_FFT_SIZE
    sample_rate: int = CANONICAL_RATE

    @property
    def n_frames(self) -> int:
        return int(self.f0.shape[0])

    @property
    def hop(self) -> int:
        return int(round(self.frame_shift * self.sample_rate))

    def copy(self) -> "VocoderFrames":
        return VocoderFrames(self.f0.copy(), self.sp.copy(), self.ap.copy(),
                             self.frame_shift, self.fft_size, self.sample_rate)

    def validate(self) -> None:
        n_bins = self.fft_size // 2 + 1
        f = self.f0.shape[0]
        if self.f0.ndim != 1 or self.sp.shape != (f, n_bins) or self.ap.shape != (f, n_bins):
            raise InvariantViolation(
                f"shapes f0 {self.f0.shape}, sp {self.sp.shape}, ap {self.ap.shape} "
                f"inconsistent with fft_size {self.fft_size}")
        for name, arr in (("f0", self.f0), ("sp", self.sp), ("ap", self.ap)):
            if not np.all(np.isfinite(arr)):
                raise InvariantViolation(f"{name} has non-finite entries")
        if np.any(self.sp < 0):
            raise InvariantViolation("sp must be non-negative")
        if np.any(self.ap < 0) or np.any(self.ap > 1):
            raise InvariantViolation("ap must lie in [0, 1]")
        voiced = self.f0 > 0
        if np.any(self.f0 < 0) or np.any(self.f0[voiced] < F0_FLOOR - 1e-9) \
                or np.any(self.f0[voiced] > F0_CEIL + 1e-9):
            raise InvariantViolation("f0 must be 0 or within [50, 500] Hz")


# ---------------------------------------------------------------------------
# F0


def n_frames_for(n_samples: int, hop: int) -> int:
    return 1 + (n_samples - 1) // hop


def estimate_f0(w: Waveform, f0_floor: float = F0_FLOOR, f0_ceil: float = F0_CEIL,
                frame_shift: float = DEFAULT_FRAME_SHIFT,
                threshold: float = YIN_THRESHOLD) -> np.ndarray:
    """Per-frame F0 in Hz (0 for unvoiced), frames centred on ``f * frame_shift``."""
    if len(w) == 0:
        raise EmptySignal("estimate_f0 of an empty signal")
    if not (F0_FLOOR <= f0_floor < f0_ceil <= F0_CEIL):
        raise ValueError("need 50 <= f0_floor < f0_ceil <= 500")
    sr = w.sample_rate
    hop = int(round(frame_shift * sr))
    win = int(round(YIN_WINDOW * sr))
    tau_min = max(2, int(np.floor(sr / f0_ceil)))
    tau_max = int(np.ceil(sr / f0_floor)) + 1
    seg_len = win + tau_max + 1
    frames = frame_signal(w.samples, hop, seg_len, n_frames_for(len(w), hop))

    nfft = 1 << int(np.ceil(np.log2(seg_len + win)))
    head = frames[:, :win]
    cross = np.fft.irfft(np.conj(np.fft.rfft(head, nfft)) * np.fft.rfft(frames, nfft), nfft)
    cross = cross[:, :tau_max + 1]
    csum = np.concatenate([np.zeros((frames.shape[0], 1)), np.cumsum(frames ** 2, axis=1)], axis=1)
    taus = np.arange(tau_max + 1)
    e0 = csum[:, win:win + 1]
    e_tau = csum[:, taus + win] - csum[:, taus]
    d = np.maximum(e0 + e_tau - 2.0 * cross, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        cum = np.cumsum(d[:, 1:], axis=1)
        cmnd = np.ones_like(d)
        cmnd[:, 1:] = d[:, 1:] * taus[1:] / cum
    cmnd[~np.isfinite(cmnd)] = 1.0

    def refine(c, tau):
        while tau + 1 < tau_max and c[tau + 1] < c[tau]:
            tau += 1
        t = float(tau)
        if 1 <= tau < tau_max:
            a, b, cc = c[tau - 1], c[tau], c[tau + 1]
            denom = a - 2.0 * b + cc
            if denom > 0:
                t = tau + 0.5 * (a - cc) / denom
        return t

    f0 = np.zeros(frames.shape[0])
    energy = e0[:, 0] / win
    for i in range(frames.shape[0]):
        if energy[i] < 1e-10:
            continue
        c = cmnd[i]
        below = np.nonzero(c[tau_min:tau_max] < threshold)[0]
        if below.size == 0:
            continue
        hz = sr / refine(c, tau_min + below[0])
        if f0_floor <= hz <= f0_ceil:
            f0[i] = hz
    return _fix_octaves(f0, cmnd, refine, sr, tau_min, tau_max, threshold, f0_floor, f0_ceil)


def _fix_octaves(f0, cmnd, refine, sr, tau_min, tau_max, threshold, f0_floor, f0_ceil,
                 min_run: int = 3) -> np.ndarray:
    """Second pass against the utterance median.

    Frames more than half an octave away from the voiced median are moved to
    the CMND dip nearest the median period when that dip is below twice the
    threshold, and unvoiced otherwise.  Voiced runs shorter than ``min_run``
    frames are dropped.
    """
    voiced = f0 > 0
    if np.count_nonzero(voiced) >= 5:
        med = float(np.median(f0[voiced]))
        for i in np.flatnonzero(voiced & (np.abs(np.log2(np.maximum(f0, 1e-9) / med)) > 0.5)):
            c = cmnd[i]
            lo = max(tau_min, int(sr / (med * 2 ** 0.5)))
            hi = min(tau_max - 1, int(np.ceil(sr / (med / 2 ** 0.5))))
            f0[i] = 0.0
            if hi <= lo:
                continue
            tau = lo + int(np.argmin(c[lo:hi]))
            if c[tau] < 2.0 * threshold:
                hz = sr / refine(c, tau)
                if f0_floor <= hz <= f0_ceil:
                    f0[i] = hz
    voiced = f0 > 0
    edges = np.flatnonzero(np.diff(np.concatenate([[0], voiced.astype(np.int8), [0]])))
    for start, stop in zip(edges[::2], edges[1::2]):
        if stop - start < min_run:
            f0[start:stop] = 0.0
    return f0


# ---------------------------------------------------------------------------
# envelope helpers


def box_smooth(power: np.ndarray, width: float) -> np.ndarray:
    """Moving average of ``power`` over ``width`` bins (fractional), power preserving."""
    n = power.size
    if width <= 1.0:
        return power.copy()
    m = int(np.ceil(width)) + 2
    ext = np.concatenate([power[m:0:-1], power, power[-2:-m - 2:-1]])
    edges = np.arange(ext.size + 1) - 0.5 - m
    cum = np.concatenate([[0.0], np.cumsum(ext)])
    k = np.arange(n, dtype=np.float64)
    hi = np.interp(k + width / 2, edges, cum)
    lo = np.interp(k - width / 2, edges, cum)
    return (hi - lo) / width


def lifter_log_spectrum(log_spec: np.ndarray, cutoff: int, fft_size: int) -> np.ndarray:
    """Keep cepstral quefrencies |q| < cutoff of a one-sided log spectrum."""
    cep = np.fft.irfft(log_spec, fft_size, axis=-1)
    cep[..., cutoff:fft_size - cutoff + 1] = 0.0
    return np.fft.rfft(cep, fft_size, axis=-1).real


def minimum_phase(log_amplitude: np.ndarray, fft_size: int) -> np.ndarray:
    """Minimum-phase spectrum with the given one-sided log amplitude (cepstral folding)."""
    cep = np.fft.irfft(log_amplitude, fft_size, axis=-1)
    half = fft_size // 2
    fold = np.zeros_like(cep)
    fold[..., 0] = cep[..., 0]
    fold[..., 1:half] = 2.0 * cep[..., 1:half]
    fold[..., half] = cep[..., half]
    return np.exp(np.fft.rfft(fold, fft_size, axis=-1))


@lru_cache(maxsize=256)
def _window(length: int) -> np.ndarray:
    n = np.arange(length)
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * n / length)


@lru_cache(maxsize=64)
def _band_layout(fft_size: int, sample_rate: int):
    idx = bap_band_index(fft_size, sample_rate)
    n_bands = int(idx.max()) + 1
    freqs = np.arange(fft_size // 2 + 1) * sample_rate / fft_size
    lo = np.array([freqs[idx == b].min() for b in range(n_bands)])
    hi = np.array([freqs[idx == b].max() for b in range(n_bands)])
    return idx, lo, hi


def _band_periodicity(y1, y2, eps, pitch, sample_rate, fft_size, band_lo, band_hi):
    """Per-band normalised correlation between frames one pitch period apart.

    ``y2`` is the spectrum of the frame ``round(T0)`` samples later; the
    residual sub-sample offset ``eps`` is removed as a linear phase.  Each band
    is widened to a whole number (at least two) of harmonic spacings so that
    the noise term, which oscillates as cos(2 pi f / F0), averages out.
    """
    k = np.arange(y1.size)
    omega = 2.0 * np.pi * k / fft_size
    cross = np.real(np.conj(y1) * y2 * np.exp(1j * omega * eps))
    p1 = np.abs(y1) ** 2
    p2 = np.abs(y2) ** 2
    c_cross = np.concatenate([[0.0], np.cumsum(cross)])
    c_p1 = np.concatenate([[0.0], np.cumsum(p1)])
    c_p2 = np.concatenate([[0.0], np.cumsum(p2)])
    bin_hz = sample_rate / fft_size
    centre = 0.5 * (band_lo + band_hi)
    width = np.maximum(2.0, np.ceil((band_hi - band_lo + bin_hz) / pitch)) * pitch
    lo = np.clip(np.round((centre - width / 2) / bin_hz).astype(int), 0, y1.size - 1)
    hi = np.clip(np.round((centre + width / 2) / bin_hz).astype(int), 0, y1.size - 1) + 1
    num = c_cross[hi] - c_cross[lo]
    den = np.sqrt((c_p1[hi] - c_p1[lo]) * (c_p2[hi] - c_p2[lo]))
    return np.where(den > 1e-30, num / np.maximum(den, 1e-300), 0.0)


# ---------------------------------------------------------------------------
# analysis


def analyze(w: Waveform, f0: Optional[np.ndarray] = None, *, f0_floor: float = F0_FLOOR,
            f0_ceil: float = F0_CEIL, frame_shift: float = DEFAULT_FRAME_SHIFT,
            fft_size: int = DEFAULT_FFT_SIZE) -> VocoderFrames:
    if len(w) == 0:
        raise EmptySignal("analyze of an empty signal")
    sr = w.sample_rate
    hop = int(round(frame_shift * sr))
    n_frames = n_frames_for(len(w), hop)
    if f0 is None:
        f0 = estimate_f0(w, f0_floor, f0_ceil, frame_shift)
    f0 = np.asarray(f0, dtype=np.float64)
    if f0.shape != (n_frames,):
        raise InvariantViolation(f"f0 track has {f0.shape[0]} frames, expected {n_frames}")

    n_bins = fft_size // 2 + 1
    band_idx, band_lo, band_hi = _band_layout(fft_size, sr)
    x = w.samples
    max_len = fft_size
    padded = np.concatenate([np.zeros(max_len), x, np.zeros(2 * max_len + hop)])

    sp = np.empty((n_frames, n_bins))
    ap = np.full((n_frames, n_bins), AP_MAX)
    for i in range(n_frames):
        voiced = f0[i] > 0
        pitch = f0[i] if voiced else UNVOICED_PSEUDO_F0
        period = sr / pitch
        length = min(int(round(N_PERIODS * period)), max_len)
        win = _window(length)
        start = max_len + i * hop - length // 2
        seg = padded[start:start + length] * win
        wnorm = np.sum(win ** 2)
        spec = np.fft.rfft(seg, fft_size)
        power = (spec.real ** 2 + spec.imag ** 2) / wnorm
        smooth = box_smooth(power, pitch * fft_size / sr)
        log_s = np.log(np.maximum(smooth, SP_FLOOR))
        cut_s = min(period, VOICED_LIFTER * sr) if voiced else UNVOICED_LIFTER * sr
        cutoff = max(1, int(np.floor(cut_s)))
        sp[i] = np.maximum(np.exp(lifter_log_spectrum(log_s, cutoff, fft_size)), SP_FLOOR)

        if voiced and np.sum(seg ** 2) > 1e-20:
            lag = int(round(period))
            eps = period - lag
            seg2 = padded[start + lag:start + lag + length] * win
            band_ap = 1.0 - _band_periodicity(spec, np.fft.rfft(seg2, fft_size), eps,
                                              pitch, sr, fft_size, band_lo, band_hi)
            ap[i] = np.clip(band_ap, AP_MIN, AP_MAX)[band_idx]
    return VocoderFrames(f0.copy(), sp, ap, frame_shift, fft_size, sr)


# ---------------------------------------------------------------------------
# synthesis


def _sample_f0(f0: np.ndarray, hop: int, n_out: int) -> np.ndarray:
    """Per-sample F0: linear between voiced frame centres, 0 in unvoiced regions."""
    centres = np.arange(f0.size) * hop
    t = np.arange(n_out)
    voiced = f0 > 0
    nearest = np.clip(np.round(t / hop).astype(int), 0, f0.size - 1)
    inside = voiced[nearest]
    if not np.any(voiced):
        return np.zeros(n_out)
    interp = np.interp(t, centres[voiced], f0[voiced])
    # only interpolate across a gap if both neighbouring frames are voiced
    lo = np.clip(t // hop, 0, f0.size - 1)
    hi = np.clip(lo + 1, 0, f0.size - 1)
    both = voiced[lo] & voiced[hi]
    out = np.where(both, interp, np.where(inside, f0[nearest], 0.0))
    return out


def _pulse_times(f0_samples: np.ndarray, sample_rate: int) -> np.ndarray:
    """Fractional sample positions where the accumulated phase crosses an integer."""
    inc = f0_samples / sample_rate
    times = []
    phase = 0.0
    in_run = False
    for n, d in enumerate(inc):
        if d <= 0:
            in_run = False
            continue
        if not in_run:
            in_run = True
            phase = 0.0
            times.append(float(n))
            continue
        new = phase + d
        if new >= 1.0:
            frac = (1.0 - phase) / d
            times.append(n - 1 + frac)
            new -= 1.0
        phase = new
    return np.asarray(times)


def synthesize(vf: VocoderFrames, seed: Union[int, np.random.Generator, None] = 0) -> Waveform:
    """Resynthesise a waveform of ``F * hop`` samples from vocoder parameters."""
    vf.validate()
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    sr, n_fft, hop = vf.sample_rate, vf.fft_size, vf.hop
    n_frames = vf.n_frames
    n_out = n_frames * hop
    if n_frames == 0:
        return Waveform(np.zeros(0), sr)
    voiced = vf.f0 > 0
    ap = np.where(voiced[:, None], vf.ap, 1.0)
    sp = vf.sp
    silent = sp <= 0
    with np.errstate(divide="ignore"):
        log_per = 0.5 * np.log(np.where(silent, 1.0, sp * (1.0 - ap)))
        log_noi = 0.5 * np.log(np.where(silent, 1.0, sp * ap))
    log_per[silent | (ap >= 1.0)] = -np.inf
    log_noi[silent | (ap <= 0.0)] = -np.inf
    floor = np.log(1e-30)
    h_per = minimum_phase(np.maximum(log_per, floor), n_fft)
    h_noi = minimum_phase(np.maximum(log_noi, floor), n_fft)
    h_per[~voiced] = 0.0
    # an all-zero envelope frame is exact silence, not the 1e-30 floor
    dead = np.all(silent, axis=1)
    h_per[dead] = 0.0
    h_noi[dead] = 0.0

    tail = n_fft
    out = np.zeros(n_out + 2 * tail)

    # periodic part
    f0s = _sample_f0(vf.f0, hop, n_out)
    times = _pulse_times(f0s, sr)
    if times.size:
        k = np.arange(n_fft // 2 + 1)
        base = np.floor(times).astype(int)
        frac = times - base
        fidx = np.clip(np.round(times / hop).astype(int), 0, n_frames - 1)
        f0_at = f0s[np.clip(base, 0, n_out - 1)]
        f0_at = np.where(f0_at > 0, f0_at, np.maximum(vf.f0[fidx], F0_FLOOR))
        amp = np.sqrt(sr / f0_at)
        for start in range(0, times.size, 256):
            sl = slice(start, start + 256)
            spec = h_per[fidx[sl]] * amp[sl, None] * np.exp(-2j * np.pi * k[None, :] * frac[sl, None] / n_fft)
            pulses = np.fft.irfft(spec, n_fft, axis=1)
            for p, b in zip(pulses, base[sl]):
                out[tail + b:tail + b + n_fft] += p

    # aperiodic part: unit-variance noise, per-frame filtering, COLA overlap-add
    win_len = 4 * hop
    win = _window(win_len)
    noise = rng.standard_normal(n_out + win_len)
    padded = np.concatenate([np.zeros(win_len // 2), noise])
    gain = 1.0 / (win_len / (2.0 * hop))
    for i in range(n_frames):
        seg = padded[i * hop:i * hop + win_len] * win
        y = np.fft.irfft(np.fft.rfft(seg, n_fft) * h_noi[i], n_fft)
        s = tail + i * hop - win_len // 2
        out[s:s + n_fft] += gain * y
    return Waveform(out[tail:tail + n_out], sr)


# ---------------------------------------------------------------------------
# binary container

_VOCF_HEADER = struct.Struct("<4sHIIdII")
_VOCF_VERSION = 1


def vocoder_frames_to_bytes(vf: VocoderFrames) -> bytes:
    n_bins = vf.fft_size // 2 + 1
    head = _VOCF_HEADER.pack(b"VOCF", _VOCF_VERSION, vf.n_frames, n_bins,
                             float(vf.frame_shift), int(vf.fft_size), int(vf.sample_rate))
    body = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for a in (vf.f0, vf.sp, vf.ap))
    return head + body


def vocoder_frames_from_bytes(data: bytes) -> VocoderFrames:
    if len(data) < _VOCF_HEADER.size:
        raise ContainerFormatError("truncated VOCF header")
    magic, version, n_frames, n_bins, shift, fft_size, rate = _VOCF_HEADER.unpack_from(data)
    if magic != b"VOCF":
        raise ContainerFormatError(f"bad magic {magic!r}")
    if version != _VOCF_VERSION:
        raise ContainerFormatError(f"unsupported VOCF version {version}")
    need = 8 * (n_frames + 2 * n_frames * n_bins)
    body = data[_VOCF_HEADER.size:]
    if len(body) != need:
        raise ContainerFormatError(f"VOCF body has {len(body)} bytes, expected {need}")
    arr = np.frombuffer(body, dtype="<f8").astype(np.float64)
    f0 = arr[:n_frames]
    sp = arr[n_frames:n_frames + n_frames * n_bins].reshape(n_frames, n_bins)
    ap = arr[n_frames + n_frames * n_bins:].reshape(n_frames, n_bins)
    return VocoderFrames(f0, sp, ap, shift, fft_size, rate)


def save_vocoder_frames(vf: VocoderFrames, path) -> None:
    with open(path, "wb") as fh:
        fh.write(vocoder_frames_to_bytes(vf))


def load_vocoder_frames(path) -> VocoderFrames:
    with open(path, "rb") as fh:
        return vocoder_frames_from_bytes(fh.read())
