"""Seeded formant-synthesised corpus with healthy, ALS-like and ataxic-like speakers.

Every speaker reads the same phrases.  A phrase is a fixed sequence of vowel
and fricative segments drawn from the phrase id alone, so content is parallel
across speakers.  Speakers differ in vocal-tract scale, F0 level and range,
and speaking rate.  Disordered groups start from a freshly drawn healthy
speaker and are degraded in the parameter domain before synthesis:

* ALS-like: durations x2, F0 excursions x0.4, -6 dB/octave tilt above 500 Hz,
  raised aperiodicity, centralised and widened formants.
* ataxic-like: close to ALS-like in rate, pitch range and voice quality
  (durations x1.8, F0 excursions x0.5, -5 dB/octave tilt) but with irregular
  per-segment duration jitter and loudness swings between segments.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path
from typing import List

import numpy as np

from ..signal_core import CANONICAL_RATE, Waveform, save_wav
from ..vocoder import SP_FLOOR, VocoderFrames, synthesize

FRAME_SHIFT = 0.005
FFT_SIZE = 1024
TARGET_RMS = 0.05

# adult male formant targets (F1, F2, F3)
VOWELS = np.array([
    [730.0, 1090.0, 2440.0],
    [270.0, 2290.0, 3010.0],
    [300.0, 870.0, 2240.0],
    [530.0, 1840.0, 2480.0],
    [570.0, 840.0, 2410.0],
    [660.0, 1720.0, 2410.0],
])
NEUTRAL = np.array([500.0, 1500.0, 2500.0])
BANDWIDTHS = np.array([80.0, 100.0, 140.0])


@dataclass(frozen=True)
class SpeakerParams:
    speaker_id: str
    group: str
    gender: str
    f0_mean: float
    f0_range: float      # relative excursion scale of the intonation contour
    tract_scale: float
    rate: float          # duration multiplier
    duration_jitter: float = 0.0
    loudness_jitter_db: float = 0.0
    tilt_db_per_oct: float = 0.0
    ap_boost: float = 0.0
    centralise: float = 0.0
    bw_scale: float = 1.0


def _draw_healthy(rng: np.random.Generator, speaker_id: str, group: str, gender: str) -> SpeakerParams:
    base = 205.0 if gender == "f" else 115.0
    return SpeakerParams(
        speaker_id=speaker_id, group=group, gender=gender,
        f0_mean=base * float(np.exp(rng.normal(0.0, 0.08))),
        f0_range=float(rng.uniform(0.12, 0.18)),
        tract_scale=(1.17 if gender == "f" else 1.0) * float(np.exp(rng.normal(0.0, 0.03))),
        rate=float(np.exp(rng.normal(0.0, 0.06))),
    )


def degrade(p: SpeakerParams, group: str) -> SpeakerParams:
    if group == "als":
        return replace(p, group=group, rate=p.rate * 2.0, f0_range=p.f0_range * 0.4,
                       tilt_db_per_oct=-6.0, ap_boost=0.18, centralise=0.3, bw_scale=1.6)
    if group == "ataxic":
        return replace(p, group=group, rate=p.rate * 1.8, duration_jitter=0.25,
                       loudness_jitter_db=3.0, f0_range=p.f0_range * 0.5,
                       tilt_db_per_oct=-5.0, ap_boost=0.15, centralise=0.25, bw_scale=1.5)
    return p


@dataclass(frozen=True)
class Segment:
    kind: str            # "v" vowel or "f" fricative
    vowel: int
    duration: float      # seconds at healthy rate


def phrase_segments(phrase_id: int, seed: int) -> List[Segment]:
    rng = np.random.default_rng([seed, 7919, phrase_id])
    segs = []
    for i in range(int(rng.integers(2, 5))):
        if i > 0 and rng.random() < 0.3:
            segs.append(Segment("f", 0, float(rng.uniform(0.05, 0.09))))
        segs.append(Segment("v", int(rng.integers(len(VOWELS))), float(rng.uniform(0.09, 0.16))))
    return segs


def _resonator_power(freqs: np.ndarray, formant: np.ndarray, bw: np.ndarray, sr: int) -> np.ndarray:
    """``|H|^2`` of a cascade of two-pole resonators; per-frame formants ``(F, 3)``."""
    z = np.exp(-2j * np.pi * freqs / sr)[None, :]
    out = np.ones((formant.shape[0], freqs.size))
    for k in range(formant.shape[1]):
        r = np.exp(-np.pi * bw[:, k] / sr)[:, None]
        th = 2 * np.pi * formant[:, k][:, None] / sr
        gain = (1 - 2 * r * np.cos(th) + r * r)
        h = gain / ((1 - r * np.exp(1j * th) * z) * (1 - r * np.exp(-1j * th) * z))
        out *= np.abs(h) ** 2
    return out


def _smooth(track: np.ndarray, width: int) -> np.ndarray:
    if width < 2:
        return track
    k = np.hanning(width + 2)[1:-1]
    k /= k.sum()
    pad = np.pad(track, ((width, width),) + ((0, 0),) * (track.ndim - 1), mode="edge")
    if track.ndim == 1:
        return np.convolve(pad, k, mode="same")[width:-width]
    return np.stack([np.convolve(pad[:, j], k, mode="same") for j in range(track.shape[1])], 1)[width:-width]


def render_frames(p: SpeakerParams, phrase_id: int, seed: int, rng: np.random.Generator,
                  sr: int = CANONICAL_RATE) -> VocoderFrames:
    """Vocoder parameters for speaker ``p`` reading phrase ``phrase_id``."""
    segs = phrase_segments(phrase_id, seed)
    lead, tail = 0.05, 0.06
    durs = np.array([s.duration for s in segs]) * p.rate
    if p.duration_jitter > 0:
        durs *= np.exp(rng.normal(0.0, p.duration_jitter, len(segs)))
    counts = np.maximum(np.round(durs / FRAME_SHIFT).astype(int), 4)
    n_lead, n_tail = int(lead / FRAME_SHIFT), int(tail / FRAME_SHIFT)
    n = n_lead + counts.sum() + n_tail

    kinds = np.full(n, "s")
    targets = np.tile(NEUTRAL, (n, 1))
    gain_db = np.zeros(n)
    pos = n_lead
    seg_gain = rng.normal(0.0, p.loudness_jitter_db, len(segs)) if p.loudness_jitter_db > 0 else np.zeros(len(segs))
    for s, c, g in zip(segs, counts, seg_gain):
        kinds[pos:pos + c] = s.kind
        if s.kind == "v":
            targets[pos:pos + c] = VOWELS[s.vowel]
        gain_db[pos:pos + c] = g
        pos += c
    # carry vowel targets across fricatives and edges so formant motion is smooth
    is_v = kinds == "v"
    vi = np.flatnonzero(is_v)
    for j in range(3):
        targets[:, j] = np.interp(np.arange(n), vi, targets[vi, j])
    formants = _smooth(targets, int(0.04 / FRAME_SHIFT))
    formants = formants + p.centralise * (NEUTRAL - formants)
    formants = formants * p.tract_scale
    bw = np.tile(BANDWIDTHS * p.bw_scale, (n, 1))

    # intonation: declination plus one accent, scaled by the speaker's range
    t = np.linspace(0.0, 1.0, n)
    secs = np.arange(n) * FRAME_SHIFT
    accent_pos = float(np.random.default_rng([seed, 104729, phrase_id]).uniform(0.2, 0.6)) * secs[-1]
    width = 0.15 * p.rate
    contour = 0.8 * (0.5 - t) + np.exp(-0.5 * ((secs - accent_pos) / width) ** 2) - 0.3
    contour += _smooth(rng.normal(0.0, 0.3, n), 40)
    f0 = p.f0_mean * np.exp(p.f0_range * contour)
    f0 = np.clip(f0, 60.0, 450.0)
    f0[~is_v] = 0.0

    n_bins = FFT_SIZE // 2 + 1
    freqs = np.arange(n_bins) * sr / FFT_SIZE
    env = _resonator_power(freqs, formants, bw, sr)
    # glottal source roll-off and lip radiation, net about -6 dB/octave above 300 Hz
    env *= 1.0 / (1.0 + (freqs / 300.0) ** 2)[None, :]
    if p.tilt_db_per_oct:
        ratio = np.maximum(freqs / 500.0, 1.0)
        env *= (ratio ** (p.tilt_db_per_oct / (10 * np.log10(2.0))))[None, :]
    fric = kinds == "f"
    if fric.any():
        hp = (freqs / 4000.0) ** 4 / (1 + (freqs / 4000.0) ** 4)
        env[fric] = 0.05 * hp[None, :] + 1e-3
    silent = kinds == "s"
    env[silent] = 1e-6
    # voiced onsets/offsets: short ramps to avoid clicks
    level = np.where(silent, 0.0, 1.0)
    level = _smooth(level, 4)
    env *= (np.maximum(level, 1e-3) ** 2 * 10.0 ** (gain_db / 10.0))[:, None]
    sp = np.maximum(env, SP_FLOOR)

    ap = np.clip(0.03 + 0.25 * (freqs / (sr / 2)) ** 2 + p.ap_boost * (0.4 + freqs / (sr / 2)), 0.001, 0.9)
    ap = np.tile(ap, (n, 1))
    ap[~is_v] = 0.999
    return VocoderFrames(f0, sp, ap, FRAME_SHIFT, FFT_SIZE, sr)


def render_utterance(p: SpeakerParams, phrase_id: int, seed: int) -> Waveform:
    rng = np.random.default_rng([seed, _sid_code(p.speaker_id), phrase_id])
    vf = render_frames(p, phrase_id, seed, rng)
    w = synthesize(vf, rng)
    x = w.samples
    rms = np.sqrt(np.mean(x ** 2))
    x = x * (TARGET_RMS / rms) if rms > 0 else x
    return Waveform(x, w.sample_rate)


def _sid_code(speaker_id: str) -> int:
    # stable across runs, unlike hash()
    return int.from_bytes(speaker_id.encode(), "little") % (2 ** 61)


def make_speakers(n_healthy: int = 8, n_als: int = 8, n_ataxic: int = 0, seed: int = 0) -> List[SpeakerParams]:
    """Alternating-gender speaker list; each group size is split half female, half male."""
    out = []
    for group, prefix, count in (("healthy", "H", n_healthy), ("als", "A", n_als), ("ataxic", "X", n_ataxic)):
        for i in range(count):
            gender = "f" if i % 2 == 0 else "m"
            sid = f"{prefix}{i + 1:02d}{gender.upper()}"
            rng = np.random.default_rng([seed, _sid_code(sid)])
            out.append(degrade(_draw_healthy(rng, sid, group, gender), group))
    return out


def synth_corpus(out_dir, n_healthy: int = 8, n_als: int = 8, n_ataxic: int = 0,
                 n_phrases: int = 5, seed: int = 0) -> Path:
    """Write WAVs plus ``manifest.csv`` under ``out_dir``; return the manifest path."""
    out_dir = Path(out_dir)
    (out_dir / "wav").mkdir(parents=True, exist_ok=True)
    rows = []
    for p in make_speakers(n_healthy, n_als, n_ataxic, seed):
        for ph in range(1, n_phrases + 1):
            rel = Path("wav") / f"{p.speaker_id}_p{ph:02d}.wav"
            save_wav(render_utterance(p, ph, seed), out_dir / rel)
            rows.append([p.speaker_id, p.group, p.gender, ph, rel.as_posix()])
    manifest = out_dir / "manifest.csv"
    with open(manifest, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["speaker_id", "group", "gender", "phrase_id", "path"])
        w.writerows(rows)
    return manifest
