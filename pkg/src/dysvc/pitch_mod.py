"""Linear compression of F0 variation around the utterance mean.

    f0_out[i] = (f0[i] - mean_voiced) * alpha + mean_voiced

with ``alpha`` the ratio of the averaged ALS pitch standard deviation to the
current speaker's.  Population standard deviations are used everywhere.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import EmptyAlsStats, TooFewVoicedFrames, ZeroHealthyVariance

F0_CLAMP = (50.0, 500.0)


@dataclass(frozen=True)
class PitchStats:
    mean_f0: float
    std_f0: float
    n_voiced: int


def pitch_stats(f0_track) -> PitchStats:
    f0 = np.asarray(f0_track, dtype=np.float64)
    voiced = f0[f0 > 0]
    if voiced.size < 2:
        raise TooFewVoicedFrames(f"need at least 2 voiced frames, got {voiced.size}")
    return PitchStats(float(voiced.mean()), float(voiced.std()), int(voiced.size))


def speaker_std(utterance_stats: Iterable[PitchStats]) -> float:
    """Mean of per-utterance standard deviations for one speaker."""
    stds = [s.std_f0 for s in utterance_stats]
    if not stds:
        raise EmptyAlsStats("speaker has no utterance statistics")
    return float(np.mean(stds))


def reference_std(per_speaker: Mapping[str, Sequence[PitchStats]]) -> float:
    """Two-level mean: utterances within speaker, then across speakers."""
    if not per_speaker:
        raise EmptyAlsStats("no ALS speakers given")
    return float(np.mean([speaker_std(v) for v in per_speaker.values()]))


def group_by_speaker(items: Iterable[tuple]) -> dict:
    """``[(speaker_id, PitchStats), ...]`` -> ``{speaker_id: [PitchStats, ...]}``."""
    out = defaultdict(list)
    for spk, st in items:
        out[spk].append(st)
    return dict(out)


def compute_alpha(als_stats: Sequence[PitchStats], healthy: PitchStats) -> float:
    """Average ALS standard deviation over the healthy standard deviation.

    ``als_stats`` holds one entry per ALS speaker (already averaged within the
    speaker, see :func:`reference_std`).
    """
    if len(als_stats) == 0:
        raise EmptyAlsStats("no ALS statistics given")
    if healthy.std_f0 <= 0:
        raise ZeroHealthyVariance("healthy speaker has zero pitch variance")
    return float(np.mean([s.std_f0 for s in als_stats]) / healthy.std_f0)


def alpha_from_reference(reference: float, healthy: PitchStats) -> float:
    if healthy.std_f0 <= 0:
        raise ZeroHealthyVariance("healthy speaker has zero pitch variance")
    return float(reference / healthy.std_f0)


def transform_f0(f0_track, alpha: float, clamp: bool = True) -> np.ndarray:
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    f0 = np.asarray(f0_track, dtype=np.float64)
    voiced = f0 > 0
    if np.count_nonzero(voiced) < 2:
        raise TooFewVoicedFrames("need at least 2 voiced frames")
    mean = f0[voiced].mean()
    out = f0.copy()
    out[voiced] = (f0[voiced] - mean) * alpha + mean
    if clamp:
        out[voiced] = np.clip(out[voiced], *F0_CLAMP)
    return out
