"""Healthy-to-ALS pairing within gender over a train/test phrase split."""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Tuple

from ..errors import NoCounterpartGender
from .config import PipelineConfig
from .manifest import CorpusManifest, ManifestEntry


@dataclass(frozen=True)
class Pair:
    source: ManifestEntry
    target: ManifestEntry


@dataclass
class PairPlan:
    pairs: List[Pair]
    test_items: List[ManifestEntry]
    train_phrases: Tuple[int, ...]
    test_phrases: Tuple[int, ...]

    def split_of(self, phrase_id: int) -> str:
        if phrase_id in self.train_phrases:
            return "train"
        if phrase_id in self.test_phrases:
            return "test"
        return "unused"


def build_pairs(m: CorpusManifest, cfg: PipelineConfig) -> PairPlan:
    """Every healthy speaker against every ALS speaker of the same gender, per train phrase.

    Test items are the healthy recordings of the test phrases, unpaired.
    """
    train, test = set(cfg.train_phrases), set(cfg.test_phrases)
    healthy = m.by_group("healthy")
    als = m.by_group("als")
    genders = sorted({e.gender for e in healthy})
    for g in genders:
        if not any(e.gender == g for e in als):
            raise NoCounterpartGender(f"healthy speakers of gender {g!r} have no ALS counterpart")
    if not healthy or not als:
        raise NoCounterpartGender("need at least one healthy and one ALS speaker")
    als_by = {(e.gender, e.phrase_id): [] for e in als}
    for e in sorted(als, key=lambda e: (e.speaker_id, e.phrase_id)):
        als_by[(e.gender, e.phrase_id)].append(e)
    pairs = []
    for src in sorted(healthy, key=lambda e: (e.gender, e.speaker_id, e.phrase_id)):
        if src.phrase_id not in train:
            continue
        for tgt in als_by.get((src.gender, src.phrase_id), []):
            pairs.append(Pair(src, tgt))
    tests = sorted((e for e in healthy if e.phrase_id in test), key=lambda e: (e.speaker_id, e.phrase_id))
    return PairPlan(pairs, tests, tuple(sorted(train)), tuple(sorted(test)))
