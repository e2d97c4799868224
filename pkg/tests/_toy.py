"""Constant-offset toy task for the GAN: 2-D frames, target = source + offset."""
import numpy as np

from dysvc.features import FeatureSequence

OFFSET = np.array([0.5, -0.5])


def toy_sequences(rng, n, offset=OFFSET):
    src, tgt = [], []
    for _ in range(n):
        t = int(rng.integers(20, 41))
        src.append(rng.standard_normal((2, t)))
        tgt.append(rng.standard_normal((2, t)) + offset[:, None])
    return src, tgt


def toy_pairs(seed=0, n=500):
    rng = np.random.default_rng(seed)
    src, tgt = toy_sequences(rng, n)
    return [(FeatureSequence(s, "raw"), FeatureSequence(t, "raw")) for s, t in zip(src, tgt)]


def toy_heldout(seed=1, n=200):
    return toy_sequences(np.random.default_rng(seed), n)
