"""Adversarial training on paired feature sequences and test-time transformation.

Sources are z-normalised with healthy-corpus statistics and generator outputs
are de-normalised with target-corpus statistics, both stored with the model.
"""
from __future__ import annotations

import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..errors import EmptyTrainingSet, KindMismatch
from ..features import FeatureSequence
from .layers import bce_with_logits, sigmoid
from .model import (
    DcganModel,
    GanHyper,
    PaddedBatch,
    check_kind,
    discriminator_backward,
    discriminator_logits,
    generator_backward,
    generator_forward,
    init_model,
)
from .optim import AdamState, adam_step

log = logging.getLogger(__name__)

STD_FLOOR = 1e-6


def corpus_stats(seqs: Sequence[np.ndarray]) -> Tuple[np.ndarray, np.ndarray]:
    """Per-feature mean and population std over every frame of ``seqs``."""
    frames = np.concatenate([s for s in seqs], axis=1)
    return frames.mean(axis=1), np.maximum(frames.std(axis=1), STD_FLOOR)


def _normalise(x, mean, std):
    return (x - mean[:, None]) / std[:, None]


def _denormalise(x, mean, std):
    return x * std[:, None] + mean[:, None]


def _gan_step(model: DcganModel, src: PaddedBatch, tgt: PaddedBatch,
              g_state: AdamState, d_state: AdamState, hyper: GanHyper):
    adam = dict(lr=hyper.lr, beta1=hyper.beta1, beta2=hyper.beta2, eps=hyper.eps)

    # discriminator: real -> 1, generated -> 0.  G is unchanged by the D update,
    # so this forward pass (and its cache) also serves the G update below.
    fake, g_cache = generator_forward(model, src, keep_cache=True)
    z_real, c_real = discriminator_logits(model, tgt, keep_cache=True)
    z_fake, c_fake = discriminator_logits(model, fake, keep_cache=True)
    l_real, g_real = bce_with_logits(z_real, 1.0)
    l_fake, g_fake = bce_with_logits(z_fake, 0.0)
    _, gr = discriminator_backward(model, g_real, c_real)
    _, gf = discriminator_backward(model, g_fake, c_fake)
    d_grads = {k: gr[k] + gf[k] for k in gr}
    adam_step(model.d_params, d_grads, d_state, **adam)
    d_loss = l_real + l_fake

    # generator: non-saturating objective -log D(G(x))
    z, d_cache = discriminator_logits(model, fake, keep_cache=True)
    g_loss, gz = bce_with_logits(z, 1.0)
    gin, _ = discriminator_backward(model, gz, d_cache, need_input_grad=True)
    if hyper.l1_weight > 0:
        t = min(fake.tensors.shape[2], tgt.tensors.shape[2])
        mask = fake.mask[:, None, :t] & tgt.mask[:, None, :t]
        diff = fake.tensors[:, :, :t] - tgt.tensors[:, :, :t]
        count = max(int(mask.sum()) * fake.tensors.shape[1], 1)
        g_loss += hyper.l1_weight * float(np.sum(np.abs(diff) * mask)) / count
        gin[:, :, :t] += hyper.l1_weight * np.sign(diff) * mask / count
    _, g_grads = generator_backward(model, gin, g_cache, need_input_grad=False)
    adam_step(model.g_params, g_grads, g_state, **adam)
    return d_loss, g_loss


def train_gan(pairs: Sequence[Tuple[FeatureSequence, FeatureSequence]],
              hyper: Optional[GanHyper] = None, seed: int = 0):
    """Train one GAN on (healthy, target) pairs.

    Returns ``(model, loss_log)`` where ``loss_log`` is a list of
    ``(epoch, d_loss, g_loss)`` epoch means.
    """
    hyper = hyper or GanHyper()
    if not pairs:
        raise EmptyTrainingSet("no training pairs")
    kinds = {p[0].kind for p in pairs} | {p[1].kind for p in pairs}
    if len(kinds) != 1:
        raise KindMismatch(f"pairs mix feature kinds {sorted(kinds)}")
    kind = kinds.pop()
    n_features = pairs[0][0].dim

    rng = np.random.default_rng(seed)
    model = init_model(kind, n_features, hyper, rng)
    model.seed = seed
    src_mean, src_std = corpus_stats([p[0].data for p in pairs])
    tgt_mean, tgt_std = corpus_stats([p[1].data for p in pairs])
    model.norm = {"src_mean": src_mean, "src_std": src_std, "tgt_mean": tgt_mean, "tgt_std": tgt_std}
    src = [_normalise(p[0].data, src_mean, src_std) for p in pairs]
    tgt = [_normalise(p[1].data, tgt_mean, tgt_std) for p in pairs]

    g_state, d_state = AdamState(), AdamState()
    loss_log = []
    n = len(pairs)
    for epoch in range(1, hyper.epochs + 1):
        order = rng.permutation(n)
        d_sum = g_sum = 0.0
        n_batches = 0
        for start in range(0, n, hyper.batch):
            idx = order[start:start + hyper.batch]
            sb = PaddedBatch.from_sequences([src[i] for i in idx])
            tb = PaddedBatch.from_sequences([tgt[i] for i in idx])
            d_loss, g_loss = _gan_step(model, sb, tb, g_state, d_state, hyper)
            d_sum += d_loss
            g_sum += g_loss
            n_batches += 1
        loss_log.append((epoch, d_sum / n_batches, g_sum / n_batches))
        log.info("%s epoch %d: d_loss %.4f g_loss %.4f", kind, epoch, *loss_log[-1][1:])
    model.adam_state = {"g": g_state, "d": d_state}
    return model, loss_log


def generate(model: DcganModel, seqs: Sequence[np.ndarray]) -> List[np.ndarray]:
    """Run raw (un-normalised) D x T arrays through the generator."""
    norm = model.norm
    if norm is None:
        batch = PaddedBatch.from_sequences(list(seqs))
        return generator_forward(model, batch).items()
    xs = [_normalise(s, norm["src_mean"], norm["src_std"]) for s in seqs]
    out = generator_forward(model, PaddedBatch.from_sequences(xs)).items()
    return [_denormalise(o, norm["tgt_mean"], norm["tgt_std"]) for o in out]


def transform_features(model: DcganModel, f: FeatureSequence) -> FeatureSequence:
    check_kind(model, f.kind)
    out = generate(model, [f.data])[0]
    return FeatureSequence(out, f.kind, f.frame_shift, f.source_id)


def discriminator_accuracy(model: DcganModel, real: Sequence[np.ndarray], sources: Sequence[np.ndarray]) -> float:
    """Accuracy of the discriminator on held-out real targets vs generated sources (raw units)."""
    norm = model.norm
    real_n = [_normalise(r, norm["tgt_mean"], norm["tgt_std"]) for r in real]
    src_n = [_normalise(s, norm["src_mean"], norm["src_std"]) for s in sources]
    fake = generator_forward(model, PaddedBatch.from_sequences(src_n))
    p_real = sigmoid(discriminator_logits(model, PaddedBatch.from_sequences(real_n)))
    p_fake = sigmoid(discriminator_logits(model, fake))
    correct = np.count_nonzero(p_real >= 0.5) + np.count_nonzero(p_fake < 0.5)
    return correct / (len(real) + len(sources))
