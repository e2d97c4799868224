"""Slow down a synthetic vowel and flatten its intonation.

Renders one healthy speaker reading a phrase from the synthetic corpus, then
applies the two hand-crafted parts of the transform: PSOLA time stretching by
a factor of two and mean-preserving F0 compression.  Writes the three WAVs to
the output directory and prints duration and pitch statistics.

    python3 demos/monopitch_and_rate.py [out_dir]
"""
import importlib
import sys
from pathlib import Path

import numpy as np

from dysvc.pitch_mod import pitch_stats, transform_f0
from dysvc.rate_mod import stretch
from dysvc.signal_core import save_wav
from dysvc.vocoder import analyze, synthesize

synth = importlib.import_module("dysvc.pipeline.synth_corpus")


def describe(name, vf):
    s = pitch_stats(vf.f0)
    print(f"{name:10s} {vf.n_frames * vf.frame_shift:5.2f} s  F0 mean {s.mean_f0:6.1f} Hz  std {s.std_f0:5.1f} Hz")


def main(out_dir="demo_out"):
    out = Path(out_dir)
    out.mkdir(exist_ok=True)
    speaker = synth.make_speakers(n_healthy=1, n_als=0, seed=0)[0]
    w = synth.render_utterance(speaker, phrase_id=1, seed=0)
    save_wav(w, out / "healthy.wav")
    describe("healthy", analyze(w))

    slow = stretch(w, 2.0)
    save_wav(slow, out / "slow.wav")
    vf = analyze(slow)
    describe("slow", vf)

    # alpha 0.4 keeps the mean and shrinks the excursions
    vf.f0[:] = transform_f0(vf.f0, 0.4)
    flat = synthesize(vf, 0)
    save_wav(flat, out / "slow_flat.wav")
    describe("slow_flat", analyze(flat))
    print(f"wrote {sorted(p.name for p in out.glob('*.wav'))} to {out}")


if __name__ == "__main__":
    main(*sys.argv[1:])
