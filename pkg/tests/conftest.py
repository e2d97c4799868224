"""Shared synthetic signals."""
import numpy as np
import pytest
from scipy import signal as sg

from dysvc.signal_core import Waveform

SR = 16000


def pulse_train(f0, seconds, sr=SR, amp=0.5):
    x = np.zeros(int(seconds * sr))
    period = sr / f0
    idx = np.round(np.arange(0, x.size, period)).astype(int)
    x[idx[idx < x.size]] = amp
    return x


def resonate(x, formants, sr=SR, bw=80.0):
    for f in formants:
        r = np.exp(-np.pi * bw / sr)
        th = 2 * np.pi * f / sr
        x = sg.lfilter([1 - r], [1, -2 * r * np.cos(th), r * r], x)
    return x


def vowel(f0, seconds=0.8, formants=(700.0, 1200.0, 2500.0), sr=SR, rms=0.1):
    """Pulse train through formant resonators, normalised to ``rms``."""
    x = resonate(pulse_train(f0, seconds, sr), formants, sr)
    return Waveform(x * rms / np.sqrt(np.mean(x ** 2)), sr)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE_RESULTS = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
