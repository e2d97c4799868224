import numpy as np
import pytest
from scipy import signal as sg

from conftest import pulse_train, resonate, vowel
from dysvc.errors import InvariantViolation
from dysvc.signal_core import Waveform
from dysvc.vocoder import (SP_FLOOR, VocoderFrames, analyze, estimate_f0, load_vocoder_frames,
                           save_vocoder_frames, synthesize, vocoder_frames_from_bytes,
                           vocoder_frames_to_bytes)


def _lsd_db(a, b):
    d = 10 * np.log10(a) - 10 * np.log10(b)
    return np.sqrt(np.mean(d ** 2, axis=1))


def test_sawtooth_f0():
    t = np.arange(16000) / 16000
    w = Waveform(0.3 * sg.sawtooth(2 * np.pi * 100 * t))
    f0 = estimate_f0(w)
    assert np.all(np.abs(f0[10:-10] - 100) <= 1)


def test_noise_mostly_unvoiced(rng):
    f0 = estimate_f0(Waveform(rng.standard_normal(16000) * 0.1))
    assert np.mean(f0 == 0) >= 0.9


def test_silence_unvoiced():
    assert np.all(estimate_f0(Waveform(np.zeros(8000))) == 0)


@pytest.mark.parametrize("hz", [80.0, 150.0, 300.0])
def test_f0_of_vowels(hz):
    f0 = estimate_f0(vowel(hz))
    inner = f0[10:-10]
    assert np.all(inner > 0)
    assert np.max(np.abs(inner / hz - 1)) < 0.02


def test_one_formant_envelope_peak():
    x = resonate(pulse_train(100.0, 0.6), [700.0], bw=100.0)
    vf = analyze(Waveform(x / np.std(x) * 0.1))
    freqs = np.arange(vf.sp.shape[1]) * 16000 / vf.fft_size
    mid = vf.sp[20:-20]
    peaks = freqs[np.argmax(mid, axis=1)]
    assert np.all(np.abs(peaks - 700) < 100)
    low = freqs < 1000
    assert np.median(vf.ap[20:-20][:, low]) < 0.2


def test_noise_aperiodic(rng):
    vf = analyze(Waveform(rng.standard_normal(8000) * 0.1))
    assert np.all(vf.ap > 0.8)


def test_silence_analysis():
    vf = analyze(Waveform(np.zeros(4000)))
    assert np.all(vf.f0 == 0)
    assert np.allclose(vf.sp, SP_FLOOR)


def test_frame_count_and_bounds():
    w = vowel(120.0, 0.5)
    vf = analyze(w)
    assert vf.n_frames == 1 + (len(w) - 1) // 80
    vf.validate()
    assert vf.ap.min() >= 0.001 and vf.ap.max() <= 0.999


@pytest.mark.parametrize("hz,formants", [(100.0, (700.0,)), (150.0, (500.0, 1500.0)),
                                          (220.0, (800.0, 1200.0, 2500.0))])
def test_round_trip(hz, formants):
    w = vowel(hz, 0.8, formants)
    vf = analyze(w)
    y = synthesize(vf, 0)
    assert len(y) == vf.n_frames * vf.hop
    vf2 = analyze(Waveform(y.samples[:len(w)]))
    inner = slice(15, -15)
    assert np.median(_lsd_db(vf.sp[inner], vf2.sp[inner])) < 3.0
    f0b = vf2.f0[inner]
    assert np.all(f0b > 0)
    assert np.max(np.abs(f0b / hz - 1)) <= 0.03
    freqs = np.arange(vf.sp.shape[1]) * 16000 / vf.fft_size
    band = (freqs > formants[0] - 300) & (freqs < formants[0] + 300)
    p1 = freqs[band][np.argmax(np.median(vf.sp[inner][:, band], 0))]
    p2 = freqs[band][np.argmax(np.median(vf2.sp[inner][:, band], 0))]
    assert abs(p1 - p2) <= 50


def test_pure_noise_excitation():
    vf = analyze(vowel(120.0, 0.6))
    vf.ap[:] = 1.0
    y = synthesize(vf, 0)
    f0 = estimate_f0(y)
    assert np.mean(f0 > 0) < 0.1


def test_zero_envelope_silent():
    vf = analyze(vowel(120.0, 0.3))
    vf.sp[:] = 0.0
    assert np.all(synthesize(vf, 0).samples == 0)


def test_synthesis_deterministic():
    vf = analyze(vowel(150.0, 0.4))
    a = synthesize(vf, 7).samples
    b = synthesize(vf, 7).samples
    c = synthesize(vf, 8).samples
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_validate_rejects_bad_frames():
    vf = analyze(vowel(150.0, 0.2))
    bad = vf.copy()
    bad.ap[0, 0] = 1.5
    with pytest.raises(InvariantViolation):
        bad.validate()
    bad = vf.copy()
    bad.f0[0] = 20.0
    with pytest.raises(InvariantViolation):
        bad.validate()


def test_container_round_trip(tmp_path):
    vf = analyze(vowel(150.0, 0.2))
    data = vocoder_frames_to_bytes(vf)
    assert data[:4] == b"VOCF"
    back = vocoder_frames_from_bytes(data)
    for name in ("f0", "sp", "ap"):
        np.testing.assert_array_equal(getattr(back, name), getattr(vf, name))
    assert (back.frame_shift, back.fft_size, back.sample_rate) == (vf.frame_shift, vf.fft_size, vf.sample_rate)
    save_vocoder_frames(vf, tmp_path / "v.vocf")
    np.testing.assert_array_equal(load_vocoder_frames(tmp_path / "v.vocf").sp, vf.sp)
