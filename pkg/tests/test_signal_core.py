import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays
from scipy.io import wavfile

from dysvc.errors import CorruptHeader, EmptySignal, InconsistentMetadata, SignalNotFound, UnsupportedFormat
from dysvc.signal_core import (Spectrogram, Waveform, get_window, istft, load_wav, resample,
                               save_wav, stft)


def test_load_pcm16_length_and_duration(tmp_path):
    p = tmp_path / "a.wav"
    wavfile.write(p, 16000, np.zeros(16000, dtype=np.int16))
    w = load_wav(p)
    assert len(w) == 16000 and w.sample_rate == 16000
    assert w.duration == 1.0


def test_load_full_scale_sample(tmp_path):
    p = tmp_path / "a.wav"
    wavfile.write(p, 16000, np.array([32767, -32768, 0], dtype=np.int16))
    w = load_wav(p)
    assert w.samples[0] == 32767 / 32768
    assert w.samples[1] == -1.0


def test_load_float32(tmp_path):
    p = tmp_path / "a.wav"
    wavfile.write(p, 8000, np.array([0.25, -0.5], dtype=np.float32))
    w = load_wav(p)
    assert w.sample_rate == 8000
    np.testing.assert_array_equal(w.samples, [0.25, -0.5])


def test_stereo_rejected(tmp_path):
    p = tmp_path / "s.wav"
    wavfile.write(p, 16000, np.zeros((100, 2), dtype=np.int16))
    with pytest.raises(UnsupportedFormat):
        load_wav(p)


def test_pcm32_rejected(tmp_path):
    p = tmp_path / "s.wav"
    wavfile.write(p, 16000, np.zeros(100, dtype=np.int32))
    with pytest.raises(UnsupportedFormat):
        load_wav(p)


def test_missing_and_corrupt(tmp_path):
    with pytest.raises(SignalNotFound):
        load_wav(tmp_path / "nope.wav")
    p = tmp_path / "bad.wav"
    p.write_bytes(b"RIFF\x00\x00\x00\x00WAVEjunk")
    with pytest.raises((CorruptHeader, UnsupportedFormat)):
        load_wav(p)


def test_save_silence(tmp_path):
    p = tmp_path / "z.wav"
    assert save_wav(Waveform(np.zeros(100)), p) == 0
    rate, data = wavfile.read(p)
    assert rate == 16000 and data.dtype == np.int16
    np.testing.assert_array_equal(data, np.zeros(100))


def test_save_clips_and_counts(tmp_path):
    p = tmp_path / "c.wav"
    with pytest.warns(UserWarning, match="clipped 1"):
        n = save_wav(Waveform(np.array([0.0, 2.0, 0.5])), p)
    assert n == 1
    w = load_wav(p)
    assert abs(w.samples[1] - 1.0) <= 2 ** -15


@settings(max_examples=25, deadline=None)
@given(arrays(np.float64, st.integers(1, 400), elements=st.floats(-1.0, 1.0)))
def test_pcm16_round_trip_within_quantisation(tmp_path_factory, x):
    p = tmp_path_factory.mktemp("rt") / "x.wav"
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        save_wav(Waveform(x), p)
    y = load_wav(p).samples
    assert np.max(np.abs(y - x)) <= 2 ** -15


def test_float32_round_trip(tmp_path, rng):
    x = rng.uniform(-1, 1, 500)
    save_wav(Waveform(x), tmp_path / "f.wav", float32=True)
    y = load_wav(tmp_path / "f.wav").samples
    assert np.max(np.abs(y - x)) < 1e-7


def test_waveform_rejects_nonfinite():
    with pytest.raises(ValueError):
        Waveform(np.array([0.0, np.nan]))


def test_resample_sine_frequency():
    t = np.arange(44100) / 44100
    w = resample(Waveform(np.sin(2 * np.pi * 1000 * t), 44100), 16000)
    assert w.sample_rate == 16000 and abs(len(w) - 16000) <= 1
    spec = np.abs(np.fft.rfft(w.samples * np.hanning(len(w))))
    assert abs(np.argmax(spec) * 16000 / len(w) - 1000) < 2


def test_stft_of_zeros():
    s = stft(Waveform(np.zeros(4000)))
    assert np.all(s.frames == 0)


def test_stft_sine_peak_bin():
    t = np.arange(16000) / 16000
    s = stft(Waveform(np.sin(2 * np.pi * 1000 * t)), fft_size=1024, window="hann")
    interior = np.abs(s.frames[10:-10])
    assert np.all(np.argmax(interior, axis=1) == 64)


def test_stft_single_frame_matches_direct_dft(rng):
    # frame 5 is centred on sample 400: window covers samples -112 .. 911
    x = rng.standard_normal(3000)
    s = stft(Waveform(x), fft_size=1024, frame_shift=0.005)
    seg = np.concatenate([np.zeros(112), x[:912]])
    win = np.hanning(1025)[:-1]
    k = np.arange(513)
    n = np.arange(1024)
    direct = (seg * win) @ np.exp(-2j * np.pi * np.outer(n, k) / 1024)
    np.testing.assert_allclose(s.frames[5], direct, atol=1e-9)


def test_stft_linearity(rng):
    x = rng.standard_normal(5000)
    a = stft(Waveform(x))
    b = stft(Waveform(3.5 * x))
    np.testing.assert_allclose(b.frames, 3.5 * a.frames, rtol=1e-12, atol=1e-12)


def test_stft_rejects_empty_and_bad_sizes():
    with pytest.raises(EmptySignal):
        stft(Waveform(np.zeros(0)))
    with pytest.raises(ValueError):
        stft(Waveform(np.zeros(100)), fft_size=1000)


@pytest.mark.parametrize("window", ["hann", "hamming", "blackman"])
@pytest.mark.parametrize("fft_size,shift", [(1024, 0.005), (512, 0.008), (256, 0.002)])
def test_stft_istft_round_trip(rng, window, fft_size, shift):
    x = rng.standard_normal(8000)
    y = istft(stft(Waveform(x), fft_size, shift, window), 16000).samples
    assert y.size == x.size
    mid = slice(fft_size, -fft_size)
    assert np.max(np.abs(y[mid] - x[mid])) < 1e-6


def test_istft_zero_spectrogram():
    s = Spectrogram(np.zeros((20, 513), dtype=complex), 0.005, 1024, n_samples=1600)
    np.testing.assert_array_equal(istft(s, 16000).samples, np.zeros(1600))


def test_istft_single_frame_reproduces_windowed_frame(rng):
    # one frame: output = (frame * w) / w**2 * w ... i.e. the frame itself where w > 0
    frame = rng.standard_normal(1024)
    win = get_window("hann", 1024)
    spec = np.fft.rfft(frame * win)[None, :]
    s = Spectrogram(spec, 0.005, 1024, n_samples=512)
    y = istft(s, 16000).samples
    # output sample n sits at frame offset n + 512
    ok = win[512:] > 1e-3
    np.testing.assert_allclose(y[ok], frame[512:][ok], atol=1e-9)


def test_istft_shape_checks():
    with pytest.raises(InconsistentMetadata):
        istft(Spectrogram(np.zeros((3, 100)), 0.005, 1024), 16000)
    with pytest.raises(InconsistentMetadata):
        istft(Spectrogram(np.zeros((3, 513)), 0.04, 1024), 16000)
