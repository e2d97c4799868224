import numpy as np
import pytest

from conftest import pulse_train, vowel
from dysvc.errors import FactorOutOfRange
from dysvc.rate_mod import EpochTrack, detect_epochs, match_duration, psola_stretch, stretch
from dysvc.signal_core import Waveform
from dysvc.vocoder import estimate_f0


def _median_f0(w):
    f0 = estimate_f0(w)
    v = f0[f0 > 0]
    return np.median(v) if v.size else 0.0


def test_epochs_on_pulse_train():
    w = Waveform(pulse_train(100.0, 0.5))
    f0 = np.full(1 + (len(w) - 1) // 80, 100.0)
    ep = detect_epochs(w, f0)
    assert ep.voiced_flags.all()
    d = np.diff(ep.marks)[1:-1]   # edge epochs see the filter transient
    assert np.all(np.abs(d - 160) <= 2)


@pytest.mark.parametrize("kind", ["noise", "silence"])
def test_unvoiced_epochs_on_grid(rng, kind):
    x = rng.standard_normal(8000) * 0.1 if kind == "noise" else np.zeros(8000)
    ep = detect_epochs(Waveform(x), np.zeros(100))
    assert not ep.voiced_flags.any()
    np.testing.assert_array_equal(np.diff(ep.marks), 160)


def test_epoch_track_validation():
    with pytest.raises(ValueError):
        EpochTrack([10, 5], [True, True])
    with pytest.raises(ValueError):
        EpochTrack([1, 2], [True])


def test_identity_factor():
    w = vowel(120.0)
    y = psola_stretch(w, detect_epochs(w, estimate_f0(w)), 1.0)
    assert abs(len(y) - len(w)) / len(w) <= 0.02
    n = min(len(y), len(w))
    assert np.corrcoef(y.samples[:n], w.samples[:n])[0, 1] > 0.9
    rms = lambda a: np.sqrt(np.mean(a ** 2))
    assert abs(20 * np.log10(rms(y.samples) / rms(w.samples))) <= 3.0


def test_double_length_keeps_pitch():
    w = vowel(120.0)
    y = stretch(w, 2.0)
    assert abs(len(y) / (2 * len(w)) - 1) <= 0.02
    assert abs(_median_f0(y) / 120.0 - 1) <= 0.05


@pytest.mark.parametrize("factor", [0.1, 10.0, 0.0, -1.0])
def test_factor_out_of_range(factor):
    w = vowel(120.0, 0.2)
    with pytest.raises(FactorOutOfRange):
        psola_stretch(w, detect_epochs(w, estimate_f0(w)), factor)


@pytest.mark.parametrize("src,tgt", [(1.0, 2.0), (2.0, 1.0), (1.0, 1.0)])
def test_match_duration(src, tgt):
    w = vowel(150.0, src)
    y = match_duration(w, tgt, detect_epochs(w, estimate_f0(w)))
    assert abs(y.duration / tgt - 1) <= 0.02


def test_unvoiced_noise_stretch(rng):
    w = Waveform(rng.standard_normal(8000) * 0.1)
    y = stretch(w, 1.5)
    assert abs(len(y) / (1.5 * len(w)) - 1) <= 0.02
