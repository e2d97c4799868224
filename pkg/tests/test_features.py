import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import vowel
from dysvc.errors import ContainerFormatError, KindMismatch, NonPositiveEnvelope, RangeViolation, TooShort
from dysvc.features import (BAP_DIM, MCEP_DIM, FeatureSequence, ap_to_bap, assemble_eval_vector,
                            bap_band_index, bap_to_ap, corr_structure, corr_structure_size, ems,
                            ems_size, eval_feature_names, feature_sequence_from_bytes,
                            feature_sequence_to_bytes, freqt, ltas, warp_matrix, mcep_to_sp, mfcc, read_eval_csv,
                            sp_to_mcep, write_eval_csv)
from dysvc.signal_core import Waveform
from dysvc.vocoder import analyze

SR = 16000


def _one_formant_env(f=700.0, bw=150.0, n_bins=513, n_frames=4):
    freqs = np.arange(n_bins) * SR / (2 * (n_bins - 1))
    r = np.exp(-np.pi * bw / SR)
    th = 2 * np.pi * f / SR
    z = np.exp(-2j * np.pi * freqs / SR)
    h = (1 - r) / ((1 - r * np.exp(1j * th) * z) * (1 - r * np.exp(-1j * th) * z))
    return np.tile(np.abs(h) ** 2, (n_frames, 1))


def _lsd(a, b):
    return np.sqrt(np.mean((10 * np.log10(a) - 10 * np.log10(b)) ** 2, axis=1))


# -- mcep -----------------------------------------------------------------

def test_flat_envelope_gives_zero_mcep():
    m = sp_to_mcep(np.ones((3, 513)))
    assert m.data.shape == (MCEP_DIM, 3)
    assert np.max(np.abs(m.data)) < 1e-12


def test_zero_warp_is_plain_cepstrum():
    sp = _one_formant_env()
    m = sp_to_mcep(sp, warp=0.0)
    cep = np.fft.irfft(np.log(sp[0]), 1024)[:MCEP_DIM]
    np.testing.assert_allclose(m.data[:, 0], cep, atol=1e-12)


def test_freqt_identity_at_zero_warp(rng):
    c = rng.standard_normal(20)
    np.testing.assert_allclose(freqt(c, 19, 0.0), c, atol=1e-14)


def test_freqt_matches_warped_log_spectrum(rng):
    # warped cepstrum evaluated on the warped frequency axis reproduces the original
    c = rng.standard_normal(12) * 0.3 * 0.5 ** np.arange(12)
    alpha = 0.42
    mc = c @ warp_matrix(12, 201, alpha)
    w = np.linspace(0, np.pi, 64)
    wt = w + 2 * np.arctan(alpha * np.sin(w) / (1 - alpha * np.cos(w)))
    orig = c[0] + 2 * np.cos(np.outer(w, np.arange(1, 12))) @ c[1:]
    warped = mc[0] + 2 * np.cos(np.outer(wt, np.arange(1, 201))) @ mc[1:]
    np.testing.assert_allclose(warped, orig, atol=1e-9)


def test_mcep_round_trip_one_formant():
    sp = _one_formant_env()
    back = mcep_to_sp(sp_to_mcep(sp))
    assert np.median(_lsd(sp, back)) < 1.5


def test_mcep_round_trip_analysed_vowel():
    vf = analyze(vowel(150.0, 0.4))
    back = mcep_to_sp(sp_to_mcep(vf.sp))
    assert np.median(_lsd(vf.sp[10:-10], back[10:-10])) < 1.5


def test_zero_mcep_is_flat():
    sp = mcep_to_sp(FeatureSequence(np.zeros((MCEP_DIM, 2)), "mcep"))
    np.testing.assert_allclose(sp, 1.0, atol=1e-12)


def test_c0_is_gain():
    m = sp_to_mcep(_one_formant_env())
    a = mcep_to_sp(m)
    m.data[0] += np.log(4.0)
    np.testing.assert_allclose(mcep_to_sp(m), 4 * a, rtol=1e-10)


def test_mcep_rejects_nonpositive():
    with pytest.raises(NonPositiveEnvelope):
        sp_to_mcep(np.zeros((1, 513)))


# -- bap -------------------------------------------------------------------

def test_bap_of_one_and_tenth():
    np.testing.assert_allclose(ap_to_bap(np.ones((2, 513))).data, 0.0, atol=1e-12)
    np.testing.assert_allclose(ap_to_bap(np.full((2, 513), 0.1)).data, -20.0, atol=1e-9)


def test_bap_round_trip_band_constant(rng):
    ap = rng.uniform(0.01, 0.95, (5, 513))
    back = bap_to_ap(ap_to_bap(ap))
    idx = bap_band_index(1024)
    db = 20 * np.log10(ap)
    for b in range(BAP_DIM):
        want = 10 ** (db[:, idx == b].mean(axis=1) / 20)
        np.testing.assert_allclose(back[:, idx == b], np.repeat(want[:, None], np.sum(idx == b), 1),
                                   rtol=1e-12)


def test_bap_range_checked():
    with pytest.raises(RangeViolation):
        ap_to_bap(np.full((1, 513), 1.2))


def test_kind_dims_enforced():
    with pytest.raises(KindMismatch):
        FeatureSequence(np.zeros((24, 3)), "mcep")
    with pytest.raises(KindMismatch):
        mcep_to_sp(FeatureSequence(np.zeros((24, 3)), "bap"))


def test_fseq_container(rng):
    f = FeatureSequence(rng.standard_normal((BAP_DIM, 7)), "bap", 0.005)
    data = feature_sequence_to_bytes(f)
    assert data[:4] == b"FSEQ"
    g = feature_sequence_from_bytes(data)
    assert g.kind == "bap" and g.frame_shift == 0.005
    np.testing.assert_array_equal(g.data, f.data)
    with pytest.raises(ContainerFormatError):
        feature_sequence_from_bytes(b"XXXX" + data[4:])
    with pytest.raises(ContainerFormatError):
        feature_sequence_from_bytes(data[:-8])


# -- evaluation features -----------------------------------------------------

def _mfcc_oracle(x, n_coeffs=13, n_filters=26):
    """Loop-based filterbank + DCT re-implementation."""
    hop, win_len, n_fft = 160, 400, 512
    n = np.arange(win_len)
    win = 0.54 - 0.46 * np.cos(2 * np.pi * n / win_len)
    n_frames = 1 + (len(x) - 1) // hop
    xp = np.concatenate([np.zeros(win_len // 2), x, np.zeros(win_len + n_frames * hop)])
    hz_to_mel = lambda f: 2595.0 * np.log10(1 + f / 700.0)
    mel_to_hz = lambda m: 700.0 * (10 ** (m / 2595.0) - 1)
    pts = [mel_to_hz(hz_to_mel(8000.0) * i / (n_filters + 1)) for i in range(n_filters + 2)]
    out = np.zeros((n_frames, n_coeffs))
    for t in range(n_frames):
        frame = np.zeros(n_fft)
        frame[56:56 + win_len] = xp[t * hop:t * hop + win_len] * win
        p = np.abs(np.fft.rfft(frame)) ** 2 / n_fft
        logs = []
        for j in range(n_filters):
            lo, mid, hi = pts[j], pts[j + 1], pts[j + 2]
            e = 0.0
            for k in range(n_fft // 2 + 1):
                f = k * 16000 / n_fft
                wgt = max(0.0, min((f - lo) / (mid - lo), (hi - f) / (hi - mid)))
                e += wgt * p[k]
            logs.append(np.log(max(e, 1e-10)))
        for c in range(n_coeffs):
            scale = np.sqrt(1.0 / n_filters) if c == 0 else np.sqrt(2.0 / n_filters)
            out[t, c] = scale * sum(logs[j] * np.cos(np.pi * c * (2 * j + 1) / (2 * n_filters))
                                    for j in range(n_filters))
    return out


def test_mfcc_matches_oracle_on_sine():
    t = np.arange(1600) / SR
    x = 0.5 * np.sin(2 * np.pi * 1000 * t)
    m = mfcc(Waveform(x))
    np.testing.assert_allclose(m, _mfcc_oracle(x), atol=1e-9)
    inner = m[3:-3]
    assert np.all(np.abs(inner[:, 0]) > np.abs(inner[:, 1:]).max(axis=1))


def test_mfcc_silence_floor():
    m = mfcc(Waveform(np.zeros(4000)))
    np.testing.assert_allclose(m[:, 0], np.sqrt(26) * np.log(1e-10), rtol=1e-12)
    assert np.max(np.abs(m[:, 1:])) < 1e-9


def test_ltas_sine_band():
    t = np.arange(16000) / SR
    v = ltas(Waveform(np.sin(2 * np.pi * 1000 * t)))
    assert v.size == 64
    band = int(1000 / (8000 / 64))    # equal-width bands of 125 Hz
    assert np.argmax(v) in (band - 1, band)


def test_ltas_noise_flat(rng):
    v = ltas(Waveform(rng.standard_normal(5 * SR)))
    assert v.max() - v.min() < 6.0


def test_ltas_silence_floor():
    np.testing.assert_array_equal(ltas(Waveform(np.zeros(3000))), -80.0)


def test_corr_structure_rules(rng):
    a = rng.standard_normal(100)
    tracks = np.vstack([a, a, np.full(100, 3.0)])
    c = corr_structure(tracks)
    assert c.size == corr_structure_size(3)
    # pair (0, 1): lag 0 comes first after the 4 auto-lags of track 0
    assert c[4] == pytest.approx(1.0)
    # every correlation involving the constant track is 0
    const_rows = list(range(4 + 5, 4 + 5 + 5)) + list(range(4 + 5 + 5 + 4, 4 + 5 + 5 + 4 + 5)) + \
        list(range(c.size - 4, c.size))
    assert np.all(c[const_rows] == 0.0)
    with pytest.raises(TooShort):
        corr_structure(tracks[:, :15])


def _am_noise(rng, rate_hz, seconds=4.0):
    t = np.arange(int(seconds * SR)) / SR
    return Waveform(rng.standard_normal(t.size) * (1 + 0.9 * np.sin(2 * np.pi * rate_hz * t)) * 0.1)


def test_ems_am_peak(rng):
    v = ems(_am_noise(rng, 4.0)).reshape(-1, 3)
    assert v.shape == (ems_size() // 3, 3)
    assert np.all(np.abs(v[:, 0] - 4.0) <= 0.25)


def test_ems_two_hz(rng):
    v = ems(_am_noise(rng, 2.0)).reshape(-1, 3)
    assert np.all(np.abs(v[:, 0] - 2.0) <= 0.25)
    assert np.all((v[:, 0] < 3.0) | (v[:, 0] > 6.0))


def test_ems_tone_ratio_small():
    t = np.arange(2 * SR) / SR
    v = ems(Waveform(0.3 * np.sin(2 * np.pi * 1000 * t))).reshape(-1, 3)
    assert v[3, 2] < 0.01          # the 1 kHz octave band carries the tone


def test_eval_vector_blocks():
    w = Waveform(np.concatenate([vowel(130.0, 0.7).samples, vowel(180.0, 0.5, (400.0, 2000.0, 2600.0)).samples]))
    short = assemble_eval_vector(w, include_rhythm=False).vector
    full = assemble_eval_vector(w, include_rhythm=True).vector
    assert short.size == len(eval_feature_names(False)) == 332
    assert full.size - short.size == ems_size()
    np.testing.assert_array_equal(full[:short.size], short)
    np.testing.assert_array_equal(assemble_eval_vector(w).vector, short)
    assert np.all(np.isfinite(full))


def test_eval_csv_round_trip(tmp_path, rng):
    vec = rng.standard_normal((2, 332))
    write_eval_csv(tmp_path / "e.csv", ["a", "b"], vec, include_rhythm=False)
    ids, back, rhythm = read_eval_csv(tmp_path / "e.csv")
    assert ids == ["a", "b"] and not rhythm
    np.testing.assert_array_equal(back, vec)


@settings(max_examples=20, deadline=None)
@given(st.floats(-3, 3), st.integers(1, 5))
def test_mcep_gain_property(g, n_frames):
    sp = _one_formant_env(n_frames=n_frames) * np.exp(g)
    m = sp_to_mcep(sp)
    ref = sp_to_mcep(_one_formant_env(n_frames=n_frames))
    np.testing.assert_allclose(m.data[0] - ref.data[0], g, atol=1e-9)
    np.testing.assert_allclose(m.data[1:], ref.data[1:], atol=1e-9)
