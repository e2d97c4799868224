import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from dysvc.errors import EmptyAlsStats, TooFewVoicedFrames, ZeroHealthyVariance
from dysvc.pitch_mod import (PitchStats, alpha_from_reference, compute_alpha, group_by_speaker,
                             pitch_stats, reference_std, speaker_std, transform_f0)


def test_pitch_stats_population_std():
    s = pitch_stats([0, 100, 120, 0, 140])
    assert s.mean_f0 == 120.0 and s.n_voiced == 3
    assert s.std_f0 == pytest.approx(np.sqrt(800 / 3), abs=1e-12)
    assert round(s.std_f0, 2) == 16.33


def test_pitch_stats_errors_and_constant():
    with pytest.raises(TooFewVoicedFrames):
        pitch_stats([0, 0, 0])
    assert pitch_stats([0, 150, 150, 150]).std_f0 == 0.0


def test_compute_alpha():
    als = [PitchStats(100, 8, 10), PitchStats(110, 12, 10)]
    assert compute_alpha(als, PitchStats(200, 20, 10)) == pytest.approx(0.5)
    assert compute_alpha([PitchStats(1, 20, 3)] * 3, PitchStats(2, 20, 3)) == 1.0
    with pytest.raises(ZeroHealthyVariance):
        compute_alpha(als, PitchStats(200, 0.0, 10))
    with pytest.raises(EmptyAlsStats):
        compute_alpha([], PitchStats(200, 20, 10))


def test_two_level_reference():
    per = group_by_speaker([("a", PitchStats(0, 10, 5)), ("a", PitchStats(0, 20, 500)),
                            ("b", PitchStats(0, 6, 5))])
    assert speaker_std(per["a"]) == 15.0
    assert reference_std(per) == pytest.approx((15 + 6) / 2)
    assert alpha_from_reference(10.5, PitchStats(0, 21, 3)) == 0.5
    with pytest.raises(EmptyAlsStats):
        reference_std({})


def test_worked_example():
    out = transform_f0([100.0, 120.0, 140.0], 0.5)
    np.testing.assert_allclose(out, [110.0, 120.0, 130.0], atol=1e-12)


def test_alpha_one_and_zero():
    f0 = np.array([0, 90, 130, 0, 170, 110.0])
    np.testing.assert_array_equal(transform_f0(f0, 1.0), f0)
    out = transform_f0(f0, 0.0)
    assert np.all(out[f0 > 0] == f0[f0 > 0].mean())
    assert np.all(out[f0 == 0] == 0)


voiced = st.floats(80.0, 300.0)
tracks = arrays(np.float64, st.integers(2, 60), elements=st.one_of(st.just(0.0), voiced))


@settings(max_examples=200, deadline=None)
@given(tracks, st.floats(0.0, 1.0))
def test_mean_and_std_contract(f0, alpha):
    v = f0 > 0
    if v.sum() < 2:
        with pytest.raises(TooFewVoicedFrames):
            transform_f0(f0, alpha)
        return
    out = transform_f0(f0, alpha)
    assert abs(out[v].mean() - f0[v].mean()) < 1e-9
    assert abs(out[v].std() - alpha * f0[v].std()) < 1e-9
    np.testing.assert_array_equal(out[~v], 0.0)


def test_negative_alpha_rejected():
    with pytest.raises(ValueError):
        transform_f0([100, 120], -0.1)


def test_clamp_applies_on_extreme_alpha():
    out = transform_f0([60.0, 480.0], 3.0)
    assert out.min() >= 50 and out.max() <= 500
