import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from adaptbo.acquisition import ei_array
from adaptbo.adaptive import (
    AdaptiveSchedule,
    acquisition_jitter,
    combined_value,
    condition_mean,
    conditioning_offset,
)


def test_offset_examples():
    s = AdaptiveSchedule()
    assert conditioning_offset(s, 0) == 0.1
    assert conditioning_offset(s, 10) == pytest.approx(0.05, abs=1e-15)
    zero = AdaptiveSchedule(constant_value=0.0)
    assert all(conditioning_offset(zero, i) == 0.0 for i in (0, 7, 1000))


def test_jitter_examples():
    s = AdaptiveSchedule()
    assert acquisition_jitter(s, 0) == 0.01
    assert acquisition_jitter(s, 90) == pytest.approx(0.001, abs=1e-15)
    assert acquisition_jitter(s, 10) == pytest.approx(0.005, abs=1e-15)


def test_negative_iteration_rejected():
    with pytest.raises(ValueError):
        conditioning_offset(AdaptiveSchedule(), -1)
    with pytest.raises(ValueError):
        acquisition_jitter(AdaptiveSchedule(), -1)


@pytest.mark.parametrize("kwargs", [{"jitter_base": 0.0}, {"conditioning_decay": -0.1}, {"jitter_decay": -1.0}])
def test_schedule_invariants(kwargs):
    with pytest.raises(ValueError):
        AdaptiveSchedule(**kwargs)


def test_zero_decay_freezes_schedule():
    s = AdaptiveSchedule(conditioning_decay=0.0, jitter_decay=0.0)
    assert {conditioning_offset(s, i) for i in range(50)} == {0.1}
    assert {acquisition_jitter(s, i) for i in range(50)} == {0.01}


@given(
    c0=st.floats(1e-6, 10), cd=st.floats(1e-3, 5), jb=st.floats(1e-6, 1), jd=st.floats(1e-3, 5),
    i=st.integers(0, 10_000),
)
def test_strict_monotone_decay(c0, cd, jb, jd, i):
    s = AdaptiveSchedule(c0, cd, jb, jd)
    assert conditioning_offset(s, i + 1) < conditioning_offset(s, i)
    assert 0 < acquisition_jitter(s, i + 1) < acquisition_jitter(s, i)


def test_limits():
    s = AdaptiveSchedule()
    assert conditioning_offset(s, 10**12) < 1e-11
    assert acquisition_jitter(s, 10**12) < 1e-12


def test_condition_mean_and_combined_value():
    assert condition_mean(0.5, 0.1) == pytest.approx(0.6)
    assert condition_mean(-1.2, 0.0) == -1.2
    assert condition_mean(0.3345, 0.05) == pytest.approx(0.3845, abs=1e-12)
    assert combined_value(0.1, -0.5) == pytest.approx(-0.4)
    assert combined_value(0.0, -0.73) == -0.73
    assert combined_value(0.05, -1.8846) == pytest.approx(-1.8346, abs=1e-12)
    np.testing.assert_array_equal(condition_mean(np.array([1.0, 2.0]), 0.5), [1.5, 2.5])


def test_argmax_invariance_under_uniform_offset():
    rng = np.random.default_rng(8)
    for _ in range(200):
        n = rng.integers(2, 60)
        mu = rng.normal(size=n)
        sigma = rng.uniform(0.05, 2.0, size=n)
        f_min, xi, offset = rng.normal(), rng.uniform(0, 0.05), rng.uniform(0, 0.5)
        conditioned = ei_array(condition_mean(mu, offset), sigma, f_min + offset, xi)
        raw = ei_array(mu, sigma, f_min, xi)
        np.testing.assert_allclose(conditioned, raw, rtol=1e-9, atol=1e-13)
        assert np.argmax(conditioned) == np.argmax(raw) or np.isclose(
            raw[np.argmax(conditioned)], raw.max(), rtol=1e-9
        )
