import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nftnet.core import (
    SpectrumKind,
    SpectrumSamples,
    TimeSignal,
    dft,
    inverse_dft,
    linear_surrogate_spectrum,
    make_nonlinear_grid,
    make_time_grid,
    signal_from_linear_surrogate,
)
from nftnet.errors import InvalidArgument

from oracles import direct_dft, direct_linear_surrogate


def test_time_grid_desk_scale():
    g = make_time_grid(2048, 96e9)
    assert g.dt == pytest.approx(10.416666e-12, rel=1e-6)
    assert g.window == pytest.approx(21.333e-9, rel=1e-4)
    assert make_time_grid(1024, 96e9).window == pytest.approx(10.667e-9, rel=1e-4)


def test_time_grid_smallest():
    g = make_time_grid(2, 1.0)
    assert g.dt == 1.0
    assert g.times().tolist() == [-1.0, 0.0]


@pytest.mark.parametrize("n, rate", [(3, 1.0), (1000, 1.0), (1, 1.0), (8, 0.0), (8, -1.0), (8, math.inf)])
def test_time_grid_rejects(n, rate):
    with pytest.raises(InvalidArgument):
        make_time_grid(n, rate)


def test_nonlinear_grid_values():
    tg = make_time_grid(2048, 96e9)
    ng = make_nonlinear_grid(tg)
    assert ng.lambda_max == pytest.approx(math.pi / (2 * tg.dt) - math.pi / (2048 * tg.dt), rel=1e-12)
    assert math.pi / (2 * tg.dt) == pytest.approx(1.508e11, rel=1e-3)
    assert np.allclose(np.diff(ng.lambda_values), ng.spacing, rtol=1e-9)
    assert np.all(np.diff(ng.lambda_values) > 0)
    assert make_nonlinear_grid(make_time_grid(2, 1.0)).lambda_values.tolist() == [-math.pi / 2, 0.0]


def test_signal_rejects_wrong_length_and_nan():
    tg = make_time_grid(8, 1.0)
    with pytest.raises(InvalidArgument):
        TimeSignal(tg, np.zeros(4))
    with pytest.raises(InvalidArgument):
        TimeSignal(tg, np.full(8, np.nan))


def test_containers_are_read_only():
    tg = make_time_grid(8, 1.0)
    s = TimeSignal(tg, np.zeros(8))
    with pytest.raises(ValueError):
        s.samples[0] = 1


def test_dft_delta_and_tone():
    n = 16
    d = np.zeros(n)
    d[0] = 1
    assert np.allclose(dft(d), 1)
    k0 = 5
    tone = np.exp(2j * np.pi * k0 * np.arange(n) / n)
    expect = np.zeros(n, complex)
    expect[k0] = n
    assert np.allclose(dft(tone), expect, atol=1e-12)


def test_dft_rejects_non_power_of_two():
    with pytest.raises(InvalidArgument):
        dft(np.zeros(12))


def test_dft_matches_direct_sum(rng):
    x = rng.normal(size=64) + 1j * rng.normal(size=64)
    X = dft(x)
    assert np.allclose(X, direct_dft(x), rtol=0, atol=1e-10)
    assert np.sum(np.abs(x) ** 2) == pytest.approx(np.sum(np.abs(direct_dft(x)) ** 2) / 64, rel=1e-10)


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 13), st.integers(0, 2**31))
def test_dft_round_trip(log_n, seed):
    r = np.random.default_rng(seed)
    n = 2**log_n
    x = r.normal(size=n) + 1j * r.normal(size=n)
    y = inverse_dft(dft(x))
    assert np.max(np.abs(y - x)) <= 1e-12 * max(1.0, np.max(np.abs(x))) * log_n


def test_linear_surrogate_zero():
    tg = make_time_grid(64, 1.0)
    assert np.all(linear_surrogate_spectrum(TimeSignal(tg, np.zeros(64))).values == 0)


def test_linear_surrogate_matches_direct_sum(rng):
    tg = make_time_grid(256, 1e9, t_start=-100e-9)
    q = (rng.normal(size=256) + 1j * rng.normal(size=256)) * 1e8
    L = linear_surrogate_spectrum(TimeSignal(tg, q))
    lam = make_nonlinear_grid(tg).lambda_values
    ref = direct_linear_surrogate(q, tg.times(), tg.dt, lam)
    assert L.kind is SpectrumKind.LinearSurrogate
    assert np.max(np.abs(L.values - ref)) <= 1e-9 * np.max(np.abs(ref))


def test_linear_surrogate_gaussian_is_real_even():
    tg = make_time_grid(512, 1.0)
    t = tg.times()
    L = linear_surrogate_spectrum(TimeSignal(tg, np.exp(-t**2 / (2 * 12.0**2)))).values
    assert np.max(np.abs(L.imag)) < 1e-10 * np.max(np.abs(L))
    # index 0 is -lambda_max which has no mirror; the rest is symmetric about index n/2
    assert np.allclose(L[1:], L[1:][::-1], atol=1e-12)
    assert np.argmax(np.abs(L)) == 256


def test_linear_surrogate_shift_theorem(rng):
    tg = make_time_grid(256, 1.0)
    t = tg.times()
    base = np.exp(-t**2 / 50.0) * (1 + 0.3j * t / 10)
    shift = 7
    moved = np.roll(base, shift)
    lam = make_nonlinear_grid(tg).lambda_values
    L0 = linear_surrogate_spectrum(TimeSignal(tg, base)).values
    L1 = linear_surrogate_spectrum(TimeSignal(tg, moved)).values
    assert np.max(np.abs(L1 - L0 * np.exp(-2j * lam * shift * tg.dt))) < 1e-9


def test_signal_from_linear_surrogate_inverts(rng):
    tg = make_time_grid(128, 1e9, t_start=-30e-9)
    q = rng.normal(size=128) + 1j * rng.normal(size=128)
    L = linear_surrogate_spectrum(TimeSignal(tg, q))
    back = signal_from_linear_surrogate(L, tg).samples
    assert np.max(np.abs(back - q)) < 1e-12 * np.max(np.abs(q)) * 10


def test_spectrum_length_checked():
    tg = make_time_grid(8, 1.0)
    with pytest.raises(InvalidArgument):
        SpectrumSamples(make_nonlinear_grid(tg), np.zeros(4), SpectrumKind.NonlinearQ)
