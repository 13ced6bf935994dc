import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import erf

from nftnet.core import make_nonlinear_grid
from nftnet.dataset import burst_time_grid
from nftnet.errors import ConfigurationError, InvalidArgument
from nftnet.modem import (
    QAM_ORDERS,
    TIME_SCALE,
    SUBCARRIER_COUNTS,
    BurstConfig,
    CarrierKind,
    SymbolFrame,
    bit_error_rate,
    carrier_eval,
    constellation,
    effective_width,
    nfdm_demodulate,
    nfdm_modulate,
    qam_demap,
    qam_map,
    random_frame,
)


def all_words(order):
    m = int(math.log2(order))
    return np.array(list(itertools.product([0, 1], repeat=m)), dtype=np.uint8).ravel()


# ---------------------------------------------------------------- QAM


def test_qpsk_zero_word():
    assert qam_map(np.array([0, 0]), 4)[0] == pytest.approx((1 + 1j) / math.sqrt(2))


@pytest.mark.parametrize("order", QAM_ORDERS)
def test_constellation_power_and_distinct(order):
    pts = qam_map(all_words(order), order)
    assert len(set(np.round(pts, 12))) == order
    assert abs(np.mean(np.abs(pts) ** 2) - 1) < 1e-12
    assert np.array_equal(pts, constellation(order))


@pytest.mark.parametrize("order", QAM_ORDERS)
def test_demap_inverts_map(order):
    bits = all_words(order)
    assert np.array_equal(qam_demap(qam_map(bits, order), order), bits)


@pytest.mark.parametrize("order", QAM_ORDERS)
def test_gray_neighbours_differ_by_one_bit(order):
    pts = constellation(order)
    m = int(math.log2(order))
    dmin = min(abs(a - b) for a, b in itertools.combinations(pts, 2))
    for i, j in itertools.combinations(range(order), 2):
        if abs(abs(pts[i] - pts[j]) - dmin) < 1e-9:
            assert bin(i ^ j).count("1") == 1, (i, j, m)


def test_small_perturbation_keeps_decision(rng):
    for order in QAM_ORDERS:
        bits = all_words(order)
        pts = qam_map(bits, order)
        noisy = pts + 0.01 * np.exp(2j * np.pi * rng.uniform(size=pts.size))
        assert np.array_equal(qam_demap(noisy, order), bits)


def test_tie_goes_to_lower_index():
    pts = constellation(16)
    mid = (pts[0] + pts[1]) / 2
    assert np.array_equal(qam_demap([mid], 16), [0, 0, 0, 0])
    # symmetric point at the origin decodes to word 0 of QPSK
    assert np.array_equal(qam_demap([0], 4), [0, 0])


def test_qam_rejects():
    with pytest.raises(InvalidArgument):
        qam_map(np.zeros(3, np.uint8), 4)
    with pytest.raises(InvalidArgument):
        qam_map(np.zeros(4, np.uint8), 8)
    with pytest.raises(InvalidArgument):
        qam_demap([0j], 32)


@settings(max_examples=50, deadline=None)
@given(st.sampled_from(QAM_ORDERS), st.integers(0, 2**32 - 1))
def test_map_demap_random(order, seed):
    f = random_frame(np.random.default_rng(seed), order, 32)
    assert np.array_equal(qam_demap(f.symbols, order), f.bits)


# ---------------------------------------------------------------- carriers


def test_sinc_carrier_values():
    t0 = 1e-9
    assert carrier_eval(CarrierKind.Sinc, 3, 3 * math.pi / t0, t0) == pytest.approx(1.0)
    for m in (-2, 0, 1, 5):
        assert abs(carrier_eval(CarrierKind.Sinc, 3, m * math.pi / t0, t0)) < 1e-15


def test_flattop_carrier_centre():
    t0 = 1.2e-9
    n = 2
    expect = t0 / (8 * math.sqrt(2 * math.pi)) * 2 * erf(2 * math.pi / math.sqrt(2))
    got = carrier_eval(CarrierKind.FlatTop, n, 4 * math.pi * n / t0, t0)
    assert got == pytest.approx(expect, rel=1e-12)
    assert got == pytest.approx(t0 * 0.0997355, rel=1e-5)


# ---------------------------------------------------------------- modulation


def cfg_for(order, nsub, kind, amplitude=1.0, phase=0.0, t0=1e-9):
    return BurstConfig(order, nsub, kind, t0, amplitude, phase)


def test_zero_symbols_give_zero_spectrum():
    ng = make_nonlinear_grid(burst_time_grid())
    cfg = cfg_for(4, 32, CarrierKind.Sinc)
    Q = nfdm_modulate(SymbolFrame(np.zeros(32, complex), np.zeros(64, np.uint8)), cfg, ng)
    assert np.all(Q.values == 0)
    assert np.array_equal(nfdm_demodulate(Q, cfg).bits, np.zeros(64))


def test_single_symbol_is_one_carrier():
    ng = make_nonlinear_grid(burst_time_grid())
    cfg = cfg_for(4, 32, CarrierKind.Sinc)
    sym = np.zeros(32, complex)
    sym[16] = 1.0  # index 16 is subcarrier n = 0
    Q = nfdm_modulate(SymbolFrame(sym, np.zeros(64, np.uint8)), cfg, ng).values
    ref = carrier_eval(CarrierKind.Sinc, 0, ng.lambda_values, effective_width(cfg))
    # carriers share one spectral gain; compare shapes
    assert np.allclose(Q / Q[np.argmax(np.abs(Q))], ref, atol=1e-12)


def test_phase_rotates_spectrum(rng):
    ng = make_nonlinear_grid(burst_time_grid())
    f = random_frame(rng, 16, 64)
    q0 = nfdm_modulate(f, cfg_for(16, 64, CarrierKind.FlatTop, phase=0.0), ng).values
    q1 = nfdm_modulate(f, cfg_for(16, 64, CarrierKind.FlatTop, phase=math.pi / 2), ng).values
    assert np.allclose(q1, 1j * q0, atol=1e-15)


@pytest.mark.parametrize("order", QAM_ORDERS)
@pytest.mark.parametrize("nsub", SUBCARRIER_COUNTS)
@pytest.mark.parametrize("kind", list(CarrierKind))
def test_modulation_round_trip(order, nsub, kind, rng):
    tg = burst_time_grid()
    ng = make_nonlinear_grid(tg)
    # sinc width a quarter of the window puts every sinc centre on a grid bin
    t0 = tg.window / 4 / TIME_SCALE[CarrierKind.Sinc]
    cfg = cfg_for(order, nsub, kind, amplitude=2.0, phase=1.0, t0=t0)
    f = random_frame(rng, order, nsub)
    out = nfdm_demodulate(nfdm_modulate(f, cfg, ng), cfg)
    tol = 1e-9 if kind is CarrierKind.Sinc else 1e-3
    assert np.max(np.abs(out.symbols - f.symbols)) < tol
    assert np.array_equal(out.bits, f.bits)


@pytest.mark.parametrize("t0", [0.7e-9, 1.4e-9])
def test_off_grid_centres_recover_bits(t0, rng):
    ng = make_nonlinear_grid(burst_time_grid())
    for order, nsub, kind in itertools.product(QAM_ORDERS, SUBCARRIER_COUNTS, CarrierKind):
        cfg = cfg_for(order, nsub, kind, amplitude=3.0, phase=2.0, t0=t0)
        f = random_frame(rng, order, nsub)
        assert np.array_equal(nfdm_demodulate(nfdm_modulate(f, cfg, ng), cfg).bits, f.bits)


def test_alias_check():
    ng = make_nonlinear_grid(burst_time_grid())
    cfg = cfg_for(4, 128, CarrierKind.FlatTop, t0=0.2e-9)
    with pytest.raises(ConfigurationError):
        nfdm_modulate(random_frame(np.random.default_rng(0), 4, 128), cfg, ng)


def test_frame_length_checked(rng):
    ng = make_nonlinear_grid(burst_time_grid())
    with pytest.raises(InvalidArgument):
        nfdm_modulate(random_frame(rng, 4, 32), cfg_for(4, 64, CarrierKind.Sinc), ng)


def test_config_domains():
    with pytest.raises(InvalidArgument):
        cfg_for(8, 32, CarrierKind.Sinc)
    with pytest.raises(InvalidArgument):
        cfg_for(4, 48, CarrierKind.Sinc)
    with pytest.raises(InvalidArgument):
        cfg_for(4, 32, CarrierKind.Sinc, phase=4.0)


# ---------------------------------------------------------------- BER


def test_bit_error_rate():
    a = np.zeros(100, np.uint8)
    assert bit_error_rate(a, a) == 0
    assert bit_error_rate(a, 1 - a) == 1
    b = a.copy()
    b[17] = 1
    assert bit_error_rate(a, b) == pytest.approx(0.01)
    with pytest.raises(InvalidArgument):
        bit_error_rate(a, a[:10])
