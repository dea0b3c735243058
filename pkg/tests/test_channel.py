import numpy as np
import pytest

from quantlink.channel import (
    ChannelRealization,
    TapProfile,
    equalize,
    exponential_pdp,
    flat_profile,
    load_tap_profile,
    parse_profile_ref,
    realize_channel,
    tdl_c_profile,
    transmit_symbols,
)
from quantlink.modem import ber_approx, constellation, demodulate, snr_threshold
from quantlink.rng import stream_rng


def test_profile_normalizes_powers():
    p = TapProfile(np.array([0.0, 1e-7]), np.array([2.0, 6.0]), "x")
    assert p.powers.sum() == pytest.approx(1.0, abs=1e-15)
    assert p.powers[1] == pytest.approx(0.75)


def test_profile_rejects_empty_and_negative():
    with pytest.raises(ValueError):
        TapProfile(np.array([]), np.array([]), "x")
    with pytest.raises(ValueError):
        TapProfile(np.array([0.0]), np.array([-1.0]), "x")


def test_exponential_pdp_hits_requested_rms():
    for rms in (30.0, 100.0, 300.0):
        prof = exponential_pdp(rms)
        assert prof.rms_delay_spread_s() == pytest.approx(rms * 1e-9, rel=1e-12)


def test_tdl_c_profile_loads_and_scales():
    prof = tdl_c_profile()
    assert prof.powers.size == 24
    assert prof.powers.sum() == pytest.approx(1.0, abs=1e-12)
    # table is specified as normalized delays times 300 ns
    assert prof.rms_delay_spread_s() == pytest.approx(300e-9, rel=0.05)


def test_parse_profile_ref(tmp_path):
    assert parse_profile_ref("exp-pdp(250)").label == "exp-pdp(250)"
    assert parse_profile_ref("tdl-c").label == "tdl-c-300ns"
    path = tmp_path / "prof.json"
    path.write_text(
        '{"label": "two-tap", "taps": [{"delay_ns": 0, "power_db": 0}, {"delay_ns": 100, "power_db": -3}]}'
    )
    prof = parse_profile_ref(str(path))
    assert prof.label == "two-tap"
    assert prof.delays_s[1] == pytest.approx(100e-9)


def test_flat_profile_gives_constant_gain():
    ch = realize_channel(flat_profile(), n_sc=64, spacing_hz=30e3, seed=5)
    assert np.max(np.abs(np.abs(ch.gains) - np.abs(ch.gains[0]))) < 1e-14


def test_mean_gain_power_is_one():
    prof = exponential_pdp(300.0)
    acc = 0.0
    n_real = 10_000
    rng = stream_rng("gain-power")
    for _ in range(n_real):
        ch = realize_channel(prof, n_sc=8, spacing_hz=30e3, rng=rng)
        acc += np.mean(np.abs(ch.gains) ** 2)
    mean = acc / n_real
    # |h|^2 is Exp(1): std of the estimate ~ 1/sqrt(n_real * effective subcarriers)
    assert abs(mean - 1.0) < 3.0 / np.sqrt(n_real)


class _FixedDraws:
    """Stub generator: hands out queued standard_normal vectors."""

    def __init__(self, draws):
        self.draws = list(draws)

    def standard_normal(self, n):
        out = np.asarray(self.draws.pop(0), dtype=float)
        assert out.size == n
        return out


def test_two_path_closed_form_response_and_nulls():
    n_sc, spacing = 64, 30e3
    tau = 1.0 / (2.0 * spacing)  # half-wavelength at the first subcarrier
    prof = TapProfile(np.array([0.0, tau]), np.array([0.5, 0.5]), "two-path")
    stub = _FixedDraws([[np.sqrt(2.0), np.sqrt(2.0)], [0.0, 0.0]])
    ch = realize_channel(prof, n_sc=n_sc, spacing_hz=spacing, rng=stub)
    k = np.arange(n_sc)
    expect = 0.5 * np.sqrt(2.0) * (1.0 + np.exp(-2j * np.pi * k * spacing * tau))
    assert np.allclose(ch.gains, expect, atol=1e-12)
    assert np.max(np.abs(ch.gains[1::2])) < 1e-12  # nulls on every odd subcarrier


def test_transmit_noiseless_limit():
    rng = stream_rng("tx", 0)
    s = np.array([1 + 1j, -1 - 1j]) / np.sqrt(2)
    r = transmit_symbols(s, 4.0, 0.5j, 1e-30, rng)
    assert np.allclose(r, 2.0 * 0.5j * s, atol=1e-12)


def test_transmit_zero_power_is_pure_noise():
    rng = stream_rng("tx0", 0)
    r = transmit_symbols(np.ones(200_000), 0.0, 1.0 + 0j, 2.0, rng)
    assert abs(np.mean(np.abs(r) ** 2) - 2.0) < 0.02


def test_empirical_snr_matches_configured():
    rng = stream_rng("snr", 0)
    n = 1_000_000
    gamma, h, nv = 7.0, 0.8 - 0.6j, 1.3
    p = gamma * nv / abs(h) ** 2
    s = np.exp(2j * np.pi * rng.random(n))
    r = transmit_symbols(s, p, h, nv, rng)
    noise = r - np.sqrt(p) * h * s
    snr = p * abs(h) ** 2 / np.mean(np.abs(noise) ** 2)
    assert abs(snr - gamma) / gamma < 0.02


def test_equalize_round_trip_and_noise_scaling():
    rng = stream_rng("eq", 0)
    s = np.exp(2j * np.pi * rng.random(500_000))
    p, h, nv = 2.5, 0.3 + 1.1j, 0.7
    r = transmit_symbols(s, p, h, nv, rng)
    shat = equalize(r, p, h)
    resid = shat - s
    assert np.mean(np.abs(resid) ** 2) == pytest.approx(nv / (p * abs(h) ** 2), rel=0.02)
    clean = equalize(np.sqrt(p) * h * s, p, h)
    assert np.allclose(clean, s, atol=1e-12)


def test_equalize_rejects_degenerate_inputs():
    with pytest.raises(ValueError):
        equalize(np.array([1 + 0j]), 0.0, 1.0 + 0j)
    with pytest.raises(ValueError):
        equalize(np.array([1 + 0j]), 1.0, 0.0 + 0j)


def test_end_to_end_ber_ties_channel_to_modem():
    # at gamma_th(m, eps) the chain BER lands on eps
    rng = stream_rng("chain-ber", 1)
    for m, eps in ((2, 0.05), (4, 0.01)):
        gamma = snr_threshold(m, eps)
        h = 0.6 + 0.8j
        nv = 1.7
        p = gamma * nv / abs(h) ** 2
        n_sym = 2_000_000 // m
        words = rng.integers(0, 1 << m, size=n_sym)
        s = constellation(m).points[words]
        rx = demodulate(equalize(transmit_symbols(s, p, h, nv, rng), p, h), m)
        ber = np.sum([bin(int(x)).count("1") for x in np.bitwise_xor(words, rx)]) / (n_sym * m)
        assert ber == pytest.approx(ber_approx(m, gamma), rel=0.1)


def test_realization_validation():
    with pytest.raises(ValueError):
        ChannelRealization(np.array([1 + 0j]), 0.0, 30e3, 0)
    with pytest.raises(ValueError):
        realize_channel(flat_profile(), n_sc=0)


def test_seeded_realizations_are_deterministic():
    prof = exponential_pdp(300.0)
    a = realize_channel(prof, n_sc=32, seed=11)
    b = realize_channel(prof, n_sc=32, seed=11)
    c = realize_channel(prof, n_sc=32, seed=12)
    assert np.array_equal(a.gains, b.gains)
    assert not np.array_equal(a.gains, c.gains)
