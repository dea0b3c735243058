import numpy as np
import pytest
from scipy import stats as sst

from quantlink.modem import (
    QAM_BITS,
    ber_approx,
    constellation,
    demodulate,
    modulate,
    snr_threshold,
)
from quantlink.rng import stream_rng


def test_unit_energy_exact():
    for m in QAM_BITS:
        pts = constellation(m).points
        assert np.mean(np.abs(pts) ** 2) == pytest.approx(1.0, abs=1e-12)


def test_qpsk_points():
    pts = sorted(
        (round(p.real, 12), round(p.imag, 12)) for p in constellation(2).points
    )
    s = 1 / np.sqrt(2)
    expect = sorted(
        (round(a, 12), round(b, 12)) for a in (-s, s) for b in (-s, s)
    )
    assert pts == expect


def test_16qam_corner_energy():
    pts = constellation(4).points
    assert np.max(np.abs(pts) ** 2) == pytest.approx(9 / 5, abs=1e-12)


def test_all_zero_word_quadrant_fixed():
    for m in QAM_BITS:
        p = modulate(0, m)
        assert p.real < 0 and p.imag < 0


def test_round_trip_all_words():
    for m in QAM_BITS:
        words = np.arange(1 << m)
        assert np.array_equal(demodulate(modulate(words, m), m), words)


def test_demodulate_tie_goes_to_lower_level():
    table = constellation(4)
    boundary = table.axis_bounds[0]  # midpoint between the two lowest levels
    word = demodulate(complex(boundary, table.axis_levels[0]), 4)
    # decided I coordinate must be the lower of the two adjacent levels
    assert modulate(word, 4).real == pytest.approx(table.axis_levels[0], abs=1e-12)


def test_gray_adjacency():
    for m in QAM_BITS:
        table = constellation(m)
        n_axis = 1 << (m // 2)
        words = np.arange(1 << m)
        grid = {}
        for w in words:
            p = table.points[w]
            i = int(np.argmin(np.abs(table.axis_levels - p.real)))
            q = int(np.argmin(np.abs(table.axis_levels - p.imag)))
            grid[(i, q)] = int(w)
        for (i, q), w in grid.items():
            for di, dq in ((1, 0), (0, 1)):
                if (i + di, q + dq) in grid:
                    other = grid[(i + di, q + dq)]
                    assert bin(w ^ other).count("1") == 1


def test_modulate_rejects_inactive_order():
    with pytest.raises(ValueError):
        modulate(0, 0)
    with pytest.raises(ValueError):
        modulate(4, 2)


def test_ber_qpsk_reduces_to_q_function():
    from quantlink.gaussian import q_function

    for g in (0.0, 0.5, 2.0, 10.0, 30.0):
        assert ber_approx(2, g) == pytest.approx(q_function(np.sqrt(g)), abs=1e-15)
    assert ber_approx(2, 0.0) == 0.5


def test_ber_16qam_at_gamma_10():
    # independent oracle: scipy.stats.norm.sf
    oracle = float(
        (1 - 1 / 4) * sst.norm.sf(np.sqrt(2.0)) + (1 - 2 / 4) * sst.norm.sf(3 * np.sqrt(2.0))
    )
    assert ber_approx(4, 10.0) == pytest.approx(oracle, abs=1e-12)
    assert ber_approx(4, 10.0) == pytest.approx(0.05899, abs=1e-5)


def test_ber_strictly_decreasing():
    g = np.linspace(0.0, 400.0, 4001)
    for m in QAM_BITS:
        vals = ber_approx(m, g)
        assert np.all(np.diff(vals) < 0)


def test_snr_threshold_qpsk_closed_form():
    assert snr_threshold(2, 0.05) == pytest.approx(2.705543454095415, abs=1e-5)


def test_snr_threshold_limit_near_half():
    assert snr_threshold(2, 0.499) < 2e-5


def test_snr_threshold_fixed_point():
    from quantlink.library import default_epsilon_grid

    for m in QAM_BITS:
        for eps in default_epsilon_grid():
            g = snr_threshold(m, float(eps))
            assert abs(ber_approx(m, g) - eps) <= 1e-10


def test_snr_threshold_monotone_and_convex_in_order():
    from quantlink.library import default_epsilon_grid

    for eps in default_epsilon_grid():
        g = [snr_threshold(m, float(eps)) for m in QAM_BITS]
        assert np.all(np.diff(g) > 0)
        inc = np.diff(np.concatenate(([0.0], g)))
        assert np.all(np.diff(inc) > 0)


def test_snr_threshold_domain_errors():
    with pytest.raises(ValueError):
        snr_threshold(2, 0.0)
    with pytest.raises(ValueError):
        snr_threshold(2, 0.5)
    with pytest.raises(ValueError):
        snr_threshold(2, 0.4999999)  # above the value at the bracket floor


def test_awgn_monte_carlo_against_model():
    from quantlink.simulator import measure_link_ber

    rng = stream_rng("modem-mc", 0)
    for m, gamma in ((2, 10.0), (4, 40.0), (6, 150.0), (8, 600.0)):
        expect = ber_approx(m, gamma)
        got = measure_link_ber(m, gamma, 1_000_000, rng)
        assert got == pytest.approx(expect, rel=0.1)
