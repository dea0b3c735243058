"""Gray-labeled square QAM with a closed-form BER model and its SNR inversion.

Constellations are axis-separable: an m-bit word splits into an I half and a
Q half (I first, most significant bit first), each half is a reflected-binary
Gray label of a PAM coordinate, and the whole constellation is scaled to unit
average symbol energy. Demodulation is a per-axis nearest-level hard decision,
with boundary ties going to the lower PAM level.

The analytic bit error rate for symbol SNR gamma is the standard two-term
Gray-QAM approximation

    (4/m) (1 - 1/sqrt(M)) Q(sqrt(3 gamma / (M-1)))
  + (4/m) (1 - 2/sqrt(M)) Q(3 sqrt(3 gamma / (M-1))),    M = 2^m,

which is strictly decreasing in gamma, so the SNR needed to hit a BER target
is found by bisection.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gaussian import q_function

__all__ = [
    "QAM_BITS",
    "Constellation",
    "constellation",
    "modulate",
    "demodulate",
    "ber_approx",
    "snr_threshold",
]

QAM_BITS = (2, 4, 6, 8)  # QPSK through 256-QAM; 0 marks an inactive subcarrier


def _gray_encode(k: np.ndarray) -> np.ndarray:
    return k ^ (k >> 1)


def _gray_decode(g: np.ndarray) -> np.ndarray:
    out = np.array(g, copy=True)
    shift = 1
    while np.any(out >> shift):
        out = out ^ (g >> shift)
        shift += 1
    return out


@dataclass(frozen=True)
class Constellation:
    """Unit-energy square QAM table indexed by bit word."""

    m: int
    points: np.ndarray  # complex, points[word] is the symbol for that word
    axis_levels: np.ndarray  # per-axis PAM coordinates by level index
    axis_bounds: np.ndarray  # decision boundaries between adjacent levels
    scale: float

    @property
    def bits_per_axis(self) -> int:
        return self.m // 2


def _build(m: int) -> Constellation:
    half = m // 2
    levels_per_axis = 1 << half
    # odd-integer PAM grid, scaled so the mean squared symbol magnitude is 1
    scale = 1.0 / np.sqrt(2.0 * (levels_per_axis**2 - 1) / 3.0)
    k = np.arange(levels_per_axis)
    coords = (2.0 * k - (levels_per_axis - 1)) * scale
    bounds = 0.5 * (coords[:-1] + coords[1:])
    words = np.arange(1 << m)
    gi = words >> half
    gq = words & (levels_per_axis - 1)
    ki = _gray_decode(gi)
    kq = _gray_decode(gq)
    points = coords[ki] + 1j * coords[kq]
    return Constellation(m=m, points=points, axis_levels=coords, axis_bounds=bounds, scale=scale)


_TABLES: dict[int, Constellation] = {}


def constellation(m: int) -> Constellation:
    if m not in QAM_BITS:
        raise ValueError(f"modulation order must be one of {QAM_BITS}, got {m}")
    if m not in _TABLES:
        _TABLES[m] = _build(m)
    return _TABLES[m]


def modulate(word, m: int):
    """Map m-bit words (ints) to constellation symbols."""
    table = constellation(m)
    w = np.asarray(word)
    if np.any(w < 0) or np.any(w >= (1 << m)):
        raise ValueError(f"word out of range for {m}-bit constellation")
    out = table.points[w]
    return out if np.ndim(word) else complex(out)


def demodulate(symbol, m: int):
    """Nearest-level hard decision back to m-bit words."""
    table = constellation(m)
    s = np.asarray(symbol, dtype=np.complex128)
    ki = np.searchsorted(table.axis_bounds, s.real, side="left")
    kq = np.searchsorted(table.axis_bounds, s.imag, side="left")
    out = (_gray_encode(ki) << (m // 2)) | _gray_encode(kq)
    return out if np.ndim(symbol) else int(out)


def ber_approx(m: int, gamma):
    """Analytic Gray-QAM bit error rate at symbol SNR gamma (scalar or array)."""
    if m not in QAM_BITS:
        raise ValueError(f"modulation order must be one of {QAM_BITS}, got {m}")
    g = np.asarray(gamma, dtype=np.float64)
    if np.any(g < 0):
        raise ValueError("gamma must be nonnegative")
    big_m = 1 << m
    root = np.sqrt(3.0 * g / (big_m - 1))
    out = (4.0 / m) * (
        (1.0 - 1.0 / np.sqrt(big_m)) * np.asarray(q_function(root))
        + (1.0 - 2.0 / np.sqrt(big_m)) * np.asarray(q_function(3.0 * root))
    )
    return out if out.ndim else float(out)


_BRACKET = (1e-6, 1e6)


def snr_threshold(m: int, target_ber: float, tol: float = 1e-10) -> float:
    """Symbol SNR at which `m`-bit QAM hits `target_ber`, by bisection.

    The returned gamma satisfies |ber_approx(m, gamma) - target_ber| <= tol.
    """
    if not 0.0 < target_ber < 0.5:
        raise ValueError(f"target BER must be in (0, 0.5), got {target_ber}")
    lo, hi = _BRACKET
    if not ber_approx(m, lo) > target_ber > ber_approx(m, hi):
        raise ValueError(
            f"target BER {target_ber} not bracketed by gamma in [{lo}, {hi}] for m={m}"
        )
    best = lo
    best_err = abs(ber_approx(m, lo) - target_ber)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        val = ber_approx(m, mid)
        err = abs(val - target_ber)
        if err < best_err:
            best, best_err = mid, err
        if err <= tol:
            return mid
        if val > target_ber:
            lo = mid
        else:
            hi = mid
    if best_err <= tol:
        return best
    raise ArithmeticError(
        f"bisection failed to reach |ber - target| <= {tol} (best {best_err})"
    )
