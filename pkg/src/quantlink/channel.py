"""Frequency-selective fading and the per-subcarrier transmit/receive chain.

The link is simulated directly in the frequency domain: under a cyclic prefix
longer than the delay spread and a coherence time beyond one frame, each
subcarrier sees a flat complex gain h_k, so an OFDM symbol is just a vector of
independent scalar channels

    r = sqrt(p) h s + v,    v ~ CN(0, noise_var),

equalized by r / (sqrt(p) h). Tap gains are circularly-symmetric complex
Gaussian with powers normalized to sum to one, which makes E|h_k|^2 = 1 on
every subcarrier.
"""

from __future__ import annotations

import importlib.resources
import json
import re
from dataclasses import dataclass

import numpy as np

from .rng import stream_rng

__all__ = [
    "TapProfile",
    "ChannelRealization",
    "exponential_pdp",
    "flat_profile",
    "load_tap_profile",
    "tdl_c_profile",
    "parse_profile_ref",
    "realize_channel",
    "transmit_symbols",
    "equalize",
]

DEFAULT_N_SC = 512
DEFAULT_SPACING_HZ = 30e3


@dataclass
class TapProfile:
    """Multipath power-delay profile; powers are normalized to sum to 1."""

    delays_s: np.ndarray
    powers: np.ndarray
    label: str

    def __post_init__(self):
        self.delays_s = np.asarray(self.delays_s, dtype=np.float64)
        self.powers = np.asarray(self.powers, dtype=np.float64)
        if self.delays_s.size == 0 or self.delays_s.shape != self.powers.shape:
            raise ValueError("profile needs matching, nonempty delay and power vectors")
        if np.any(self.delays_s < 0) or np.any(self.powers < 0):
            raise ValueError("delays and powers must be nonnegative")
        total = self.powers.sum()
        if not total > 0:
            raise ValueError("total tap power must be positive")
        self.powers = self.powers / total

    def rms_delay_spread_s(self) -> float:
        mean = float(self.powers @ self.delays_s)
        second = float(self.powers @ np.square(self.delays_s))
        return float(np.sqrt(max(second - mean**2, 0.0)))


def flat_profile() -> TapProfile:
    """Single-tap (flat fading) profile."""
    return TapProfile(np.array([0.0]), np.array([1.0]), "flat")


def exponential_pdp(rms_ns: float, n_taps: int = 13) -> TapProfile:
    """Exponentially decaying profile with the exact requested RMS delay spread.

    Taps sit on a uniform grid spanning six decay constants; delays are then
    rescaled so the discrete RMS delay spread equals rms_ns exactly.
    """
    if not rms_ns > 0:
        raise ValueError("rms_ns must be positive")
    if n_taps < 2:
        raise ValueError("need at least two taps")
    raw = np.linspace(0.0, 6.0 * rms_ns, n_taps)
    powers = np.exp(-raw / rms_ns)
    prof = TapProfile(raw * 1e-9, powers, label="")
    actual = prof.rms_delay_spread_s()
    prof.delays_s = prof.delays_s * (rms_ns * 1e-9 / actual)
    prof.label = f"exp-pdp({rms_ns:g})"
    return prof


def load_tap_profile(path) -> TapProfile:
    """Read a {label, taps: [{delay_ns, power_db}]} JSON profile."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    taps = doc["taps"]
    delays = np.array([t["delay_ns"] for t in taps], dtype=np.float64) * 1e-9
    powers = 10.0 ** (np.array([t["power_db"] for t in taps], dtype=np.float64) / 10.0)
    return TapProfile(delays, powers, doc.get("label", "unnamed"))


def tdl_c_profile() -> TapProfile:
    """Bundled 3GPP TDL-C profile scaled to 300 ns RMS delay spread."""
    ref = importlib.resources.files("quantlink").joinpath("data/tdl_c_300ns.json")
    with importlib.resources.as_file(ref) as path:
        return load_tap_profile(path)


_EXP_RE = re.compile(r"^exp-pdp\((?P<rms>[0-9.eE+-]+)\)$")


def parse_profile_ref(ref: str) -> TapProfile:
    """Resolve a profile reference: 'exp-pdp(RMS_NS)', 'tdl-c', or a file path."""
    m = _EXP_RE.match(ref)
    if m:
        return exponential_pdp(float(m.group("rms")))
    if ref == "tdl-c":
        return tdl_c_profile()
    return load_tap_profile(ref)


@dataclass
class ChannelRealization:
    """One coherence block: fixed per-subcarrier gains plus the noise variance."""

    gains: np.ndarray
    noise_var: float
    subcarrier_spacing_hz: float
    seed: int

    def __post_init__(self):
        self.gains = np.asarray(self.gains, dtype=np.complex128)
        if self.gains.ndim != 1 or self.gains.size < 1:
            raise ValueError("gains must be a nonempty vector")
        if not self.noise_var > 0:
            raise ValueError("noise_var must be positive")

    @property
    def n_sc(self) -> int:
        return int(self.gains.size)


def realize_channel(
    profile: TapProfile,
    n_sc: int = DEFAULT_N_SC,
    spacing_hz: float = DEFAULT_SPACING_HZ,
    seed: int = 0,
    noise_var: float = 1.0,
    rng: np.random.Generator | None = None,
) -> ChannelRealization:
    """Draw tap gains and evaluate the frequency response on every subcarrier."""
    if n_sc < 1:
        raise ValueError("n_sc must be >= 1")
    if not spacing_hz > 0:
        raise ValueError("spacing_hz must be positive")
    if rng is None:
        rng = stream_rng("channel", seed)
    n_taps = profile.powers.size
    g = np.sqrt(profile.powers / 2.0) * (
        rng.standard_normal(n_taps) + 1j * rng.standard_normal(n_taps)
    )
    freqs = np.arange(n_sc) * spacing_hz
    phase = np.exp(-2j * np.pi * np.outer(freqs, profile.delays_s))
    return ChannelRealization(phase @ g, noise_var, spacing_hz, seed)


def transmit_symbols(s, p, h, noise_var: float, rng: np.random.Generator):
    """Received samples sqrt(p) h s + CN(0, noise_var) noise; broadcasts over arrays."""
    s = np.asarray(s, dtype=np.complex128)
    p = np.asarray(p, dtype=np.float64)
    if np.any(p < 0):
        raise ValueError("power must be nonnegative")
    noise = np.sqrt(noise_var / 2.0) * (
        rng.standard_normal(s.shape) + 1j * rng.standard_normal(s.shape)
    )
    return np.sqrt(p) * np.asarray(h, dtype=np.complex128) * s + noise


def equalize(r, p, h):
    """Zero-forcing equalization r / (sqrt(p) h); perfect channel knowledge."""
    p = np.asarray(p, dtype=np.float64)
    h = np.asarray(h, dtype=np.complex128)
    if np.any(p <= 0):
        raise ValueError("cannot equalize a subcarrier with zero power")
    if np.any(h == 0):
        raise ValueError("cannot equalize a zero channel gain")
    return np.asarray(r, dtype=np.complex128) / (np.sqrt(p) * h)
