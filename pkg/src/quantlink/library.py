"""Precomputed grid of channel-optimized quantizers over bit depth and BER target.

The grid covers b in {1..b_max} and a sorted list of per-bit flip targets.
Each column (fixed target, increasing b) is built bottom-up: the design at
depth b+1 receives the depth-b solution with every level duplicated as a warm
start, which pins the column to be nonincreasing in b. The file holds the SNR
thresholds for every (QAM order, target) pair as well, since the allocator's
inner loop is table-driven.

Serialization is a single self-describing JSON document with every float
written as C99 hex (bit exact), so rebuilding with the same seed reproduces
the file byte for byte and loading cannot drift any threshold comparison.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from . import modem
from .quantizer import (
    DesignConfig,
    ScalarQuantizer,
    analytic_distortion,
    design_channel_optimized,
    uniform_bsc,
)

__all__ = [
    "FORMAT_VERSION",
    "LibraryFormatError",
    "InfeasibleTargetError",
    "QuantizerLibrary",
    "log_uniform_grid",
    "default_epsilon_grid",
    "build_library",
    "serialize_library",
    "save_library",
    "load_library",
    "min_bits_for_target",
    "sigma_max",
]

FORMAT_VERSION = 1

DEFAULT_B_MAX = 8
DEFAULT_DELTA = 0.4


class LibraryFormatError(Exception):
    """Raised when a library file cannot be parsed or fails validation."""


class InfeasibleTargetError(Exception):
    """Raised when no bit depth in the library can satisfy a distortion bound."""


def log_uniform_grid(lo: float, hi: float, count: int) -> np.ndarray:
    """BER targets spaced uniformly in log (equivalently dB) scale."""
    if not 0.0 < lo < hi < 0.5:
        raise ValueError("grid bounds must satisfy 0 < lo < hi < 0.5")
    if count < 1:
        raise ValueError("count must be >= 1")
    return np.geomspace(lo, hi, count)


def default_epsilon_grid() -> np.ndarray:
    """Ten targets log-uniform over [0.001, 0.05]."""
    return log_uniform_grid(1e-3, 5e-2, 10)


def _validated_grid(epsilons) -> np.ndarray:
    arr = np.asarray(epsilons, dtype=np.float64)
    if arr.ndim != 1 or arr.size < 1:
        raise ValueError("epsilon grid must be a nonempty 1-D sequence")
    if np.any(arr <= 0.0) or np.any(arr >= 0.5):
        raise ValueError("epsilon targets must lie in (0, 0.5)")
    if arr.size > 1 and not np.all(np.diff(arr) > 0):
        raise ValueError("epsilon targets must be strictly increasing")
    return arr


@dataclass
class QuantizerLibrary:
    """Immutable-by-convention container for the designed grid.

    cells maps (bit depth, epsilon index) to a ScalarQuantizer;
    gamma_thresholds has shape (len(QAM_BITS), len(epsilons)).
    warnings collects build-time diagnostic records (nonconvex columns etc.),
    which are informational, not failures.
    """

    b_max: int
    epsilons: np.ndarray
    cells: dict[tuple[int, int], ScalarQuantizer]
    design: DesignConfig
    gamma_thresholds: np.ndarray
    warnings: list[dict] = field(default_factory=list)
    format_version: int = FORMAT_VERSION

    def quantizer(self, bit_depth: int, eps_index: int) -> ScalarQuantizer:
        return self.cells[(bit_depth, self._check_index(eps_index))]

    def distortion(self, bit_depth: int, eps_index: int) -> float:
        return self.quantizer(bit_depth, eps_index).normalized_distortion

    def distortion_column(self, eps_index: int) -> np.ndarray:
        """D(1; b, eps) for b = 1..b_max (index 0 is b = 1)."""
        qi = self._check_index(eps_index)
        return np.array([self.cells[(b, qi)].normalized_distortion for b in range(1, self.b_max + 1)])

    def column_is_convex(self, eps_index: int, tol: float = 1e-12) -> bool:
        col = self.distortion_column(eps_index)
        if col.size < 3:
            return True
        return bool(np.all(np.diff(col, 2) >= -tol))

    def gamma_threshold(self, m: int, eps_index: int) -> float:
        return float(self.gamma_thresholds[modem.QAM_BITS.index(m), self._check_index(eps_index)])

    def digest(self) -> str:
        return hashlib.sha256(serialize_library(self).encode("utf-8")).hexdigest()

    def _check_index(self, eps_index: int) -> int:
        if not 0 <= eps_index < self.epsilons.size:
            raise IndexError(f"epsilon index {eps_index} out of range")
        return eps_index


def build_library(
    b_max: int = DEFAULT_B_MAX,
    epsilons=None,
    cfg: DesignConfig = DesignConfig(),
) -> QuantizerLibrary:
    """Design every grid cell and the SNR-threshold table.

    Columns are warm-started from the previous depth (levels duplicated), so
    distortion cannot rise with b. Emits warning records for any nonconvex
    distortion column, any column/row ordering anomaly, and any epsilon whose
    QAM SNR increments are not convex in the modulation order.
    """
    if b_max < 1:
        raise ValueError("b_max must be >= 1")
    grid = _validated_grid(default_epsilon_grid() if epsilons is None else epsilons)
    cells: dict[tuple[int, int], ScalarQuantizer] = {}
    warnings: list[dict] = []
    for qi, eps in enumerate(grid):
        prev: ScalarQuantizer | None = None
        for b in range(1, b_max + 1):
            extra = None if prev is None else [np.repeat(prev.levels, 2)]
            q = design_channel_optimized(b, uniform_bsc(b, eps), cfg, extra_init_levels=extra)
            cells[(b, qi)] = q
            prev = q

    gamma = np.empty((len(modem.QAM_BITS), grid.size))
    for mi, m in enumerate(modem.QAM_BITS):
        for qi, eps in enumerate(grid):
            gamma[mi, qi] = modem.snr_threshold(m, float(eps))

    lib = QuantizerLibrary(
        b_max=b_max,
        epsilons=grid,
        cells=cells,
        design=cfg,
        gamma_thresholds=gamma,
        warnings=warnings,
    )
    _audit(lib)
    return lib


def _audit(lib: QuantizerLibrary) -> None:
    for qi in range(lib.epsilons.size):
        col = lib.distortion_column(qi)
        rises = np.flatnonzero(np.diff(col) > 1e-12)
        if rises.size:
            lib.warnings.append(
                {"kind": "column-not-monotone", "eps_index": qi, "first_rise_b": int(rises[0]) + 1}
            )
        if col.size >= 3:
            second = np.diff(col, 2)
            if np.any(second < -1e-12):
                lib.warnings.append(
                    {
                        "kind": "column-not-convex",
                        "eps_index": qi,
                        "min_second_difference": float(second.min()),
                    }
                )
    for b in range(1, lib.b_max + 1):
        row = np.array([lib.distortion(b, qi) for qi in range(lib.epsilons.size)])
        if np.any(np.diff(row) < -1e-9):
            lib.warnings.append({"kind": "row-not-monotone", "b": b})
    for qi in range(lib.epsilons.size):
        g = lib.gamma_thresholds[:, qi]
        inc = np.diff(np.concatenate(([0.0], g)))
        if np.any(np.diff(inc) < 0):
            lib.warnings.append({"kind": "gamma-increments-not-convex", "eps_index": qi})


def min_bits_for_target(
    lib: QuantizerLibrary, eps_index: int, sigma2: float, delta: float = DEFAULT_DELTA
) -> int:
    """Smallest bit depth meeting D(1; b, eps) <= 1/(sigma2 + 1).

    Variances below `delta` are treated as negligible and get zero bits.
    """
    if sigma2 < 0:
        raise ValueError("sigma2 must be nonnegative")
    if sigma2 < delta:
        return 0
    bound = 1.0 / (sigma2 + 1.0)
    col = lib.distortion_column(eps_index)
    for b0, d in enumerate(col):
        if d <= bound:
            return b0 + 1
    raise InfeasibleTargetError(
        f"no bit depth <= {lib.b_max} reaches distortion {bound:.6g} "
        f"(sigma2 = {sigma2:.6g}, eps index {eps_index})"
    )


def min_bits_vector(
    lib: QuantizerLibrary, eps_index: int, variances: np.ndarray, delta: float = DEFAULT_DELTA
) -> np.ndarray:
    """Vectorized min_bits_for_target over a variance array."""
    variances = np.asarray(variances, dtype=np.float64)
    if np.any(variances < 0):
        raise ValueError("variances must be nonnegative")
    col = lib.distortion_column(eps_index)
    bound = 1.0 / (variances + 1.0)
    ok = col[None, :] <= bound[:, None]  # [element, b-1]
    feasible = ok.any(axis=1)
    bits = np.where(feasible, ok.argmax(axis=1) + 1, 0).astype(np.int64)
    bits[variances < delta] = 0
    bad = np.flatnonzero(~feasible & (variances >= delta))
    if bad.size:
        i = int(bad[0])
        raise InfeasibleTargetError(
            f"element {i}: no bit depth <= {lib.b_max} reaches distortion "
            f"{bound[i]:.6g} (sigma2 = {variances[i]:.6g}, eps index {eps_index})"
        )
    return bits


def sigma_max(lib: QuantizerLibrary) -> float:
    """Largest source sigma for which every variance admits a feasible depth."""
    d = lib.distortion(lib.b_max, lib.epsilons.size - 1)
    return float(np.sqrt(1.0 / d - 1.0))


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def _hex(x: float) -> str:
    return float(x).hex()


def _hex_list(arr) -> list[str]:
    return [_hex(v) for v in np.asarray(arr, dtype=np.float64).ravel()]


def _unhex(s) -> float:
    return float.fromhex(s)


def serialize_library(lib: QuantizerLibrary) -> str:
    cells = []
    for (b, qi) in sorted(lib.cells.keys()):
        q = lib.cells[(b, qi)]
        cells.append(
            {
                "b": b,
                "eps_index": qi,
                "flips": _hex_list(q.designed_for),
                "active_count": q.active_count,
                "thresholds": _hex_list(q.thresholds),
                "levels": _hex_list(q.levels),
                "region_codewords": [int(c) for c in q.region_codewords],
                "distortion": _hex(q.normalized_distortion),
            }
        )
    doc = {
        "kind": "quantizer-library",
        "format_version": lib.format_version,
        "b_max": lib.b_max,
        "epsilons": _hex_list(lib.epsilons),
        "design": {
            "restarts": lib.design.restarts,
            "max_iters": lib.design.max_iters,
            "rel_tol": _hex(lib.design.rel_tol),
            "seed": lib.design.seed,
        },
        "qam_bits": list(modem.QAM_BITS),
        "gamma_thresholds": [_hex_list(row) for row in lib.gamma_thresholds],
        "warnings": lib.warnings,
        "cells": cells,
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"


def save_library(lib: QuantizerLibrary, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_library(lib))


def load_library(path) -> QuantizerLibrary:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise LibraryFormatError(f"cannot read library file {path}: {exc}") from exc
    try:
        if doc["kind"] != "quantizer-library":
            raise LibraryFormatError(f"not a quantizer library file: kind={doc.get('kind')}")
        if doc["format_version"] != FORMAT_VERSION:
            raise LibraryFormatError(
                f"unsupported format_version {doc['format_version']}, expected {FORMAT_VERSION}"
            )
        if list(doc["qam_bits"]) != list(modem.QAM_BITS):
            raise LibraryFormatError("QAM order set in file does not match this build")
        epsilons = np.array([_unhex(s) for s in doc["epsilons"]])
        design = DesignConfig(
            restarts=doc["design"]["restarts"],
            max_iters=doc["design"]["max_iters"],
            rel_tol=_unhex(doc["design"]["rel_tol"]),
            seed=doc["design"]["seed"],
        )
        gamma = np.array([[_unhex(s) for s in row] for row in doc["gamma_thresholds"]])
        cells: dict[tuple[int, int], ScalarQuantizer] = {}
        for rec in doc["cells"]:
            b = rec["b"]
            q = ScalarQuantizer(
                bit_depth=b,
                thresholds=np.array([_unhex(s) for s in rec["thresholds"]]),
                levels=np.array([_unhex(s) for s in rec["levels"]]),
                region_codewords=np.array(rec["region_codewords"], dtype=np.int64),
                designed_for=np.array([_unhex(s) for s in rec["flips"]]),
                normalized_distortion=_unhex(rec["distortion"]),
            )
            q.validate()
            if rec["active_count"] != q.active_count:
                raise LibraryFormatError(f"cell ({b},{rec['eps_index']}): active_count mismatch")
            if abs(analytic_distortion(q, q.designed_for) - q.normalized_distortion) > 1e-10:
                raise LibraryFormatError(
                    f"cell ({b},{rec['eps_index']}): stored distortion disagrees with parameters"
                )
            cells[(b, rec["eps_index"])] = q
        lib = QuantizerLibrary(
            b_max=doc["b_max"],
            epsilons=epsilons,
            cells=cells,
            design=design,
            gamma_thresholds=gamma,
            warnings=list(doc["warnings"]),
            format_version=doc["format_version"],
        )
    except LibraryFormatError:
        raise
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise LibraryFormatError(f"malformed library file {path}: {exc}") from exc
    expected = {(b, qi) for b in range(1, lib.b_max + 1) for qi in range(epsilons.size)}
    if set(lib.cells.keys()) != expected:
        raise LibraryFormatError("library grid is incomplete")
    if gamma.shape != (len(modem.QAM_BITS), epsilons.size):
        raise LibraryFormatError("gamma threshold table has wrong shape")
    return lib
