import json

import numpy as np
import pytest

from quantlink.library import (
    InfeasibleTargetError,
    LibraryFormatError,
    QuantizerLibrary,
    build_library,
    default_epsilon_grid,
    load_library,
    log_uniform_grid,
    min_bits_for_target,
    min_bits_vector,
    save_library,
    serialize_library,
    sigma_max,
)
from quantlink.quantizer import DesignConfig
from quantlink.rng import stream_rng

ONE_BIT_D_05 = 0.48433798438225906


def test_default_grid_shape():
    grid = default_epsilon_grid()
    assert grid.size == 10
    assert grid[0] == pytest.approx(1e-3)
    assert grid[-1] == pytest.approx(5e-2)
    # log-uniform: constant ratio between consecutive targets
    ratios = grid[1:] / grid[:-1]
    assert np.allclose(ratios, ratios[0])


def test_log_uniform_grid_validation():
    with pytest.raises(ValueError):
        log_uniform_grid(0.0, 0.05, 10)
    with pytest.raises(ValueError):
        log_uniform_grid(0.05, 0.01, 10)


def test_single_cell_library():
    lib = build_library(1, [0.05], DesignConfig(restarts=4, seed=7))
    assert lib.distortion(1, 0) == pytest.approx(ONE_BIT_D_05, abs=1e-9)
    assert sigma_max(lib) == pytest.approx(np.sqrt(1 / ONE_BIT_D_05 - 1), abs=1e-6)


def test_column_monotone_and_in_unit_interval(small_lib):
    for qi in range(small_lib.epsilons.size):
        col = small_lib.distortion_column(qi)
        assert np.all(np.diff(col) <= 1e-12)
        assert np.all(col > 0) and np.all(col <= 1)


def test_row_monotone_in_target(small_lib):
    for b in range(1, small_lib.b_max + 1):
        row = [small_lib.distortion(b, qi) for qi in range(small_lib.epsilons.size)]
        assert np.all(np.diff(row) >= -1e-9)


def test_min_bits_examples(small_lib):
    assert min_bits_for_target(small_lib, 1, 0.1, 0.4) == 0  # negligible variance
    assert min_bits_for_target(small_lib, 1, 1.0, 0.4) == 1  # 0.4843 <= 0.5
    smax2 = sigma_max(small_lib) ** 2
    assert min_bits_for_target(small_lib, small_lib.epsilons.size - 1, smax2 * 0.999, 0.4) == small_lib.b_max
    with pytest.raises(InfeasibleTargetError):
        min_bits_for_target(small_lib, small_lib.epsilons.size - 1, smax2 * 1.5, 0.4)


def test_min_bits_vector_matches_scalar(small_lib):
    rng = stream_rng("bits", 0)
    smax2 = sigma_max(small_lib) ** 2
    v = rng.uniform(0.0, smax2, size=300)
    vec = min_bits_vector(small_lib, 0, v, 0.4)
    for i, s2 in enumerate(v):
        assert vec[i] == min_bits_for_target(small_lib, 0, float(s2), 0.4)


def test_sigma_max_feasibility_sweep(small_lib):
    rng = stream_rng("feas", 1)
    smax2 = sigma_max(small_lib) ** 2
    v = rng.uniform(0.0, smax2, size=10_000)
    for qi in range(small_lib.epsilons.size):
        bits = min_bits_vector(small_lib, qi, v, 0.4)  # raises if infeasible
        assert np.all(bits <= small_lib.b_max)


def test_sigma_max_algebra():
    # sqrt(1/D - 1) identities on synthetic values
    assert np.isclose(np.sqrt(1 / 0.5 - 1), 1.0)
    assert np.isclose(np.sqrt(1 / 0.01 - 1), np.sqrt(99))


def test_save_load_round_trip(tmp_path, small_lib):
    path = tmp_path / "lib.json"
    save_library(small_lib, path)
    again = load_library(path)
    assert serialize_library(again) == serialize_library(small_lib)
    assert again.digest() == small_lib.digest()
    for key, cell in small_lib.cells.items():
        other = again.cells[key]
        assert np.array_equal(cell.thresholds, other.thresholds)
        assert np.array_equal(cell.levels, other.levels)
        assert np.array_equal(cell.region_codewords, other.region_codewords)
        assert cell.normalized_distortion == other.normalized_distortion


def test_load_rejects_truncated_file(tmp_path, small_lib):
    path = tmp_path / "lib.json"
    save_library(small_lib, path)
    raw = path.read_text()
    path.write_text(raw[: len(raw) // 2])
    with pytest.raises(LibraryFormatError):
        load_library(path)


def test_load_rejects_version_mismatch(tmp_path, small_lib):
    path = tmp_path / "lib.json"
    save_library(small_lib, path)
    doc = json.loads(path.read_text())
    doc["format_version"] = 999
    path.write_text(json.dumps(doc))
    with pytest.raises(LibraryFormatError, match="format_version"):
        load_library(path)


def test_load_rejects_tampered_distortion(tmp_path, small_lib):
    path = tmp_path / "lib.json"
    save_library(small_lib, path)
    doc = json.loads(path.read_text())
    doc["cells"][0]["distortion"] = (0.123456).hex()
    path.write_text(json.dumps(doc))
    with pytest.raises(LibraryFormatError, match="distortion"):
        load_library(path)


def test_rebuild_is_byte_identical(small_lib):
    again = build_library(3, [0.01, 0.05], DesignConfig(restarts=4, seed=7))
    assert serialize_library(again) == serialize_library(small_lib)


def test_same_target_same_column():
    a = build_library(2, [0.02], DesignConfig(restarts=3, seed=5))
    b = build_library(2, [0.02], DesignConfig(restarts=3, seed=5))
    assert serialize_library(a) == serialize_library(b)


def test_gamma_table_round_trips(tmp_path, small_lib):
    from quantlink.modem import QAM_BITS, ber_approx

    for mi, m in enumerate(QAM_BITS):
        for qi, eps in enumerate(small_lib.epsilons):
            g = small_lib.gamma_threshold(m, qi)
            assert abs(ber_approx(m, g) - eps) <= 1e-10


def test_convexity_report(small_lib):
    for qi in range(small_lib.epsilons.size):
        assert isinstance(small_lib.column_is_convex(qi), bool)
    kinds = {w["kind"] for w in small_lib.warnings}
    assert "column-not-monotone" not in kinds
