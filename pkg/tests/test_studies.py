"""
🧪 Integration Tests - Studies
Study configuration, single cases and the study runners on small meshes

Test Count: 18 tests (8 unit, 10 integration)
"""

import math

import numpy as np
import pandas as pd
import pytest

from unfitted import studies
from unfitted.errors import ConfigError
from unfitted.fem_assembly import SchemeParams
from unfitted.postprocess import error_norms, triple_norm_error_mixed
from unfitted.problem_catalog import build_problem
from unfitted.studies import (
    ROW_COLUMNS,
    SORT_KEY,
    Case,
    StudyConfig,
    dump_artifacts,
    rotation_angles,
    run_compare,
    run_convergence,
    run_param_sweep,
    run_rotation_sweep,
    run_solve,
    solve_case,
)


# ==========================================
# ✅ Test 1-6: Study Configuration
# ==========================================

@pytest.mark.unit
def test_from_mapping_coerces_values():
    """Test 1: scalars become tuples, aliases are resolved, numbers are cast"""
    config = StudyConfig.from_mapping(
        {"scheme": "neumann", "levels": [16, "32", 64], "gamma_div": 10, "graddiv_scaling": "h2"},
        threads=2,
        sigma=None,
    )
    assert config.levels == (16, 32, 64)
    assert config.gamma_div == (10.0,)
    assert config.graddiv_scaling == ("h_squared",)
    assert config.threads == 2
    assert config.sigma == ()


@pytest.mark.unit
def test_unknown_config_key_rejected():
    """Test 2: typos in a study section are configuration errors"""
    with pytest.raises(ConfigError, match="gama"):
        StudyConfig.from_mapping({"gama": 1.0})


@pytest.mark.unit
@pytest.mark.parametrize(
    "values",
    [
        {"levels": [32, 16, 64]},
        {"levels": [4, 8, 16]},
        {"levels": []},
        {"scheme": "fictitious"},
        {"problem": "square"},
        {"threads": 0},
        {"levels": ["many"]},
    ],
)
def test_invalid_study_config(values):
    """Test 3: bad levels, schemes, problems and thread counts are rejected"""
    with pytest.raises(ConfigError):
        StudyConfig.from_mapping(values)


@pytest.mark.unit
def test_param_grid_is_cartesian():
    """Test 4: 4 γ × 4 σ → 16 parameter sets in γ-major order"""
    config = StudyConfig.from_mapping({"gamma": [0.01, 0.1, 1.0, 10.0], "sigma": [0.001, 0.01, 0.1, 1.0]})
    grid = config.param_grid()
    assert len(grid) == 16
    assert (grid[0].gamma, grid[0].sigma) == (0.01, 0.001)
    assert (grid[1].gamma, grid[1].sigma) == (0.01, 0.01)
    assert (grid[-1].gamma, grid[-1].sigma) == (10.0, 1.0)


@pytest.mark.unit
def test_param_grid_uses_scheme_defaults():
    """Test 5: unset parameters fall back to the scheme's defaults"""
    config = StudyConfig(scheme="cutfem_sym")
    (params,) = config.param_grid()
    assert (params.gamma, params.sigma) == (5.0, 0.1)
    (partner,) = StudyConfig(scheme="dirichlet", gamma=(7.0,)).param_grid("cutfem_asym", use_overrides=False)
    assert partner.gamma == 1.0


@pytest.mark.unit
def test_default_rotation_angles():
    """Test 6: 36 equispaced angles over one petal, explicit θ₀ wins"""
    angles = rotation_angles(StudyConfig())
    assert len(angles) == 36
    assert angles[0] == 0.0
    assert angles[-1] == pytest.approx(2 * math.pi / 7)
    assert rotation_angles(StudyConfig(theta0=(0.1, 0.2))) == (0.1, 0.2)


# ==========================================
# ✅ Test 7-9: Single Cases
# ==========================================

@pytest.mark.unit
def test_failed_case_becomes_row():
    """Test 7: an assembly error yields status 'failed' and a message, not an exception"""
    result = solve_case(StudyConfig(scheme="neumann"), Case("neumann", 16, 0.0, SchemeParams(gamma_1=0.0)))
    assert result.row["status"] == "failed"
    assert "gamma_1" in result.row["message"]
    assert math.isnan(result.row["h1_rel"])
    assert set(ROW_COLUMNS) <= set(result.row)


@pytest.mark.integration
def test_run_solve_and_dump(tmp_path):
    """Test 8: one row with errors and sizes; mesh, Γ and matrix dumps"""
    report, result = run_solve(StudyConfig(scheme="dirichlet", levels=(16,)))
    assert len(report.rows) == 1
    row = report.rows.iloc[0]
    assert row["status"] == "ok"
    assert row["dofs"] > 0 and row["cut_cells"] > 0
    assert 0 < row["h1_rel"] < 1
    assert row["residual"] < 1e-9
    paths = dump_artifacts(result, tmp_path / "dump")
    assert [p.name for p in paths] == ["mesh.txt", "gamma.txt", "matrix.txt"]
    assert all(p.stat().st_size > 0 for p in paths)


@pytest.mark.integration
@pytest.mark.parametrize("scheme", ["neumann", "robin", "cutfem_lagrange", "cutfem_sym", "cutfem_neumann"])
def test_every_scheme_solves(scheme):
    """Test 9: each scheme produces an accepted solve with moderate errors on n=16"""
    report, _ = run_solve(StudyConfig(scheme=scheme, levels=(16,)))
    row = report.rows.iloc[0]
    assert row["status"] == "ok", row["message"]
    assert 0 < row["h1_rel"] < 0.5


# ==========================================
# ✅ Test 10-15: Study Runners
# ==========================================

@pytest.mark.integration
def test_convergence_rows_are_sorted_with_slopes():
    """Test 10: rows ordered by level, one slope record per parameter set"""
    report = run_convergence(StudyConfig(levels=(8, 16, 32)))
    assert list(report.rows["n"]) == [8, 16, 32]
    assert list(report.rows.columns[: len(ROW_COLUMNS)]) == ROW_COLUMNS
    slopes = report.tables["slopes"]
    assert len(slopes) == 1
    assert np.isfinite(slopes.loc[0, "h1_slope"]) and slopes.loc[0, "h1_slope"] > 0.5
    assert slopes.loc[0, "levels"] == 3


@pytest.mark.integration
def test_thread_count_does_not_change_rows():
    """Test 11: single-threaded and 3-thread runs give identical rows"""
    config = StudyConfig(levels=(8, 12, 16), theta0=(0.0, 0.3))
    serial = run_convergence(config).rows.drop(columns=["assemble_time", "solve_time"])
    threaded = run_convergence(StudyConfig(levels=(8, 12, 16), theta0=(0.0, 0.3), threads=3)).rows
    pd.testing.assert_frame_equal(serial, threaded.drop(columns=["assemble_time", "solve_time"]))
    assert serial[SORT_KEY].equals(serial[SORT_KEY].sort_values(SORT_KEY, kind="mergesort"))


@pytest.mark.integration
def test_param_sweep_grid_rows():
    """Test 12: 2 γ × 2 σ on one level → 4 rows with σ-monotonicity flags"""
    config = StudyConfig(levels=(16,), gamma=(0.1, 1.0), sigma=(0.01, 0.1))
    report = run_param_sweep(config)
    assert len(report.rows) == 4
    assert report.failed == 0
    assert set(report.rows["sigma_monotone"].map(type)) <= {bool}


@pytest.mark.integration
def test_rotation_sweep_ratios():
    """Test 13: 8 angles on one level → one finite max/min ratio ≥ 1"""
    report = run_rotation_sweep(StudyConfig(levels=(16,), angles=8))
    assert len(report.rows) == 8
    ratios = report.tables["ratios"]
    assert len(ratios) == 1
    assert 1.0 <= ratios.loc[0, "h1_ratio"] < math.inf
    assert ratios.loc[0, "angles"] == 8


@pytest.mark.integration
def test_compare_joins_partner():
    """Test 14: scheme and antisymmetric Nitsche joined per (n, θ₀)"""
    report = run_compare(StudyConfig(levels=(16,)))
    assert set(report.rows["scheme"]) == {"dirichlet", "cutfem_asym"}
    joined = report.tables["joined"]
    assert len(joined) == 1
    assert joined.loc[0, "h1_factor"] > 0
    assert "slopes" not in report.tables


@pytest.mark.unit
@pytest.mark.parametrize(
    "runner, config",
    [
        (run_convergence, StudyConfig(levels=(16, 32))),
        (run_rotation_sweep, StudyConfig(levels=(16,), angles=4)),
        (run_compare, StudyConfig(scheme="robin", levels=(16,))),
    ],
)
def test_runner_preconditions(runner, config):
    """Test 15: too few levels or angles, or no comparison partner → configuration error"""
    with pytest.raises(ConfigError):
        runner(config)


# ==========================================
# ✅ Test 16-18: Row Contents
# ==========================================

@pytest.mark.integration
def test_unexpected_error_fails_one_case(monkeypatch):
    """Test 16: a non-library exception in one case becomes a failure row; the other levels still run"""
    real = studies.build_crisscross

    def flaky(n):
        if n == 12:
            raise RuntimeError("mesh generator crashed")
        return real(n)

    monkeypatch.setattr(studies, "build_crisscross", flaky)
    report = run_convergence(StudyConfig(levels=(8, 12, 16)))
    assert list(report.rows["status"]) == ["ok", "failed", "ok"]
    assert report.failed == 1
    assert report.rows.loc[1, "message"] == "RuntimeError: mesh generator crashed"


@pytest.mark.integration
def test_neumann_row_reports_mixed_energy_error():
    """Test 17: Neumann rows carry ⦀(I_h u − u_h, I_h(−∇u) − y_h)⦀, not the Dirichlet energy error"""
    report, result = run_solve(StudyConfig(scheme="neumann", levels=(16,)))
    a = result.artifacts
    problem = build_problem("flower")
    expected = triple_norm_error_mixed(problem, a["solution"], a["mesh"], a["background"], a["space"], a["zspace"])
    dirichlet_energy = error_norms(problem, a["solution"], a["mesh"], a["background"], a["space"], a["boundary"])
    assert report.rows.loc[0, "triple_norm"] == expected
    assert expected != dirichlet_energy.triple_norm


@pytest.mark.integration
def test_unrotated_sweep_row_matches_convergence_row():
    """Test 18: the θ₀ = 0 row of a rotation sweep equals the convergence row at the same n bitwise"""
    rotated = run_rotation_sweep(StudyConfig(levels=(16,), angles=8)).rows
    converged = run_convergence(StudyConfig(levels=(8, 12, 16))).rows
    first = rotated[rotated["theta0"] == 0.0]
    same_level = converged[converged["n"] == 16]
    assert len(first) == len(same_level) == 1
    assert list(first.iloc[0][ROW_COLUMNS]) == list(same_level.iloc[0][ROW_COLUMNS])


# ==========================================
# 📊 Test Summary
# ==========================================
"""
✅ STUDIES TESTS SUMMARY (18 tests):

1. test_from_mapping_coerces_values - YAML/CLI value coercion
2. test_unknown_config_key_rejected - unknown keys
3. test_invalid_study_config - validation
4. test_param_grid_is_cartesian - sweep grid
5. test_param_grid_uses_scheme_defaults - per-scheme defaults
6. test_default_rotation_angles - angle grid
7. test_failed_case_becomes_row - failure isolation
8. test_run_solve_and_dump - single solve and dumps
9. test_every_scheme_solves - all schemes end to end
10. test_convergence_rows_are_sorted_with_slopes - convergence runner
11. test_thread_count_does_not_change_rows - determinism under threads
12. test_param_sweep_grid_rows - parameter sweep
13. test_rotation_sweep_ratios - rotation sweep
14. test_compare_joins_partner - CutFEM comparison
15. test_runner_preconditions - runner argument checks
16. test_unexpected_error_fails_one_case - failure isolation for any exception
17. test_neumann_row_reports_mixed_energy_error - scheme-appropriate triple norm
18. test_unrotated_sweep_row_matches_convergence_row - θ₀ = 0 consistency
"""
