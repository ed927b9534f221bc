"""
🧪 Study Tests - Acceptance Runs
The shipped studies run end to end against their shipped checks
(meshes up to n=128; deselect with -m "not study")

Test Count: 5 study tests
"""

from pathlib import Path

import pytest

from unfitted.cli import EXIT_OK, main
from unfitted.config import load_study_section
from unfitted.quality import run_checks
from unfitted.studies import StudyConfig, run_compare, run_convergence, run_rotation_sweep

INCLUDE = Path(__file__).resolve().parent.parent / "include"


def study(file_name, section, **overrides):
    return StudyConfig.from_mapping(load_study_section(INCLUDE / "studies" / file_name, section), **overrides)


def assert_checks_pass(report, check_file):
    results = run_checks(report, INCLUDE / "checks" / check_file)
    failed = [f"{r.name}: {r.detail}" for r in results if not r.passed]
    assert not failed, failed


# ==========================================
# 📈 Test 1-2: Convergence
# ==========================================

@pytest.mark.study
def test_dirichlet_convergence_rates():
    """Test 1: flower, n ∈ {16, 32, 64, 128}: H¹ slope ∈ [0.85, 1.25], L² slope ∈ [1.7, 2.3]"""
    report = run_convergence(study("dirichlet_convergence.yml", "convergence"))
    assert len(report.rows) == 4
    assert_checks_pass(report, "dirichlet_convergence.yml")


@pytest.mark.study
def test_neumann_convergence_rates():
    """Test 2: H¹ slope ∈ [0.85, 1.25], mean-free L² slope ≥ 1.4"""
    report = run_convergence(study("neumann_convergence.yml", "convergence"))
    assert_checks_pass(report, "neumann_convergence.yml")


# ==========================================
# 🔄 Test 3-4: Robustness and Comparison
# ==========================================

@pytest.mark.study
def test_rotation_variability_shrinks():
    """Test 3: 36 angles; finite max/min H¹ ratio, no growth from n=32 to n=64 beyond × 1.3"""
    report = run_rotation_sweep(study("rotation.yml", "rotate-sweep", threads=4))
    assert len(report.rows) == 3 * 36
    assert_checks_pass(report, "rotation.yml")


@pytest.mark.study
def test_cutfem_comparison():
    """Test 4: n=64: H¹ errors within a factor 2, CutFEM L² error at most 1.5×"""
    report = run_compare(study("compare.yml", "compare"))
    assert_checks_pass(report, "compare.yml")


# ==========================================
# 🎲 Test 5: Determinism
# ==========================================

@pytest.mark.study
def test_threaded_runs_are_byte_identical(tmp_path):
    """Test 5: two 4-thread runs of the Dirichlet convergence study give identical CSV bytes"""
    config = str(INCLUDE / "studies" / "dirichlet_convergence.yml")
    for run in ("first", "second"):
        assert main(["convergence", "--config", config, "--threads", "4", "--out", str(tmp_path / run)]) == EXIT_OK
    first = (tmp_path / "first" / "dirichlet_convergence.csv").read_bytes()
    second = (tmp_path / "second" / "dirichlet_convergence.csv").read_bytes()
    assert first == second
    assert first.count(b"\n") == 5


# ==========================================
# 📊 Test Summary
# ==========================================
"""
✅ ACCEPTANCE TESTS SUMMARY (5 tests):

1. test_dirichlet_convergence_rates - optimal Dirichlet rates
2. test_neumann_convergence_rates - Neumann rates
3. test_rotation_variability_shrinks - robustness to the cut position
4. test_cutfem_comparison - accuracy against CutFEM
5. test_threaded_runs_are_byte_identical - deterministic output
"""
