"""
🧪 Unit Tests - Linear Solver
Sparse LU solve, residual checks and Ritz estimates

Test Count: 7 unit tests
"""

import numpy as np
import pytest
from scipy.sparse import csr_matrix, identity

from unfitted.errors import InvalidArgumentError, SingularSystemError
from unfitted.fem_assembly import LinearSystem
from unfitted.linear_solver import RESIDUAL_THRESHOLD, estimate_extreme_ritz, solve_direct


def make_system(dense, rhs, symmetric=False):
    matrix = csr_matrix(np.asarray(dense, dtype=float))
    return LinearSystem(matrix=matrix, rhs=np.asarray(rhs, dtype=float), constraint_rows=0, symmetric=symmetric, n_u=matrix.shape[0])


# ==========================================
# ✅ Test 1-4: Direct Solve
# ==========================================

@pytest.mark.unit
def test_identity_returns_rhs():
    """Test 1: I x = b → x = b, residual 0"""
    rhs = np.arange(1.0, 6.0)
    system = LinearSystem(matrix=identity(5, format="csr"), rhs=rhs, constraint_rows=0, symmetric=True, n_u=5)
    report = solve_direct(system)
    np.testing.assert_array_equal(report.solution, rhs)
    assert report.residual_norm == 0.0
    assert report.accepted


@pytest.mark.unit
def test_two_by_two_system():
    """Test 2: [[2, 1], [1, 3]] x = (3, 4) → x = (1, 1)"""
    report = solve_direct(make_system([[2.0, 1.0], [1.0, 3.0]], [3.0, 4.0]))
    np.testing.assert_allclose(report.solution, [1.0, 1.0], rtol=1e-14)
    assert report.residual_norm < RESIDUAL_THRESHOLD
    assert report.factor_time >= 0.0 and report.solve_time >= 0.0


@pytest.mark.unit
def test_singular_matrix_is_reported():
    """Test 3: rank-deficient matrix → singular-system error"""
    with pytest.raises(SingularSystemError):
        solve_direct(make_system([[1.0, 1.0], [1.0, 1.0]], [1.0, 2.0]))


@pytest.mark.unit
def test_zero_rhs_gives_zero_solution():
    """Test 4: b = 0 → x = 0 with an absolute residual"""
    report = solve_direct(make_system([[4.0, 0.0], [1.0, 2.0]], [0.0, 0.0]))
    np.testing.assert_array_equal(report.solution, [0.0, 0.0])
    assert report.accepted


# ==========================================
# ✅ Test 5-7: Ritz Estimates
# ==========================================

@pytest.mark.unit
def test_ritz_on_diagonal():
    """Test 5: diag(1, 10) → (1, 10)"""
    smallest, largest = estimate_extreme_ritz(make_system(np.diag([1.0, 10.0]), [0.0, 0.0], symmetric=True))
    assert smallest == pytest.approx(1.0, rel=1e-10)
    assert largest == pytest.approx(10.0, rel=1e-10)


@pytest.mark.unit
def test_ritz_uses_symmetric_part():
    """Test 6: identity plus a skew part still reports (1, 1)"""
    dense = np.eye(3) + np.array([[0.0, 2.0, 0.0], [-2.0, 0.0, 1.0], [0.0, -1.0, 0.0]])
    smallest, largest = estimate_extreme_ritz(make_system(dense, np.zeros(3)))
    assert smallest == pytest.approx(1.0, rel=1e-12)
    assert largest == pytest.approx(1.0, rel=1e-12)


@pytest.mark.unit
def test_ritz_needs_enough_iterations():
    """Test 7: fewer than 10 iterations is an invalid argument"""
    with pytest.raises(InvalidArgumentError):
        estimate_extreme_ritz(make_system(np.eye(2), np.zeros(2)), iterations=5)


# ==========================================
# 📊 Test Summary
# ==========================================
"""
✅ LINEAR SOLVER TESTS SUMMARY (7 tests):

1. test_identity_returns_rhs - trivial solve
2. test_two_by_two_system - small dense system
3. test_singular_matrix_is_reported - singular detection
4. test_zero_rhs_gives_zero_solution - absolute residual fallback
5. test_ritz_on_diagonal - extreme eigenvalues
6. test_ritz_uses_symmetric_part - (A + Aᵀ)/2
7. test_ritz_needs_enough_iterations - argument check
"""
