# test_gramians.py
# Tests for Lyapunov solvers, Metzler structure and block-structured Gramians

import sys
import os
import tempfile
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

import numpy as np
from pydantic import ValidationError

from errors import IllPosedLyapunovError, InfeasibleStructureError, ModelInputError
from gramians import (
    PartitionSpec,
    controllability_gramian,
    dump_matrix,
    find_monotone_signature,
    is_metzler,
    load_matrix,
    metzler_diagonal_gramian,
    solve_lyapunov_eq,
    solve_structured_gramians,
    structured_lyapunov_solution,
)
from lna import diffusion_matrix, jacobian_J, linearize_at, steady_state
from model_library import model_library


def _toy_system():
    net = model_library.load("toy_switch")
    return linearize_at(net, steady_state(net), ["m1", "m2"])


def test_lyapunov_against_kronecker():
    """Bartels-Stewart agrees with the dense vec-system solve on random Hurwitz matrices"""
    rng = np.random.default_rng(2024)
    for _ in range(50):
        n = int(rng.integers(1, 13))
        M = rng.standard_normal((n, n)) / np.sqrt(n)
        A = M - (np.max(np.linalg.eigvals(M).real) + 1.0) * np.eye(n)
        G = rng.standard_normal((n, n))
        Q = G @ G.T
        P = solve_lyapunov_eq(A, Q)
        K = np.kron(np.eye(n), A) + np.kron(A, np.eye(n))
        reference = np.linalg.solve(K, -Q.reshape(-1, order="F")).reshape((n, n), order="F")
        assert np.max(np.abs(P - reference)) <= 1e-9 * max(1.0, np.max(np.abs(reference)))
        assert np.linalg.norm(A @ P + P @ A.T + Q) <= 1e-10 * np.linalg.norm(Q)
        assert np.array_equal(P, P.T)
    print("✅ Lyapunov solver matches Kronecker oracle")


def test_scalar_and_ill_posed_lyapunov():
    """-2p + 1 = 0 gives 1/2; eigenvalues summing to zero are rejected"""
    assert abs(solve_lyapunov_eq(np.array([[-1.0]]), np.array([[1.0]]))[0, 0] - 0.5) < 1e-15
    try:
        solve_lyapunov_eq(np.diag([1.0, -1.0]), np.eye(2))
    except IllPosedLyapunovError as e:
        assert abs(e.eigenvalue_pair[0] + e.eigenvalue_pair[1]) < 1e-12
    else:
        raise AssertionError("expected IllPosedLyapunovError")
    try:
        solve_lyapunov_eq(-np.eye(2), np.array([[1.0, 2.0], [0.0, 1.0]]))
    except ModelInputError:
        pass
    else:
        raise AssertionError("non-symmetric forcing accepted")
    print("✅ scalar and ill-posed Lyapunov equations")


def test_metzler_verdicts():
    """Toggle switch Jacobian has two negative off-diagonal entries; the linear chain has none"""
    net = model_library.load("toy_switch")
    J = jacobian_J(net, steady_state(net))
    verdict = is_metzler(J)
    assert not verdict
    assert sorted((i, j) for i, j, _ in verdict.violations) == [(0, 3), (2, 1)]
    assert all(value < 0 for _, _, value in verdict.violations)

    chain = model_library.load("linear_chain")
    assert is_metzler(jacobian_J(chain, steady_state(chain)))
    print("✅ Metzler verdicts")


def test_monotone_signature():
    """The toggle switch is monotone with respect to the orthant (+, +, -, -)"""
    net = model_library.load("toy_switch")
    J = jacobian_J(net, steady_state(net))
    signs = find_monotone_signature(J)
    assert signs is not None
    assert np.array_equal(signs, np.array([1.0, 1.0, -1.0, -1.0]))
    assert is_metzler(signs[:, None] * J * signs[None, :])
    assert find_monotone_signature(np.array([[-1.0, 1.0], [-1.0, -1.0]])) is None
    print("✅ monotone signature")


def test_metzler_diagonal_gramian():
    """Diagonal Gramian of a Metzler Hurwitz matrix satisfies the Lyapunov inequality"""
    chain = model_library.load("linear_chain")
    x_ss = steady_state(chain)
    assert np.allclose(x_ss, [2.0, 4.0, 8.0])
    A = jacobian_J(chain, x_ss)
    RHS = diffusion_matrix(chain, x_ss)
    P = metzler_diagonal_gramian(A, RHS)
    assert np.array_equal(P, np.diag(np.diag(P)))
    assert np.all(np.diag(P) > 0)
    assert np.max(np.linalg.eigvalsh(A @ P + P @ A.T + RHS)) <= 1e-12 * np.linalg.norm(RHS, 2)

    net = model_library.load("toy_switch")
    try:
        metzler_diagonal_gramian(jacobian_J(net, steady_state(net)), np.eye(4))
    except ModelInputError:
        pass
    else:
        raise AssertionError("non-Metzler matrix accepted")
    print("✅ Metzler diagonal Gramian")


def test_toy_structured_gramians():
    """Structured Gramians on the toggle switch are feasible, positive definite and block diagonal"""
    system = _toy_system()
    part = PartitionSpec(l=2, groups=[[0, 1]], r_per_group=[1])
    gramians = solve_structured_gramians(system, part, "per-group")
    BBt = system.B @ system.B.T
    CtC = system.C.T @ system.C
    A = system.A
    assert np.max(np.linalg.eigvalsh(A @ gramians.P + gramians.P @ A.T + BBt)) <= 1e-8 * np.linalg.norm(BBt, 2)
    assert np.max(np.linalg.eigvalsh(gramians.Q @ A + A.T @ gramians.Q + CtC)) <= 1e-8 * np.linalg.norm(CtC, 2)
    assert np.min(np.linalg.eigvalsh(gramians.P)) > 0
    assert np.min(np.linalg.eigvalsh(gramians.Q)) > 0
    assert np.all(gramians.P[:2, 2:] == 0) and np.all(gramians.Q[:2, 2:] == 0)
    assert gramians.P22.shape == (2, 2) and gramians.Q22.shape == (2, 2)
    assert gramians.gamma_P >= 0 and gramians.gamma_Q >= 0
    print("✅ toggle switch structured Gramians")


def test_gramian_domination():
    """Any feasible P dominates the exact Gramian; relaxing the structure lowers the trace"""
    system = _toy_system()
    P_exact = controllability_gramian(system)
    part = PartitionSpec(l=2, groups=[[0], [1]], r_per_group=[0, 0])
    traces = {}
    for mode in ("per-group", "two", "full"):
        P = solve_structured_gramians(system, part, mode).P
        assert np.min(np.linalg.eigvalsh(P - P_exact)) >= -1e-8 * np.linalg.norm(P_exact, 2)
        traces[mode] = np.trace(P)
    assert traces["full"] <= traces["two"] * (1 + 1e-6)
    assert traces["two"] <= traces["per-group"] * (1 + 1e-6)
    print("✅ Gramian domination")


def test_infeasible_structure():
    """No diagonal P exists when a diagonal entry of A is zero"""
    A = np.array([[0.0, 1.0], [-1.0, -1.0]])
    try:
        structured_lyapunov_solution(A, np.eye(2), [[0], [1]])
    except InfeasibleStructureError as e:
        assert e.blocks == [[0], [1]]
        assert e.best_slack > 0
    else:
        raise AssertionError("expected InfeasibleStructureError")
    print("✅ infeasible structure reported")


def test_non_normal_diagonal_structure():
    """A strongly non-normal A still gets a diagonal solution, or an explicit infeasibility report"""
    A = np.array([[-1.0, 100.0], [0.0, -1.0]])
    RHS = np.eye(2)
    P_exact = solve_lyapunov_eq(A, RHS)
    try:
        P = structured_lyapunov_solution(A, RHS, [[0], [1]])
    except InfeasibleStructureError as e:
        assert e.blocks == [[0], [1]] and e.best_slack > 0
    else:
        assert P[0, 1] == 0.0 and P[1, 0] == 0.0
        assert np.all(np.diag(P) > 0)
        assert np.max(np.linalg.eigvalsh(A @ P + P @ A.T + RHS)) <= 1e-8 * np.linalg.norm(P, 2)
        assert np.min(np.linalg.eigvalsh(P - P_exact)) >= -1e-8 * np.linalg.norm(P_exact, 2)
    print("✅ non-normal diagonal structure")


def test_partition_spec():
    """Groups must be disjoint and cover the reducible block"""
    part = PartitionSpec(l=2, groups=[[0, 1], [2]], r_per_group=[1, 0])
    assert part.k == 3 and part.r == 1
    assert part.blocks("per-group") == [[0, 1], [2, 3], [4]]
    assert part.blocks("two") == [[0, 1], [2, 3, 4]]
    assert part.blocks("full") == [[0, 1, 2, 3, 4]]
    for groups, counts in (([[0, 1], [1]], [0, 0]), ([[0, 2]], [0]), ([[0, 1]], [3])):
        try:
            PartitionSpec(l=1, groups=groups, r_per_group=counts)
        except ValidationError:
            continue
        raise AssertionError(f"invalid partition accepted: {groups} {counts}")
    print("✅ partition spec")


def test_matrix_dump():
    """Dumped matrices reload bit for bit"""
    M = np.array([[1.0 / 3.0, -2.5e-17], [np.pi, 7.0]])
    with tempfile.TemporaryDirectory() as directory:
        path = os.path.join(directory, "M.txt")
        dump_matrix(path, M)
        with open(path, encoding="utf-8") as handle:
            assert handle.readline().strip() == "2 2"
        assert np.array_equal(load_matrix(path), M)
    print("✅ matrix dump")


def main():
    """Run all tests"""
    print("🧪 gramians tests")
    print("=" * 50)

    tests = [
        test_lyapunov_against_kronecker,
        test_scalar_and_ill_posed_lyapunov,
        test_metzler_verdicts,
        test_monotone_signature,
        test_metzler_diagonal_gramian,
        test_toy_structured_gramians,
        test_gramian_domination,
        test_infeasible_structure,
        test_non_normal_diagonal_structure,
        test_partition_spec,
        test_matrix_dump,
    ]

    passed = 0
    for test in tests:
        try:
            test()
            passed += 1
        except Exception as e:
            print(f"❌ {test.__name__}: {type(e).__name__}: {str(e)}")

    print("\n" + "=" * 50)
    print(f"Test Results: {passed}/{len(tests)} tests passed")
    return passed == len(tests)


if __name__ == "__main__":
    sys.exit(0 if main() else 1)
