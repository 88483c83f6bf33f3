# gramians.py
# This module computes Gramians for linearized fluctuation systems: exact Lyapunov equations,
# Metzler / sign-monotone diagonal Gramians, and block-structured solutions of the Lyapunov
# inequalities via a log-det barrier path-following method.

import json
import logging
import time
from collections import deque
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.linalg import solve_continuous_lyapunov

from errors import IllPosedLyapunovError, InfeasibleStructureError, ModelInputError, NumericalError, StabilityError
from lna import LinearFluctuationSystem, is_hurwitz, spectral_abscissa

# Configure logging
logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

BLOCK_MODES = ("two", "per-group", "full")
FEASIBILITY_TOL = 1e-8
PD_EPSILON = 1e-8
MU_START = 1.0
MU_FACTOR = 0.2
NEWTON_TOL = 1e-10
MAX_OUTER = 200
MAX_NEWTON = 100
PHASE_ONE_TRACE_BOUND = 1e8


class PartitionSpec(BaseModel):
    """
    Partition of the linearized states: l retained outputs first, then the k
    reducible states split into lumped groups (indices relative to the reducible block)
    """
    model_config = ConfigDict(frozen=True)

    l: int = Field(ge=1)
    groups: List[List[int]]
    r_per_group: List[int]

    @model_validator(mode="after")
    def _check_groups(self):
        flat = [i for group in self.groups for i in group]
        if sorted(flat) != list(range(len(flat))):
            raise ValueError(f"groups {self.groups} must be disjoint and cover the reducible indices 0..{len(flat) - 1}")
        if any(not group for group in self.groups):
            raise ValueError("groups must be nonempty")
        if len(self.r_per_group) != len(self.groups):
            raise ValueError("one truncation count per group is required")
        for group, r in zip(self.groups, self.r_per_group):
            if r < 0 or r > len(group):
                raise ValueError(f"truncation count {r} out of range for group of size {len(group)}")
        return self

    @property
    def k(self) -> int:
        return sum(len(group) for group in self.groups)

    @property
    def r(self) -> int:
        return sum(self.r_per_group)

    def blocks(self, block_mode: str = "per-group") -> List[List[int]]:
        """Index sets (in full state coordinates) of the diagonal blocks of P and Q"""
        n = self.l + self.k
        if block_mode == "two":
            blocks = [list(range(self.l)), list(range(self.l, n))]
        elif block_mode == "per-group":
            blocks = [list(range(self.l))] + [[self.l + i for i in group] for group in self.groups]
        elif block_mode == "full":
            blocks = [list(range(n))]
        else:
            raise ModelInputError(f"unknown block mode '{block_mode}', expected one of {BLOCK_MODES}")
        return [block for block in blocks if block]


class StructuredGramians(BaseModel):
    """Block-diagonal P, Q satisfying the Lyapunov inequalities, with their margins"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    P: np.ndarray
    Q: np.ndarray
    gamma_P: float
    gamma_Q: float
    blocks: List[List[int]]
    l: int
    method_P: str
    method_Q: str

    @property
    def P22(self) -> np.ndarray:
        return self.P[self.l:, self.l:]

    @property
    def Q22(self) -> np.ndarray:
        return self.Q[self.l:, self.l:]


class MetzlerVerdict(NamedTuple):
    is_metzler: bool
    violations: List[Tuple[int, int, float]]

    def __bool__(self) -> bool:
        return self.is_metzler


# ---------------------------------------------------------------------------
# Exact Lyapunov equations
# ---------------------------------------------------------------------------

def _lyapunov_residual(A: np.ndarray, P: np.ndarray, Q_rhs: np.ndarray) -> np.ndarray:
    return A @ P + P @ A.T + Q_rhs


def solve_lyapunov_eq(A: np.ndarray, Q_rhs: np.ndarray) -> np.ndarray:
    """
    Solve A P + P A^T + Q_rhs = 0 (Bartels-Stewart)

    Args:
        A: square matrix with no eigenvalue pair summing to zero
        Q_rhs: symmetric forcing term

    Returns:
        np.ndarray: symmetric solution P
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    Q_rhs = np.atleast_2d(np.asarray(Q_rhs, dtype=float))
    n = A.shape[0]
    if A.shape != (n, n) or Q_rhs.shape != (n, n):
        raise ModelInputError(f"Lyapunov equation needs square matrices of equal size, got {A.shape} and {Q_rhs.shape}")
    if np.max(np.abs(Q_rhs - Q_rhs.T), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(Q_rhs), initial=0.0)):
        raise ModelInputError("Lyapunov forcing term is not symmetric")

    eigenvalues = np.linalg.eigvals(A)
    sums = eigenvalues[:, None] + eigenvalues[None, :]
    i, j = np.unravel_index(np.argmin(np.abs(sums)), sums.shape)
    if abs(sums[i, j]) <= 1e-10 * max(1.0, float(np.max(np.abs(eigenvalues)))):
        pair = (complex(eigenvalues[i]), complex(eigenvalues[j]))
        raise IllPosedLyapunovError(f"Lyapunov operator is singular: eigenvalues {pair[0]:.6g} and {pair[1]:.6g} sum to ~0", pair)

    P = solve_continuous_lyapunov(A, -Q_rhs)
    P = 0.5 * (P + P.T)
    limit = 1e-10 * max(1.0, np.linalg.norm(Q_rhs))
    residual = _lyapunov_residual(A, P, Q_rhs)
    if np.linalg.norm(residual) > limit:
        correction = solve_continuous_lyapunov(A, -residual)
        P = P + 0.5 * (correction + correction.T)
        refined = np.linalg.norm(_lyapunov_residual(A, P, Q_rhs))
        logger.warning(f"Lyapunov residual {np.linalg.norm(residual):.3e} refined to {refined:.3e}")
    return P


def controllability_gramian(system: LinearFluctuationSystem) -> np.ndarray:
    """Unstructured P solving A P + P A^T + B B^T = 0; equals the stationary covariance"""
    return solve_lyapunov_eq(system.A, system.B @ system.B.T)


def observability_gramian(system: LinearFluctuationSystem) -> np.ndarray:
    return solve_lyapunov_eq(system.A.T, system.C.T @ system.C)


# ---------------------------------------------------------------------------
# Metzler and sign-monotone structure
# ---------------------------------------------------------------------------

def is_metzler(A: np.ndarray) -> MetzlerVerdict:
    """Check that all off-diagonal entries are nonnegative (up to 1e-12 of the largest entry)"""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    floor = -1e-12 * float(np.max(np.abs(A), initial=0.0))
    violations = [
        (i, j, float(A[i, j]))
        for i in range(A.shape[0])
        for j in range(A.shape[1])
        if i != j and A[i, j] < floor
    ]
    return MetzlerVerdict(not violations, violations)


def find_monotone_signature(A: np.ndarray) -> Optional[np.ndarray]:
    """
    Signs s (entries +-1) such that diag(s) A diag(s) is Metzler, or None.
    Each significant off-diagonal entry forces s_i s_j = sign(a_ij); the sign graph is two-coloured.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = A.shape[0]
    tol = 1e-12 * float(np.max(np.abs(A), initial=0.0))
    edges: Dict[int, List[Tuple[int, int]]] = {i: [] for i in range(n)}
    for i in range(n):
        for j in range(n):
            if i != j and abs(A[i, j]) > tol:
                sign = 1 if A[i, j] > 0 else -1
                edges[i].append((j, sign))
                edges[j].append((i, sign))
    signs = np.zeros(n, dtype=int)
    for root in range(n):
        if signs[root]:
            continue
        signs[root] = 1
        queue = deque([root])
        while queue:
            i = queue.popleft()
            for j, sign in edges[i]:
                wanted = signs[i] * sign
                if signs[j] == 0:
                    signs[j] = wanted
                    queue.append(j)
                elif signs[j] != wanted:
                    return None
    return signs.astype(float)


def metzler_diagonal_gramian(A: np.ndarray, RHS: np.ndarray) -> np.ndarray:
    """
    Diagonal P with A P + P A^T + RHS <= 0 for a Metzler Hurwitz A

    Uses D = diag(xi / eta) with xi = -A^-1 1 and eta = -A^-T 1, for which
    (A D + D A^T) eta < 0, then scales by alpha = max(1, lmax(RHS) / lmin(-(A D + D A^T))).
    Falls back to the diagonal-structure barrier solver if the candidate fails verification.

    Args:
        A: Metzler, Hurwitz matrix
        RHS: symmetric positive semidefinite forcing term

    Returns:
        np.ndarray: diagonal Gramian
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    RHS = np.atleast_2d(np.asarray(RHS, dtype=float))
    verdict = is_metzler(A)
    if not verdict:
        raise ModelInputError(f"matrix is not Metzler: violating entries {verdict.violations}")
    if not is_hurwitz(A):
        raise StabilityError(f"matrix is not Hurwitz (spectral abscissa {spectral_abscissa(A):.6g})", np.linalg.eigvals(A))

    n = A.shape[0]
    ones = np.ones(n)
    xi = -np.linalg.solve(A, ones)
    eta = -np.linalg.solve(A.T, ones)
    if np.all(xi > 0) and np.all(eta > 0):
        D = np.diag(xi / eta)
        M = A @ D + D @ A.T
        top = float(np.max(np.linalg.eigvalsh(M)))
        if top < -1e-12 * np.linalg.norm(M, 2):
            alpha = max(1.0, float(np.max(np.linalg.eigvalsh(RHS), initial=0.0)) / -top)
            return alpha * D
    logger.warning("Metzler diagonal candidate failed verification; solving with the diagonal barrier")
    P, _ = _structured_solution(A, RHS, [[i] for i in range(n)], "P", use_fast_path=False)
    return P


def _signed_diagonal_start(A: np.ndarray, R: np.ndarray) -> Optional[np.ndarray]:
    """Strictly feasible diagonal start from an orthant signature, or None"""
    signs = find_monotone_signature(A)
    if signs is None:
        return None
    A_signed = signs[:, None] * A * signs[None, :]
    if not is_hurwitz(A_signed):
        return None
    R_signed = signs[:, None] * R * signs[None, :]
    try:
        # a diagonal P is unchanged by the signature similarity
        return 2.0 * metzler_diagonal_gramian(A_signed, R_signed)
    except NumericalError:
        return None


# ---------------------------------------------------------------------------
# Barrier path-following over block-structured symmetric matrices
# ---------------------------------------------------------------------------

class _AffineLMI(NamedTuple):
    """F(x) = F0 + sum_a x_a Fs[a], required positive definite"""
    F0: np.ndarray
    Fs: np.ndarray

    def at(self, x: np.ndarray) -> np.ndarray:
        return self.F0 + np.tensordot(x, self.Fs, axes=1)


def _block_basis(n: int, blocks: List[List[int]]) -> Tuple[np.ndarray, List[Tuple[int, int]]]:
    basis, pairs = [], []
    for block in blocks:
        for a, i in enumerate(block):
            for j in block[a:]:
                E = np.zeros((n, n))
                E[i, j] = E[j, i] = 1.0
                basis.append(E)
                pairs.append((i, j))
    return np.array(basis), pairs


def _log_det(F: np.ndarray) -> float:
    try:
        L = np.linalg.cholesky(F)
    except np.linalg.LinAlgError:
        return -np.inf
    return 2.0 * float(np.sum(np.log(np.diag(L))))


def _barrier_value(c: np.ndarray, lmis: List[_AffineLMI], x: np.ndarray, t: float) -> float:
    value = t * float(c @ x)
    for lmi in lmis:
        log_det = _log_det(lmi.at(x))
        if not np.isfinite(log_det):
            return np.inf
        value -= log_det
    return value


def _newton_step(c: np.ndarray, lmis: List[_AffineLMI], x: np.ndarray, t: float) -> Tuple[np.ndarray, float]:
    grad = t * c.astype(float)
    hess = np.zeros((x.size, x.size))
    for lmi in lmis:
        F_inv = np.linalg.inv(lmi.at(x))
        G = np.einsum("ij,ajk->aik", F_inv, lmi.Fs)
        grad -= np.einsum("aii->a", G)
        hess += np.einsum("aij,bji->ab", G, G)
    hess = 0.5 * (hess + hess.T)
    try:
        step = np.linalg.solve(hess, -grad)
    except np.linalg.LinAlgError:
        step = np.linalg.lstsq(hess, -grad, rcond=None)[0]
    return step, float(-grad @ step)


def _center(c, lmis, x, t, stop=None) -> Tuple[np.ndarray, bool]:
    """Damped Newton on t c^T x - sum log det F(x); returns (x, stopped early)"""
    value = _barrier_value(c, lmis, x, t)
    for _ in range(MAX_NEWTON):
        step, decrement = _newton_step(c, lmis, x, t)
        if decrement / 2.0 <= NEWTON_TOL:
            break
        size = 1.0
        while size > 1e-14:
            candidate = x + size * step
            candidate_value = _barrier_value(c, lmis, candidate, t)
            if candidate_value <= value - 0.01 * size * decrement:
                break
            size *= 0.5
        else:
            break
        x, value = candidate, candidate_value
        if stop is not None and stop(x):
            return x, True
    return x, False


def _path_following(c, lmis, x, stop=None, gap_tol: float = FEASIBILITY_TOL) -> Tuple[np.ndarray, bool, int]:
    total_dim = sum(lmi.F0.shape[0] for lmi in lmis)
    mu = MU_START
    iteration = 0
    if stop is not None and stop(x):
        return x, True, iteration
    for iteration in range(1, MAX_OUTER + 1):
        x, stopped = _center(c, lmis, x, 1.0 / mu, stop)
        if stopped:
            return x, True, iteration
        if total_dim * mu <= gap_tol * max(1.0, abs(float(c @ x))):
            break
        mu *= MU_FACTOR
    return x, False, iteration


def _is_strictly_feasible(lmis: List[_AffineLMI], x: np.ndarray) -> bool:
    return all(np.isfinite(_log_det(lmi.at(x))) for lmi in lmis)


def _structured_solution(
    A: np.ndarray,
    RHS: np.ndarray,
    blocks: List[List[int]],
    which: str,
    use_fast_path: bool = True,
) -> Tuple[np.ndarray, str]:
    """
    Minimum-trace block-diagonal P with A P + P A^T + RHS < 0 and P > eps I.
    Phase 1 (minimize the slack s of sI - (A P + P A^T + RHS) > 0) runs only without a fast-path start.
    """
    n = A.shape[0]
    scale = float(np.linalg.norm(RHS, 2)) or 1.0
    R = RHS / scale
    basis, pairs = _block_basis(n, blocks)
    m = len(pairs)
    lyapunov_terms = -(np.einsum("ij,ajk->aik", A, basis) + np.einsum("aij,kj->aik", basis, A))
    G = _AffineLMI(-R, lyapunov_terms)
    H = _AffineLMI(-PD_EPSILON * np.eye(n), basis)
    c = np.array([1.0 if i == j else 0.0 for i, j in pairs])

    started = time.perf_counter()
    method = "barrier"
    phase_one_iterations = 0
    x = None
    if use_fast_path:
        start = _signed_diagonal_start(A, R)
        if start is not None:
            candidate = np.array([start[i, j] for i, j in pairs])
            if _is_strictly_feasible([G, H], candidate):
                x = candidate
                method = "signed-diagonal+barrier"

    if x is None:
        s0 = float(np.max(np.linalg.eigvalsh(A + A.T + R))) + 1.0
        x1 = np.concatenate([np.array([1.0 if i == j else 0.0 for i, j in pairs]), [s0]])
        G1 = _AffineLMI(-R, np.concatenate([lyapunov_terms, np.eye(n)[None]]))
        H1 = _AffineLMI(H.F0, np.concatenate([basis, np.zeros((1, n, n))]))
        # trace(P) < bound keeps the phase-1 barrier bounded below when P can grow without limit
        T1 = _AffineLMI(np.array([[PHASE_ONE_TRACE_BOUND * n]]), -np.concatenate([c, [0.0]]).reshape(m + 1, 1, 1))
        c1 = np.zeros(m + 1)
        c1[-1] = 1.0
        x1, feasible, phase_one_iterations = _path_following(c1, [G1, H1, T1], x1, stop=lambda z: z[-1] < 0, gap_tol=1e-9)
        if not feasible or not _is_strictly_feasible([G, H], x1[:m]):
            raise InfeasibleStructureError(
                which, float(x1[-1]) * scale, blocks,
                {"iterations": phase_one_iterations, "normalization": scale},
            )
        x = x1[:m]

    x, _, iterations = _path_following(c, [G, H], x)
    P = scale * np.tensordot(x, basis, axes=1)
    entry = {
        "gramian": which,
        "method": method,
        "blocks": blocks,
        "phase1_iterations": phase_one_iterations,
        "phase2_iterations": iterations,
        "trace": float(np.trace(P)),
        "seconds": round(time.perf_counter() - started, 4),
    }
    logger.info(f"Structured Gramian: {json.dumps(entry)}")
    return P, method


def _margin(A: np.ndarray, P: np.ndarray, RHS: np.ndarray) -> float:
    return -float(np.max(np.linalg.eigvalsh(A @ P + P @ A.T + RHS)))


def structured_lyapunov_solution(A: np.ndarray, RHS: np.ndarray, blocks: List[List[int]], which: str = "P") -> np.ndarray:
    """Block-structured solution of A P + P A^T + RHS <= 0 for arbitrary blocks"""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if not is_hurwitz(A):
        raise StabilityError(f"matrix is not Hurwitz (spectral abscissa {spectral_abscissa(A):.6g})", np.linalg.eigvals(A))
    P, _ = _structured_solution(A, np.asarray(RHS, dtype=float), blocks, which)
    return P


def solve_structured_gramians(
    system: LinearFluctuationSystem,
    part: PartitionSpec,
    block_mode: str = "per-group",
) -> StructuredGramians:
    """
    Structured controllability/observability Gramians of a fluctuation system

    Args:
        system: linearized fluctuation system (retained states first)
        part: partition of the reducible block into lumped groups
        block_mode: 'two' (blocks l and k), 'per-group' (one block per group) or 'full'

    Returns:
        StructuredGramians with margins gamma_P, gamma_Q
    """
    if part.l != system.l or part.k != system.k:
        raise ModelInputError(f"partition (l={part.l}, k={part.k}) does not match system (l={system.l}, k={system.k})")
    blocks = part.blocks(block_mode)
    BBt = system.B @ system.B.T
    CtC = system.C.T @ system.C
    P, method_P = _structured_solution(system.A, BBt, blocks, "P")
    Q, method_Q = _structured_solution(system.A.T, CtC, blocks, "Q")
    gramians = StructuredGramians(
        P=P, Q=Q,
        gamma_P=_margin(system.A, P, BBt),
        gamma_Q=_margin(system.A.T, Q, CtC),
        blocks=blocks, l=system.l, method_P=method_P, method_Q=method_Q,
    )
    for name, gamma, forcing in (("P", gramians.gamma_P, BBt), ("Q", gramians.gamma_Q, CtC)):
        if gamma < -FEASIBILITY_TOL * np.linalg.norm(forcing, 2):
            raise NumericalError(f"structured {name}-Gramian violates its inequality (margin {gamma:.3e})")
    return gramians


# ---------------------------------------------------------------------------
# Matrix dump format
# ---------------------------------------------------------------------------

def dump_matrix(path: str, M: np.ndarray):
    """Write 'rows cols' then one row of full-precision values per line"""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    np.savetxt(path, M, fmt="%.17g", header=f"{M.shape[0]} {M.shape[1]}", comments="")


def load_matrix(path: str) -> np.ndarray:
    with open(path, encoding="utf-8") as handle:
        rows, cols = (int(v) for v in handle.readline().split())
        values = np.loadtxt(handle, ndmin=2) if rows and cols else np.zeros((rows, cols))
    return values.reshape(rows, cols)
