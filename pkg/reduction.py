# reduction.py
# This module builds reduced-order LNA models: balancing of the reducible block, structured
# Petrov-Galerkin projectors, the reduced differential-algebraic model and its simulation,
# and the time-scale-separation (stochastic averaging) baseline.

import json
import logging
import re
import time
from functools import cached_property
from typing import Any, List, Literal, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator
from scipy.linalg import lapack, solve_triangular

from config import get_settings
from errors import (
    ConfigurationError,
    ConvergenceError,
    NumericalError,
    SingularAlgebraicJacobianError,
    StabilityError,
    UnknownSymbolError,
)
from gramians import PartitionSpec, StructuredGramians, solve_structured_gramians
from lna import (
    DEFAULT_POINTS,
    CovTrajectory,
    Trajectory,
    integrate_lyapunov_along,
    integrate_ode,
    is_hurwitz,
    linearize_at,
    noise_F,
    spectral_abscissa,
    steady_state,
    trajectory_rate_slack,
)

# Configure logging
logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

ALGEBRAIC_TOL = 1e-12
ALGEBRAIC_ACCEPT = 1e-9
MAX_ALGEBRAIC_CONDITION = 1e12


# ---------------------------------------------------------------------------
# Balancing and projectors
# ---------------------------------------------------------------------------

class BalancedBlock(BaseModel):
    """Balancing transformation of the reducible block: T^-1 P22 T^-T = T^T Q22 T = diag(sigma)"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    T22: np.ndarray
    T22_inv: np.ndarray
    sigma: np.ndarray

    @property
    def Sigma22(self) -> np.ndarray:
        return np.diag(self.sigma)

    def residuals(self, P22: np.ndarray, Q22: np.ndarray) -> Tuple[float, float]:
        """Relative Frobenius errors of the two balancing identities"""
        scale = np.linalg.norm(self.Sigma22)
        p_err = np.linalg.norm(self.T22_inv @ P22 @ self.T22_inv.T - self.Sigma22) / scale
        q_err = np.linalg.norm(self.T22.T @ Q22 @ self.T22 - self.Sigma22) / scale
        return float(p_err), float(q_err)


def _cholesky_lower(M: np.ndarray, name: str) -> np.ndarray:
    factor, info = lapack.dpotrf(M, lower=1, clean=1)
    if info > 0:
        raise NumericalError(f"{name} is not positive definite: leading minor of order {info} fails Cholesky")
    if info < 0:
        raise NumericalError(f"Cholesky factorization of {name} received an invalid argument ({info})")
    return np.tril(factor)


def balance_block(P22: np.ndarray, Q22: np.ndarray) -> BalancedBlock:
    """
    Balance a pair of positive definite blocks

    Args:
        P22: structured controllability Gramian block
        Q22: structured observability Gramian block

    Returns:
        BalancedBlock with T22 = L U Sigma^-1/2 where P22 = L L^T and L^T Q22 L = U Sigma^2 U^T
    """
    P22 = np.atleast_2d(np.asarray(P22, dtype=float))
    Q22 = np.atleast_2d(np.asarray(Q22, dtype=float))
    P22 = 0.5 * (P22 + P22.T)
    Q22 = 0.5 * (Q22 + Q22.T)
    L = _cholesky_lower(P22, "P22")
    _cholesky_lower(Q22, "Q22")

    M = L.T @ Q22 @ L
    eigenvalues, U = np.linalg.eigh(0.5 * (M + M.T))
    order = np.argsort(-eigenvalues, kind="stable")
    eigenvalues, U = eigenvalues[order], U[:, order]
    if np.any(eigenvalues <= 0):
        raise NumericalError(f"balancing produced non-positive squared singular values {eigenvalues}")
    pivots = np.argmax(np.abs(U), axis=0)
    U = U * np.sign(U[pivots, np.arange(U.shape[1])])

    sigma = np.sqrt(eigenvalues)
    root = np.sqrt(sigma)
    T22 = L @ U / root
    T22_inv = (root[:, None] * U.T) @ solve_triangular(L, np.eye(L.shape[0]), lower=True)
    return BalancedBlock(T22=T22, T22_inv=T22_inv, sigma=sigma)


def truncation_order(sigma: Sequence[float], threshold: Optional[float] = None, mode: str = "relative") -> Tuple[List[int], int]:
    """
    Descending (stable) order of the structured singular values and an advisory truncation count

    Args:
        sigma: diagonal of Sigma22
        threshold: cut-off (fraction of the largest value in relative mode)
        mode: 'relative' or 'absolute'

    Returns:
        (permutation, suggested r)
    """
    sigma = np.asarray(sigma, dtype=float)
    threshold = get_settings().truncation_threshold if threshold is None else threshold
    order = [int(i) for i in np.argsort(-sigma, kind="stable")]
    if sigma.size == 0:
        return order, 0
    if mode == "relative":
        cut = threshold * float(np.max(sigma))
    elif mode == "absolute":
        cut = threshold
    else:
        raise ConfigurationError(f"unknown threshold mode '{mode}'")
    return order, int(np.sum(sigma < cut))


class ProjectorSet(BaseModel):
    """
    Structured projectors in partition order (retained states first):
        W = [[I, 0], [0, W22]], V = [[I, 0], [0, V22]], W_r = [[0], [W_r22]], V_r = [[0], [V_r22]]
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    W: np.ndarray
    V: np.ndarray
    W_r: np.ndarray
    V_r: np.ndarray
    l: int
    r: int
    perm: List[int]
    labels: List[str]

    @model_validator(mode="after")
    def _check_dimensions(self):
        n = self.W.shape[0]
        if self.W.shape != (n, n - self.r) or self.V.shape != self.W.shape:
            raise ValueError(f"W/V shapes {self.W.shape}/{self.V.shape} inconsistent with r={self.r}")
        if self.W_r.shape != (n, self.r) or self.V_r.shape != self.W_r.shape:
            raise ValueError(f"W_r/V_r shapes {self.W_r.shape}/{self.V_r.shape} inconsistent with r={self.r}")
        return self

    def biorthogonality_error(self) -> float:
        V_all = np.hstack([self.V, self.V_r])
        W_all = np.hstack([self.W, self.W_r])
        return float(np.max(np.abs(V_all.T @ W_all - np.eye(W_all.shape[1])), initial=0.0))

    def in_species_order(self, M: np.ndarray) -> np.ndarray:
        """Undo the partition permutation on the rows of a projector"""
        out = np.zeros_like(M)
        out[self.perm] = M
        return out


def _assemble_projectors(T22, T22_inv, l, keep, truncate, perm, labels) -> ProjectorSet:
    k = T22.shape[0]
    n = l + k
    left = T22_inv.T
    W = np.zeros((n, l + len(keep)))
    V = np.zeros_like(W)
    W[:l, :l] = np.eye(l)
    V[:l, :l] = np.eye(l)
    W[l:, l:] = T22[:, keep]
    V[l:, l:] = left[:, keep]
    W_r = np.zeros((n, len(truncate)))
    V_r = np.zeros_like(W_r)
    W_r[l:, :] = T22[:, truncate]
    V_r[l:, :] = left[:, truncate]
    projectors = ProjectorSet(W=W, V=V, W_r=W_r, V_r=V_r, l=l, r=len(truncate), perm=list(perm), labels=list(labels))
    error = projectors.biorthogonality_error()
    if error > 1e-10:
        logger.warning(f"Projector biorthogonality error {error:.3e} exceeds 1e-10")
    return projectors


def build_projectors(balanced: BalancedBlock, l: int, r: int, perm: Optional[Sequence[int]] = None,
                     labels: Optional[Sequence[str]] = None) -> ProjectorSet:
    """Keep the first k - r balanced directions, truncate the remaining r"""
    k = balanced.T22.shape[0]
    if r < 0 or r > k:
        raise ConfigurationError(f"truncation count {r} out of range 0..{k}")
    n = l + k
    perm = list(range(n)) if perm is None else list(perm)
    labels = [f"x{i + 1}" for i in range(n)] if labels is None else list(labels)
    return _assemble_projectors(balanced.T22, balanced.T22_inv, l, list(range(k - r)), list(range(k - r, k)), perm, labels)


# ---------------------------------------------------------------------------
# Reduced model
# ---------------------------------------------------------------------------

class ReducedModel(BaseModel):
    """
    Reduced LNA model in coordinates (z_m, z_r) with x = W z_m + W_r z_r:
        dz_m/dt = V^T S f(x),   0 = V_r^T S f(x),   y = C x
    Fluctuations follow the linearization of this system ('averaged') or the
    plain Petrov-Galerkin projection V^T J W, V^T S F ('projected').
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    base: Any
    projectors: ProjectorSet
    method: Literal["structured", "averaging"]
    fluctuation_mode: Literal["averaged", "projected"] = "averaged"
    x_ss: np.ndarray
    retained: List[str]
    mode_labels: List[str]
    balanced: List[BalancedBlock] = []
    gramians: Optional[StructuredGramians] = None
    partition: Optional[PartitionSpec] = None
    suggested_r: Optional[int] = None
    label: str = ""

    @cached_property
    def W(self) -> np.ndarray:
        return self.projectors.in_species_order(self.projectors.W)

    @cached_property
    def V(self) -> np.ndarray:
        return self.projectors.in_species_order(self.projectors.V)

    @cached_property
    def W_r(self) -> np.ndarray:
        return self.projectors.in_species_order(self.projectors.W_r)

    @cached_property
    def V_r(self) -> np.ndarray:
        return self.projectors.in_species_order(self.projectors.V_r)

    @property
    def r(self) -> int:
        return self.projectors.r

    @property
    def dimension(self) -> int:
        return self.W.shape[1]

    @cached_property
    def C(self) -> np.ndarray:
        labels = list(self.base.state_labels)
        C = np.zeros((len(self.retained), len(labels)))
        for row, name in enumerate(self.retained):
            C[row, labels.index(name)] = 1.0
        return C

    @cached_property
    def S_r(self) -> np.ndarray:
        return self.V.T @ self.base.stoichiometry

    @cached_property
    def C_r(self) -> np.ndarray:
        return self.C @ self.W

    def D_r(self, z_r: np.ndarray) -> np.ndarray:
        return self.C @ self.W_r @ z_r

    def reconstruct(self, z_m: np.ndarray, z_r: np.ndarray) -> np.ndarray:
        return self.W @ z_m + self.W_r @ z_r

    def f_r(self, z_m: np.ndarray, z_r: np.ndarray) -> np.ndarray:
        return self.base.eval_rates(self.reconstruct(z_m, z_r))

    def reduced_rhs(self, z_m: np.ndarray, z_r: np.ndarray) -> np.ndarray:
        return self.S_r @ self.f_r(z_m, z_r)

    def algebraic_residual(self, z_m: np.ndarray, z_r: np.ndarray) -> np.ndarray:
        return self.V_r.T @ self.base.stoichiometry @ self.f_r(z_m, z_r)

    def algebraic_jacobian(self, x: np.ndarray) -> np.ndarray:
        return self.V_r.T @ self.base.stoichiometry @ self.base.rate_jacobian_at(x) @ self.W_r

    def _checked_jacobian(self, x: np.ndarray) -> np.ndarray:
        K = self.algebraic_jacobian(x)
        condition = float(np.linalg.cond(K)) if K.size else 1.0
        if not np.isfinite(condition) or condition > MAX_ALGEBRAIC_CONDITION:
            raise SingularAlgebraicJacobianError(
                f"algebraic constraint Jacobian V_r^T S df/dx W_r is singular (condition {condition:.3e}); "
                f"the reduced model is not index 1"
            )
        return K

    def solve_algebraic(self, z_m: np.ndarray, guess: np.ndarray, max_iter: int = 50, max_halvings: int = 30) -> np.ndarray:
        """Damped Newton for z_r on V_r^T S f(W z_m + W_r z_r) = 0"""
        if self.r == 0:
            return np.zeros(0)
        z_r = np.array(guess, dtype=float)
        S = self.base.stoichiometry
        for _ in range(max_iter):
            x = self.reconstruct(z_m, z_r)
            rates = self.base.eval_rates(x)
            residual = self.V_r.T @ S @ rates
            norm = float(np.max(np.abs(residual)))
            if norm <= ALGEBRAIC_TOL * (1.0 + float(np.max(np.abs(rates)))):
                return z_r
            step = np.linalg.solve(self._checked_jacobian(x), -residual)
            damping = 1.0
            for _ in range(max_halvings):
                candidate = z_r + damping * step
                try:
                    if float(np.max(np.abs(self.algebraic_residual(z_m, candidate)))) < norm:
                        break
                except NumericalError:
                    pass
                damping *= 0.5
            else:
                break
            z_r = candidate
        rates = self.f_r(z_m, z_r)
        norm = float(np.max(np.abs(self.V_r.T @ S @ rates)))
        if norm <= ALGEBRAIC_ACCEPT * (1.0 + float(np.max(np.abs(rates)))):
            return z_r
        raise ConvergenceError(f"algebraic constraint not solved (residual {norm:.3e})")

    def fluctuation_matrices(self, x: np.ndarray, slack: float = 0.0) -> Tuple[np.ndarray, np.ndarray]:
        """Reduced fluctuation drift A_r and noise input B_r at a full state x"""
        S = self.base.stoichiometry
        J = S @ self.base.rate_jacobian_at(x)
        SF = S @ noise_F(self.base, x, slack) / np.sqrt(self.base.volume)
        A_r = self.V.T @ J @ self.W
        B_r = self.V.T @ SF
        if self.r and self.fluctuation_mode == "averaged":
            K = self._checked_jacobian(x)
            coupling = self.V.T @ J @ self.W_r
            A_r = A_r - coupling @ np.linalg.solve(K, self.V_r.T @ J @ self.W)
            B_r = B_r - coupling @ np.linalg.solve(K, self.V_r.T @ SF)
        return A_r, B_r

    def J_r(self, z_m: np.ndarray, z_r: np.ndarray, slack: float = 0.0) -> np.ndarray:
        return self.fluctuation_matrices(self.reconstruct(z_m, z_r), slack)[0]

    def F_r(self, z_m: np.ndarray, z_r: np.ndarray, slack: float = 0.0) -> np.ndarray:
        return self.fluctuation_matrices(self.reconstruct(z_m, z_r), slack)[1]

    def steady_state(self) -> Tuple[np.ndarray, np.ndarray]:
        """(z_m, z_r) of the full steady state"""
        return self.V.T @ self.x_ss, self.V_r.T @ self.x_ss

    def linearized_fluctuations(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(A_r, B_r, C_r) of the reduced fluctuation system at the steady state"""
        A_r, B_r = self.fluctuation_matrices(self.x_ss)
        return A_r, B_r, self.C_r

    def describe(self) -> str:
        lines = [
            f"method: {self.method}",
            f"fluctuation mode: {self.fluctuation_mode}",
            f"configuration: {self.label or '-'}",
            f"volume: {self.base.volume!r}",
            f"full dimension: {self.W.shape[0]}",
            f"reduced dimension: {self.dimension}",
            f"algebraic variables: {self.r}",
            f"retained outputs: {', '.join(self.retained)}",
            f"partition order: {', '.join(self.projectors.labels)}",
            f"reduced states: {', '.join(self.mode_labels)}",
        ]
        for index, block in enumerate(self.balanced):
            lines.append(f"sigma22[{index}]: " + " ".join(f"{v:.17g}" for v in block.sigma))
        if self.suggested_r is not None:
            lines.append(f"suggested r: {self.suggested_r}")
        if self.gramians is not None:
            lines.append(f"gamma_P: {self.gramians.gamma_P:.6g}")
            lines.append(f"gamma_Q: {self.gramians.gamma_Q:.6g}")
        lines.append(f"biorthogonality error: {self.projectors.biorthogonality_error():.3e}")
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Reduction pipelines
# ---------------------------------------------------------------------------

def _contiguous_partition(part: PartitionSpec) -> PartitionSpec:
    groups, offset = [], 0
    for group in part.groups:
        groups.append(list(range(offset, offset + len(group))))
        offset += len(group)
    return PartitionSpec(l=part.l, groups=groups, r_per_group=part.r_per_group)


def _block_diagonal(blocks: List[np.ndarray]) -> np.ndarray:
    size = sum(b.shape[0] for b in blocks)
    out = np.zeros((size, size))
    offset = 0
    for b in blocks:
        out[offset:offset + b.shape[0], offset:offset + b.shape[0]] = b
        offset += b.shape[0]
    return out


def _log_reduction(model: ReducedModel, started: float):
    entry = {
        "method": model.method,
        "label": model.label,
        "full_dimension": int(model.W.shape[0]),
        "reduced_dimension": int(model.dimension),
        "r": int(model.r),
        "sigma22": [[float(v) for v in block.sigma] for block in model.balanced],
        "suggested_r": model.suggested_r,
        "seconds": round(time.perf_counter() - started, 4),
    }
    logger.info(f"Reduction run: {json.dumps(entry)}")


def reduce_structured(
    net: Any,
    retained: Sequence[str],
    part: PartitionSpec,
    block_mode: str = "per-group",
    x_ss: Optional[np.ndarray] = None,
    force_identity: bool = False,
    fluctuation_mode: str = "averaged",
    threshold: Optional[float] = None,
    threshold_mode: str = "relative",
    label: str = "",
) -> ReducedModel:
    """
    Structured balanced reduction of the LNA

    Args:
        net: reaction network
        retained: output species kept unreduced
        part: lumped groups over the remaining species (declaration order) with truncation counts
        block_mode: Gramian block structure ('two', 'per-group' or 'full')
        x_ss: steady state (solved from the declared initial state when omitted)
        force_identity: use T22 = I and truncate the last r_g species of each group
        fluctuation_mode: 'averaged' or 'projected'

    Returns:
        ReducedModel with method 'structured'
    """
    started = time.perf_counter()
    retained = list(retained)
    labels = list(net.state_labels)
    rest = [name for name in labels if name not in retained]
    if part.l != len(retained) or part.k != len(rest):
        raise ConfigurationError(
            f"partition (l={part.l}, k={part.k}) does not match {len(retained)} retained and {len(rest)} reducible species"
        )
    x_ss = steady_state(net) if x_ss is None else np.asarray(x_ss, dtype=float)
    ordered = [rest[i] for group in part.groups for i in group]
    contiguous = _contiguous_partition(part)
    system = linearize_at(net, x_ss, retained, ordered)
    l = system.l

    keep, truncate, offset = [], [], 0
    if block_mode == "per-group" or force_identity:
        for group, r_g in zip(contiguous.groups, contiguous.r_per_group):
            keep += group[: len(group) - r_g]
            truncate += group[len(group) - r_g:]
    else:
        keep = list(range(part.k - part.r))
        truncate = list(range(part.k - part.r, part.k))

    gramians, balanced, suggested = None, [], None
    if force_identity or part.k == 0:
        T22 = np.eye(part.k)
        T22_inv = np.eye(part.k)
    else:
        gramians = solve_structured_gramians(system, contiguous, block_mode)
        if block_mode == "per-group":
            pairs = [(gramians.P22[np.ix_(g, g)], gramians.Q22[np.ix_(g, g)]) for g in contiguous.groups]
        else:
            pairs = [(gramians.P22, gramians.Q22)]
        balanced = [balance_block(P22, Q22) for P22, Q22 in pairs]
        for block, (P22, Q22) in zip(balanced, pairs):
            p_err, q_err = block.residuals(P22, Q22)
            if max(p_err, q_err) > 1e-8:
                logger.warning(f"Balancing residuals {p_err:.3e}/{q_err:.3e} exceed 1e-8")
        T22 = _block_diagonal([b.T22 for b in balanced])
        T22_inv = _block_diagonal([b.T22_inv for b in balanced])
        all_sigma = np.concatenate([b.sigma for b in balanced]) if balanced else np.zeros(0)
        _, suggested = truncation_order(all_sigma, threshold, threshold_mode)

    projectors = _assemble_projectors(T22, T22_inv, l, keep, truncate, system.perm, system.labels)
    mode_labels = list(retained) + [f"mode_{i + 1}" for i in range(len(keep))]
    model = ReducedModel(
        base=net, projectors=projectors, method="structured", fluctuation_mode=fluctuation_mode,
        x_ss=x_ss, retained=retained, mode_labels=mode_labels, balanced=balanced, gramians=gramians,
        partition=part, suggested_r=suggested, label=label,
    )
    if model.r:
        model._checked_jacobian(x_ss)
    _log_reduction(model, started)
    return model


def reduce_averaging(
    net: Any,
    fast_species: Sequence[str],
    retained: Optional[Sequence[str]] = None,
    x_ss: Optional[np.ndarray] = None,
    label: str = "",
) -> ReducedModel:
    """
    Time-scale-separation baseline: eliminate fast species by quasi-steady state

    Macroscopic fast states solve S_f f(x) = 0; fluctuations use the Schur complement
    J_ss - J_sf J_ff^-1 J_fs with noise input (S_s - J_sf J_ff^-1 S_f) F.

    Args:
        net: reaction network
        fast_species: species to eliminate
        retained: outputs (declared outputs when omitted); must be slow

    Returns:
        ReducedModel with method 'averaging'
    """
    started = time.perf_counter()
    labels = list(net.state_labels)
    fast = list(fast_species)
    retained = list(retained) if retained is not None else list(net.output_names)
    for name in fast + retained:
        if name not in labels:
            raise UnknownSymbolError(name)
    if not fast:
        raise ConfigurationError("averaging needs at least one fast species")
    overlap = sorted(set(fast) & set(retained))
    if overlap:
        raise ConfigurationError(f"retained outputs cannot be fast species: {overlap}")
    other_slow = [name for name in labels if name not in retained and name not in fast]
    x_ss = steady_state(net) if x_ss is None else np.asarray(x_ss, dtype=float)

    system_order = retained + other_slow + fast
    perm = [labels.index(name) for name in system_order]
    J = (net.stoichiometry @ net.rate_jacobian_at(x_ss))[np.ix_(perm, perm)]
    fast_index = list(range(len(perm) - len(fast), len(perm)))
    J_ff = J[np.ix_(fast_index, fast_index)]
    if not is_hurwitz(J_ff):
        raise StabilityError(
            f"fast block J_ff is not Hurwitz (spectral abscissa {spectral_abscissa(J_ff):.6g}); averaging does not apply",
            np.linalg.eigvals(J_ff),
        )

    k = len(other_slow) + len(fast)
    identity = np.eye(k)
    projectors = _assemble_projectors(
        identity, identity, len(retained), list(range(len(other_slow))), list(range(len(other_slow), k)),
        perm, system_order,
    )
    model = ReducedModel(
        base=net, projectors=projectors, method="averaging", fluctuation_mode="averaged",
        x_ss=x_ss, retained=retained, mode_labels=retained + other_slow, label=label,
    )
    _log_reduction(model, started)
    return model


def averaged_fluctuation_system(J: np.ndarray, SF: np.ndarray, slow: Sequence[int], fast: Sequence[int]) -> Tuple[np.ndarray, np.ndarray]:
    """Schur-complement elimination of fast fluctuations: (J_ss - J_sf J_ff^-1 J_fs, SF_s - J_sf J_ff^-1 SF_f)"""
    J = np.asarray(J, dtype=float)
    SF = np.asarray(SF, dtype=float)
    slow, fast = list(slow), list(fast)
    if not fast:
        return J[np.ix_(slow, slow)].copy(), SF[slow].copy()
    J_ff = J[np.ix_(fast, fast)]
    condition = float(np.linalg.cond(J_ff))
    if not np.isfinite(condition) or condition > MAX_ALGEBRAIC_CONDITION:
        raise SingularAlgebraicJacobianError(f"fast block J_ff is singular (condition {condition:.3e})")
    J_sf = J[np.ix_(slow, fast)]
    A_r = J[np.ix_(slow, slow)] - J_sf @ np.linalg.solve(J_ff, J[np.ix_(fast, slow)])
    B_r = SF[slow] - J_sf @ np.linalg.solve(J_ff, SF[fast])
    return A_r, B_r


# ---------------------------------------------------------------------------
# Simulation of the reduced model
# ---------------------------------------------------------------------------

class ReducedSimulation(NamedTuple):
    outputs: Trajectory
    covariance: CovTrajectory
    modes: Trajectory
    max_algebraic_residual: float


def simulate_reduced(
    rm: ReducedModel,
    t_span: Tuple[float, float],
    x0: Optional[Sequence[float]] = None,
    rtol: Optional[float] = None,
    atol: Optional[float] = None,
    t_eval: Optional[Sequence[float]] = None,
    n_points: int = DEFAULT_POINTS,
    covariance: bool = True,
) -> ReducedSimulation:
    """
    Integrate the reduced model as a semi-explicit index-1 DAE

    The algebraic state z_r is solved by Newton at every right-hand-side evaluation,
    warm-started from the previous solution. z_m(0) = V^T x0.

    Args:
        rm: reduced model
        t_span: (t0, t_end)
        x0: full initial state (network initial state when omitted)
        covariance: also integrate the reduced fluctuation covariance (zero initial covariance)

    Returns:
        ReducedSimulation with output trajectory y = C (W z_m + W_r z_r) and output covariances
    """
    x0 = rm.base.initial_state if x0 is None else np.asarray(x0, dtype=float)
    z_m0 = rm.V.T @ x0
    z_r0 = rm.solve_algebraic(z_m0, rm.V_r.T @ x0)
    warm = {"z_r": z_r0}

    def rhs(t, z_m):
        z_r = rm.solve_algebraic(z_m, warm["z_r"])
        warm["z_r"] = z_r
        return rm.reduced_rhs(z_m, z_r)

    modes = integrate_ode(rhs, z_m0, t_span, rtol, atol, t_eval=t_eval, labels=rm.mode_labels, n_points=n_points)

    guess = z_r0
    algebraic, worst = [], 0.0
    for z_m in modes.states:
        guess = rm.solve_algebraic(z_m, guess)
        algebraic.append(guess)
        if rm.r:
            worst = max(worst, float(np.max(np.abs(rm.algebraic_residual(z_m, guess)))))
    algebraic = np.array(algebraic).reshape(len(modes.times), rm.r)
    offsets = np.array([rm.D_r(z_r) for z_r in algebraic]).reshape(len(modes.times), len(rm.retained))
    outputs = Trajectory(times=modes.times, states=modes.states @ rm.C_r.T + offsets, labels=list(rm.retained))

    if covariance and len(modes.times) > 1:
        joint = Trajectory(times=modes.times, states=np.hstack([modes.states, algebraic]),
                           labels=rm.mode_labels + [f"z_r{i + 1}" for i in range(rm.r)])
        m = modes.states.shape[1]
        slack = trajectory_rate_slack(rtol, atol)

        def forcing(t):
            z = joint.value_at(t)
            B_r = rm.F_r(z[:m], z[m:], slack)
            return B_r @ B_r.T

        def drift(t):
            z = joint.value_at(t)
            return rm.J_r(z[:m], z[m:], slack)

        modes_cov = integrate_lyapunov_along(drift, forcing, modes.times,
                                             labels=rm.mode_labels, rtol=rtol, atol=atol)
        output_cov = modes_cov.project(rm.C_r, list(rm.retained))
    else:
        output_cov = CovTrajectory(
            times=modes.times,
            covariances=np.zeros((len(modes.times), len(rm.retained), len(rm.retained))),
            labels=list(rm.retained),
        )

    logger.info(f"Reduced simulation: {json.dumps({'method': rm.method, 'points': int(len(modes.times)), 'max_algebraic_residual': worst})}")
    return ReducedSimulation(outputs=outputs, covariance=output_cov, modes=modes, max_algebraic_residual=worst)


# ---------------------------------------------------------------------------
# Reduction configuration
# ---------------------------------------------------------------------------

class ReductionConfig(BaseModel):
    """Parsed reduction configuration string"""
    model_config = ConfigDict(frozen=True)

    retain: List[str] = []
    lumps: List[Tuple[List[str], int]] = []
    method: Literal["structured", "averaging"] = "structured"
    fast: List[str] = []
    threshold: float = Field(default_factory=lambda: get_settings().truncation_threshold, gt=0)
    threshold_mode: Literal["relative", "absolute"] = "relative"
    block_mode: Literal["two", "per-group", "full"] = "per-group"
    fluctuation_mode: Literal["averaged", "projected"] = "averaged"
    force_identity: bool = False
    text: str = ""

    def partition(self, net: Any) -> Tuple[List[str], PartitionSpec]:
        """Retained species and the PartitionSpec over the remaining species in declaration order"""
        labels = list(net.state_labels)
        retained = list(self.retain) if self.retain else list(net.output_names)
        lumped = [name for names, _ in self.lumps for name in names]
        for name in retained + lumped:
            if name not in labels:
                raise UnknownSymbolError(name)
        clash = sorted(set(retained) & set(lumped))
        if clash:
            raise ConfigurationError(f"species both retained and lumped: {clash}")
        if len(set(lumped)) != len(lumped):
            raise ConfigurationError("a species appears in two lumped groups")
        rest = [name for name in labels if name not in retained]
        groups, counts = [], []
        for names, r in self.lumps:
            groups.append([rest.index(name) for name in names])
            counts.append(r)
        for name in rest:
            if name not in lumped:
                groups.append([rest.index(name)])
                counts.append(0)
        try:
            return retained, PartitionSpec(l=len(retained), groups=groups, r_per_group=counts)
        except ValidationError as e:
            raise ConfigurationError(f"invalid partition: {e.errors()[0]['msg']}") from e


_LUMP_RE = re.compile(r"\s*\{([^}]*)\}\s*:\s*(\d+)\s*(?:,|$)")


def _names(value: str) -> List[str]:
    names = [name.strip() for name in value.split(",") if name.strip()]
    for name in names:
        if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", name):
            raise ConfigurationError(f"invalid species name '{name}'")
    return names


def parse_reduction_config(text: str) -> ReductionConfig:
    """
    Parse 'retain = m1, m2; lump = {p1, p2}:1; method = structured' style configurations

    Recognized keys: retain, lump, method, fast, threshold, threshold_mode,
    block_mode, fluctuation_mode, force_identity.
    """
    values = {"text": text.strip()}
    for item in text.split(";"):
        if not item.strip():
            continue
        if "=" not in item:
            raise ConfigurationError(f"expected 'key = value' in reduction config, got '{item.strip()}'")
        key, value = (part.strip() for part in item.split("=", 1))
        if key in values:
            raise ConfigurationError(f"reduction config key '{key}' given twice")
        if key in ("retain", "fast"):
            values[key] = _names(value)
        elif key == "lump":
            lumps, pos = [], 0
            while pos < len(value):
                match = _LUMP_RE.match(value, pos)
                if match is None:
                    raise ConfigurationError(f"cannot parse lump specification at '{value[pos:]}'")
                lumps.append((_names(match.group(1)), int(match.group(2))))
                pos = match.end()
            values["lumps"] = lumps
        elif key == "threshold":
            try:
                values[key] = float(value)
            except ValueError:
                raise ConfigurationError(f"threshold must be a number, got '{value}'")
        elif key == "force_identity":
            values[key] = value.lower() in ("1", "true", "yes")
        elif key in ("method", "threshold_mode", "block_mode", "fluctuation_mode"):
            values[key] = value
        else:
            raise ConfigurationError(f"unknown reduction config key '{key}'")
    try:
        config = ReductionConfig(**values)
    except ValidationError as e:
        error = e.errors()[0]
        raise ConfigurationError(f"invalid reduction config ({'.'.join(str(p) for p in error['loc'])}): {error['msg']}") from e
    if config.method == "averaging" and not config.fast:
        raise ConfigurationError("method=averaging requires 'fast = <species list>'")
    return config


def reduce_with_config(net: Any, config: ReductionConfig, x_ss: Optional[np.ndarray] = None) -> ReducedModel:
    """Run the reduction a configuration describes"""
    if config.method == "averaging":
        retained = config.retain or None
        return reduce_averaging(net, config.fast, retained, x_ss=x_ss, label=config.text)
    retained, part = config.partition(net)
    return reduce_structured(
        net, retained, part, block_mode=config.block_mode, x_ss=x_ss, force_identity=config.force_identity,
        fluctuation_mode=config.fluctuation_mode, threshold=config.threshold,
        threshold_mode=config.threshold_mode, label=config.text,
    )
