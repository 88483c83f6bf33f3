# lna.py
# This module assembles and integrates the Linear Noise Approximation of a reaction network:
# macroscopic rate equations, fluctuation drift/noise matrices, the differential Lyapunov
# covariance equation, steady states, linearization and Euler-Maruyama path sampling.

import json
import logging
import time
from functools import cached_property
from typing import Any, Callable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, model_validator
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline

from config import get_settings
from errors import (
    ConfigurationError,
    ConvergenceError,
    IntegrationError,
    ModelInputError,
    NumericalError,
    RateDomainError,
    StabilityError,
    UnknownSymbolError,
)
from netparse import KineticModel

# Configure logging
logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

DEFAULT_POINTS = 201
NEWTON_MAX_ITER = 50
NEWTON_MAX_HALVINGS = 30
STEADY_STATE_TOL = 1e-10


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------

class Trajectory(BaseModel):
    """Sampled solution x(t): one row of states per time point"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    times: np.ndarray
    states: np.ndarray
    labels: List[str]

    @model_validator(mode="after")
    def _check_shape(self):
        if self.states.ndim != 2 or self.states.shape != (len(self.times), len(self.labels)):
            raise ValueError(f"states shape {self.states.shape} does not match {len(self.times)} times x {len(self.labels)} labels")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("trajectory times must be strictly increasing")
        return self

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    @cached_property
    def interpolant(self) -> CubicSpline:
        return CubicSpline(self.times, self.states, axis=0)

    def value_at(self, t: float) -> np.ndarray:
        if len(self.times) == 1:
            return self.states[0]
        return self.interpolant(t)

    def resample(self, times: np.ndarray) -> "Trajectory":
        """Cubic interpolation onto another grid inside the time span"""
        return Trajectory(times=np.asarray(times, dtype=float), states=self.interpolant(times), labels=self.labels)

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.states, columns=self.labels)
        frame.insert(0, "t", self.times)
        return frame


class CovTrajectory(BaseModel):
    """Covariance matrices X(t) on a time grid"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    times: np.ndarray
    covariances: np.ndarray
    labels: List[str]

    @property
    def final(self) -> np.ndarray:
        return self.covariances[-1]

    def project(self, C: np.ndarray, labels: Optional[List[str]] = None) -> "CovTrajectory":
        """Output covariances C X(t) C^T"""
        C = np.asarray(C, dtype=float)
        projected = np.einsum("ij,tjk,lk->til", C, self.covariances, C)
        names = labels if labels is not None else [f"y{i + 1}" for i in range(C.shape[0])]
        return CovTrajectory(times=self.times, covariances=projected, labels=names)

    def resample(self, times: np.ndarray) -> "CovTrajectory":
        spline = CubicSpline(self.times, self.covariances, axis=0)
        values = spline(times)
        values = 0.5 * (values + np.swapaxes(values, 1, 2))
        return CovTrajectory(times=np.asarray(times, dtype=float), covariances=values, labels=self.labels)

    def to_frame(self) -> pd.DataFrame:
        rows, cols = np.triu_indices(len(self.labels))
        data = {"t": self.times}
        for i, j in zip(rows, cols):
            data[f"cov_{self.labels[i]}_{self.labels[j]}"] = self.covariances[:, i, j]
        return pd.DataFrame(data)


class LinearFluctuationSystem(BaseModel):
    """
    Linearized fluctuation dynamics at a steady state, states ordered retained-first:
        d(nu) = A nu dt + B dW,   y = C nu,   C = [I_l 0]
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    l: int
    k: int
    x_ss: np.ndarray
    labels: List[str]
    perm: List[int]
    volume: float

    @model_validator(mode="after")
    def _check_stable(self):
        if not is_hurwitz(self.A):
            eigenvalues = np.linalg.eigvals(self.A)
            raise StabilityError(
                f"drift matrix is not Hurwitz (spectral abscissa {spectral_abscissa(self.A):.6g})", eigenvalues
            )
        return self

    @property
    def n(self) -> int:
        return self.l + self.k

    @property
    def diffusion(self) -> np.ndarray:
        return self.B @ self.B.T

    @property
    def output_labels(self) -> List[str]:
        return self.labels[: self.l]

    def drift_at(self, t: float) -> np.ndarray:
        return self.A

    def noise_at(self, t: float) -> np.ndarray:
        return self.B


class TimeVaryingFluctuation(BaseModel):
    """Fluctuation drift J(x(t)) and noise input Omega^-1/2 S F(x(t)) along a macroscopic trajectory"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    network: Any
    trajectory: Trajectory

    @property
    def labels(self) -> List[str]:
        return self.trajectory.labels

    def drift_at(self, t: float) -> np.ndarray:
        return jacobian_J(self.network, self.trajectory.value_at(t))

    def noise_at(self, t: float) -> np.ndarray:
        x = self.trajectory.value_at(t)
        F = noise_F(self.network, x, slack=trajectory_rate_slack())
        return self.network.stoichiometry @ F / np.sqrt(self.network.volume)


class PathEnsemble(BaseModel):
    """Fluctuation sample paths recorded on a common grid, shape (paths, times, states)"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    times: np.ndarray
    paths: np.ndarray
    labels: List[str]
    seed: int
    dt: float

    def mean(self) -> np.ndarray:
        return self.paths.mean(axis=0)

    def variance(self) -> np.ndarray:
        if self.paths.shape[0] < 2:
            return np.zeros(self.paths.shape[1:])
        return self.paths.var(axis=0, ddof=1)

    def summary_frame(self) -> pd.DataFrame:
        data = {"t": self.times}
        mean, variance = self.mean(), self.variance()
        for i, label in enumerate(self.labels):
            data[f"mean_{label}"] = mean[:, i]
        for i, label in enumerate(self.labels):
            data[f"var_{label}"] = variance[:, i]
        return pd.DataFrame(data)


# ---------------------------------------------------------------------------
# Spectral helpers
# ---------------------------------------------------------------------------

def spectral_abscissa(A: np.ndarray) -> float:
    """Largest real part of the eigenvalues of A"""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.size == 0:
        return -np.inf
    return float(np.max(np.linalg.eigvals(A).real))


def is_hurwitz(A: np.ndarray) -> bool:
    return spectral_abscissa(A) < 0


def relaxation_horizon(A: np.ndarray, factor: float = 20.0) -> float:
    """Time after which the slowest mode of a Hurwitz A has decayed by e^-factor"""
    alpha = spectral_abscissa(A)
    if not alpha < 0:
        raise StabilityError(f"no relaxation horizon for a non-Hurwitz matrix (abscissa {alpha:.6g})")
    return factor / abs(alpha)


# ---------------------------------------------------------------------------
# LNA building blocks
# ---------------------------------------------------------------------------

def macroscopic_rhs(net: KineticModel, x: Sequence[float]) -> np.ndarray:
    """Macroscopic vector field S f(x)"""
    return net.stoichiometry @ net.eval_rates(x)


def jacobian_J(net: KineticModel, x: Sequence[float]) -> np.ndarray:
    """Fluctuation drift J(x) = S df/dx(x)"""
    return net.stoichiometry @ net.rate_jacobian_at(x)


def trajectory_rate_slack(rtol: Optional[float] = None, atol: Optional[float] = None) -> float:
    """Relative undershoot below zero tolerated for rates evaluated on integrated states"""
    settings = get_settings()
    rtol = settings.rtol if rtol is None else rtol
    atol = settings.atol if atol is None else atol
    return 1e3 * (rtol + atol)


def _nonnegative_rates(net: KineticModel, x: Sequence[float], slack: float = 0.0) -> np.ndarray:
    rates = net.eval_rates(x)
    floor = -(1e-12 + slack) * max(1.0, float(np.max(np.abs(rates), initial=0.0)))
    negative = np.flatnonzero(rates < floor)
    if negative.size:
        index = int(negative[0])
        raise RateDomainError(net.reaction_names[index], float(rates[index]))
    return np.clip(rates, 0.0, None)


def noise_F(net: KineticModel, x: Sequence[float], slack: float = 0.0) -> np.ndarray:
    """
    Noise intensity F(x) = diag(sqrt(f(x)))

    slack > 0 clips rates that dip below zero by at most slack * max(1, max|f|),
    which integrator stages and interpolants produce near zero concentrations.
    """
    return np.diag(np.sqrt(_nonnegative_rates(net, x, slack)))


def diffusion_matrix(net: KineticModel, x: Sequence[float], slack: float = 0.0) -> np.ndarray:
    """Omega^-1 S diag(f(x)) S^T, the forcing term of the covariance equation"""
    S = net.stoichiometry
    return (S * _nonnegative_rates(net, x, slack)) @ S.T / net.volume


def steady_state_residual(net: KineticModel, x: Sequence[float]) -> float:
    return float(np.max(np.abs(macroscopic_rhs(net, x)), initial=0.0))


# ---------------------------------------------------------------------------
# Integration
# ---------------------------------------------------------------------------

def _time_grid(t_span: Tuple[float, float], t_eval: Optional[Sequence[float]], n_points: int) -> np.ndarray:
    t0, t1 = float(t_span[0]), float(t_span[1])
    if not t1 > t0:
        raise ConfigurationError(f"integration interval must have t_end > t0, got [{t0}, {t1}]")
    if t_eval is None:
        return np.linspace(t0, t1, n_points)
    grid = np.asarray(t_eval, dtype=float)
    if grid[0] < t0 or grid[-1] > t1 or np.any(np.diff(grid) <= 0):
        raise ConfigurationError("output times must be increasing and inside the integration interval")
    return grid


def _solve(rhs: Callable, y0: np.ndarray, t_span: Tuple[float, float], grid: np.ndarray, rtol: float, atol: float, what: str):
    def guarded(t, y):
        dy = np.asarray(rhs(t, y), dtype=float)
        if not np.all(np.isfinite(dy)):
            raise IntegrationError(f"{what}: non-finite right-hand side at t={t:.6g}")
        return dy

    started = time.perf_counter()
    solution = solve_ivp(guarded, (float(t_span[0]), float(t_span[1])), y0, method="RK45",
                         t_eval=grid, rtol=rtol, atol=atol)
    if solution.status != 0:
        raise IntegrationError(f"{what} failed at t={solution.t[-1] if solution.t.size else t_span[0]:.6g}: "
                               f"{solution.message} (step-size underflow usually means the system is stiff)")
    if not np.all(np.isfinite(solution.y)):
        raise IntegrationError(f"{what}: solution contains non-finite values")
    entry = {
        "integration": what,
        "t_span": [float(t_span[0]), float(t_span[1])],
        "points": int(grid.size),
        "nfev": int(solution.nfev),
        "rtol": rtol,
        "atol": atol,
        "seconds": round(time.perf_counter() - started, 4),
    }
    logger.debug(f"ODE integration: {json.dumps(entry)}")
    return solution


def integrate_ode(
    rhs: Callable[[float, np.ndarray], np.ndarray],
    x0: Sequence[float],
    t_span: Tuple[float, float],
    rtol: Optional[float] = None,
    atol: Optional[float] = None,
    t_eval: Optional[Sequence[float]] = None,
    labels: Optional[List[str]] = None,
    n_points: int = DEFAULT_POINTS,
) -> Trajectory:
    """
    Integrate dx/dt = rhs(t, x) with the embedded Runge-Kutta 4(5) pair

    Args:
        rhs: right-hand side called as rhs(t, x)
        x0: initial state
        t_span: (t0, t_end)
        rtol, atol: local error tolerances (settings defaults when omitted)
        t_eval: output times; dense output supplies values between steps
        labels: state names for the trajectory
        n_points: size of the uniform output grid when t_eval is omitted

    Returns:
        Trajectory sampled at the output times
    """
    settings = get_settings()
    rtol = settings.rtol if rtol is None else rtol
    atol = settings.atol if atol is None else atol
    if rtol <= 0 or atol <= 0:
        raise ConfigurationError(f"tolerances must be positive (rtol={rtol}, atol={atol})")
    x0 = np.asarray(x0, dtype=float)
    grid = _time_grid(t_span, t_eval, n_points)
    solution = _solve(rhs, x0, t_span, grid, rtol, atol, "macroscopic ODE")
    names = labels if labels is not None else [f"x{i + 1}" for i in range(x0.size)]
    return Trajectory(times=solution.t, states=solution.y.T, labels=names)


def simulate_macroscopic(
    net: KineticModel,
    t_span: Tuple[float, float],
    x0: Optional[Sequence[float]] = None,
    rtol: Optional[float] = None,
    atol: Optional[float] = None,
    t_eval: Optional[Sequence[float]] = None,
    n_points: int = DEFAULT_POINTS,
) -> Trajectory:
    """Macroscopic trajectory x(t) of a network, from x0 or the declared initial state"""
    start = net.initial_state if x0 is None else np.asarray(x0, dtype=float)
    return integrate_ode(lambda t, x: macroscopic_rhs(net, x), start, t_span, rtol, atol,
                         t_eval=t_eval, labels=list(net.state_labels), n_points=n_points)


def _unpack_upper(values: np.ndarray, n: int, upper: Tuple[np.ndarray, np.ndarray]) -> np.ndarray:
    X = np.zeros((n, n))
    X[upper] = values
    return X + X.T - np.diag(np.diag(X))


def _check_initial_covariance(X0: Optional[np.ndarray], n: int) -> np.ndarray:
    if X0 is None:
        return np.zeros((n, n))
    X0 = np.asarray(X0, dtype=float)
    if X0.shape != (n, n):
        raise ModelInputError(f"initial covariance has shape {X0.shape}, expected ({n}, {n})")
    if np.max(np.abs(X0 - X0.T), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(X0), initial=0.0)):
        raise ModelInputError("initial covariance is not symmetric")
    X0 = 0.5 * (X0 + X0.T)
    if n and np.min(np.linalg.eigvalsh(X0)) < -1e-9 * max(1.0, np.linalg.norm(X0, 2)):
        raise ModelInputError("initial covariance is not positive semidefinite")
    return X0


def integrate_lyapunov_along(
    drift: Callable[[float], np.ndarray],
    forcing: Callable[[float], np.ndarray],
    times: np.ndarray,
    X0: Optional[np.ndarray] = None,
    labels: Optional[List[str]] = None,
    rtol: Optional[float] = None,
    atol: Optional[float] = None,
) -> CovTrajectory:
    """
    Integrate dX/dt = A(t) X + X A(t)^T + D(t) on the given grid.
    Only the upper triangle of X is integrated, so every X(t) is exactly symmetric.
    """
    settings = get_settings()
    rtol = settings.rtol if rtol is None else rtol
    atol = settings.atol if atol is None else atol
    times = np.asarray(times, dtype=float)
    n = drift(times[0]).shape[0]
    X0 = _check_initial_covariance(X0, n)
    upper = np.triu_indices(n)

    def rhs(t, values):
        X = _unpack_upper(values, n, upper)
        A = drift(t)
        AX = A @ X
        return (AX + AX.T + forcing(t))[upper]

    solution = _solve(rhs, X0[upper], (times[0], times[-1]), times, rtol, atol, "Lyapunov ODE")
    covariances = np.stack([_unpack_upper(column, n, upper) for column in solution.y.T])
    names = labels if labels is not None else [f"x{i + 1}" for i in range(n)]
    return CovTrajectory(times=solution.t, covariances=covariances, labels=names)


def integrate_lyapunov_cov(
    net: KineticModel,
    x_traj: Trajectory,
    X0: Optional[np.ndarray] = None,
    rtol: Optional[float] = None,
    atol: Optional[float] = None,
    co_integrate: bool = False,
) -> CovTrajectory:
    """
    Covariance of the LNA fluctuations along a macroscopic trajectory

    Args:
        net: reaction network (or transformed network)
        x_traj: macroscopic trajectory; J and the forcing term are evaluated on its cubic interpolant
        X0: initial covariance (zero when omitted)
        co_integrate: integrate x and X jointly instead of interpolating x_traj

    Returns:
        CovTrajectory on the trajectory's time grid
    """
    labels = list(net.state_labels)
    settings = get_settings()
    rtol = settings.rtol if rtol is None else rtol
    atol = settings.atol if atol is None else atol
    slack = trajectory_rate_slack(rtol, atol)
    if not co_integrate:
        if len(x_traj.times) < 2:
            raise ConfigurationError("covariance integration needs a trajectory with at least two time points")
        return integrate_lyapunov_along(
            lambda t: jacobian_J(net, x_traj.value_at(t)),
            lambda t: diffusion_matrix(net, x_traj.value_at(t), slack),
            x_traj.times, X0, labels, rtol, atol,
        )

    n = len(labels)
    X0 = _check_initial_covariance(X0, n)
    upper = np.triu_indices(n)

    def rhs(t, values):
        x = values[:n]
        X = _unpack_upper(values[n:], n, upper)
        AX = jacobian_J(net, x) @ X
        return np.concatenate([macroscopic_rhs(net, x), (AX + AX.T + diffusion_matrix(net, x, slack))[upper]])

    y0 = np.concatenate([x_traj.states[0], X0[upper]])
    solution = _solve(rhs, y0, (x_traj.times[0], x_traj.times[-1]), x_traj.times, rtol, atol, "joint LNA ODE")
    covariances = np.stack([_unpack_upper(column[n:], n, upper) for column in solution.y.T])
    return CovTrajectory(times=solution.t, covariances=covariances, labels=labels)


def marginal(x_traj: Trajectory, cov_traj: CovTrajectory, index: int, time_index: int) -> Tuple[float, float]:
    """Gaussian marginal of species `index` at a stored time: (x_i(t), X_ii(t))"""
    return float(x_traj.states[time_index, index]), float(cov_traj.covariances[time_index, index, index])


# ---------------------------------------------------------------------------
# Steady states
# ---------------------------------------------------------------------------

def _converged(net: KineticModel, x: np.ndarray, tol: float) -> bool:
    rates = net.eval_rates(x)
    residual = np.max(np.abs(net.stoichiometry @ rates), initial=0.0)
    return residual <= tol * (1.0 + np.max(np.abs(rates), initial=0.0))


def _safe_residual(net: KineticModel, x: np.ndarray) -> float:
    try:
        return steady_state_residual(net, x)
    except NumericalError:
        return np.inf


def _newton(net: KineticModel, x: np.ndarray, tol: float, max_iter: int, max_halvings: int) -> Optional[np.ndarray]:
    """Damped Newton on S f(x) = 0; None when the iteration stalls"""
    for _ in range(max_iter):
        if _converged(net, x, tol):
            return x
        residual_vector = macroscopic_rhs(net, x)
        residual = np.max(np.abs(residual_vector))
        Jx = jacobian_J(net, x)
        try:
            step = np.linalg.solve(Jx, -residual_vector)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(Jx, -residual_vector, rcond=None)[0]
        if not np.all(np.isfinite(step)):
            step = np.linalg.lstsq(Jx, -residual_vector, rcond=None)[0]
        damping = 1.0
        for _ in range(max_halvings):
            candidate = x + damping * step
            if _safe_residual(net, candidate) < residual:
                break
            damping *= 0.5
        else:
            return None
        x = candidate
    return x if _converged(net, x, tol) else None


def _admissible(x: Optional[np.ndarray]) -> Optional[np.ndarray]:
    """Clip round-off negatives; reject genuinely negative concentrations"""
    if x is None:
        return None
    floor = -1e-12 * max(1.0, float(np.max(np.abs(x))))
    if np.any(x < floor):
        return None
    return np.clip(x, 0.0, None)


def steady_state(
    net: KineticModel,
    x_guess: Optional[Sequence[float]] = None,
    tol: float = STEADY_STATE_TOL,
    max_iter: int = NEWTON_MAX_ITER,
    max_halvings: int = NEWTON_MAX_HALVINGS,
    max_doublings: int = 20,
) -> np.ndarray:
    """
    Solve S f(x) = 0 near a guess

    Damped Newton first; if it stalls or lands on negative concentrations,
    integrate forward with a doubling horizon and polish the end point with Newton.
    Warns when J(x_ss) is not Hurwitz.

    Args:
        net: reaction network
        x_guess: starting point (declared initial state when omitted)
        tol: residual tolerance relative to 1 + max|f(x)|

    Returns:
        np.ndarray: steady-state concentrations
    """
    x0 = net.initial_state if x_guess is None else np.asarray(x_guess, dtype=float)
    if not np.all(np.isfinite(x0)) or np.any(x0 < 0):
        raise ModelInputError(f"steady-state guess must be finite and nonnegative, got {x0}")

    method = "newton"
    x_ss = _admissible(_newton(net, x0.copy(), tol, max_iter, max_halvings))
    if x_ss is None:
        logger.warning("Newton iteration did not reach an admissible steady state; falling back to integration")
        method = "integration"
        x = x0.copy()
        horizon = 10.0
        for _ in range(max_doublings):
            trajectory = simulate_macroscopic(net, (0.0, horizon), x0=x, n_points=2)
            x = trajectory.final
            x_ss = _admissible(_newton(net, x.copy(), tol, max_iter, max_halvings))
            if x_ss is not None:
                break
            horizon *= 2.0
        if x_ss is None:
            raise ConvergenceError(
                f"no steady state within {max_doublings} horizon doublings "
                f"(last residual {_safe_residual(net, x):.3e})"
            )

    residual = steady_state_residual(net, x_ss)
    abscissa = spectral_abscissa(jacobian_J(net, x_ss))
    entry = {
        "method": method,
        "residual": residual,
        "spectral_abscissa": abscissa,
        "x_ss": [float(v) for v in x_ss],
    }
    logger.info(f"Steady state: {json.dumps(entry)}")
    if not abscissa < 0:
        logger.warning(f"J(x_ss) is not Hurwitz (spectral abscissa {abscissa:.6g}); steady state is not asymptotically stable")
    return x_ss


# ---------------------------------------------------------------------------
# Linearization and path sampling
# ---------------------------------------------------------------------------

def linearize_at(
    net: KineticModel,
    x_ss: Sequence[float],
    retained: Sequence[str],
    reducible: Optional[Sequence[str]] = None,
) -> LinearFluctuationSystem:
    """
    Linear fluctuation system at x_ss with retained species first

    Args:
        net: reaction network
        x_ss: steady state
        retained: output species, in output order
        reducible: order of the remaining species (declaration order when omitted)

    Returns:
        LinearFluctuationSystem with A = J(x_ss), B = Omega^-1/2 S F(x_ss), C = [I_l 0]
    """
    labels = list(net.state_labels)
    retained = list(retained)
    if not retained:
        raise ConfigurationError("at least one species must be retained")
    for name in retained + list(reducible or []):
        if name not in labels:
            raise UnknownSymbolError(name)
    if len(set(retained)) != len(retained):
        raise ConfigurationError(f"retained species listed twice: {retained}")
    rest = [name for name in labels if name not in retained]
    if reducible is not None:
        if sorted(reducible) != sorted(rest):
            raise ConfigurationError(f"reducible species {list(reducible)} must be exactly {rest}")
        rest = list(reducible)
    perm = [labels.index(name) for name in retained + rest]
    x_ss = np.asarray(x_ss, dtype=float)

    A = jacobian_J(net, x_ss)[np.ix_(perm, perm)]
    B = (net.stoichiometry @ noise_F(net, x_ss))[perm] / np.sqrt(net.volume)
    l, k = len(retained), len(rest)
    C = np.hstack([np.eye(l), np.zeros((l, k))])
    return LinearFluctuationSystem(
        A=A, B=B, C=C, l=l, k=k, x_ss=x_ss, labels=[labels[i] for i in perm], perm=perm, volume=net.volume
    )


def simulate_fluctuation_paths(
    system: Any,
    n_paths: int,
    dt: float,
    t_end: float,
    seed: Optional[int] = None,
    n_records: int = 101,
) -> PathEnsemble:
    """
    Euler-Maruyama sample paths of d(eta) = A(t) eta dt + B(t) dW with eta(0) = 0

    Path i draws its increments from its own stream seeded by (seed, i), so results
    do not depend on how paths are batched.

    Args:
        system: LinearFluctuationSystem or TimeVaryingFluctuation
        n_paths: number of sample paths
        dt: step size
        t_end: final time
        seed: base seed (settings default when omitted)
        n_records: number of recorded time points including t = 0

    Returns:
        PathEnsemble
    """
    if dt <= 0 or t_end <= 0:
        raise ConfigurationError(f"dt and t_end must be positive (dt={dt}, t_end={t_end})")
    if n_paths < 1:
        raise ConfigurationError(f"n_paths must be at least 1, got {n_paths}")
    seed = get_settings().seed if seed is None else int(seed)
    n_steps = max(1, int(round(t_end / dt)))
    n_records = max(2, min(n_records, n_steps + 1))
    record_steps = np.unique(np.linspace(0, n_steps, n_records).round().astype(int))
    step_times = np.arange(n_steps) * dt

    drifts, noises = None, None
    if not isinstance(system, LinearFluctuationSystem):
        drifts = [np.asarray(system.drift_at(t), dtype=float) for t in step_times]
        noises = [np.asarray(system.noise_at(t), dtype=float) for t in step_times]
    A0 = np.asarray(system.drift_at(0.0), dtype=float)
    B0 = np.asarray(system.noise_at(0.0), dtype=float)
    n, channels = B0.shape
    labels = list(system.labels)

    paths = np.zeros((n_paths, record_steps.size, n))
    batch_size = max(1, min(n_paths, int(2_000_000 // max(1, n_steps * channels))))
    sqrt_dt = np.sqrt(dt)
    for start in range(0, n_paths, batch_size):
        stop = min(n_paths, start + batch_size)
        increments = np.stack([
            np.random.default_rng(np.random.SeedSequence([seed, i])).standard_normal((n_steps, channels))
            for i in range(start, stop)
        ])
        eta = np.zeros((stop - start, n))
        record = 1
        for step in range(n_steps):
            A = A0 if drifts is None else drifts[step]
            B = B0 if noises is None else noises[step]
            eta = eta + dt * (eta @ A.T) + sqrt_dt * (increments[:, step, :] @ B.T)
            if record < record_steps.size and step + 1 == record_steps[record]:
                paths[start:stop, record, :] = eta
                record += 1

    entry = {"paths": n_paths, "dt": dt, "t_end": t_end, "seed": seed, "records": int(record_steps.size)}
    logger.info(f"Fluctuation paths: {json.dumps(entry)}")
    return PathEnsemble(times=record_steps * dt, paths=paths, labels=labels, seed=seed, dt=dt)
