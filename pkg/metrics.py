# metrics.py
# This module quantifies how well a reduced model reproduces the full LNA:
# L1/L2/Linf norms of the macroscopic output error and output-covariance discrepancies.

import json
import logging
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field
from scipy.integrate import trapezoid
from scipy.interpolate import CubicSpline

from config import get_settings
from errors import ModelInputError, UnknownSymbolError
from gramians import solve_lyapunov_eq
from lna import (
    DEFAULT_POINTS,
    CovTrajectory,
    Trajectory,
    diffusion_matrix,
    integrate_lyapunov_cov,
    jacobian_J,
    relaxation_horizon,
    simulate_macroscopic,
)
from reduction import ReducedModel, simulate_reduced

# Configure logging
logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

NORM_RTOL = 1e-5
MAX_REFINEMENTS = 12


class ErrorReport(BaseModel):
    """Output-error norms and covariance discrepancies of one reduced model"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    method: str
    label: str = ""
    r: int
    reduced_dimension: int
    l1: float = Field(ge=0)
    l2: float = Field(ge=0)
    linf: float = Field(ge=0)
    rel_linf: float = Field(ge=0)
    output_range: float
    cov_err_ss: float = Field(ge=0)
    cov_err_lyap: float = Field(ge=0)
    cov_err_traj: np.ndarray
    times: np.ndarray
    t_span: Tuple[float, float]
    rtol: float
    atol: float
    volume: float
    perturbation: Dict[str, float] = {}

    def to_frame(self) -> pd.DataFrame:
        """metric,value rows"""
        rows = [
            ("method", self.method),
            ("config", self.label),
            ("volume", repr(self.volume)),
            ("r", self.r),
            ("reduced_dimension", self.reduced_dimension),
            ("t_start", repr(self.t_span[0])),
            ("t_end", repr(self.t_span[1])),
            ("rtol", repr(self.rtol)),
            ("atol", repr(self.atol)),
            ("perturbation", ";".join(f"{k}={v!r}" for k, v in self.perturbation.items())),
            ("l1", repr(self.l1)),
            ("l2", repr(self.l2)),
            ("linf", repr(self.linf)),
            ("rel_linf", repr(self.rel_linf)),
            ("output_range", repr(self.output_range)),
            ("cov_err_ss", repr(self.cov_err_ss)),
            ("cov_err_lyap", repr(self.cov_err_lyap)),
        ]
        return pd.DataFrame(rows, columns=["metric", "value"])

    def trajectory_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"t": self.times, "cov_err": self.cov_err_traj})


def _norms_on(times: np.ndarray, values: np.ndarray) -> np.ndarray:
    abs_values = np.abs(values)
    l1 = trapezoid(abs_values.sum(axis=1), times)
    l2 = np.sqrt(trapezoid((values ** 2).sum(axis=1), times))
    linf = float(np.max(abs_values, initial=0.0))
    return np.array([l1, l2, linf])


def signal_norms(err: Trajectory, rtol: float = NORM_RTOL, max_refinements: int = MAX_REFINEMENTS) -> Tuple[float, float, float]:
    """
    L1, L2 and Linf norms of an error signal

    The sampled signal is interpolated by a cubic spline and the grid is refined by
    midpoint insertion until doubling the sample count changes every norm by less than rtol.

    Args:
        err: error trajectory u(t)
        rtol: relative change accepted between successive refinements

    Returns:
        (L1, L2, Linf)
    """
    times = np.asarray(err.times, dtype=float)
    values = np.asarray(err.states, dtype=float)
    if values.ndim != 2 or values.shape[0] != times.size:
        raise ModelInputError(f"error signal has shape {values.shape} for {times.size} time points")
    if times.size < 2:
        linf = float(np.max(np.abs(values), initial=0.0))
        return 0.0, 0.0, linf

    spline = CubicSpline(times, values, axis=0)
    grid = times
    norms = _norms_on(grid, values)
    for _ in range(max_refinements):
        midpoints = 0.5 * (grid[:-1] + grid[1:])
        grid = np.sort(np.concatenate([grid, midpoints]))
        refined = _norms_on(grid, spline(grid))
        settled = np.all(np.abs(refined - norms) <= rtol * np.abs(refined))
        norms = refined
        if settled:
            break
    else:
        logger.warning(f"Norm quadrature did not settle to {rtol:g} after {max_refinements} refinements")
    return float(norms[0]), float(norms[1]), float(norms[2])


def covariance_error(
    full: CovTrajectory,
    reduced: CovTrajectory,
    C_full: Optional[np.ndarray] = None,
    C_red: Optional[np.ndarray] = None,
) -> Tuple[float, np.ndarray]:
    """
    Frobenius distance between output covariances over time

    Args:
        full, reduced: covariance trajectories (state or output space)
        C_full, C_red: optional output matrices projecting each onto the outputs

    Returns:
        (error at the final time, error per time point on the full model's grid)
    """
    if C_full is not None:
        full = full.project(C_full, full.labels[: np.asarray(C_full).shape[0]])
    if C_red is not None:
        reduced = reduced.project(C_red, reduced.labels[: np.asarray(C_red).shape[0]])
    if full.covariances.shape[1:] != reduced.covariances.shape[1:]:
        raise ModelInputError(
            f"output covariance dimensions differ: {full.covariances.shape[1:]} vs {reduced.covariances.shape[1:]}"
        )
    if full.times.shape != reduced.times.shape or not np.allclose(full.times, reduced.times, rtol=0, atol=1e-12):
        reduced = reduced.resample(full.times)
    errors = np.linalg.norm(full.covariances - reduced.covariances, axis=(1, 2))
    return float(errors[-1]), errors


def _perturbation_vector(labels: List[str], x_ss: np.ndarray, perturbation: Union[None, Dict[str, float], Sequence[float]]) -> np.ndarray:
    if perturbation is None:
        return np.zeros(len(labels))
    if isinstance(perturbation, dict):
        delta = np.zeros(len(labels))
        for name, value in perturbation.items():
            if name not in labels:
                raise UnknownSymbolError(name)
            delta[labels.index(name)] = value
        return delta
    delta = np.asarray(perturbation, dtype=float)
    if delta.shape != x_ss.shape:
        raise ModelInputError(f"perturbation has shape {delta.shape}, expected {x_ss.shape}")
    return delta


def steady_output_covariances(rm: ReducedModel) -> Tuple[np.ndarray, np.ndarray]:
    """Stationary output covariances of the full and the reduced linearizations at x_ss"""
    net = rm.base
    X_full = solve_lyapunov_eq(jacobian_J(net, rm.x_ss), diffusion_matrix(net, rm.x_ss))
    A_r, B_r, C_r = rm.linearized_fluctuations()
    X_red = solve_lyapunov_eq(A_r, B_r @ B_r.T)
    return rm.C @ X_full @ rm.C.T, C_r @ X_red @ C_r.T


def compare_models(
    net,
    rm: ReducedModel,
    perturbation: Union[None, Dict[str, float], Sequence[float]] = None,
    t_span: Optional[Tuple[float, float]] = None,
    rtol: Optional[float] = None,
    atol: Optional[float] = None,
    n_points: int = DEFAULT_POINTS,
) -> ErrorReport:
    """
    Simulate full and reduced models from x0 = x_ss + perturbation and compare outputs

    Fluctuations start from zero covariance in both models. The default horizon is
    20 / |Re lambda_max(J(x_ss))|.

    Args:
        net: full reaction network
        rm: reduced model built on the same network and steady state
        perturbation: species -> absolute offset, or a full offset vector
        t_span: comparison interval

    Returns:
        ErrorReport
    """
    settings = get_settings()
    rtol = settings.rtol if rtol is None else rtol
    atol = settings.atol if atol is None else atol
    labels = list(net.state_labels)
    x_ss = rm.x_ss
    delta = _perturbation_vector(labels, x_ss, perturbation)
    x0 = x_ss + delta
    if t_span is None:
        t_span = (0.0, relaxation_horizon(jacobian_J(net, x_ss)))

    full_traj = simulate_macroscopic(net, t_span, x0=x0, rtol=rtol, atol=atol, n_points=n_points)
    full_outputs = full_traj.states @ rm.C.T
    full_cov = integrate_lyapunov_cov(net, full_traj, rtol=rtol, atol=atol).project(rm.C, list(rm.retained))

    reduced = simulate_reduced(rm, t_span, x0=x0, rtol=rtol, atol=atol, t_eval=full_traj.times)
    error = Trajectory(times=full_traj.times, states=full_outputs - reduced.outputs.states, labels=list(rm.retained))
    l1, l2, linf = signal_norms(error)
    cov_err_ss, cov_err_traj = covariance_error(full_cov, reduced.covariance)

    full_ss, reduced_ss = steady_output_covariances(rm)
    output_range = float(np.max(np.ptp(full_outputs, axis=0), initial=0.0))
    if output_range > 0:
        rel_linf = linf / output_range
    else:
        rel_linf = 0.0 if linf == 0 else float("inf")

    report = ErrorReport(
        method=rm.method,
        label=rm.label,
        r=rm.r,
        reduced_dimension=rm.dimension,
        l1=l1, l2=l2, linf=linf, rel_linf=rel_linf,
        output_range=output_range,
        cov_err_ss=cov_err_ss,
        cov_err_lyap=float(np.linalg.norm(full_ss - reduced_ss)),
        cov_err_traj=cov_err_traj,
        times=full_traj.times,
        t_span=(float(t_span[0]), float(t_span[1])),
        rtol=rtol, atol=atol,
        volume=float(net.volume),
        perturbation={name: float(v) for name, v in zip(labels, delta) if v != 0},
    )
    entry = {key: getattr(report, key) for key in ("method", "label", "r", "l1", "l2", "linf", "rel_linf", "cov_err_ss", "cov_err_lyap")}
    logger.info(f"Model comparison: {json.dumps(entry)}")
    return report


def summary_frame(reports: Sequence[ErrorReport]) -> pd.DataFrame:
    """One row per report, in the order given"""
    columns = ["label", "method", "r", "reduced_dimension", "l1", "l2", "linf", "rel_linf", "cov_err_ss", "cov_err_lyap", "volume"]
    return pd.DataFrame([{column: getattr(report, column) for column in columns} for report in reports], columns=columns)
