# app.py
# Command-line front end for structured LNA model reduction.
# Commands: steady-state, simulate, reduce, compare, check-monotone.

import argparse
import asyncio
import logging
import os
import re
import sys
from typing import Dict, List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from config import configure_logging, get_settings
from errors import ConfigurationError, LNAReductionError, UnknownSymbolError
from gramians import BLOCK_MODES, find_monotone_signature, is_metzler
from lna import (
    TimeVaryingFluctuation,
    integrate_lyapunov_cov,
    is_hurwitz,
    jacobian_J,
    relaxation_horizon,
    simulate_fluctuation_paths,
    simulate_macroscopic,
    spectral_abscissa,
    steady_state,
    steady_state_residual,
)
from model_library import model_library
from netparse import ReactionNetwork, format_network
from orchestrator import ReductionOrchestrator
from reduction import parse_reduction_config, reduce_with_config, simulate_reduced
from report_generator import report_generator

logger = logging.getLogger(__name__)

COMMANDS = ("steady-state", "simulate", "reduce", "compare", "check-monotone")
DEFAULT_SIMULATION_END = 50.0
DEFAULT_RELATIVE_PERTURBATION = 0.10

_PERTURB_RE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*=\s*([+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)\s*(%?)\s*$")


class RunConfig(BaseModel):
    """Validated command-line options of one invocation"""
    model_config = ConfigDict(frozen=True)

    command: Literal["steady-state", "simulate", "reduce", "compare", "check-monotone"]
    model: str
    configs: List[str] = []
    t_end: Optional[float] = Field(default=None, gt=0)
    points: int = Field(default=201, ge=2)
    rtol: float = Field(gt=0)
    atol: float = Field(gt=0)
    omega: Optional[float] = Field(default=None, gt=0)
    perturb: Optional[str] = None
    out: str
    seed: int
    paths: int = Field(default=0, ge=0)
    dt: float = Field(default=0.01, gt=0)
    block_mode: Optional[Literal["two", "per-group", "full"]] = None
    dump_gramians: bool = False

    @model_validator(mode="after")
    def _check_model(self):
        if not model_library.exists(self.model):
            raise ValueError(f"model '{self.model}' not found")
        if self.command in ("reduce", "compare") and not self.configs:
            raise ValueError(f"'{self.command}' needs --config or --sweep")
        if self.command == "reduce" and len(self.configs) != 1:
            raise ValueError("'reduce' takes exactly one --config")
        return self


def build_parser() -> argparse.ArgumentParser:
    settings = get_settings()
    parser = argparse.ArgumentParser(
        prog="lnamor",
        description="Structured model order reduction of the Linear Noise Approximation of reaction networks",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("model", help="model file in the reaction DSL, or builtin:<name> for a bundled model")
    common.add_argument("--omega", type=float, help=f"system volume Omega (model value, else {settings.default_volume:g})")
    common.add_argument("--rtol", type=float, default=settings.rtol, help="relative integration tolerance")
    common.add_argument("--atol", type=float, default=settings.atol, help="absolute integration tolerance")
    common.add_argument("--out", default=settings.output_dir, help="output directory")
    common.add_argument("--seed", type=int, default=settings.seed, help="random seed for path sampling")
    common.add_argument("--log-level", default=settings.log_level, help="DEBUG, INFO, WARNING or ERROR")

    commands = parser.add_subparsers(dest="command", required=True)
    commands.add_parser("steady-state", parents=[common], help="solve S f(x) = 0 and write steady_state.csv")

    simulate = commands.add_parser("simulate", parents=[common], help="macroscopic and covariance trajectories")
    simulate.add_argument("--t-end", type=float, default=DEFAULT_SIMULATION_END, help="final time")
    simulate.add_argument("--points", type=int, default=201, help="number of output time points")
    simulate.add_argument("--paths", type=int, default=0, help="number of Euler-Maruyama fluctuation paths")
    simulate.add_argument("--dt", type=float, default=0.01, help="path sampling step size")

    reduce = commands.add_parser("reduce", parents=[common], help="build a reduced model and simulate it")
    reduce.add_argument("--config", action="append", default=[], help="reduction configuration, e.g. 'retain=m1,m2; lump={p1,p2}:1'")
    reduce.add_argument("--t-end", type=float, help="final time (20 / |Re lambda_max| when omitted)")
    reduce.add_argument("--points", type=int, default=201, help="number of output time points")
    reduce.add_argument("--block-mode", choices=BLOCK_MODES, help="Gramian block structure")
    reduce.add_argument("--dump-gramians", action="store_true", help="also write the structured Gramians P and Q")

    compare = commands.add_parser("compare", parents=[common], help="error reports of one or more reductions")
    compare.add_argument("--config", action="append", default=[], help="reduction configuration (repeatable)")
    compare.add_argument("--sweep", help="file with one reduction configuration per line")
    compare.add_argument("--perturb", help="initial offsets from x_ss, e.g. 'm1=+0.1' or 'm1=+10%%' (default +10%% on the first output)")
    compare.add_argument("--t-end", type=float, help="comparison horizon (20 / |Re lambda_max| when omitted)")
    compare.add_argument("--points", type=int, default=201, help="number of output time points")
    compare.add_argument("--block-mode", choices=BLOCK_MODES, help="Gramian block structure")

    commands.add_parser("check-monotone", parents=[common], help="Metzler verdict for J(x_ss)")
    return parser


def read_sweep(path: str) -> List[str]:
    """One configuration per line; blank lines and '#' comments are skipped"""
    if not os.path.isfile(path):
        raise ConfigurationError(f"sweep file '{path}' not found")
    with open(path, encoding="utf-8") as handle:
        lines = [line.split("#", 1)[0].strip() for line in handle]
    configs = [line for line in lines if line]
    if not configs:
        raise ConfigurationError(f"sweep file '{path}' holds no configurations")
    return configs


def parse_perturbation(text: str, labels: List[str], x_ss: np.ndarray) -> Dict[str, float]:
    """
    Parse 'm1=+0.1,p1=-5%' into absolute offsets

    Args:
        text: comma-separated species=delta items; a trailing % is relative to x_ss
        labels: species names
        x_ss: steady state the relative offsets refer to

    Returns:
        Dict of species -> absolute offset
    """
    offsets = {}
    for item in text.split(","):
        if not item.strip():
            continue
        match = _PERTURB_RE.match(item)
        if match is None:
            raise ConfigurationError(f"cannot parse perturbation '{item.strip()}'; expected species=+delta or species=+delta%")
        name, value, percent = match.group(1), float(match.group(2)), match.group(3)
        if name not in labels:
            raise UnknownSymbolError(name)
        offsets[name] = value / 100.0 * float(x_ss[labels.index(name)]) if percent else value
    return offsets


def _with_block_mode(text: str, block_mode: Optional[str]) -> str:
    if block_mode is None or "block_mode" in text:
        return text
    return f"{text.rstrip().rstrip(';')}; block_mode = {block_mode}"


def load_model(cfg: RunConfig) -> ReactionNetwork:
    net = model_library.resolve(cfg.model)
    return net.with_volume(cfg.omega) if cfg.omega is not None else net


def cmd_steady_state(cfg: RunConfig) -> int:
    net = load_model(cfg)
    x_ss = steady_state(net)
    residual = steady_state_residual(net, x_ss)
    for name, value in zip(net.state_labels, x_ss):
        print(f"{name} = {value:.12g}")
    print(f"residual = {residual:.3e}")
    report_generator.write_steady_state(cfg.out, net.state_labels, x_ss, residual)
    return 0


def cmd_simulate(cfg: RunConfig) -> int:
    net = load_model(cfg)
    t_span = (0.0, cfg.t_end)
    trajectory = simulate_macroscopic(net, t_span, rtol=cfg.rtol, atol=cfg.atol, n_points=cfg.points)
    covariance = integrate_lyapunov_cov(net, trajectory, rtol=cfg.rtol, atol=cfg.atol)
    report_generator.write_trajectory(cfg.out, trajectory)
    report_generator.write_covariance(cfg.out, covariance)
    if cfg.paths:
        system = TimeVaryingFluctuation(network=net, trajectory=trajectory)
        ensemble = simulate_fluctuation_paths(system, cfg.paths, cfg.dt, cfg.t_end, seed=cfg.seed)
        report_generator.write_path_summary(cfg.out, ensemble)
    print(f"Simulated {len(trajectory.times)} points on [0, {cfg.t_end:g}] (Omega = {net.volume!r})")
    return 0


def cmd_reduce(cfg: RunConfig) -> int:
    net = load_model(cfg)
    x_ss = steady_state(net)
    config = parse_reduction_config(_with_block_mode(cfg.configs[0], cfg.block_mode))
    rm = reduce_with_config(net, config, x_ss)
    t_end = cfg.t_end if cfg.t_end is not None else relaxation_horizon(jacobian_J(net, x_ss))
    simulation = simulate_reduced(rm, (0.0, t_end), rtol=cfg.rtol, atol=cfg.atol, n_points=cfg.points)

    report_generator.write_reduced_model(cfg.out, rm, dump_gramians=cfg.dump_gramians)
    report_generator.write_trajectory(cfg.out, simulation.outputs, "reduced_trajectory.csv")
    report_generator.write_covariance(cfg.out, simulation.covariance, "reduced_covariance.csv")
    with open(os.path.join(cfg.out, "network.crn"), "w", encoding="utf-8") as handle:
        handle.write(format_network(net))
    print(rm.describe(), end="")
    return 0


def cmd_compare(cfg: RunConfig) -> int:
    net = load_model(cfg)
    orchestrator = ReductionOrchestrator(net)
    labels = list(net.state_labels)
    if cfg.perturb:
        perturbation = parse_perturbation(cfg.perturb, labels, orchestrator.x_ss)
    else:
        first = net.output_names[0]
        perturbation = {first: DEFAULT_RELATIVE_PERTURBATION * float(orchestrator.x_ss[labels.index(first)])}
    t_span = (0.0, cfg.t_end) if cfg.t_end is not None else None
    configs = [_with_block_mode(text, cfg.block_mode) for text in cfg.configs]

    sessions = asyncio.run(orchestrator.run_sweep(configs, perturbation, t_span, cfg.rtol, cfg.atol))
    failed = [session for session in sessions if session.status == "error"]
    reports = []
    for session in sessions:
        if session.report is None:
            continue
        report_generator.write_error_report(os.path.join(cfg.out, session.session_id), session.report)
        reports.append(session.report)
        print(f"{session.session_id}: {session.config_text}")
        print(f"  L1 = {session.report.l1:.6g}  L2 = {session.report.l2:.6g}  Linf = {session.report.linf:.6g}  "
              f"cov_err_ss = {session.report.cov_err_ss:.6g}")
    if reports:
        report_generator.write_summary(cfg.out, reports)
    for session in failed:
        print(f"{session.session_id} failed: {session.error}", file=sys.stderr)
    return max((session.exit_code for session in failed), default=0)


def cmd_check_monotone(cfg: RunConfig) -> int:
    net = load_model(cfg)
    labels = list(net.state_labels)
    x_ss = steady_state(net)
    J = jacobian_J(net, x_ss)
    if not is_hurwitz(J):
        print(f"Warning: steady state verification failed, J(x_ss) is not Hurwitz "
              f"(spectral abscissa {spectral_abscissa(J):.6g})", file=sys.stderr)
    verdict = is_metzler(J)
    if verdict:
        print("Metzler: yes")
    else:
        print(f"Metzler: no ({len(verdict.violations)} violating entries)")
        for i, j, value in verdict.violations:
            print(f"  J[{labels[i]}, {labels[j]}] = {value:.6g}")
    signature = find_monotone_signature(J)
    if signature is None:
        print("Monotone up to a sign change: no")
    else:
        print("Monotone up to a sign change: yes (" + ", ".join(f"{name}:{int(s):+d}" for name, s in zip(labels, signature)) + ")")
    return 0


HANDLERS = {
    "steady-state": cmd_steady_state,
    "simulate": cmd_simulate,
    "reduce": cmd_reduce,
    "compare": cmd_compare,
    "check-monotone": cmd_check_monotone,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Run one command; returns the process exit code"""
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.log_level)
    try:
        configs = list(getattr(args, "config", []) or [])
        if getattr(args, "sweep", None):
            configs += read_sweep(args.sweep)
        cfg = RunConfig(
            command=args.command,
            model=args.model,
            configs=configs,
            t_end=getattr(args, "t_end", None),
            points=getattr(args, "points", 201),
            rtol=args.rtol,
            atol=args.atol,
            omega=args.omega,
            perturb=getattr(args, "perturb", None),
            out=args.out,
            seed=args.seed,
            paths=getattr(args, "paths", 0),
            dt=getattr(args, "dt", 0.01),
            block_mode=getattr(args, "block_mode", None),
            dump_gramians=getattr(args, "dump_gramians", False),
        )
        return HANDLERS[cfg.command](cfg)
    except LNAReductionError as e:
        logger.error(f"{type(e).__name__}: {str(e)}")
        print(f"error: {str(e)}", file=sys.stderr)
        return e.exit_code
    except ValidationError as e:
        error = e.errors()[0]
        where = ".".join(str(part) for part in error["loc"])
        message = f"invalid option {where}: {error['msg']}" if where else error["msg"]
        print(f"error: {message}", file=sys.stderr)
        return 2
    except ValueError as e:
        print(f"error: {str(e)}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
