# orchestrator.py
# This module orchestrates reduction runs.
# It tracks one session per reduction configuration and runs sweeps of configurations concurrently.

import asyncio
import json
import logging
from datetime import datetime
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from errors import ConfigurationError, LNAReductionError
from lna import steady_state
from metrics import ErrorReport, compare_models
from reduction import ReducedModel, parse_reduction_config, reduce_with_config

# Configure logging
logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)


class ReductionSession(BaseModel):
    """Tracks one reduction configuration from parsing to comparison"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    session_id: str
    config_text: str
    status: str = "initialized"  # initialized, in_progress, completed, error
    model: Optional[ReducedModel] = None
    report: Optional[ErrorReport] = None
    error: Optional[str] = None
    exit_code: int = 0
    created_at: datetime = Field(default_factory=datetime.now)
    completed_at: Optional[datetime] = None


class ReductionOrchestrator:
    """
    Orchestrates reductions of one network at one steady state.
    Each configuration runs in a worker thread; sessions are kept by id.
    """

    def __init__(self, net, x_ss: Optional[np.ndarray] = None):
        self.net = net
        self.x_ss = steady_state(net) if x_ss is None else np.asarray(x_ss, dtype=float)
        self.active_sessions: Dict[str, ReductionSession] = {}

    async def start_reduction_session(self, config_text: str, session_id: str = None) -> str:
        """
        Register a configuration for reduction

        Args:
            config_text: reduction configuration string
            session_id: optional session identifier

        Returns:
            str: session ID for tracking
        """
        if session_id is None:
            session_id = f"run_{len(self.active_sessions):03d}"
        if session_id in self.active_sessions:
            raise ConfigurationError(f"session {session_id} already exists")
        self.active_sessions[session_id] = ReductionSession(session_id=session_id, config_text=config_text)
        logger.info(f"Started reduction session {session_id}")
        return session_id

    async def run_reduction_process(
        self,
        session_id: str,
        perturbation: Union[None, Dict[str, float], Sequence[float]] = None,
        t_span: Optional[Tuple[float, float]] = None,
        rtol: Optional[float] = None,
        atol: Optional[float] = None,
        compare: bool = True,
    ) -> ReductionSession:
        """
        Reduce the network with the session's configuration and, optionally, compare against the full model

        Args:
            session_id: session identifier
            perturbation: initial offset from x_ss used for the comparison
            compare: also compute the ErrorReport

        Returns:
            ReductionSession: finished session
        """
        session = self.get_session(session_id)
        if session is None:
            raise ConfigurationError(f"session {session_id} not found")
        session.status = "in_progress"
        try:
            config = parse_reduction_config(session.config_text)
            session.model = await asyncio.to_thread(reduce_with_config, self.net, config, self.x_ss)
            if compare:
                session.report = await asyncio.to_thread(
                    compare_models, self.net, session.model, perturbation, t_span, rtol, atol
                )
            session.status = "completed"
            session.completed_at = datetime.now()
            logger.info(f"Completed reduction session {session_id}")
            return session
        except LNAReductionError as e:
            session.status = "error"
            session.error = str(e)
            session.exit_code = e.exit_code
            logger.error(f"Error in reduction session {session_id}: {str(e)}")
            raise

    async def run_sweep(
        self,
        config_texts: Sequence[str],
        perturbation: Union[None, Dict[str, float], Sequence[float]] = None,
        t_span: Optional[Tuple[float, float]] = None,
        rtol: Optional[float] = None,
        atol: Optional[float] = None,
    ) -> List[ReductionSession]:
        """
        Reduce and compare several configurations concurrently

        Sessions are named run_000, run_001, ... in configuration order and are
        returned in that order whatever order they finish in. A failing configuration
        is recorded on its session; the others still run.
        """
        if not config_texts:
            raise ConfigurationError("a sweep needs at least one configuration")
        session_ids = [await self.start_reduction_session(text) for text in config_texts]
        outcomes = await asyncio.gather(
            *(self.run_reduction_process(sid, perturbation, t_span, rtol, atol) for sid in session_ids),
            return_exceptions=True,
        )
        for sid, outcome in zip(session_ids, outcomes):
            if isinstance(outcome, BaseException) and not isinstance(outcome, LNAReductionError):
                raise outcome
        return [self.active_sessions[sid] for sid in session_ids]

    def get_session(self, session_id: str) -> Optional[ReductionSession]:
        """Get session by ID"""
        return self.active_sessions.get(session_id)

    def get_all_sessions(self) -> List[ReductionSession]:
        """Get all sessions in creation order"""
        return list(self.active_sessions.values())

    def generate_reduction_summary(self, session_id: str) -> Dict[str, Any]:
        """
        Summarize a session as plain JSON-compatible values

        Args:
            session_id: session identifier

        Returns:
            Dict containing the session summary
        """
        session = self.get_session(session_id)
        if not session:
            raise ConfigurationError(f"session {session_id} not found")

        summary = {
            "session_id": session_id,
            "config": session.config_text,
            "status": session.status,
            "error": session.error,
            "model": None,
            "report": None,
            "duration": (session.completed_at - session.created_at).total_seconds() if session.completed_at else None,
        }
        if session.model is not None:
            summary["model"] = {
                "method": session.model.method,
                "reduced_dimension": session.model.dimension,
                "r": session.model.r,
                "sigma22": [[float(v) for v in block.sigma] for block in session.model.balanced],
            }
        if session.report is not None:
            summary["report"] = {
                key: getattr(session.report, key)
                for key in ("l1", "l2", "linf", "rel_linf", "cov_err_ss", "cov_err_lyap")
            }
        logger.debug(f"Session summary: {json.dumps(summary, default=str)}")
        return summary
