# report_generator.py
# This module writes the CSV and plain-text artifacts of every command.
# All numbers are written with 17 significant digits so repeated runs diff cleanly.

import logging
import os
from typing import List, Sequence

import numpy as np
import pandas as pd

from gramians import dump_matrix
from lna import CovTrajectory, PathEnsemble, Trajectory
from metrics import ErrorReport, summary_frame
from reduction import ReducedModel

# Configure logging
logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"


class ReductionReportGenerator:
    """
    Writes steady states, trajectories, reduced-model descriptions and
    comparison reports into an output directory.
    """

    def __init__(self, float_format: str = FLOAT_FORMAT):
        self.float_format = float_format

    def _path(self, output_dir: str, filename: str) -> str:
        os.makedirs(output_dir, exist_ok=True)
        return os.path.join(output_dir, filename)

    def _write_frame(self, frame: pd.DataFrame, output_dir: str, filename: str) -> str:
        path = self._path(output_dir, filename)
        frame.to_csv(path, index=False, float_format=self.float_format, lineterminator="\n")
        logger.info(f"Wrote {path}")
        return path

    def _write_text(self, text: str, output_dir: str, filename: str) -> str:
        path = self._path(output_dir, filename)
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(text)
        logger.info(f"Wrote {path}")
        return path

    def write_steady_state(self, output_dir: str, labels: Sequence[str], x_ss: np.ndarray, residual: float) -> str:
        frame = pd.DataFrame({"species": list(labels), "x_ss": np.asarray(x_ss, dtype=float)})
        path = self._write_frame(frame, output_dir, "steady_state.csv")
        self._write_text(f"residual,{residual:.17g}\n", output_dir, "steady_state_residual.csv")
        return path

    def write_trajectory(self, output_dir: str, trajectory: Trajectory, filename: str = "trajectory.csv") -> str:
        return self._write_frame(trajectory.to_frame(), output_dir, filename)

    def write_covariance(self, output_dir: str, covariance: CovTrajectory, filename: str = "covariance.csv") -> str:
        return self._write_frame(covariance.to_frame(), output_dir, filename)

    def write_path_summary(self, output_dir: str, ensemble: PathEnsemble, filename: str = "paths_summary.csv") -> str:
        return self._write_frame(ensemble.summary_frame(), output_dir, filename)

    def write_reduced_model(self, output_dir: str, rm: ReducedModel, dump_gramians: bool = False) -> List[str]:
        """Description, projectors and structured singular values of a reduced model"""
        paths = [self._write_text(rm.describe(), output_dir, "reduced_model.txt")]
        for name in ("W", "V", "W_r", "V_r"):
            path = self._path(output_dir, f"{name}.txt")
            dump_matrix(path, getattr(rm, name))
            paths.append(path)
        if rm.balanced:
            rows = [
                {"block": index, "position": position, "sigma": value}
                for index, block in enumerate(rm.balanced)
                for position, value in enumerate(block.sigma)
            ]
            paths.append(self._write_frame(pd.DataFrame(rows), output_dir, "sigma22.csv"))
        if dump_gramians and rm.gramians is not None:
            for name in ("P", "Q"):
                path = self._path(output_dir, f"gramian_{name}.txt")
                dump_matrix(path, getattr(rm.gramians, name))
                paths.append(path)
        return paths

    def write_error_report(self, output_dir: str, report: ErrorReport) -> List[str]:
        """metric,value CSV, plain-text table and the covariance-error time series"""
        frame = report.to_frame()
        text = self._format_table(frame, f"Model comparison ({report.method})", report.volume)
        return [
            self._write_frame(frame, output_dir, "report.csv"),
            self._write_text(text, output_dir, "report.txt"),
            self._write_frame(report.trajectory_frame(), output_dir, "cov_error.csv"),
        ]

    def write_summary(self, output_dir: str, reports: Sequence[ErrorReport]) -> List[str]:
        """One row per configuration"""
        frame = summary_frame(reports)
        volume = reports[0].volume if reports else float("nan")
        text = self._format_table(frame, "Reduction summary", volume)
        return [
            self._write_frame(frame, output_dir, "summary.csv"),
            self._write_text(text, output_dir, "summary.txt"),
        ]

    def _format_table(self, frame: pd.DataFrame, title: str, volume: float) -> str:
        header = [
            f"# {title}",
            f"# volume (Omega) = {volume!r}",
            "",
        ]
        body = frame.to_string(index=False, float_format=lambda v: f"{v:.6g}")
        return "\n".join(header) + body + "\n"


# Global instance
report_generator = ReductionReportGenerator()
