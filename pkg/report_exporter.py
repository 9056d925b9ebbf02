"""
CSV and key-value report export.
Every number is written with 17 significant digits so re-runs produce byte-identical files.
"""

import csv
import logging
import os
from dataclasses import asdict
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from chaos import CarryingCapacity, CertificateFailure, Period3Certificate, ReducedMapParams
from constants import AppConfig, CsvColumns, LogMessages
from dynamics import Trajectory
from equilibrium import SafeRateReport, StablePointResult

logger = logging.getLogger(__name__)


def format_value(value: Any) -> str:
    """17 significant digits for floats, plain text otherwise."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return format(float(value), AppConfig.FLOAT_FORMAT)
    if isinstance(value, (list, tuple, np.ndarray)):
        return "[" + ", ".join(format_value(item) for item in value) + "]"
    return str(value)


def _ensure_directory(file_path: str) -> None:
    directory = os.path.dirname(file_path)
    if directory:
        os.makedirs(directory, exist_ok=True)


class TrajectoryCsvWriter:
    """
    State sink that streams trajectory rows to a CSV file while a run is in progress.

    Usable as a context manager; `extra` values (e.g. seed and m) are appended to every row.
    """

    def __init__(self, file_path: str, extra: Optional[Mapping[str, Any]] = None, write_header: bool = True):
        self.file_path = file_path
        self.extra = dict(extra or {})
        _ensure_directory(file_path)
        self._file = open(file_path, "w", newline="", encoding=AppConfig.CONFIG_ENCODING)
        self._writer = csv.writer(self._file, lineterminator="\n")
        if write_header:
            self._writer.writerow(CsvColumns.TRAJECTORY + list(self.extra.keys()))

    def set_extra(self, extra: Mapping[str, Any]) -> None:
        self.extra = dict(extra)

    def __call__(self, index, time, profile, phi, xi_l1, losses) -> None:
        total = float(np.sum(losses))
        tail = [format_value(value) for value in self.extra.values()]
        for agent, row in enumerate(profile):
            for coord, theta in enumerate(row):
                self._writer.writerow([format_value(float(time)), agent, coord, format_value(float(theta)),
                                       format_value(phi), format_value(xi_l1),
                                       format_value(float(losses[agent])), format_value(total)] + tail)

    def close(self) -> None:
        if not self._file.closed:
            self._file.close()

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        self.close()
        return False


class ReportExporter:
    """Handle CSV and report creation and export."""

    def _guarded(self, kind: str, file_path: str, action) -> Tuple[bool, str]:
        """Run a write action, converting file-system failures into (False, message)."""
        try:
            _ensure_directory(file_path)
            action()
            logger.info(LogMessages.EXPORT_SUCCESS.format(kind=kind, file_path=file_path))
            return True, ""
        except PermissionError:
            error_msg = f"Permission denied: Cannot write to {file_path}"
        except OSError as e:
            error_msg = f"File system error: {e}"
        logger.error(LogMessages.EXPORT_FAILED.format(kind=kind, error=error_msg))
        return False, error_msg

    def write_rows(self, file_path: str, header: Sequence[str], rows: Iterable[Sequence[Any]],
                   kind: str = "CSV") -> Tuple[bool, str]:
        def action():
            with open(file_path, "w", newline="", encoding=AppConfig.CONFIG_ENCODING) as f:
                writer = csv.writer(f, lineterminator="\n")
                writer.writerow(header)
                for row in rows:
                    writer.writerow([format_value(value) for value in row])
        return self._guarded(kind, file_path, action)

    def trajectory_rows(self, trajectory: Trajectory, extra: Sequence[Any] = ()) -> List[List[Any]]:
        """One row per (t, agent, coord): t, agent, coord, theta, phi, xi_l1, loss_agent, loss_total, *extra."""
        if trajectory.states is None:
            raise ValueError("Trajectory states were streamed and cannot be re-exported")
        rows = []
        for index, time in enumerate(trajectory.times):
            state = trajectory.states[index]
            for agent in range(state.shape[0]):
                for coord in range(state.shape[1]):
                    rows.append([float(time), agent, coord, float(state[agent, coord]),
                                 float(trajectory.phi[index]), float(trajectory.xi_l1[index]),
                                 float(trajectory.loss_agent[index, agent]), float(trajectory.loss_total[index]),
                                 *extra])
        return rows

    def export_trajectory(self, trajectory: Trajectory, file_path: str) -> Tuple[bool, str]:
        """
        Write a trajectory CSV; stochastic trajectories (meta has seed and m) get the extra columns.

        Returns:
            tuple: (success: bool, error_message: str)
        """
        if "seed" in trajectory.meta:
            return self.export_ensemble([trajectory], file_path)
        return self.write_rows(file_path, CsvColumns.TRAJECTORY, self.trajectory_rows(trajectory), "Trajectory")

    def export_ensemble(self, trajectories: Sequence[Trajectory], file_path: str) -> Tuple[bool, str]:
        """Concatenate stochastic runs in the given order with seed and m columns."""
        rows = []
        for trajectory in trajectories:
            rows.extend(self.trajectory_rows(trajectory, (trajectory.meta["seed"], trajectory.meta["m"])))
        header = CsvColumns.TRAJECTORY + CsvColumns.STOCHASTIC_EXTRA
        return self.write_rows(file_path, header, rows, "Stochastic trajectory")

    def export_bifurcation(self, rows: Sequence[Sequence[Any]], file_path: str) -> Tuple[bool, str]:
        return self.write_rows(file_path, CsvColumns.BIFURCATION, rows, "Bifurcation scan")

    def export_profile(self, profile: np.ndarray, file_path: str) -> Tuple[bool, str]:
        rows = [(agent, coord, float(value))
                for agent, row in enumerate(np.asarray(profile)) for coord, value in enumerate(row)]
        return self.write_rows(file_path, CsvColumns.PROFILE, rows, "Profile")

    # Key-value reports

    def stable_point_report(self, result: StablePointResult) -> Dict[str, Any]:
        report = {
            "kkt_residual": result.kkt_residual,
            "proper": result.proper,
            "potential_value": result.potential_value,
            "iterations": result.iterations,
        }
        for agent, (row, support) in enumerate(zip(result.theta_star, result.supports)):
            report[f"theta_star[{agent}]"] = row.tolist()
            report[f"support[{agent}]"] = list(support)
        return report

    def safe_rate_report(self, report: SafeRateReport) -> Dict[str, Any]:
        keys = ("C1", "C2", "C3", "C4", "eta_star", "R_eta", "eta_first_order",
                "max_abs_grad", "max_xi_l1_bound", "max_grad_l1_bound")
        values = asdict(report)
        return {key: values[key] for key in keys}

    def params_report(self, params: ReducedMapParams) -> Dict[str, Any]:
        return {key: value for key, value in asdict(params).items() if value is not None}

    def certificate_report(self, outcome: Union[Period3Certificate, CertificateFailure]) -> Dict[str, Any]:
        if isinstance(outcome, CertificateFailure):
            return {"certified": False, "failed_inequality": outcome.inequality, "reason": outcome.reason,
                    "u": outcome.params.u, "v": outcome.params.v}
        return {
            "certified": True,
            "u": outcome.params.u, "v": outcome.params.v,
            "x0": outcome.x0, "x1": outcome.x1, "x2": outcome.x2, "x3": outcome.x3,
            "margin_x0_minus_x3": outcome.margins[0],
            "margin_x1_minus_x0": outcome.margins[1],
            "residual_f_x0": outcome.margins[2],
            "permuted": outcome.permuted,
        }

    def capacity_report(self, capacity: CarryingCapacity) -> Dict[str, Any]:
        return {
            "certified_carrying_capacity": capacity.value,
            "eta": capacity.eta,
            "permuted": capacity.permuted,
            "beta_inf": capacity.beta_inf,
            "monotone_above": capacity.monotone,
        }

    def format_report(self, report: Mapping[str, Any], title: Optional[str] = None) -> str:
        """Flat `key = value` text."""
        lines = [f"# {title}"] if title else []
        lines.extend(f"{key} = {format_value(value)}" for key, value in report.items())
        return "\n".join(lines) + "\n"

    def export_report(self, sections: Mapping[str, Mapping[str, Any]], file_path: str) -> Tuple[bool, str]:
        """Write several titled key-value sections to one text file."""
        text = "\n".join(self.format_report(report, title) for title, report in sections.items())

        def action():
            with open(file_path, "w", encoding=AppConfig.CONFIG_ENCODING) as f:
                f.write(text)
        return self._guarded("Report", file_path, action)
