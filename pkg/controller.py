# controller.py
import dataclasses
import logging
import os
from typing import Any, Callable, Dict, Mapping, Optional

import numpy as np

from chaos import (
    Period3Certificate,
    alpha_beta,
    bifurcation_scan,
    carrying_capacity,
    lyapunov_exponent,
    period3_certificate,
    permute_to_canonical,
)
from config_manager import ConfigManager, ExperimentConfig, StablePointConfig, StartConfig
from constants import AppConfig, ExitCodes, LogMessages, ValidationMessages
from dynamics import LearningRates, integrate_ode, simulate
from equilibrium import check_optimal, check_stable, find_stable_point, safe_learning_rate
from model import (
    ChaosError,
    ConfigError,
    ConvergenceError,
    DimensionError,
    MarketSpec,
    NumericalError,
    PreconditionError,
    SpecValidationError,
    uniform_profile,
)
from recipe_registry import get_recipe_registry
from report_exporter import ReportExporter, TrajectoryCsvWriter
from stochastic import run_seed_ensemble, stochastic_simulate
from view import ConsoleView

logger = logging.getLogger(__name__)

REPORT_SUFFIX = ".report.txt"


def report_path(out: str) -> str:
    """Companion key-value report next to a CSV output."""
    return os.path.splitext(out)[0] + REPORT_SUFFIX


class ExperimentController:
    """Runs one CLI command against an experiment config and maps failures to exit codes."""

    def __init__(self, view: Optional[ConsoleView] = None, registry_factory: Callable = get_recipe_registry):
        self._view = view or ConsoleView()
        self._config_manager = ConfigManager()
        self._exporter = ReportExporter()
        self._registry_factory = registry_factory
        self._commands: Dict[str, Callable[..., Dict[str, Dict[str, Any]]]] = {
            "stable-point": self.cmd_stable_point,
            "simulate": self.cmd_simulate,
            "ode": self.cmd_ode,
            "chaos": self.cmd_chaos,
            "bifurcation": self.cmd_bifurcation,
            "stochastic": self.cmd_stochastic,
        }

    # Config resolution

    def load_config(self, config_path: Optional[str] = None, recipe: Optional[str] = None) -> ExperimentConfig:
        if (config_path is None) == (recipe is None):
            raise ConfigError("Pass exactly one of --config and --recipe", keys=["config", "recipe"])
        if recipe is not None:
            return self._registry_factory().get_recipe(recipe)
        return self._config_manager.load_experiment(config_path)

    def _section(self, config: ExperimentConfig, name: str):
        section = getattr(config, name)
        if section is None:
            raise ConfigError(ValidationMessages.MISSING_SECTION.format(section=name), keys=[name])
        return section

    def initial_profile(self, spec: MarketSpec, start: StartConfig) -> np.ndarray:
        """Explicit rows, else (p0, 1 - p0) per agent when d = 2, else uniform."""
        if start.initial is not None:
            return np.array(start.initial, dtype=float)
        if start.p0 is not None:
            if spec.d != 2:
                raise ConfigError(f"p0 needs d = 2, the market has d = {spec.d}", keys=["p0"])
            return np.tile([start.p0, 1.0 - start.p0], (spec.n, 1))
        return uniform_profile(spec)

    def rates(self, spec: MarketSpec, eta) -> LearningRates:
        if isinstance(eta, (int, float)):
            return LearningRates.uniform(spec.n, eta)
        return LearningRates(np.array(eta, dtype=float))

    # Commands

    def cmd_stable_point(self, config: ExperimentConfig, out: Optional[str] = None,
                         seed: Optional[int] = None) -> Dict[str, Dict[str, Any]]:
        """Stable point, stability and optimality checks, and the safe learning rate."""
        spec = self._config_manager.resolve_market(config)
        section = config.stable_point or StablePointConfig()
        result = find_stable_point(spec, tol=section.tol, max_iters=section.max_iters)
        stable, gap = check_stable(spec, result.theta_star, section.check_tol)
        optimal = check_optimal(spec, result.theta_star, section.check_tol)
        safe = safe_learning_rate(spec, result.theta_star, R_eta=section.R_eta)

        summary = self._exporter.stable_point_report(result)
        summary.update(stable=stable, stability_gap=gap, optimal=optimal)
        sections = {"stable_point": summary, "safe_learning_rate": self._exporter.safe_rate_report(safe)}
        if out is not None:
            self._checked(self._exporter.export_profile(result.theta_star, out))
        return sections

    def cmd_simulate(self, config: ExperimentConfig, out: Optional[str] = None,
                     seed: Optional[int] = None) -> Dict[str, Dict[str, Any]]:
        """Deterministic exponentiated-gradient run, or a single stochastic run when `stochastic` is set."""
        spec = self._config_manager.resolve_market(config)
        section = self._section(config, "simulate")
        initial = self.initial_profile(spec, section)
        rates = self.rates(spec, section.eta)

        if section.stochastic:
            run_seed = section.seed if seed is None else seed
            extra = {"seed": run_seed, "m": section.m}
            with self._writer(out, extra) as sink:
                trajectory = stochastic_simulate(spec, initial, rates, section.T, section.m, run_seed,
                                                 shared_batch=section.shared_batch, sink=sink)
        else:
            with self._writer(out) as sink:
                trajectory = simulate(spec, initial, rates, section.T, sink=sink)
        return {"simulate": self._trajectory_summary(trajectory)}

    def cmd_ode(self, config: ExperimentConfig, out: Optional[str] = None,
                seed: Optional[int] = None) -> Dict[str, Dict[str, Any]]:
        spec = self._config_manager.resolve_market(config)
        section = self._section(config, "ode")
        initial = self.initial_profile(spec, section)
        with self._writer(out) as sink:
            trajectory = integrate_ode(spec, initial, self.rates(spec, section.eta), t_end=section.t_end,
                                       dt=section.dt, record_every=section.record_every, sink=sink)
        return {"ode": self._trajectory_summary(trajectory)}

    def cmd_chaos(self, config: ExperimentConfig, out: Optional[str] = None,
                  seed: Optional[int] = None) -> Dict[str, Dict[str, Any]]:
        """
        Reduced-map parameters, period-3 certificate, carrying capacity, Lyapunov diagnostic and
        optionally a bifurcation scan. A failed certificate is a result, not an error.
        """
        spec = self._config_manager.resolve_market(config)
        section = self._section(config, "chaos")
        L = spec.L_n if section.L is None else section.L
        params = alpha_beta(spec, section.eta, L)
        sections: Dict[str, Dict[str, Any]] = {"reduced_map": self._exporter.params_report(params)}

        if section.certificate:
            canonical, permuted, _ = permute_to_canonical(spec)
            canonical_params = alpha_beta(canonical, section.eta, L)
            if canonical_params.u <= 1:
                sections["certificate"] = {"certified": False, "skipped": True,
                                           "reason": f"u = {canonical_params.u:.6g} <= 1"}
            else:
                outcome = period3_certificate(canonical_params)
                if isinstance(outcome, Period3Certificate):
                    outcome = dataclasses.replace(outcome, permuted=permuted)
                sections["certificate"] = self._exporter.certificate_report(outcome)

        if section.carrying_capacity is not None:
            capacity = carrying_capacity(spec, section.eta, section.carrying_capacity.L_min,
                                         section.carrying_capacity.L_max, tol=section.carrying_capacity.tol)
            sections["carrying_capacity"] = self._exporter.capacity_report(capacity)

        if section.lyapunov:
            sections["lyapunov"] = {
                "lyapunov": lyapunov_exponent(params, section.x0, section.burn_in, section.iters),
                "x0": section.x0, "burn_in": section.burn_in, "iters": section.iters,
            }

        if section.bifurcation:
            sections.update(self.cmd_bifurcation(config, out))
        return sections

    def cmd_bifurcation(self, config: ExperimentConfig, out: Optional[str] = None,
                        seed: Optional[int] = None) -> Dict[str, Dict[str, Any]]:
        spec = self._config_manager.resolve_market(config)
        section = self._section(config, "bifurcation")
        grid = section.grid()
        rows = bifurcation_scan(spec, section.eta, grid, x0=section.x0, burn_in=section.burn_in,
                                samples=section.samples, lyapunov_iters=section.lyapunov_iters,
                                workers=section.workers)
        if out is not None:
            self._checked(self._exporter.export_bifurcation(rows, out))
        exponents = [row[5] for row in rows[::max(section.samples, 1)]]
        return {"bifurcation": {"cells": len(grid), "rows": len(rows),
                                "max_lyapunov": max(exponents) if exponents else float("nan")}}

    def cmd_stochastic(self, config: ExperimentConfig, out: Optional[str] = None,
                       seed: Optional[int] = None) -> Dict[str, Dict[str, Any]]:
        """Seed ensemble of stochastic runs; rows are written in seed order."""
        spec = self._config_manager.resolve_market(config)
        section = self._section(config, "stochastic")
        initial = self.initial_profile(spec, section)
        rates = self.rates(spec, section.eta)
        seeds = section.seed_list(seed)
        runs = run_seed_ensemble(spec, initial, rates, section.T, section.m, seeds,
                                 workers=section.workers, shared_batch=section.shared_batch)
        if out is not None:
            self._checked(self._exporter.export_ensemble(runs, out))

        finals = np.array([run.final_state[0, 0] for run in runs])
        return {"stochastic": {
            "runs": len(runs),
            "seeds": seeds,
            "m": section.m,
            "final_theta_mean": float(finals.mean()),
            "final_theta_min": float(finals.min()),
            "final_theta_max": float(finals.max()),
        }}

    # Entry point

    def run(self, command: str, config_path: Optional[str] = None, recipe: Optional[str] = None,
            out: Optional[str] = None, seed: Optional[int] = None) -> int:
        """Execute a command and return the process exit code."""
        logger.info(LogMessages.APP_STARTING.format(command=command))
        try:
            if command not in self._commands:
                raise ConfigError(f"Unknown command '{command}'; choose from {', '.join(AppConfig.COMMANDS)}",
                                  keys=[command])
            config = self.load_config(config_path, recipe)
            sections = self._commands[command](config, out, seed)
            self._view.show_report("\n".join(
                self._exporter.format_report(report, title) for title, report in sections.items()))
            if out is not None:
                self._checked(self._exporter.export_report(sections, report_path(out)))
                self._view.show_info(f"Results written to {out}")
            code = ExitCodes.SUCCESS
        except (ConfigError, SpecValidationError, DimensionError, PreconditionError) as e:
            logger.error(LogMessages.VALIDATION_FAILED.format(error=e))
            self._view.show_error(str(e), "Validation error")
            code = ExitCodes.VALIDATION_ERROR
        except ConvergenceError as e:
            logger.error(LogMessages.NUMERICAL_FAILED.format(error=e))
            self._view.show_error(f"{e} (residual {e.residual:.3e} after {e.iterations} iterations)",
                                  "Solver did not converge")
            code = ExitCodes.NUMERICAL_FAILURE
        except (NumericalError, ChaosError) as e:
            logger.error(LogMessages.NUMERICAL_FAILED.format(error=e))
            self._view.show_error(str(e), "Numerical failure")
            code = ExitCodes.NUMERICAL_FAILURE
        except OSError as e:
            logger.error(LogMessages.UNEXPECTED_ERROR.format(command=command, error=e))
            self._view.show_error(f"File system error: {e}", "Export error")
            code = ExitCodes.VALIDATION_ERROR
        logger.info(LogMessages.APP_FINISHED.format(command=command, code=code))
        return code

    # Helpers

    def _writer(self, out: Optional[str], extra: Optional[Mapping[str, Any]] = None):
        if out is None:
            return _NullSink()
        return TrajectoryCsvWriter(out, extra)

    def _checked(self, outcome) -> None:
        success, error_message = outcome
        if not success:
            raise OSError(error_message)

    def _trajectory_summary(self, trajectory) -> Dict[str, Any]:
        final = trajectory.final_state
        summary: Dict[str, Any] = {
            "records": len(trajectory),
            "t_final": float(trajectory.times[-1]),
            "phi_final": float(trajectory.phi[-1]),
            "xi_l1_final": float(trajectory.xi_l1[-1]),
            "loss_total_final": float(trajectory.loss_total[-1]),
            "boundary_start": trajectory.boundary_start,
        }
        for agent, row in enumerate(final):
            summary[f"final_state[{agent}]"] = row.tolist()
        for key, value in trajectory.meta.items():
            summary[key] = value
        return summary


class _NullSink:
    """Stand-in for a CSV writer when no output path is given."""

    def __enter__(self):
        return None

    def __exit__(self, exc_type, exc, tb):
        return False

