"""
Exponentiated-gradient dynamics, the continuous-time limit integrated by fixed-step RK4,
and the diagnostics recorded along both.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np
from numpy.typing import ArrayLike, NDArray

from constants import DynamicsDefaults, LogMessages, Tolerances
from equilibrium import potential
from input_validator import InputValidator
from model import (
    DimensionError,
    MarketSpec,
    ModelProfile,
    NumericalError,
    PreconditionError,
    SpecValidationError,
    as_profile,
    effective_outcome_weights,
    grad_profile,
    make_profile,
    xi,
)

logger = logging.getLogger(__name__)

# sink(index, time, profile, phi, xi_l1, loss_agent) receives every recorded state
StateSink = Callable[[int, float, ModelProfile, float, float, NDArray[np.float64]], None]


@dataclass(frozen=True, eq=False)
class LearningRates:
    """Per-agent constant step sizes eta_i."""
    eta: NDArray[np.float64]

    def __post_init__(self):
        eta = np.array(self.eta, dtype=float, ndmin=1)
        is_valid, errors = InputValidator().validate_rates(eta, eta.shape[0])
        if not is_valid:
            raise SpecValidationError(errors)
        eta.setflags(write=False)
        object.__setattr__(self, 'eta', eta)

    @classmethod
    def uniform(cls, n: int, eta: float) -> "LearningRates":
        return cls(np.full(n, float(eta)))

    @property
    def r_eta(self) -> float:
        return float(self.eta.max() / self.eta.min())

    @property
    def l1(self) -> float:
        return float(self.eta.sum())


@dataclass(eq=False)
class Trajectory:
    """
    Time-indexed profiles with per-state diagnostics. `states` is None when the states were
    streamed to a sink instead of being stored.
    """
    times: NDArray[np.float64]
    states: Optional[NDArray[np.float64]]
    phi: NDArray[np.float64]
    xi_l1: NDArray[np.float64]
    loss_agent: NDArray[np.float64]
    loss_total: NDArray[np.float64]
    final_state: ModelProfile
    boundary_start: bool = False
    streamed: bool = False
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return int(self.times.shape[0])

    def coordinate_series(self, agent: int, coord: int) -> NDArray[np.float64]:
        """theta^agent_coord over time."""
        if self.states is None:
            raise PreconditionError("States were streamed to a sink and are not stored")
        return self.states[:, agent, coord]

    def dispersion(self, agent: int = 0, coord: int = 0, start: int = 0, stop: Optional[int] = None) -> float:
        """max - min of one coordinate over the recorded window [start, stop]."""
        series = self.coordinate_series(agent, coord)[start:None if stop is None else stop + 1]
        return float(series.max() - series.min())


class TrajectoryRecorder:
    """Collects diagnostics and either stores or streams states."""

    def __init__(self, spec: MarketSpec, capacity: int, sink: Optional[StateSink], max_stored_scalars: int):
        self.spec = spec
        self.sink = sink
        self.streaming = capacity * spec.n * spec.d > max_stored_scalars
        if self.streaming:
            if sink is None:
                raise PreconditionError(
                    f"{capacity * spec.n * spec.d} state scalars exceed {max_stored_scalars}; pass a sink")
            logger.warning(LogMessages.STATES_STREAMED.format(scalars=capacity * spec.n * spec.d))
        self.times: List[float] = []
        self.states: List[np.ndarray] = []
        self.phi: List[float] = []
        self.xi_l1: List[float] = []
        self.loss_agent: List[np.ndarray] = []
        self.last: Optional[np.ndarray] = None

    def record(self, time: float, profile: np.ndarray) -> None:
        phi, xi_l1, losses = diagnostics(self.spec, profile)
        index = len(self.times)
        self.times.append(time)
        self.phi.append(phi)
        self.xi_l1.append(xi_l1)
        self.loss_agent.append(losses)
        self.last = profile
        if not self.streaming:
            self.states.append(profile)
        if self.sink is not None:
            self.sink(index, time, profile, phi, xi_l1, losses)

    def build(self, boundary_start: bool) -> Trajectory:
        loss_agent = np.array(self.loss_agent)
        return Trajectory(
            times=np.array(self.times),
            states=None if self.streaming else np.array(self.states),
            phi=np.array(self.phi),
            xi_l1=np.array(self.xi_l1),
            loss_agent=loss_agent,
            loss_total=loss_agent.sum(axis=1),
            final_state=self.last,
            boundary_start=boundary_start,
            streamed=self.streaming,
        )


def diagnostics(spec: MarketSpec, profile: np.ndarray) -> Tuple[float, float, NDArray[np.float64]]:
    """(Phi, ||xi||_1, per-agent decoupled loss) at one profile."""
    residuals = effective_outcome_weights(spec, profile)[None, :] - profile
    losses = (np.einsum('ik,kl,il->i', residuals, spec.A, residuals)
              + 2.0 * residuals @ spec.c + spec.sigma0_sq)
    return potential(spec, profile), float(np.abs(xi(spec, profile)).sum()), losses


def prepare_initial(spec: MarketSpec, initial: ArrayLike) -> Tuple[np.ndarray, bool]:
    profile = make_profile(spec, initial)
    zeros = np.argwhere(profile == 0)
    if zeros.size:
        logger.warning(LogMessages.BOUNDARY_START.format(coords=[tuple(int(v) for v in z) for z in zeros]))
    return profile, bool(zeros.size)


def check_rates(spec: MarketSpec, rates: LearningRates) -> None:
    if rates.eta.shape[0] != spec.n:
        raise DimensionError(f"Expected {spec.n} learning rates, got {rates.eta.shape[0]}")


def reweight(profile: np.ndarray, grads: np.ndarray, eta: np.ndarray) -> ModelProfile:
    """Multiplicative-weights update of every row, with the per-row max exponent subtracted."""
    exponent = -eta[:, None] * grads
    exponent -= exponent.max(axis=1, keepdims=True)
    weights = profile * np.exp(exponent)
    return weights / weights.sum(axis=1, keepdims=True)


def eg_step(spec: MarketSpec, profile: ArrayLike, rates: LearningRates) -> ModelProfile:
    """
    One exponentiated-gradient step: theta^i_k <- theta^i_k exp(-eta_i g^i_k) / normaliser.

    Raises:
        NumericalError: the gradient is not finite
    """
    check_rates(spec, rates)
    profile = as_profile(spec, profile)
    grads = grad_profile(spec, profile).grads
    if not np.all(np.isfinite(grads)):
        raise NumericalError("Non-finite gradient in exponentiated-gradient step")
    return reweight(profile, grads, rates.eta)


def simulate(spec: MarketSpec, initial: ArrayLike, rates: LearningRates, T: int,
             sink: Optional[StateSink] = None,
             max_stored_scalars: int = DynamicsDefaults.MAX_STORED_SCALARS) -> Trajectory:
    """Iterate eg_step T times from `initial`, recording T+1 states."""
    if T < 1:
        raise PreconditionError(f"T must be at least 1, got {T}")
    profile, boundary = prepare_initial(spec, initial)
    recorder = TrajectoryRecorder(spec, T + 1, sink, max_stored_scalars)
    recorder.record(0.0, profile)
    for step in range(1, T + 1):
        try:
            profile = eg_step(spec, profile, rates)
        except NumericalError as e:
            raise NumericalError(str(e), step=step) from e
        if not np.all(np.isfinite(profile)):
            raise NumericalError("Non-finite state in simulation", step=step)
        recorder.record(float(step), profile)
    logger.info(LogMessages.SIMULATION_DONE.format(steps=T, n=spec.n))
    return recorder.build(boundary)


def ode_rhs(spec: MarketSpec, profile: ArrayLike, rates: LearningRates) -> NDArray[np.float64]:
    """Continuous-time drift (eta_i / ||eta||_1) xi^i_k."""
    check_rates(spec, rates)
    return (rates.eta / rates.l1)[:, None] * xi(spec, profile)


def integrate_ode(spec: MarketSpec, initial: ArrayLike, rates: LearningRates,
                  t_end: float = DynamicsDefaults.T_END,
                  dt: float = DynamicsDefaults.DT,
                  record_every: int = DynamicsDefaults.RECORD_EVERY,
                  sink: Optional[StateSink] = None,
                  max_stored_scalars: int = DynamicsDefaults.MAX_STORED_SCALARS) -> Trajectory:
    """
    Classical RK4 with fixed step dt; rows are renormalised after every step. The horizon is
    rounded down to a whole number of steps.

    Raises:
        PreconditionError: dt <= 0, t_end < dt or record_every < 1
        NumericalError: a non-finite state, or a row sum drifting more than ODE_DRIFT before renormalisation
    """
    if dt <= 0 or t_end < dt:
        raise PreconditionError(f"Need dt > 0 and t_end >= dt, got dt={dt}, t_end={t_end}")
    if record_every < 1:
        raise PreconditionError(f"record_every must be at least 1, got {record_every}")
    steps = int(math.floor(t_end / dt + 1e-9))
    profile, boundary = prepare_initial(spec, initial)
    recorder = TrajectoryRecorder(spec, steps // record_every + 2, sink, max_stored_scalars)
    recorder.record(0.0, profile)

    def rhs(state):
        return ode_rhs(spec, state, rates)

    warned = False
    for step in range(1, steps + 1):
        k1 = rhs(profile)
        k2 = rhs(profile + 0.5 * dt * k1)
        k3 = rhs(profile + 0.5 * dt * k2)
        k4 = rhs(profile + dt * k3)
        profile = profile + dt * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
        if not np.all(np.isfinite(profile)):
            raise NumericalError("Non-finite state in ODE integration", step=step)
        drift = float(np.max(np.abs(profile.sum(axis=1) - 1.0)))
        if drift > Tolerances.ODE_DRIFT:
            raise NumericalError(f"Row-sum drift {drift:.3e} exceeds {Tolerances.ODE_DRIFT:g}; dt too large",
                                 step=step)
        if not warned and drift > Tolerances.ODE_DRIFT * Tolerances.ODE_DRIFT_WARNING_FRACTION:
            logger.warning(LogMessages.ODE_DRIFT_HIGH.format(drift=drift, step=step))
            warned = True
        profile = profile / profile.sum(axis=1, keepdims=True)
        if step % record_every == 0 or step == steps:
            recorder.record(step * dt, profile)

    logger.info(LogMessages.ODE_DONE.format(t_end=steps * dt, dt=dt, steps=steps))
    return recorder.build(boundary)


def discretization_error(spec: MarketSpec, profile: ArrayLike, rates: LearningRates) -> NDArray[np.float64]:
    """
    e with eg_step(theta) = theta + eta xi + eta^2 e, evaluated from the gbar-shifted update.
    """
    profile = as_profile(spec, profile)
    gp = grad_profile(spec, profile)
    eta = rates.eta[:, None]
    numerator = profile * np.exp(eta * (gp.averages[:, None] - gp.grads))
    updated = numerator / numerator.sum(axis=1, keepdims=True)
    drift = profile * (gp.averages[:, None] - gp.grads)
    return (updated - profile - eta * drift) / eta ** 2


def potential_rate(spec: MarketSpec, profile: ArrayLike, rates: LearningRates) -> float:
    """Exact dPhi/dt along the ODE: sum_i lambda_i g^i . rhs^i."""
    profile = as_profile(spec, profile)
    grads = grad_profile(spec, profile).grads
    return float(np.sum(spec.lam[:, None] * grads * ode_rhs(spec, profile, rates)))


def potential_decay_bound(spec: MarketSpec, profile: ArrayLike, rates: LearningRates) -> Tuple[float, float]:
    """
    Upper bounds on dPhi/dt, returned as (tight, simplified) with dPhi/dt <= tight <= simplified:
    tight = -(sum lambda_i eta_i |xi^i_k|)^2 / (2 ||eta||_1 sum lambda_i eta_i),
    simplified = -(min lambda_i eta_i)^2 ||xi||_1^2 / (2 ||eta||_1 sum lambda_i eta_i).
    """
    weights = spec.lam * rates.eta
    drift = np.abs(xi(spec, profile))
    denominator = 2.0 * rates.l1 * float(weights.sum())
    tight = -float(np.sum(weights[:, None] * drift)) ** 2 / denominator
    simplified = -float(weights.min()) ** 2 * float(drift.sum()) ** 2 / denominator
    return tight, simplified
