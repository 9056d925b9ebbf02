"""
Gaussian sampling from the distribution map and the stochastic exponentiated-gradient mode,
where every agent estimates its gradient from m fresh samples per step.

Randomness comes from numpy's counter-based Philox generator keyed by a 64-bit seed; Gaussian
variates are produced by the Box-Muller transform so the stream is fully specified by the key.
Per-step, per-agent keys are derived with mix_seed.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import ArrayLike, NDArray

from constants import DynamicsDefaults, LogMessages, StochasticDefaults
from dynamics import (
    LearningRates,
    StateSink,
    Trajectory,
    TrajectoryRecorder,
    check_rates,
    prepare_initial,
    reweight,
)
from model import (
    MarketSpec,
    ModelProfile,
    NumericalError,
    PreconditionError,
    as_point,
    as_profile,
    effective_outcome_weights,
)

logger = logging.getLogger(__name__)

_MASK = StochasticDefaults.MASK64


@dataclass(frozen=True, eq=False)
class SampleBatch:
    features: NDArray[np.float64]
    outcomes: NDArray[np.float64]
    seed: int
    m: int


def _splitmix64(z: int) -> int:
    z = (z + StochasticDefaults.GOLDEN_GAMMA) & _MASK
    z = ((z ^ (z >> 30)) * StochasticDefaults.MIX_MULT_1) & _MASK
    z = ((z ^ (z >> 27)) * StochasticDefaults.MIX_MULT_2) & _MASK
    return z ^ (z >> 31)


def mix_seed(seed: int, step: int, agent: int) -> int:
    """child = s(s(s(seed) ^ step) ^ agent) with s the SplitMix64 finaliser; all arithmetic mod 2**64."""
    z = _splitmix64(int(seed) & _MASK)
    z = _splitmix64(z ^ (int(step) & _MASK))
    return _splitmix64(z ^ (int(agent) & _MASK))


def standard_normals(seed: int, count: int) -> NDArray[np.float64]:
    """`count` N(0, 1) variates from a Philox stream keyed by `seed`, via Box-Muller."""
    generator = np.random.Generator(np.random.Philox(key=int(seed) & _MASK))
    pairs = (count + 1) // 2
    # 1 - U lies in (0, 1], keeping the logarithm finite
    u1 = 1.0 - generator.random(pairs)
    u2 = generator.random(pairs)
    radius = np.sqrt(-2.0 * np.log(u1))
    angle = 2.0 * np.pi * u2
    return np.concatenate([radius * np.cos(angle), radius * np.sin(angle)])[:count]


def sample_batch(spec: MarketSpec, profile: ArrayLike, m: int, seed: int) -> SampleBatch:
    """
    Draw m samples: x ~ N(0, A), x0 ~ N(0, sigma0_sq) independent, y = <w, x> + x0 with w the
    effective outcome weights of `profile`.

    Raises:
        PreconditionError: m < 1 or c != 0 (sampling assumes independent noise)
        NumericalError: A cannot be factorised
    """
    if m < 1:
        raise PreconditionError(f"Batch size m must be at least 1, got {m}")
    if np.any(spec.c != 0):
        raise PreconditionError("Sampling needs c = 0 (noise independent of the features)")
    w = effective_outcome_weights(spec, profile)
    try:
        factor = np.linalg.cholesky(spec.A)
    except np.linalg.LinAlgError as e:
        raise NumericalError(f"Cholesky factorisation of A failed: {e}") from e

    normals = standard_normals(seed, m * (spec.d + 1)).reshape(m, spec.d + 1)
    features = normals[:, :spec.d] @ factor.T
    outcomes = features @ w + np.sqrt(spec.sigma0_sq) * normals[:, spec.d]
    return SampleBatch(features=features, outcomes=outcomes, seed=int(seed), m=int(m))


def empirical_moments(batch: SampleBatch) -> Tuple[NDArray[np.float64], NDArray[np.float64]]:
    """(A_hat, yx_hat) with A_hat = (1/m) sum x x^T and yx_hat = (1/m) sum y x."""
    if batch.m < 1:
        raise PreconditionError("Empty batch")
    X = batch.features
    A_hat = X.T @ X / batch.m
    A_hat = 0.5 * (A_hat + A_hat.T)
    yx_hat = X.T @ batch.outcomes / batch.m
    return A_hat, yx_hat


def empirical_gradient(batch: SampleBatch, predictive: ArrayLike) -> NDArray[np.float64]:
    """(2/m) sum_j (theta' . x_j - y_j) x_j, the mean per-sample squared-loss gradient."""
    X = batch.features
    predictive = np.asarray(predictive, dtype=float)
    return 2.0 * X.T @ (X @ predictive - batch.outcomes) / batch.m


def stochastic_eg_step(spec: MarketSpec, profile: ArrayLike, rates: LearningRates, m: int, seed: int,
                       step: int = 0, shared_batch: bool = False) -> ModelProfile:
    """
    One exponentiated-gradient step with estimated gradients. Agent i samples with key
    mix_seed(seed, step, i); with shared_batch every agent uses agent 0's batch.
    """
    profile = as_profile(spec, profile)
    check_rates(spec, rates)
    grads = np.empty_like(profile)
    shared = sample_batch(spec, profile, m, mix_seed(seed, step, 0)) if shared_batch else None
    for agent in range(spec.n):
        batch = shared if shared is not None else sample_batch(spec, profile, m, mix_seed(seed, step, agent))
        grads[agent] = empirical_gradient(batch, as_point(spec, profile[agent]))
    if not np.all(np.isfinite(grads)):
        raise NumericalError("Non-finite empirical gradient", step=step)
    return reweight(profile, grads, rates.eta)


def stochastic_simulate(spec: MarketSpec, initial: ArrayLike, rates: LearningRates, T: int, m: int, seed: int,
                        shared_batch: bool = False,
                        sink: Optional[StateSink] = None,
                        max_stored_scalars: int = DynamicsDefaults.MAX_STORED_SCALARS) -> Trajectory:
    """T stochastic steps; step t -> t+1 uses the key stream of step index t."""
    if T < 1:
        raise PreconditionError(f"T must be at least 1, got {T}")
    profile, boundary = prepare_initial(spec, initial)
    recorder = TrajectoryRecorder(spec, T + 1, sink, max_stored_scalars)
    recorder.record(0.0, profile)
    for step in range(T):
        profile = stochastic_eg_step(spec, profile, rates, m, seed, step=step, shared_batch=shared_batch)
        recorder.record(float(step + 1), profile)
    trajectory = recorder.build(boundary)
    trajectory.meta.update(seed=int(seed), m=int(m))
    logger.info(LogMessages.STOCHASTIC_DONE.format(steps=T, m=m, seed=seed))
    return trajectory


def _ensemble_member(task):
    spec, initial, rates, T, m, seed, shared_batch = task
    return stochastic_simulate(spec, initial, rates, T, m, seed, shared_batch=shared_batch)


def run_seed_ensemble(spec: MarketSpec, initial: ArrayLike, rates: LearningRates, T: int, m: int,
                      seeds: Sequence[int], workers: int = 1, shared_batch: bool = False) -> List[Trajectory]:
    """Independent stochastic runs, one per seed, returned in seed order."""
    tasks = [(spec, np.asarray(initial, dtype=float), rates, T, m, int(seed), shared_batch) for seed in seeds]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            runs = list(executor.map(_ensemble_member, tasks))
    else:
        runs = [_ensemble_member(task) for task in tasks]
    logger.info(LogMessages.ENSEMBLE_DONE.format(runs=len(runs)))
    return runs
