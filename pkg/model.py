# model.py

"""
Location-scale market model: the distribution map, exact losses, the gradient field and the xi drift.

A model profile is an (n, d) float array whose rows are the agents' models on the probability simplex.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from input_validator import InputValidator

logger = logging.getLogger(__name__)

SimplexPoint = NDArray[np.float64]
ModelProfile = NDArray[np.float64]


class PerformativeError(Exception):
    """Base exception for every failure raised by the simulator."""
    pass


class DimensionError(PerformativeError, ValueError):
    """Array shapes do not match the market dimensions."""
    pass


class SpecValidationError(PerformativeError, ValueError):
    """Market, profile or rate parameters failed validation."""

    def __init__(self, errors: List[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class ConvergenceError(PerformativeError):
    """An iterative solver ran out of iterations."""

    def __init__(self, message: str, last_iterate: Optional[np.ndarray], residual: float, iterations: int):
        self.last_iterate = last_iterate
        self.residual = residual
        self.iterations = iterations
        super().__init__(message)


class NumericalError(PerformativeError):
    """A non-finite value or an integrator blow-up, tagged with the step where it happened."""

    def __init__(self, message: str, step: Optional[int] = None):
        self.step = step
        super().__init__(message if step is None else f"{message} (step {step})")


class PreconditionError(PerformativeError, ValueError):
    """An operation was called outside its domain."""
    pass


class ChaosError(PerformativeError):
    """The chaos analysis could not produce a result (e.g. no certificate below L_max)."""
    pass


class ConfigError(PerformativeError, ValueError):
    """Configuration file is malformed; carries the offending keys."""

    def __init__(self, message: str, keys: Sequence[str] = ()):
        self.keys = list(keys)
        super().__init__(message)


def _readonly(values: ArrayLike, ndim: int) -> np.ndarray:
    array = np.array(values, dtype=float, ndmin=ndim)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class MarketSpec:
    """
    Location-scale distribution map with scaling influence Lambda_i(theta) = lambda_i * theta.

    Outcomes follow y = <theta0 - sum_i lambda_i theta^i, x> + x0, summarised by the moments
    A = E[x x^T], c = E[x0 x] and sigma0_sq = E[x0^2].
    """
    lam: NDArray[np.float64]
    theta0: NDArray[np.float64]
    A: NDArray[np.float64]
    c: NDArray[np.float64]
    sigma0_sq: float = 1.0
    b: NDArray[np.float64] = field(init=False, repr=False)

    def __post_init__(self):
        lam = _readonly(self.lam, 1)
        theta0 = _readonly(self.theta0, 1)
        A = _readonly(self.A, 2)
        c = _readonly(self.c, 1)
        sigma0_sq = float(self.sigma0_sq)

        validation = InputValidator().validate_market(
            theta0.shape[0], lam.shape[0], lam, theta0, A, c, sigma0_sq)
        if not validation['is_valid']:
            raise SpecValidationError(validation['errors'])

        object.__setattr__(self, 'lam', lam)
        object.__setattr__(self, 'theta0', theta0)
        object.__setattr__(self, 'A', A)
        object.__setattr__(self, 'c', c)
        object.__setattr__(self, 'sigma0_sq', sigma0_sq)
        object.__setattr__(self, 'b', _readonly(A @ theta0 + c, 1))

    @property
    def d(self) -> int:
        return int(self.theta0.shape[0])

    @property
    def n(self) -> int:
        return int(self.lam.shape[0])

    @property
    def L_n(self) -> float:
        """Collective influence sum_i lambda_i."""
        return float(self.lam.sum())

    def with_lambda(self, lam: ArrayLike) -> "MarketSpec":
        """Return a copy of the market with different influence parameters."""
        return MarketSpec(lam=lam, theta0=self.theta0, A=self.A, c=self.c, sigma0_sq=self.sigma0_sq)


@dataclass(frozen=True, eq=False)
class GradProfile:
    """Per-agent gradients g^i_k and averages gbar^i = sum_l theta^i_l g^i_l."""
    grads: NDArray[np.float64]
    averages: NDArray[np.float64]


def as_profile(spec: MarketSpec, profile: ArrayLike) -> ModelProfile:
    """Coerce a profile to an (n, d) float array, raising DimensionError on a shape mismatch."""
    array = np.asarray(profile, dtype=float)
    if array.shape != (spec.n, spec.d):
        raise DimensionError(f"Profile must have shape ({spec.n}, {spec.d}), got {array.shape}")
    return array


def as_point(spec: MarketSpec, point: ArrayLike) -> SimplexPoint:
    array = np.asarray(point, dtype=float)
    if array.shape != (spec.d,):
        raise DimensionError(f"Model must have shape ({spec.d},), got {array.shape}")
    return array


def make_profile(spec: MarketSpec, rows: ArrayLike, require_interior: bool = False) -> ModelProfile:
    """Build a validated profile from row data."""
    validation = InputValidator().validate_profile(rows, spec.n, spec.d, require_interior)
    if not validation['is_valid']:
        raise SpecValidationError(validation['errors'])
    for warning in validation['warnings']:
        logger.warning(warning)
    return np.array(rows, dtype=float)


def symmetric_profile(spec: MarketSpec, point: ArrayLike) -> ModelProfile:
    """Every agent deploys the same model."""
    return make_profile(spec, np.tile(as_point(spec, point), (spec.n, 1)))


def uniform_profile(spec: MarketSpec) -> ModelProfile:
    return np.full((spec.n, spec.d), 1.0 / spec.d)


def permute_coordinates(spec: MarketSpec, order: Sequence[int]) -> MarketSpec:
    """Relabel the feature coordinates of a market; order[k] is the old index of new coordinate k."""
    order = np.asarray(order, dtype=int)
    if sorted(order.tolist()) != list(range(spec.d)):
        raise DimensionError(f"Order {order.tolist()} is not a permutation of range({spec.d})")
    return MarketSpec(
        lam=spec.lam,
        theta0=spec.theta0[order],
        A=spec.A[np.ix_(order, order)],
        c=spec.c[order],
        sigma0_sq=spec.sigma0_sq,
    )


def effective_outcome_weights(spec: MarketSpec, profile: ArrayLike) -> NDArray[np.float64]:
    """w = theta0 - sum_i lambda_i theta^i."""
    profile = as_profile(spec, profile)
    return spec.theta0 - spec.lam @ profile


def decoupled_loss(spec: MarketSpec, deployed: ArrayLike, predictive: ArrayLike) -> float:
    """Expected squared error of `predictive` on the distribution induced by `deployed`."""
    w = effective_outcome_weights(spec, deployed) - as_point(spec, predictive)
    return float(w @ spec.A @ w + 2.0 * spec.c @ w + spec.sigma0_sq)


def gradient(spec: MarketSpec, deployed: ArrayLike, predictive: ArrayLike) -> NDArray[np.float64]:
    """Gradient of decoupled_loss in the predictive model: 2A(theta' + sum lambda theta) - 2b."""
    deployed = as_profile(spec, deployed)
    predictive = as_point(spec, predictive)
    return 2.0 * spec.A @ (predictive + spec.lam @ deployed) - 2.0 * spec.b


def grad_profile(spec: MarketSpec, profile: ArrayLike) -> GradProfile:
    profile = as_profile(spec, profile)
    shifted = profile + spec.lam @ profile
    # A is symmetric, so row-wise (theta^i + s) A equals A (theta^i + s)
    grads = 2.0 * shifted @ spec.A - 2.0 * spec.b
    averages = np.sum(profile * grads, axis=1)
    return GradProfile(grads=grads, averages=averages)


def xi(spec: MarketSpec, profile: ArrayLike) -> NDArray[np.float64]:
    """Drift xi^i_k = theta^i_k (gbar^i - g^i_k); rows sum to zero."""
    profile = as_profile(spec, profile)
    gp = grad_profile(spec, profile)
    return profile * (gp.averages[:, None] - gp.grads)


def total_loss(spec: MarketSpec, profile: ArrayLike) -> float:
    """Sum of every agent's decoupled loss under the full profile."""
    profile = as_profile(spec, profile)
    return float(sum(decoupled_loss(spec, profile, row) for row in profile))


def total_loss_gradient(spec: MarketSpec, profile: ArrayLike) -> NDArray[np.float64]:
    """Exact gradient of total_loss: row i is g^i + lambda_i * sum_j g^j."""
    grads = grad_profile(spec, profile).grads
    return grads + spec.lam[:, None] * grads.sum(axis=0)[None, :]
