"""
The one-dimensional map governing symmetric agents at d = 2:

    f_{u,v}(x) = x / (x + (1 - x) exp(u (x - v)))

with steepness u = alpha(L) and interior fixed point v = beta(L). This module derives (u, v) from a
market, builds period-3 certificates (which imply Li-Yorke chaos), searches for the certified
carrying capacity, and provides Lyapunov, bifurcation and orbit-pair diagnostics.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from constants import ChaosDefaults, LogMessages, Tolerances
from model import ChaosError, MarketSpec, PreconditionError, permute_coordinates

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ReducedMapParams:
    """Steepness u and fixed point v, optionally with the market quantities they came from."""
    u: float
    v: float
    eta: Optional[float] = None
    L: Optional[float] = None
    beta_inf: Optional[float] = None
    delta: Optional[float] = None

    def __post_init__(self):
        if not math.isfinite(self.u):
            raise PreconditionError(f"u must be finite, got {self.u}")
        if not 0.0 < self.v < 1.0:
            raise PreconditionError(f"v must lie in (0, 1), got {self.v}")


@dataclass(frozen=True)
class Period3Certificate:
    """Orbit x1 = f(x0), x2 = f(x1), x3 = f(x2) with x3 < x0 < x1."""
    x0: float
    x1: float
    x2: float
    x3: float
    params: ReducedMapParams
    margins: Tuple[float, float, float]
    permuted: bool = False


@dataclass(frozen=True)
class CertificateFailure:
    """The period-3 construction does not apply; `inequality` names the condition that failed."""
    reason: str
    inequality: str
    params: ReducedMapParams


@dataclass(frozen=True)
class CarryingCapacity:
    """Smallest certified L on the bisection grid (not a claim of minimality between grid points)."""
    value: float
    eta: float
    permuted: bool
    beta_inf: float
    monotone: bool
    failures_above: List[float] = field(default_factory=list)


def _dominance_denominator(spec: MarketSpec) -> float:
    if spec.d != 2:
        raise PreconditionError(f"The reduced map needs d = 2, got d = {spec.d}")
    A = spec.A
    if not (A[0, 0] > abs(A[0, 1]) and A[1, 1] > abs(A[1, 0])):
        raise PreconditionError("A must be strictly diagonally dominant")
    return float(A[0, 0] - A[0, 1] - A[1, 0] + A[1, 1])


def beta_infinity(spec: MarketSpec) -> float:
    """Large-influence limit of the fixed point: (A22 - A21) / (A11 - A12 - A21 + A22)."""
    denominator = _dominance_denominator(spec)
    return float(spec.A[1, 1] - spec.A[1, 0]) / denominator


def alpha_beta(spec: MarketSpec, eta: float, L: float) -> ReducedMapParams:
    """
    alpha(L) = 2 eta (1+L)(A11 - A12 - A21 + A22)
    beta(L)  = ((1+L)(A22 - A21) + (b1 - b2)) / ((1+L)(A11 - A12 - A21 + A22))

    Raises:
        PreconditionError: d != 2, A not diagonally dominant, eta <= 0, L <= -1 or beta outside (0, 1)
    """
    denominator = _dominance_denominator(spec)
    if eta <= 0:
        raise PreconditionError(f"eta must be positive, got {eta}")
    if L <= -1:
        raise PreconditionError(f"L must exceed -1, got {L}")
    A, b = spec.A, spec.b
    scale = 1.0 + L
    alpha = 2.0 * eta * scale * denominator
    beta = (scale * (A[1, 1] - A[1, 0]) + (b[0] - b[1])) / (scale * denominator)
    beta_inf = float(A[1, 1] - A[1, 0]) / denominator
    return ReducedMapParams(u=float(alpha), v=float(beta), eta=float(eta), L=float(L),
                            beta_inf=beta_inf, delta=float(beta) - beta_inf)


def reduced_map(params: ReducedMapParams, x: float) -> float:
    """f_{u,v}(x), evaluated as x E / (x E + 1 - x) with E = exp(-u (x - v)) and the exponent clamped."""
    if not 0.0 <= x <= 1.0:
        raise PreconditionError(f"x must lie in [0, 1], got {x}")
    clamp = ChaosDefaults.EXPONENT_CLAMP
    inverse = math.exp(max(-clamp, min(clamp, -params.u * (x - params.v))))
    weighted = x * inverse
    return weighted / (weighted + (1.0 - x))


def map_derivative(params: ReducedMapParams, x: float) -> float:
    """f'(x) = E (1 - u x (1 - x)) / (x E + 1 - x)^2."""
    clamp = ChaosDefaults.EXPONENT_CLAMP
    inverse = math.exp(max(-clamp, min(clamp, -params.u * (x - params.v))))
    denominator = x * inverse + (1.0 - x)
    return (inverse / denominator) * (1.0 - params.u * x * (1.0 - x)) / denominator


def period3_certificate(params: ReducedMapParams,
                        tol: float = ChaosDefaults.BISECTION_TOL,
                        max_iters: int = ChaosDefaults.BISECTION_MAX_ITERS
                        ) -> Union[Period3Certificate, CertificateFailure]:
    """
    Build x1 = 1 - 1/u, x2 = f(x1), x3 = f(x2), then bisect on (v/2, v) for x0 with f(x0) = x1.
    The bracket needs f(v/2) > x1 (period1) and v < x1 (period2).

    Raises:
        PreconditionError: u <= 1
    """
    u, v = params.u, params.v
    if u <= 1:
        raise PreconditionError(f"The period-3 construction needs u > 1, got u = {u}")

    x1 = 1.0 - 1.0 / u
    x2 = reduced_map(params, x1)
    x3 = reduced_map(params, x2)
    y = v / 2.0

    f_y = reduced_map(params, y)
    if f_y <= x1:
        failure = CertificateFailure(
            reason=f"f(v/2) = {f_y:.6g} does not exceed x1 = {x1:.6g}", inequality="period1", params=params)
        logger.info(LogMessages.CERTIFICATE_FAILED.format(u=u, v=v, reason=failure.reason))
        return failure
    if v >= x1:
        failure = CertificateFailure(
            reason=f"v = {v:.6g} is not below x1 = {x1:.6g}", inequality="period2", params=params)
        logger.info(LogMessages.CERTIFICATE_FAILED.format(u=u, v=v, reason=failure.reason))
        return failure

    # f(lo) > x1 > f(hi) on the bracket
    lo, hi = y, v
    x0 = 0.5 * (lo + hi)
    residual = reduced_map(params, x0) - x1
    for _ in range(max_iters):
        if abs(residual) <= tol:
            break
        if residual > 0:
            lo = x0
        else:
            hi = x0
        x0 = 0.5 * (lo + hi)
        residual = reduced_map(params, x0) - x1

    if abs(residual) > tol:
        failure = CertificateFailure(
            reason=f"bisection stalled at |f(x0) - x1| = {abs(residual):.3e}", inequality="bisection",
            params=params)
        logger.info(LogMessages.CERTIFICATE_FAILED.format(u=u, v=v, reason=failure.reason))
        return failure
    if not x3 < x0 < x1:
        failure = CertificateFailure(
            reason=f"ordering x3 < x0 < x1 fails ({x3:.6g}, {x0:.6g}, {x1:.6g})", inequality="ordering",
            params=params)
        logger.info(LogMessages.CERTIFICATE_FAILED.format(u=u, v=v, reason=failure.reason))
        return failure

    return Period3Certificate(x0=x0, x1=x1, x2=x2, x3=x3, params=params,
                              margins=(x0 - x3, x1 - x0, abs(residual)))


def _log_space_map(u: float, v: float, x: float) -> float:
    """f(x) = 1 / (1 + exp(z)) with z = log(1 - x) - log(x) + u (x - v)."""
    z = math.log1p(-x) - math.log(x) + u * (x - v)
    return float(np.exp(-np.logaddexp(0.0, z)))


def verify_certificate(certificate: Period3Certificate, tol: float = 1e-10) -> bool:
    """Re-evaluate the certificate's orbit in log space and re-check the ordering."""
    u, v = certificate.params.u, certificate.params.v
    x0, x1, x2, x3 = certificate.x0, certificate.x1, certificate.x2, certificate.x3
    if not all(0.0 < x < 1.0 for x in (x0, x1, x2, x3)):
        return False
    checks = (
        abs(x1 - (1.0 - 1.0 / u)) <= Tolerances.SIMPLEX_SUM,
        abs(_log_space_map(u, v, x0) - x1) <= tol,
        abs(_log_space_map(u, v, x1) - x2) <= tol,
        abs(_log_space_map(u, v, x2) - x3) <= tol,
        x3 < x0 < x1,
    )
    return all(checks)


def permute_to_canonical(spec: MarketSpec) -> Tuple[MarketSpec, bool, float]:
    """Swap the two coordinates when beta_inf > 1/2. Returns (spec, permuted, beta_inf)."""
    beta_inf = beta_infinity(spec)
    if beta_inf > 0.5:
        swapped = permute_coordinates(spec, [1, 0])
        beta_inf = beta_infinity(swapped)
        logger.info(LogMessages.COORDINATES_PERMUTED.format(beta_inf=beta_inf))
        return swapped, True, beta_inf
    return spec, False, beta_inf


def _certified(spec: MarketSpec, eta: float, L: float) -> bool:
    try:
        return isinstance(period3_certificate(alpha_beta(spec, eta, L)), Period3Certificate)
    except PreconditionError:
        return False


def carrying_capacity(spec: MarketSpec, eta: float, L_min: float, L_max: float,
                      tol: float = ChaosDefaults.CAPACITY_TOL) -> CarryingCapacity:
    """
    Bisect for the smallest L in [L_min, L_max] at which the period-3 certificate succeeds, after
    permuting coordinates so that beta_inf < 1/2.

    Raises:
        PreconditionError: L_min >= L_max or beta_inf = 1/2
        ChaosError: no certificate at L_max
    """
    if L_min >= L_max:
        raise PreconditionError(f"Need L_min < L_max, got [{L_min}, {L_max}]")
    canonical, permuted, beta_inf = permute_to_canonical(spec)
    if abs(beta_inf - 0.5) <= Tolerances.SYMMETRY:
        raise PreconditionError("beta_inf = 1/2: the period-3 construction needs beta_inf < 1/2")

    if not _certified(canonical, eta, L_max):
        raise ChaosError(f"No period-3 certificate at L_max = {L_max}; try a larger L_max")

    if _certified(canonical, eta, L_min):
        value = float(L_min)
    else:
        lo, hi = float(L_min), float(L_max)
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if _certified(canonical, eta, mid):
                hi = mid
            else:
                lo = mid
        value = hi

    grid = np.linspace(value, L_max, ChaosDefaults.MONOTONE_GRID)
    failures = [float(L) for L in grid if not _certified(canonical, eta, float(L))]
    if failures:
        logger.warning(LogMessages.CAPACITY_NOT_MONOTONE.format(value=value, failures=failures))
    logger.info(LogMessages.CAPACITY_FOUND.format(value=value, eta=eta))
    return CarryingCapacity(value=value, eta=float(eta), permuted=permuted, beta_inf=beta_inf,
                            monotone=not failures, failures_above=failures)


def _check_interior(x: float, name: str = "x0") -> None:
    if not 0.0 < x < 1.0:
        raise PreconditionError(f"{name} must lie in (0, 1), got {x}")


def lyapunov_exponent(params: ReducedMapParams, x0: float,
                      burn_in: int = ChaosDefaults.LYAPUNOV_BURN_IN,
                      iters: int = ChaosDefaults.LYAPUNOV_ITERS) -> float:
    """
    Orbit average of ln|f'(x_t)| after burn_in iterations.

    Raises:
        PreconditionError: x0 not interior or iters < 1000
        ChaosError: the orbit reaches an endpoint
    """
    _check_interior(x0)
    if iters < ChaosDefaults.MIN_HORIZON:
        raise PreconditionError(f"iters must be at least {ChaosDefaults.MIN_HORIZON}, got {iters}")

    floor = ChaosDefaults.DEGENERATE_ORBIT
    x = x0
    for _ in range(burn_in):
        x = reduced_map(params, x)
    total = 0.0
    for step in range(iters):
        if x < floor or 1.0 - x < floor:
            raise ChaosError(f"Degenerate orbit: x = {x!r} reached an endpoint at step {burn_in + step}")
        total += math.log(max(abs(map_derivative(params, x)), floor))
        x = reduced_map(params, x)
    return total / iters


def _scan_cell(task):
    spec, eta, L, x0, burn_in, samples, lyapunov_iters = task
    params = alpha_beta(spec, eta, L)
    x = x0
    for _ in range(burn_in):
        x = reduced_map(params, x)
    lyapunov = lyapunov_exponent(params, x0, burn_in, lyapunov_iters)
    rows = []
    for index in range(samples):
        x = reduced_map(params, x)
        rows.append((float(L), params.u, params.v, index, x, lyapunov))
    return rows


def bifurcation_scan(spec: MarketSpec, eta: float, L_grid: Sequence[float],
                     x0: float = 0.2,
                     burn_in: int = ChaosDefaults.BIFURCATION_BURN_IN,
                     samples: int = ChaosDefaults.BIFURCATION_SAMPLES,
                     lyapunov_iters: int = ChaosDefaults.LYAPUNOV_ITERS,
                     workers: int = 1) -> List[Tuple[float, float, float, int, float, float]]:
    """
    Rows (L, alpha, beta, sample_index, x, lyapunov) for every L in the grid, in grid order.
    With workers > 1 the cells run in a process pool.
    """
    _check_interior(x0)
    tasks = [(spec, eta, float(L), x0, burn_in, samples, lyapunov_iters) for L in L_grid]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            cells = list(executor.map(_scan_cell, tasks))
    else:
        cells = [_scan_cell(task) for task in tasks]
    rows = [row for cell in cells for row in cell]
    logger.info(LogMessages.SCAN_DONE.format(cells=len(cells), rows=len(rows)))
    return rows


def li_yorke_pair_scan(params: ReducedMapParams, x: float, x_prime: float,
                       horizon: int, burn_in: int = 0) -> Tuple[float, float]:
    """
    Finite-horizon proxy for a Li-Yorke pair: min and max of |f^t(x) - f^t(x')| over
    burn_in <= t <= horizon. A diagnostic, not a proof.

    With the default burn_in = 0 the window starts at t = 0, so max_gap is at least |x - x'|.
    Pass a burn_in to read the tail of a convergent pair, e.g. (u, v) = (0.3, 0.7) with
    x = 0.2, x' = 0.5 gives max_gap below 1e-6 for horizon 10000 and burn_in 5000.
    """
    _check_interior(x, "x")
    _check_interior(x_prime, "x_prime")
    if x == x_prime:
        raise PreconditionError("x and x_prime must differ")
    if horizon < ChaosDefaults.MIN_HORIZON:
        raise PreconditionError(f"horizon must be at least {ChaosDefaults.MIN_HORIZON}, got {horizon}")
    if not 0 <= burn_in <= horizon:
        raise PreconditionError(f"burn_in must lie in [0, horizon], got {burn_in}")

    min_gap, max_gap = math.inf, 0.0
    a, b = x, x_prime
    for t in range(horizon + 1):
        if t >= burn_in:
            gap = abs(a - b)
            min_gap = min(min_gap, gap)
            max_gap = max(max_gap, gap)
        a = reduced_map(params, a)
        b = reduced_map(params, b)
    return min_gap, max_gap
