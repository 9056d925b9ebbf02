"""
Potential function, performative stable points and the learning-rate bound that guarantees convergence.
"""

import itertools
import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from numpy.typing import ArrayLike, NDArray

from constants import LogMessages, SolverDefaults, Tolerances
from model import (
    ConvergenceError,
    MarketSpec,
    ModelProfile,
    PreconditionError,
    as_profile,
    grad_profile,
    uniform_profile,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class HessianReport:
    matrix: NDArray[np.float64]
    positive_definite: bool
    min_eigenvalue: float


@dataclass(frozen=True, eq=False)
class StablePointResult:
    """Outcome of find_stable_point, certified by the KKT residual."""
    theta_star: ModelProfile
    kkt_residual: float
    supports: List[Tuple[int, ...]]
    proper: bool
    potential_value: float
    iterations: int = 0


@dataclass(frozen=True)
class SafeRateReport:
    """
    Constants C1..C4 and the learning rate eta_star below which the discrete dynamics are
    guaranteed to converge. The bound is sufficient, not necessary.
    """
    C1: float
    C2: float
    C3: float
    C4: float
    eta_star: float
    R_eta: float
    eta_first_order: float
    max_abs_grad: float
    max_xi_l1_bound: float
    max_grad_l1_bound: float
    n: int
    d: int
    min_lambda: float
    max_lambda: float
    sum_lambda: float

    def satisfies_bounds(self, eta: float) -> bool:
        """Substitute eta into the three defining inequalities."""
        first = eta * self.max_abs_grad <= 0.5
        second = eta * self.n * self.d * self.C3 * self.max_xi_l1_bound <= 1.0
        rhs = (self.min_lambda ** 2 / (16.0 * self.sum_lambda)) * min(
            4.0 / (self.C3 * self.max_lambda * self.max_grad_l1_bound),
            1.0 / (self.d ** 2 * self.C4),
        )
        third = self.R_eta ** 2 * eta ** 3 < rhs
        return bool(first and second and third)


def potential(spec: MarketSpec, profile: ArrayLike) -> float:
    """Phi = s^T A s + sum_i lambda_i theta^i^T A theta^i - 2 b^T s, with s = sum_i lambda_i theta^i."""
    profile = as_profile(spec, profile)
    s = spec.lam @ profile
    own = np.einsum('ik,kl,il->i', profile, spec.A, profile)
    return float(s @ spec.A @ s + spec.lam @ own - 2.0 * spec.b @ s)


def potential_gradient(spec: MarketSpec, profile: ArrayLike) -> NDArray[np.float64]:
    """Block i of grad Phi is lambda_i g^i."""
    return spec.lam[:, None] * grad_profile(spec, profile).grads


def potential_hessian(spec: MarketSpec) -> HessianReport:
    """Hessian of Phi as the Kronecker product of 2(lambda lambda^T + diag(lambda)) with A."""
    lam = spec.lam
    influence = 2.0 * (np.outer(lam, lam) + np.diag(lam))
    matrix = np.kron(influence, spec.A)
    min_eigenvalue = float(np.linalg.eigvalsh(matrix)[0])
    return HessianReport(matrix=matrix, positive_definite=min_eigenvalue > 0, min_eigenvalue=min_eigenvalue)


def supports(profile: ArrayLike, support_eps: float = Tolerances.SUPPORT_EPS) -> List[Tuple[int, ...]]:
    """S_i = {k : theta^i_k > support_eps} for every agent."""
    profile = np.asarray(profile, dtype=float)
    return [tuple(int(k) for k in np.flatnonzero(row > support_eps)) for row in profile]


def kkt_residual(spec: MarketSpec, profile: ArrayLike, support_eps: float = Tolerances.SUPPORT_EPS) -> float:
    """
    Max over supported coordinates of |g^i_k - gbar^i| plus max over unsupported coordinates
    of max(0, gbar^i - g^i_l). Zero exactly on stable points.
    """
    profile = as_profile(spec, profile)
    gp = grad_profile(spec, profile)
    gaps = gp.grads - gp.averages[:, None]
    on_support = profile > support_eps
    equality = float(np.max(np.abs(gaps), where=on_support, initial=0.0))
    inequality = float(np.max(np.maximum(0.0, -gaps), where=~on_support, initial=0.0))
    return equality + inequality


def _gradient_gap(grads: np.ndarray, on_support: np.ndarray) -> np.ndarray:
    """Per-agent max_{k in S_i} g_k - min_l g_l."""
    top = np.max(grads, axis=1, where=on_support, initial=-np.inf)
    return np.maximum(0.0, top - grads.min(axis=1))


def stability_gap(spec: MarketSpec, profile: ArrayLike, support_eps: float = Tolerances.SUPPORT_EPS) -> float:
    """How far a supported coordinate's gradient exceeds the agent's smallest gradient coordinate."""
    profile = as_profile(spec, profile)
    grads = grad_profile(spec, profile).grads
    return float(np.max(_gradient_gap(grads, profile > support_eps)))


def project_rows_to_simplex(values: np.ndarray) -> np.ndarray:
    """Euclidean projection of every row onto the probability simplex (sort-based)."""
    rows, width = values.shape
    ordered = -np.sort(-values, axis=1)
    cumulative = np.cumsum(ordered, axis=1) - 1.0
    index = np.arange(1, width + 1)
    condition = ordered - cumulative / index > 0
    rho = width - 1 - np.argmax(condition[:, ::-1], axis=1)
    tau = cumulative[np.arange(rows), rho] / (rho + 1.0)
    projected = np.maximum(values - tau[:, None], 0.0)
    return projected / projected.sum(axis=1, keepdims=True)


def find_stable_point(spec: MarketSpec,
                      tol: float = SolverDefaults.TOL,
                      max_iters: int = SolverDefaults.MAX_ITERS,
                      initial: Optional[ArrayLike] = None) -> StablePointResult:
    """
    Minimise the potential over the product of simplices by projected gradient descent.

    Raises:
        PreconditionError: tol is not positive
        ConvergenceError: residual still above tol after max_iters iterations
    """
    if tol <= 0:
        raise PreconditionError(f"tol must be positive, got {tol}")

    hessian = potential_hessian(spec).matrix
    step = 1.0 / (2.0 * float(np.max(np.sum(np.abs(hessian), axis=1))))
    profile = uniform_profile(spec) if initial is None else project_rows_to_simplex(as_profile(spec, initial))

    residual = kkt_residual(spec, profile)
    iteration = 0
    while residual > tol:
        if iteration >= max_iters:
            logger.error(LogMessages.SOLVER_FAILED.format(iterations=iteration, residual=residual))
            raise ConvergenceError(
                f"Stable-point solver did not reach tol={tol:g} in {max_iters} iterations",
                last_iterate=profile, residual=residual, iterations=iteration)
        profile = project_rows_to_simplex(profile - step * potential_gradient(spec, profile))
        residual = kkt_residual(spec, profile)
        iteration += 1
        if iteration % SolverDefaults.LOG_EVERY == 0:
            logger.debug(LogMessages.SOLVER_PROGRESS.format(iteration=iteration, residual=residual))

    logger.info(LogMessages.SOLVER_CONVERGED.format(iterations=iteration, residual=residual))
    return StablePointResult(
        theta_star=profile,
        kkt_residual=residual,
        supports=supports(profile),
        proper=is_proper(spec, profile),
        potential_value=potential(spec, profile),
        iterations=iteration,
    )


def is_proper(spec: MarketSpec, profile: ArrayLike,
              margin: float = Tolerances.PROPERNESS_MARGIN,
              support_eps: float = Tolerances.SUPPORT_EPS) -> bool:
    """Off-support gradients exceed the average gradient by more than `margin` for every agent."""
    profile = as_profile(spec, profile)
    gp = grad_profile(spec, profile)
    off_support = profile <= support_eps
    gaps = gp.grads - gp.averages[:, None]
    return bool(np.all(gaps[off_support] > margin))


def check_stable(spec: MarketSpec, profile: ArrayLike, tol: float) -> Tuple[bool, float]:
    """Return (stability_gap <= tol, stability_gap)."""
    residual = stability_gap(spec, profile)
    return residual <= tol, residual


def check_optimal(spec: MarketSpec, profile: ArrayLike, tol: float) -> bool:
    """
    KKT test on the total-loss objective, using the scaled gradient (1 + n lambda_i) g^i.
    The per-agent gap is measured back in unscaled units, so this agrees with check_stable.
    """
    profile = as_profile(spec, profile)
    scale = 1.0 + spec.n * spec.lam
    scaled = scale[:, None] * grad_profile(spec, profile).grads
    gaps = _gradient_gap(scaled, profile > Tolerances.SUPPORT_EPS) / scale
    return bool(np.max(gaps) <= tol)


def max_abs_gradient(spec: MarketSpec) -> float:
    """
    Exact max of |g^i_k| over all profiles. g^i_k = 2[(1+lambda_i) A theta^i + sum_{j!=i} lambda_j A theta^j]_k - 2b_k
    is separable across agents with positive weights, so its extremes sit at (1+L_n) times the
    row-wise extremes of A.
    """
    scale = 2.0 * (1.0 + spec.L_n)
    upper = scale * spec.A.max(axis=1) - 2.0 * spec.b
    lower = scale * spec.A.min(axis=1) - 2.0 * spec.b
    return float(max(np.max(np.abs(upper)), np.max(np.abs(lower))))


def vertex_enumeration_max_abs_gradient(spec: MarketSpec,
                                        limit: int = SolverDefaults.MAX_VERTEX_COMBINATIONS) -> float:
    """Brute-force max|g| over every vertex profile (d**n combinations)."""
    combinations = spec.d ** spec.n
    if combinations > limit:
        raise PreconditionError(f"{combinations} vertex profiles exceed the enumeration limit {limit}")
    eye = np.eye(spec.d)
    best = 0.0
    for vertices in itertools.product(range(spec.d), repeat=spec.n):
        grads = grad_profile(spec, eye[list(vertices)]).grads
        best = max(best, float(np.max(np.abs(grads))))
    return best


def safe_learning_rate(spec: MarketSpec, theta_star: ArrayLike, R_eta: float = SolverDefaults.R_ETA) -> SafeRateReport:
    """
    Largest eta_star satisfying the first-order, discretisation and potential-descent bounds.

    Raises:
        PreconditionError: R_eta < 1 or theta_star has an empty support
    """
    if R_eta < 1:
        raise PreconditionError(f"R_eta must be at least 1, got {R_eta}")
    theta_star = as_profile(spec, theta_star)
    on_support = theta_star > Tolerances.SUPPORT_EPS
    if not np.all(on_support.any(axis=1)):
        raise PreconditionError("theta_star has an agent with empty support")

    n, d = spec.n, spec.d
    max_g = max_abs_gradient(spec)
    C1 = max_g / 4.0
    C2 = 2.0 / float(np.min(theta_star[on_support]))
    C3 = math.e * d * max(C1, C2)
    C4 = float(np.max(spec.lam * (spec.lam + 1.0)) * np.max(spec.A))
    max_xi = 2.0 * n * d * max_g
    max_grad = n * d * max_g

    eta1 = 1.0 / (2.0 * max_g)
    eta2 = 1.0 / (n * d * C3 * max_xi)
    lam_min, lam_max, lam_sum = float(spec.lam.min()), float(spec.lam.max()), spec.L_n
    rhs = (lam_min ** 2 / (16.0 * lam_sum)) * min(4.0 / (C3 * lam_max * max_grad), 1.0 / (d ** 2 * C4))
    eta3 = (rhs / R_eta ** 2) ** (1.0 / 3.0) * SolverDefaults.ETA_SAFETY

    return SafeRateReport(
        C1=C1, C2=C2, C3=C3, C4=C4,
        eta_star=min(eta1, eta2, eta3),
        R_eta=float(R_eta),
        eta_first_order=eta1,
        max_abs_grad=max_g,
        max_xi_l1_bound=max_xi,
        max_grad_l1_bound=max_grad,
        n=n, d=d,
        min_lambda=lam_min, max_lambda=lam_max, sum_lambda=lam_sum,
    )
