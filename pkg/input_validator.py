"""
Input validation module for the performative prediction simulator.
Checks market parameters, model profiles and learning rates before any computation runs.
"""

import logging
import numpy as np
from constants import Tolerances, ValidationMessages

logger = logging.getLogger(__name__)


class InputValidator:
    """Handle validation of market, profile and rate inputs."""

    def __init__(self):
        # Structural limits
        self.MIN_DIMENSION = 2
        self.MIN_AGENTS = 1

        # Numerical tolerances
        self.SYMMETRY_TOL = Tolerances.SYMMETRY
        self.SIMPLEX_TOL = Tolerances.SIMPLEX_SUM

    def _new_result(self):
        return {
            'is_valid': True,
            'errors': [],
            'warnings': []
        }

    def _check_vector(self, result, name, values, expected):
        """Append length and finiteness errors for a 1-D parameter."""
        if values.ndim != 1 or values.shape[0] != expected:
            result['errors'].append(ValidationMessages.LENGTH_MISMATCH.format(
                name=name, expected=expected, actual=values.size))
            return False
        if not np.all(np.isfinite(values)):
            result['errors'].append(ValidationMessages.NOT_FINITE.format(name=name))
            return False
        return True

    def validate_market(self, d, n, lam, theta0, A, c, sigma0_sq):
        """
        Validate the parameters of a location-scale market.

        Args:
            d (int): Feature dimension
            n (int): Number of agents
            lam (np.ndarray): Influence parameters, one per agent
            theta0 (np.ndarray): Base model
            A (np.ndarray): Second moment matrix E[x x^T]
            c (np.ndarray): Cross moment E[x0 x]
            sigma0_sq (float): Noise second moment E[x0^2]

        Returns:
            dict: {
                'is_valid': bool,
                'errors': list,
                'warnings': list
            }
        """
        result = self._new_result()

        if d < self.MIN_DIMENSION:
            result['errors'].append(ValidationMessages.DIMENSION_TOO_SMALL.format(d=d))
        if n < self.MIN_AGENTS:
            result['errors'].append(ValidationMessages.AGENT_COUNT_TOO_SMALL.format(n=n))
        if result['errors']:
            result['is_valid'] = False
            return result

        if self._check_vector(result, "lambda", lam, n) and not np.all(lam > 0):
            result['errors'].append(ValidationMessages.LAMBDA_NOT_POSITIVE)
        self._check_vector(result, "theta0", theta0, d)
        self._check_vector(result, "c", c, d)

        if not np.isfinite(sigma0_sq) or sigma0_sq < 0:
            result['errors'].append(ValidationMessages.SIGMA_NEGATIVE.format(value=sigma0_sq))

        if A.shape != (d, d):
            result['errors'].append(ValidationMessages.MATRIX_SHAPE.format(d=d, shape=A.shape))
        elif not np.all(np.isfinite(A)):
            result['errors'].append(ValidationMessages.NOT_FINITE.format(name="A"))
        else:
            asymmetry = float(np.max(np.abs(A - A.T)))
            if asymmetry > self.SYMMETRY_TOL:
                result['errors'].append(ValidationMessages.A_NOT_SYMMETRIC.format(asymmetry=asymmetry))
            else:
                try:
                    np.linalg.cholesky(A)
                except np.linalg.LinAlgError:
                    result['errors'].append(ValidationMessages.A_NOT_PD)

        result['is_valid'] = len(result['errors']) == 0
        return result

    def validate_profile(self, profile, n, d, require_interior=False):
        """
        Validate a model profile: shape (n, d), rows on the probability simplex.

        Boundary coordinates are reported as warnings unless require_interior is set.
        """
        result = self._new_result()
        profile = np.asarray(profile, dtype=float)

        if profile.shape != (n, d):
            result['errors'].append(ValidationMessages.PROFILE_SHAPE.format(n=n, d=d, shape=profile.shape))
            result['is_valid'] = False
            return result

        if not np.all(np.isfinite(profile)):
            result['errors'].append(ValidationMessages.NOT_FINITE.format(name="profile"))
            result['is_valid'] = False
            return result

        for agent, row in enumerate(profile):
            if np.any(row < 0):
                result['errors'].append(ValidationMessages.PROFILE_NEGATIVE.format(agent=agent))
            total = float(row.sum())
            if abs(total - 1.0) > self.SIMPLEX_TOL:
                result['errors'].append(ValidationMessages.PROFILE_SUM.format(agent=agent, total=total))
            zeros = [int(k) for k in np.flatnonzero(row == 0)]
            if zeros:
                message = ValidationMessages.PROFILE_BOUNDARY.format(agent=agent, coords=zeros)
                if require_interior:
                    result['errors'].append(message)
                else:
                    result['warnings'].append(message)

        result['is_valid'] = len(result['errors']) == 0
        return result

    def validate_rates(self, eta, n):
        """
        Validate a learning-rate profile.

        Returns:
            tuple: (is_valid: bool, errors: list)
        """
        errors = []
        eta = np.asarray(eta, dtype=float)

        if eta.ndim != 1 or eta.shape[0] != n:
            errors.append(ValidationMessages.RATES_LENGTH.format(n=n, actual=eta.size))
            return False, errors

        if not np.all(np.isfinite(eta)) or not np.all(eta > 0):
            errors.append(ValidationMessages.RATES_NOT_POSITIVE)

        return len(errors) == 0, errors
