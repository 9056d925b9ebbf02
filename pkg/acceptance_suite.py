#!/usr/bin/env python3
"""
Acceptance suite for the performative prediction simulator.
Runs the figure recipes and the randomized property checks, prints a report and saves the results as JSON.
"""
import argparse
import json
import os
import sys
from datetime import datetime

import numpy as np

# Add the current directory to the path to import modules
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from chaos import (
    CertificateFailure,
    Period3Certificate,
    ReducedMapParams,
    alpha_beta,
    carrying_capacity,
    lyapunov_exponent,
    period3_certificate,
    reduced_map,
    verify_certificate,
)
from config_manager import ConfigManager
from dynamics import LearningRates, eg_step, integrate_ode, potential_decay_bound, potential_rate, simulate
from equilibrium import (
    check_optimal,
    check_stable,
    find_stable_point,
    potential_gradient,
    potential_hessian,
    safe_learning_rate,
)
from model import MarketSpec, decoupled_loss, gradient, grad_profile, uniform_profile, xi
from recipe_registry import get_recipe_registry
from stochastic import run_seed_ensemble

EXPECTED_STABLE_POINT = 0.7
NOISY_PANEL_TOL = 0.05
PROPERTY_CASES = 100


# Random market generators (shared with the pytest fixtures)

def random_market(rng, n, d, sigma0_sq=1.0):
    """Generic market: A = M M^T / d + I, arbitrary theta0 and c."""
    M = rng.normal(size=(d, d))
    A = M @ M.T / d + np.eye(d)
    return MarketSpec(lam=rng.uniform(0.2, 1.5, n), theta0=rng.normal(size=d), A=A,
                      c=rng.normal(scale=0.5, size=d), sigma0_sq=sigma0_sq)


def interior_market(rng, n, d):
    """
    Market whose unique stable point is a known interior symmetric profile.
    theta0 = 0 and c = b = (1 + L) A theta*, so every gradient is flat at theta*.
    """
    M = rng.normal(size=(d, d))
    A = M @ M.T / d + np.eye(d)
    lam = rng.uniform(0.2, 1.5, n)
    weights = rng.uniform(1.0, 2.0, d)
    theta_star = weights / weights.sum()
    b = (1.0 + lam.sum()) * A @ theta_star
    spec = MarketSpec(lam=lam, theta0=np.zeros(d), A=A, c=b)
    return spec, np.tile(theta_star, (n, 1))


def two_feature_market(rng, n, beta_range=(0.2, 0.8)):
    """Diagonally dominant d = 2 market whose reduced-map fixed point beta lies in beta_range."""
    a11, a22 = rng.uniform(1.0, 5.0, 2)
    a12 = rng.uniform(-0.4, 0.4) * min(a11, a22)
    A = np.array([[a11, a12], [a12, a22]])
    lam = rng.uniform(0.2, 1.5, n)
    scale = 1.0 + lam.sum()
    beta = rng.uniform(*beta_range)
    denominator = a11 - 2.0 * a12 + a22
    c = np.array([scale * (beta * denominator - (a22 - a12)), 0.0])
    return MarketSpec(lam=lam, theta0=np.zeros(2), A=A, c=c), beta


def random_profile(rng, n, d, boundary=False):
    profile = rng.dirichlet(np.ones(d), size=n)
    if boundary:
        profile[:, 0] = 0.0
        profile = profile / profile.sum(axis=1, keepdims=True)
    return profile


class AcceptanceSuite:
    """Unified runner for the acceptance checks."""

    def __init__(self, seed=20240601, results_dir=None):
        self.registry = get_recipe_registry()
        self.config_manager = ConfigManager()
        self.seed = seed
        self.results_dir = results_dir
        self.test_results = []
        self.failed_tests = []
        self.checks = self._create_checks()

    # Recipe helpers

    def _recipe(self, name):
        config = self.registry.get_recipe(name)
        return config, self.config_manager.resolve_market(config)

    def _recipe_trajectory(self, name):
        config, spec = self._recipe(name)
        section = config.simulate
        initial = np.tile([section.p0, 1.0 - section.p0], (spec.n, 1))
        return simulate(spec, initial, LearningRates.uniform(spec.n, section.eta), section.T)

    def _recipe_path(self, name):
        """p_t of a deterministic recipe's simulate section."""
        return self._recipe_trajectory(name).coordinate_series(0, 0)

    def _recipe_ensemble(self, name):
        config, spec = self._recipe(name)
        section = config.stochastic
        initial = np.tile([section.p0, 1.0 - section.p0], (spec.n, 1))
        runs = run_seed_ensemble(spec, initial, LearningRates.uniform(spec.n, section.eta), section.T,
                                 section.m, section.seed_list(), workers=section.workers)
        return [run.coordinate_series(0, 0) for run in runs]

    # Criteria

    def check_stable_point(self):
        config, spec = self._recipe("sec5_stable_point")
        result = find_stable_point(spec, tol=config.stable_point.tol, max_iters=config.stable_point.max_iters)
        error = abs(result.theta_star[0, 0] - EXPECTED_STABLE_POINT)
        return error <= 1e-6 and result.proper, {"theta_star": result.theta_star.tolist(), "error": error,
                                                 "proper": result.proper}

    def check_alpha_beta(self):
        _, spec = self._recipe("sec5_stable_point")
        worst = 0.0
        for eta in (0.001, 0.05):
            for L in (1.4, 14.0):
                params = alpha_beta(spec, eta, L)
                expected = 20.0 * eta * (1.0 + L)
                worst = max(worst, abs(params.u - expected) / expected, abs(params.v - EXPECTED_STABLE_POINT))
        return worst <= 1e-14, {"worst_error": worst}

    def check_convergent_panels(self):
        error_a = abs(self._recipe_path("fig1a")[-1] - EXPECTED_STABLE_POINT)
        error_b = abs(self._recipe_path("fig1b")[-1] - EXPECTED_STABLE_POINT)
        return error_a <= 0.01 and error_b <= 1e-4, {"fig1a_error": error_a, "fig1b_error": error_b}

    def check_chaotic_panel(self):
        path = self._recipe_path("fig1c")
        tail_gap = float(np.max(np.abs(path[90:101] - EXPECTED_STABLE_POINT)))
        lyapunov = lyapunov_exponent(ReducedMapParams(u=15.0, v=0.7), 0.2, iters=10000)
        return tail_gap > 0.05 and lyapunov > 0.1, {"tail_gap": tail_gap, "lyapunov": lyapunov}

    def check_stochastic_panels(self):
        finals_d = [path[-1] for path in self._recipe_ensemble("fig1d")]
        finals_e = [path[-1] for path in self._recipe_ensemble("fig1e")]
        tails_f = [np.max(np.abs(path[90:101] - EXPECTED_STABLE_POINT)) for path in self._recipe_ensemble("fig1f")]
        converged_d = sum(abs(p - EXPECTED_STABLE_POINT) <= NOISY_PANEL_TOL for p in finals_d)
        converged_e = sum(abs(p - EXPECTED_STABLE_POINT) <= NOISY_PANEL_TOL for p in finals_e)
        chaotic_f = sum(gap > 0.05 for gap in tails_f)
        details = {"fig1d_converged": int(converged_d), "fig1e_converged": int(converged_e),
                   "fig1f_non_convergent": int(chaotic_f), "runs": len(finals_d),
                   "tolerance": NOISY_PANEL_TOL}
        return converged_d >= 30 and converged_e >= 30 and chaotic_f >= 30, details

    def check_loss_curves(self):
        settling = self._recipe_trajectory("fig2a").loss_total
        dispersive = self._recipe_trajectory("fig2b").loss_total[50:]
        monotone = bool(np.all(np.diff(settling) <= 1e-9))
        spread = float(dispersive.max() - dispersive.min()) / float(dispersive.mean())
        return monotone and spread > 0.05, {"fig2a_monotone": monotone, "fig2b_relative_spread": spread}

    def check_period3(self):
        success = period3_certificate(ReducedMapParams(u=40.0, v=0.3))
        failure = period3_certificate(ReducedMapParams(u=15.0, v=0.3))
        config, spec = self._recipe("carrying_capacity")
        bounds = config.chaos.carrying_capacity
        capacity = carrying_capacity(spec, config.chaos.eta, bounds.L_min, bounds.L_max, tol=bounds.tol)
        certified = (isinstance(success, Period3Certificate) and verify_certificate(success)
                     and success.margins[2] <= 1e-10)
        failed = isinstance(failure, CertificateFailure) and failure.inequality == "period1"
        return certified and failed and 30.0 <= capacity.value <= 40.0, {
            "certified": certified, "period1_failure": failed, "carrying_capacity": capacity.value}

    def check_properties(self):
        rng = np.random.default_rng(self.seed)
        worst = {"gradient_fd": 0.0, "xi_row_sum": 0.0, "potential_gradient": 0.0, "hessian": 0.0,
                 "eg_fixed_point": 0.0, "reduced_map": 0.0, "map_symmetry": 0.0}
        disagreements = 0
        hessian_not_pd = 0
        simplex_violations = 0

        for case in range(PROPERTY_CASES):
            n, d = int(rng.integers(1, 4)), int(rng.integers(2, 5))
            spec = random_market(rng, n, d)
            profile = random_profile(rng, n, d, boundary=case % 4 == 0)
            predictive = rng.dirichlet(np.ones(d))

            # gradient vs central differences
            h = 1e-6
            analytic = gradient(spec, profile, predictive)
            numeric = np.array([(decoupled_loss(spec, profile, predictive + h * e)
                                 - decoupled_loss(spec, profile, predictive - h * e)) / (2 * h) for e in np.eye(d)])
            worst["gradient_fd"] = max(worst["gradient_fd"],
                                       np.linalg.norm(numeric - analytic) / max(np.linalg.norm(analytic), 1.0))

            worst["xi_row_sum"] = max(worst["xi_row_sum"], float(np.max(np.abs(xi(spec, profile).sum(axis=1)))))

            expected = spec.lam[:, None] * grad_profile(spec, profile).grads
            worst["potential_gradient"] = max(worst["potential_gradient"],
                                              float(np.max(np.abs(potential_gradient(spec, profile) - expected))))

            report = potential_hessian(spec)
            kron = np.kron(2.0 * (np.outer(spec.lam, spec.lam) + np.diag(spec.lam)), spec.A)
            worst["hessian"] = max(worst["hessian"], float(np.max(np.abs(report.matrix - kron))))
            hessian_not_pd += int(not report.positive_definite)

            if check_stable(spec, profile, 1e-8)[0] != check_optimal(spec, profile, 1e-8):
                disagreements += 1
            if case % 5 == 0:
                stable = find_stable_point(spec).theta_star
                if not (check_stable(spec, stable, 1e-8)[0] and check_optimal(spec, stable, 1e-8)):
                    disagreements += 1

            rates = LearningRates(rng.uniform(0.01, 0.2, n))
            stepped = eg_step(spec, profile, rates)
            if np.any(stepped < 0) or np.max(np.abs(stepped.sum(axis=1) - 1.0)) > 1e-12:
                simplex_violations += 1
            interior_spec, theta_star = interior_market(rng, n, d)
            worst["eg_fixed_point"] = max(worst["eg_fixed_point"],
                                          float(np.max(np.abs(eg_step(interior_spec, theta_star, rates) - theta_star))))

            worst["reduced_map"] = max(worst["reduced_map"], self._reduced_map_gap(rng))

            u, v, x = rng.uniform(0.1, 60.0), rng.uniform(0.05, 0.95), rng.uniform(0.0, 1.0)
            mirrored = reduced_map(ReducedMapParams(u=u, v=1.0 - v), 1.0 - x)
            worst["map_symmetry"] = max(worst["map_symmetry"],
                                        abs(mirrored - (1.0 - reduced_map(ReducedMapParams(u=u, v=v), x))))

        passed = (worst["gradient_fd"] <= 1e-6 and worst["xi_row_sum"] <= 1e-10
                  and worst["potential_gradient"] <= 1e-9 and worst["hessian"] == 0.0 and hessian_not_pd == 0
                  and disagreements == 0 and simplex_violations == 0 and worst["eg_fixed_point"] <= 1e-12
                  and worst["reduced_map"] <= 1e-12 and worst["map_symmetry"] <= 1e-12)
        details = {key: float(value) for key, value in worst.items()}
        details.update(cases=PROPERTY_CASES, stability_optimality_disagreements=disagreements,
                       hessian_not_pd=hessian_not_pd, simplex_violations=simplex_violations)
        return passed, details

    def _reduced_map_gap(self, rng, steps=100):
        """Largest gap between symmetric full dynamics and the reduced map, in the monotone regime."""
        n = int(rng.integers(1, 4))
        spec, _ = two_feature_market(rng, n)
        A = spec.A
        denominator = A[0, 0] - A[0, 1] - A[1, 0] + A[1, 1]
        alpha = rng.uniform(0.2, 4.0)
        eta = alpha / (2.0 * (1.0 + spec.L_n) * denominator)
        params = alpha_beta(spec, eta, spec.L_n)
        x = rng.uniform(0.1, 0.9)
        profile = np.tile([x, 1.0 - x], (n, 1))
        rates = LearningRates.uniform(n, eta)
        gap = 0.0
        for _ in range(steps):
            profile = eg_step(spec, profile, rates)
            x = reduced_map(params, x)
            gap = max(gap, float(np.max(np.abs(profile[:, 0] - x))))
        return gap

    def check_ode_descent(self):
        rng = np.random.default_rng(self.seed + 8)
        increases = 0
        bound_violations = 0
        for _ in range(10):
            spec, _ = interior_market(rng, 2, 3)
            rates = LearningRates(rng.uniform(0.5, 1.5, 2))
            trajectory = integrate_ode(spec, random_profile(rng, 2, 3), rates, t_end=2.0, dt=1e-3,
                                       record_every=20)
            phi = trajectory.phi
            increases += int(np.sum(np.diff(phi) > 1e-10 * np.maximum(1.0, np.abs(phi[:-1]))))
            for state in trajectory.states[1:101]:
                rate = potential_rate(spec, state, rates)
                tight, simplified = potential_decay_bound(spec, state, rates)
                if rate > tight + 1e-6 or tight > simplified + 1e-6:
                    bound_violations += 1
        return increases == 0 and bound_violations == 0, {"phi_increases": increases,
                                                          "bound_violations": bound_violations}

    def check_discrete_descent(self):
        rng = np.random.default_rng(self.seed + 9)
        increases = 0
        worst_distance = 0.0
        for _ in range(10):
            spec, theta_star = interior_market(rng, 2, 3)
            report = safe_learning_rate(spec, theta_star)
            start = uniform_profile(spec)
            slow = simulate(spec, start, LearningRates.uniform(spec.n, report.eta_star), 1000)
            increases += int(np.sum(np.diff(slow.phi) > 1e-9 * np.maximum(1.0, np.abs(slow.phi[:-1]))))
            fast = simulate(spec, start, LearningRates.uniform(spec.n, report.eta_first_order), 1000)
            worst_distance = max(worst_distance, float(np.max(np.abs(fast.final_state - theta_star).sum(axis=1))))
        return increases == 0 and worst_distance <= 1e-3, {"phi_increases": increases,
                                                           "worst_l1_distance": worst_distance}

    def check_brute_force(self):
        rng = np.random.default_rng(self.seed + 10)
        grid = np.linspace(0.0, 1.0, 2001)
        worst = 0.0
        for _ in range(20):
            spec = random_market(rng, 2, 2).with_lambda(rng.uniform(0.5, 1.5, 2))
            solver = find_stable_point(spec).theta_star
            best_value, best_point = np.inf, None
            for start in range(0, grid.size, 256):
                p1 = grid[start:start + 256][:, None]
                p2 = grid[None, :]
                values = self._grid_potential(spec, p1, p2)
                index = np.unravel_index(np.argmin(values), values.shape)
                if values[index] < best_value:
                    best_value, best_point = values[index], (p1[index[0], 0], p2[0, index[1]])
            worst = max(worst, abs(solver[0, 0] - best_point[0]), abs(solver[1, 0] - best_point[1]))
        return worst <= 1e-3, {"worst_coordinate_gap": worst, "markets": 20}

    def _grid_potential(self, spec, p1, p2):
        """Phi on a grid of d = 2, n = 2 profiles ((p1, 1 - p1), (p2, 1 - p2))."""
        (a, off), (_, e) = spec.A
        lam1, lam2 = spec.lam
        b1, b2 = spec.b

        def quad(x, y):
            return a * x * x + 2.0 * off * x * y + e * y * y

        s1 = lam1 * p1 + lam2 * p2
        s2 = lam1 * (1.0 - p1) + lam2 * (1.0 - p2)
        return (quad(s1, s2) + lam1 * quad(p1, 1.0 - p1) + lam2 * quad(p2, 1.0 - p2)
                - 2.0 * (b1 * s1 + b2 * s2))

    def _create_checks(self):
        """Each check names the criterion it covers and the recipes it reads."""
        return [
            {"criterion": 1, "name": "stable_point", "recipes": ["sec5_stable_point"],
             "description": "Stable point of the two-feature market is (0.7, 0.3) and proper",
             "run": self.check_stable_point},
            {"criterion": 2, "name": "alpha_beta", "recipes": ["sec5_stable_point"],
             "description": "alpha = 20 eta (1 + L) and beta = 0.7",
             "run": self.check_alpha_beta},
            {"criterion": 3, "name": "convergent_panels", "recipes": ["fig1a", "fig1b"],
             "description": "Small-rate and small-influence panels converge to 0.7",
             "run": self.check_convergent_panels},
            {"criterion": 4, "name": "chaotic_panel", "recipes": ["fig1c"],
             "description": "Large influence at eta = 0.05 does not converge; positive Lyapunov exponent",
             "run": self.check_chaotic_panel},
            {"criterion": 5, "name": "stochastic_panels", "recipes": ["fig1d", "fig1e", "fig1f"],
             "description": "Noisy-gradient panels keep their convergent or chaotic behaviour for 30 of 32 seeds",
             "run": self.check_stochastic_panels},
            {"criterion": 6, "name": "period3_certificate", "recipes": ["carrying_capacity"],
             "description": "Certificate at (40, 0.3), period1 failure at (15, 0.3), L* in [30, 40]",
             "run": self.check_period3},
            {"criterion": 7, "name": "property_suites", "recipes": [],
             "description": "Randomized gradient, drift, potential, Hessian, dynamics and map properties",
             "run": self.check_properties},
            {"criterion": 8, "name": "ode_descent", "recipes": [],
             "description": "Potential decreases along the ODE and respects the decay bound",
             "run": self.check_ode_descent},
            {"criterion": 9, "name": "discrete_descent", "recipes": [],
             "description": "Potential decreases at the safe rate; convergence at the first-order rate",
             "run": self.check_discrete_descent},
            {"criterion": 10, "name": "brute_force", "recipes": [],
             "description": "Solver agrees with grid minimisation of the potential",
             "run": self.check_brute_force},
            {"criterion": 11, "name": "loss_curves", "recipes": ["fig2a", "fig2b"],
             "description": "Total loss settles monotonically at the small rate and stays dispersed in the chaotic regime",
             "run": self.check_loss_curves},
        ]

    def run_check(self, check):
        """
        Single unified check runner.

        Returns:
            dict: Check result with all relevant information
        """
        start = datetime.now()
        try:
            passed, details = check["run"]()
            error = ""
        except Exception as e:
            passed, details, error = False, {}, f"Check execution error: {e}"
        return {
            "criterion": check["criterion"],
            "name": check["name"],
            "description": check["description"],
            "recipes": check["recipes"],
            "passed": bool(passed),
            "details": details,
            "error": error,
            "duration": (datetime.now() - start).total_seconds(),
        }

    def run_all_tests(self, recipe_filter=None, failed_only=False):
        """Run every check, or only those reading `recipe_filter`."""
        if recipe_filter:
            print(f"🧪 Starting Acceptance Suite for recipe: {recipe_filter}")
            if not self.registry.has_recipe(recipe_filter):
                print(f"❌ Recipe '{recipe_filter}' not found!")
                print("Available recipes:")
                for name in self.registry.get_recipe_names():
                    print(f"   - {name}")
                return []
            checks = [check for check in self.checks if recipe_filter in check["recipes"]]
        else:
            print("🧪 Starting Acceptance Suite")
            checks = self.checks
        print("=" * 70)

        start_time = datetime.now()
        for check in checks:
            result = self.run_check(check)
            if failed_only and result["passed"]:
                continue
            self.test_results.append(result)
            status = "✓" if result["passed"] else "✗"
            print(f"   {status} [{result['criterion']}] {result['name']} ({result['duration']:.2f}s)")
            if not result["passed"]:
                self.failed_tests.append(result)
                if result["error"]:
                    print(f"     Error: {result['error']}")
                else:
                    print(f"     Details: {result['details']}")

        duration = (datetime.now() - start_time).total_seconds()
        self.generate_summary_report(duration)
        return self.test_results

    def generate_summary_report(self, duration):
        total_tests = len(self.test_results)
        passed_tests = sum(1 for r in self.test_results if r["passed"])

        print("\n" + "=" * 70)
        print("📊 ACCEPTANCE SUMMARY REPORT")
        print("=" * 70)
        print(f"⏱  Total Duration: {duration:.2f} seconds")
        print(f"📈 Total Checks: {total_tests}")
        print(f"✅ Passed: {passed_tests}")
        print(f"❌ Failed: {len(self.failed_tests)}")
        if total_tests:
            print(f"📊 Success Rate: {(passed_tests / total_tests * 100):.1f}%")

        if self.failed_tests:
            print("\n🔍 DETAILED FAILURE REPORT:")
            print("-" * 50)
            for i, failure in enumerate(self.failed_tests, 1):
                print(f"\n{i}. [{failure['criterion']}] {failure['name']}")
                print(f"   Description: {failure['description']}")
                print(f"   Details: {failure['details']}")
                if failure["error"]:
                    print(f"   Error: {failure['error']}")

        self.save_results_to_file()

    def show_summary_only(self):
        """Show the checks and the recipes they read without running anything."""
        print("📊 ACCEPTANCE COVERAGE SUMMARY")
        print("=" * 50)
        print(f"🔍 Available Recipes: {len(self.registry.get_recipe_names())}")
        for name in self.registry.get_recipe_names():
            print(f"   • {name}: {self.registry.get_description(name)}")
        print(f"\n📋 Checks: {len(self.checks)}")
        for check in self.checks:
            recipes = ", ".join(check["recipes"]) or "randomized"
            print(f"   [{check['criterion']}] {check['name']} ({recipes})")
        return len(self.checks)

    def save_results_to_file(self):
        """Save detailed results to a timestamped JSON file."""
        timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
        filename = f"acceptance_results_{timestamp}.json"
        if self.results_dir:
            filename = os.path.join(self.results_dir, filename)

        report_data = {
            "timestamp": datetime.now().isoformat(),
            "seed": self.seed,
            "summary": {
                "total_tests": len(self.test_results),
                "passed_tests": sum(1 for r in self.test_results if r["passed"]),
                "failed_tests": len(self.failed_tests),
            },
            "detailed_results": self.test_results,
        }
        try:
            with open(filename, "w", encoding="utf-8") as f:
                json.dump(report_data, f, indent=2, default=float)
            print(f"\n💾 Detailed results saved to: {filename}")
        except OSError as e:
            print(f"\n⚠️  Could not save results to file: {e}")
        return filename


def parse_arguments(argv=None):
    parser = argparse.ArgumentParser(
        description="Acceptance suite for the performative prediction simulator",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  python acceptance_suite.py
    Run every acceptance check

  python acceptance_suite.py --recipe fig1c
    Run only the checks that read the fig1c recipe

  python acceptance_suite.py --failed-only
    Report only failing checks

  python acceptance_suite.py --summary
    List recipes and checks without running them
        """
    )
    parser.add_argument("--recipe", type=str, help="Run only checks that read this recipe")
    parser.add_argument("--failed-only", action="store_true", help="Report only failing checks")
    parser.add_argument("--summary", action="store_true", help="Show coverage without running checks")
    parser.add_argument("--results-dir", type=str, help="Directory for the JSON results file")
    return parser.parse_args(argv)


def main(argv=None):
    args = parse_arguments(argv)
    suite = AcceptanceSuite(results_dir=args.results_dir)

    if args.summary:
        suite.show_summary_only()
        sys.exit(0)

    suite.run_all_tests(recipe_filter=args.recipe, failed_only=args.failed_only)
    failed_count = len(suite.failed_tests)
    if failed_count == 0:
        print("\n🎉 All checks passed successfully!")
        sys.exit(0)
    print(f"\n⚠️  {failed_count} check(s) failed. See report above for details.")
    sys.exit(1)


if __name__ == "__main__":
    main()
