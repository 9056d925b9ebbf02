"""
Application constants and configuration values.
Single source of truth for tolerances, solver defaults, CSV layouts and message templates.
"""


class AppConfig:
    """Application identity and file-level settings."""
    APP_NAME = "perfsim"
    APP_VERSION = "1.0"
    APP_DESCRIPTION = "Multi-agent performative prediction simulator: stable points, exponentiated-gradient dynamics and the stability-to-chaos transition."

    # Configuration files
    CONFIG_ENCODING = "utf-8"
    RECIPES_DIR = "recipes"
    RECIPE_EXTENSION = ".json"

    # Float formatting for every exported number (17 significant digits)
    FLOAT_FORMAT = ".17g"

    COMMANDS = ("stable-point", "simulate", "ode", "chaos", "bifurcation", "stochastic")


class Tolerances:
    """Numerical tolerances shared by all modules."""
    SIMPLEX_SUM = 1e-12
    SYMMETRY = 1e-12
    XI_ROW_SUM = 1e-10
    SUPPORT_EPS = 1e-9
    PROPERNESS_MARGIN = 1e-8
    # Row sum deviation tolerated before RK4 renormalization
    ODE_DRIFT = 1e-6
    # Fraction of ODE_DRIFT at which a warning is emitted
    ODE_DRIFT_WARNING_FRACTION = 0.1


class SolverDefaults:
    """Stable-point solver defaults."""
    TOL = 1e-10
    # Tolerance for the stability and optimality checks run on a solver result
    CHECK_TOL = 1e-8
    MAX_ITERS = 200000
    LOG_EVERY = 10000
    # Largest vertex-combination count for brute-force max|g| enumeration
    MAX_VERTEX_COMBINATIONS = 10 ** 6
    R_ETA = 1.0
    # Shrinks eta3 below the boundary so substitution is strict
    ETA_SAFETY = 1.0 - 1e-9


class DynamicsDefaults:
    """Discrete and continuous dynamics defaults."""
    DT = 1e-3
    T_END = 50.0
    RECORD_EVERY = 1
    MAX_STORED_SCALARS = 10 ** 7
    T = 100
    P0 = 0.2


class ChaosDefaults:
    """Reduced-map and certificate defaults."""
    EXPONENT_CLAMP = 700.0
    BISECTION_TOL = 1e-12
    BISECTION_MAX_ITERS = 200
    MONOTONE_GRID = 32
    CAPACITY_TOL = 1e-6
    LYAPUNOV_BURN_IN = 1000
    LYAPUNOV_ITERS = 10000
    DEGENERATE_ORBIT = 1e-300
    MIN_HORIZON = 1000
    BIFURCATION_BURN_IN = 3000
    BIFURCATION_SAMPLES = 64


class StochasticDefaults:
    """Sampling defaults."""
    SEED = 0
    M = 100
    ENSEMBLE_SIZE = 32
    MASK64 = 0xFFFFFFFFFFFFFFFF
    # SplitMix64 constants
    GOLDEN_GAMMA = 0x9E3779B97F4A7C15
    MIX_MULT_1 = 0xBF58476D1CE4E5B9
    MIX_MULT_2 = 0x94D049BB133111EB


class CsvColumns:
    """CSV header layouts."""
    TRAJECTORY = ["t", "agent", "coord", "theta", "phi", "xi_l1", "loss_agent", "loss_total"]
    STOCHASTIC_EXTRA = ["seed", "m"]
    BIFURCATION = ["L", "alpha", "beta", "sample_index", "x", "lyapunov"]
    PROFILE = ["agent", "coordinate", "value"]


class ExitCodes:
    """Process exit codes."""
    SUCCESS = 0
    VALIDATION_ERROR = 1
    NUMERICAL_FAILURE = 2


class LogMessages:
    """Logging message templates."""
    # Application lifecycle
    APP_STARTING = "Starting perfsim command: {command}"
    APP_FINISHED = "Command {command} finished with exit code {code}"

    # Registry messages
    REGISTRY_VALIDATED = "Recipe registry validated successfully: {recipe_count} recipes"
    RECIPE_DISCOVERED = "Discovered recipe: {recipe_name}"
    RECIPE_LOAD_WARNING = "Could not load recipe {recipe_name}: {error}"
    REGISTRY_VALIDATION_ERROR = "Recipe registry validation failed:\n{errors}"

    # Solver messages
    SOLVER_PROGRESS = "Stable-point solver iteration {iteration}: residual {residual:.3e}"
    SOLVER_CONVERGED = "Stable point found after {iterations} iterations (residual {residual:.3e})"
    SOLVER_FAILED = "Stable-point solver exhausted {iterations} iterations (residual {residual:.3e})"

    # Dynamics messages
    BOUNDARY_START = "Initial profile has zero coordinates; those faces stay fixed: {coords}"
    SIMULATION_DONE = "Simulated {steps} exponentiated-gradient steps for {n} agents"
    ODE_DONE = "Integrated ODE to t={t_end} with dt={dt} ({steps} steps)"
    ODE_DRIFT_HIGH = "RK4 row-sum drift {drift:.3e} at step {step} is close to the limit; consider a smaller dt"
    STATES_STREAMED = "Trajectory holds {scalars} scalars; streaming states to the sink"

    # Chaos messages
    COORDINATES_PERMUTED = "Swapped feature coordinates so that beta_inf = {beta_inf:.6g} lies below 1/2"
    CERTIFICATE_FAILED = "Period-3 certificate failed at u={u:.6g}, v={v:.6g}: {reason}"
    CAPACITY_FOUND = "Certified carrying capacity L*={value:.6g} (eta={eta})"
    CAPACITY_NOT_MONOTONE = "Certificate success is not monotone above L*={value:.6g}: failures at {failures}"
    SCAN_DONE = "Bifurcation scan finished: {cells} grid cells, {rows} rows"

    # Stochastic messages
    STOCHASTIC_DONE = "Stochastic simulation finished: T={steps}, m={m}, seed={seed}"
    ENSEMBLE_DONE = "Seed ensemble finished: {runs} runs"

    # Export messages
    EXPORT_SUCCESS = "{kind} exported successfully to: {file_path}"
    EXPORT_FAILED = "Failed to export {kind}: {error}"

    # Error handling
    VALIDATION_FAILED = "Validation failed: {error}"
    NUMERICAL_FAILED = "Numerical failure: {error}"
    UNEXPECTED_ERROR = "Unexpected error in {command}: {error}"


class ValidationMessages:
    """Input validation message templates."""
    # Market validation
    DIMENSION_TOO_SMALL = "Feature dimension d must be at least 2, got {d}"
    AGENT_COUNT_TOO_SMALL = "Agent count n must be at least 1, got {n}"
    LENGTH_MISMATCH = "{name} must have length {expected}, got {actual}"
    MATRIX_SHAPE = "A must be a {d}x{d} matrix, got shape {shape}"
    NOT_FINITE = "{name} contains non-finite values"
    LAMBDA_NOT_POSITIVE = "All influence parameters lambda_i must be positive"
    A_NOT_SYMMETRIC = "A is not symmetric (max asymmetry {asymmetry:.3e})"
    A_NOT_PD = "A is not positive definite"
    SIGMA_NEGATIVE = "sigma0_sq must be nonnegative, got {value}"

    # Profile validation
    PROFILE_SHAPE = "Profile must have shape ({n}, {d}), got {shape}"
    PROFILE_NEGATIVE = "Agent {agent} has negative coordinates"
    PROFILE_SUM = "Agent {agent} coordinates sum to {total:.17g}, not 1"
    PROFILE_BOUNDARY = "Agent {agent} starts on the boundary at coordinates {coords}"

    # Rate validation
    RATES_NOT_POSITIVE = "All learning rates must be positive"
    RATES_LENGTH = "Expected {n} learning rates, got {actual}"

    # Config validation
    UNKNOWN_KEY = "Unknown configuration key: {key}"
    MISSING_MARKET = "Experiment config needs either 'market' or 'market_path'"
    BOTH_MARKETS = "Experiment config must not set both 'market' and 'market_path'"
    MISSING_SECTION = "Experiment config has no '{section}' section"
    RECIPE_NOT_FOUND = "Recipe '{name}' not found"
