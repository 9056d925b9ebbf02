import json
import logging
import os
from typing import Any, Dict, List, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from constants import (
    AppConfig,
    ChaosDefaults,
    DynamicsDefaults,
    SolverDefaults,
    StochasticDefaults,
    ValidationMessages,
)
from model import ConfigError, MarketSpec

logger = logging.getLogger(__name__)


class StrictModel(BaseModel):
    """Base for every config schema: unknown keys are rejected."""
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class MarketConfig(StrictModel):
    """Market parameters as stored on disk; A is row-major."""
    d: int
    n: int
    lambda_: List[float] = Field(alias="lambda")
    theta0: List[float]
    A: List[float]
    c: Optional[List[float]] = None
    sigma0_sq: float = 1.0

    @model_validator(mode="after")
    def check_lengths(self):
        expected = {"lambda": (self.lambda_, self.n), "theta0": (self.theta0, self.d), "A": (self.A, self.d * self.d)}
        if self.c is not None:
            expected["c"] = (self.c, self.d)
        for name, (values, size) in expected.items():
            if len(values) != size:
                raise ValueError(ValidationMessages.LENGTH_MISMATCH.format(name=name, expected=size, actual=len(values)))
        return self


class StartConfig(StrictModel):
    """Initial profile: explicit rows, or (p0, 1 - p0) for every agent when d = 2; uniform otherwise."""
    initial: Optional[List[List[float]]] = None
    p0: Optional[float] = None


class StablePointConfig(StrictModel):
    tol: float = SolverDefaults.TOL
    max_iters: int = SolverDefaults.MAX_ITERS
    check_tol: float = SolverDefaults.CHECK_TOL
    R_eta: float = SolverDefaults.R_ETA


class SimulateConfig(StartConfig):
    eta: Union[float, List[float]]
    T: int = DynamicsDefaults.T
    stochastic: bool = False
    m: int = StochasticDefaults.M
    seed: int = StochasticDefaults.SEED
    shared_batch: bool = False


class OdeConfig(StartConfig):
    eta: Union[float, List[float]]
    t_end: float = DynamicsDefaults.T_END
    dt: float = DynamicsDefaults.DT
    record_every: int = DynamicsDefaults.RECORD_EVERY


class CapacityConfig(StrictModel):
    L_min: float
    L_max: float
    tol: float = ChaosDefaults.CAPACITY_TOL


class ChaosConfig(StrictModel):
    eta: float
    L: Optional[float] = None
    certificate: bool = True
    carrying_capacity: Optional[CapacityConfig] = None
    lyapunov: bool = True
    x0: float = DynamicsDefaults.P0
    burn_in: int = ChaosDefaults.LYAPUNOV_BURN_IN
    iters: int = ChaosDefaults.LYAPUNOV_ITERS
    bifurcation: bool = False


class BifurcationConfig(StrictModel):
    eta: float
    L_grid: Optional[List[float]] = None
    L_min: Optional[float] = None
    L_max: Optional[float] = None
    L_steps: Optional[int] = None
    x0: float = DynamicsDefaults.P0
    burn_in: int = ChaosDefaults.BIFURCATION_BURN_IN
    samples: int = ChaosDefaults.BIFURCATION_SAMPLES
    lyapunov_iters: int = ChaosDefaults.LYAPUNOV_ITERS
    workers: int = 1

    @model_validator(mode="after")
    def check_grid(self):
        ranged = (self.L_min, self.L_max, self.L_steps)
        if self.L_grid is None and any(value is None for value in ranged):
            raise ValueError("bifurcation needs L_grid or all of L_min, L_max, L_steps")
        return self

    def grid(self) -> List[float]:
        if self.L_grid is not None:
            return list(self.L_grid)
        return np.linspace(self.L_min, self.L_max, self.L_steps).tolist()


class StochasticConfig(StartConfig):
    eta: Union[float, List[float]]
    T: int = DynamicsDefaults.T
    m: int = StochasticDefaults.M
    seed: int = StochasticDefaults.SEED
    seeds: Optional[List[int]] = None
    ensemble: int = 1
    shared_batch: bool = False
    workers: int = 1

    def seed_list(self, override: Optional[int] = None) -> List[int]:
        """Explicit seeds, else `ensemble` consecutive seeds from `seed` (or the override)."""
        if self.seeds is not None and override is None:
            return list(self.seeds)
        start = self.seed if override is None else override
        return [start + offset for offset in range(self.ensemble)]


class ExperimentConfig(StrictModel):
    """A market plus the parameters of the commands that run on it."""
    name: Optional[str] = None
    description: Optional[str] = None
    market: Optional[MarketConfig] = None
    market_path: Optional[str] = None
    stable_point: Optional[StablePointConfig] = None
    simulate: Optional[SimulateConfig] = None
    ode: Optional[OdeConfig] = None
    chaos: Optional[ChaosConfig] = None
    bifurcation: Optional[BifurcationConfig] = None
    stochastic: Optional[StochasticConfig] = None

    @model_validator(mode="after")
    def check_market_source(self):
        if self.market is None and self.market_path is None:
            raise ValueError(ValidationMessages.MISSING_MARKET)
        if self.market is not None and self.market_path is not None:
            raise ValueError(ValidationMessages.BOTH_MARKETS)
        return self


def _config_error(error: ValidationError, source: str) -> ConfigError:
    """Translate a pydantic error into a ConfigError naming every offending key."""
    keys = []
    messages = []
    for item in error.errors():
        key = ".".join(str(part) for part in item["loc"]) or "<root>"
        keys.append(key)
        if item["type"] == "extra_forbidden":
            messages.append(ValidationMessages.UNKNOWN_KEY.format(key=key))
        else:
            messages.append(f"{key}: {item['msg']}")
    return ConfigError(f"Invalid configuration in {source}: " + "; ".join(messages), keys=keys)


class ConfigManager:
    """Load and save market and experiment configuration files (JSON)."""

    def __init__(self, encoding: str = AppConfig.CONFIG_ENCODING):
        self.encoding = encoding

    def read_json(self, path: str) -> Dict[str, Any]:
        try:
            with open(path, "r", encoding=self.encoding) as f:
                return json.load(f)
        except OSError as e:
            raise ConfigError(f"Cannot read configuration file {path}: {e}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"Malformed JSON in {path}: {e}") from e

    def parse_market(self, data: Dict[str, Any], source: str = "<market>") -> MarketConfig:
        try:
            return MarketConfig.model_validate(data)
        except ValidationError as e:
            raise _config_error(e, source) from e

    def parse_experiment(self, data: Dict[str, Any], source: str = "<experiment>") -> ExperimentConfig:
        try:
            return ExperimentConfig.model_validate(data)
        except ValidationError as e:
            raise _config_error(e, source) from e

    def market_from_config(self, config: MarketConfig) -> MarketSpec:
        """Build a MarketSpec; SpecValidationError propagates for non-PD or inconsistent markets."""
        A = np.array(config.A, dtype=float).reshape(config.d, config.d)
        c = np.zeros(config.d) if config.c is None else config.c
        return MarketSpec(lam=config.lambda_, theta0=config.theta0, A=A, c=c, sigma0_sq=config.sigma0_sq)

    def market_to_config(self, spec: MarketSpec) -> MarketConfig:
        return MarketConfig(
            d=spec.d,
            n=spec.n,
            lambda_=spec.lam.tolist(),
            theta0=spec.theta0.tolist(),
            A=spec.A.reshape(-1).tolist(),
            c=spec.c.tolist(),
            sigma0_sq=spec.sigma0_sq,
        )

    def load_market(self, path: str) -> MarketSpec:
        """Read a market file."""
        return self.market_from_config(self.parse_market(self.read_json(path), path))

    def save_market(self, spec: MarketSpec, path: str) -> None:
        """Write a market file; floats are written with repr so they read back bit-exactly."""
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        data = self.market_to_config(spec).model_dump(by_alias=True)
        with open(path, "w", encoding=self.encoding) as f:
            json.dump(data, f, indent=2)
        logger.info(f"Market saved to {path}")

    def load_experiment(self, path: str) -> ExperimentConfig:
        """Read an experiment file; a relative market_path is resolved against the file's directory."""
        config = self.parse_experiment(self.read_json(path), path)
        if config.market_path is not None and not os.path.isabs(config.market_path):
            resolved = os.path.join(os.path.dirname(os.path.abspath(path)), config.market_path)
            config = config.model_copy(update={"market_path": resolved})
        return config

    def resolve_market(self, config: ExperimentConfig) -> MarketSpec:
        if config.market is not None:
            return self.market_from_config(config.market)
        return self.load_market(config.market_path)
