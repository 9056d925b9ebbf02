"""Tests for the JSON configuration layer and the recipe registry."""
import json
import os

import numpy as np
import pytest

from config_manager import ConfigManager, StochasticConfig
from model import ConfigError, MarketSpec, SpecValidationError
from recipe_registry import REQUIRED_RECIPES, RecipeRegistry, get_recipe_registry

MARKET = {"d": 2, "n": 1, "lambda": [14.0], "theta0": [0.0, 0.0], "A": [3.0, 0.0, 0.0, 7.0], "c": [0.0, 0.0]}


def write_json(path, data):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f)
    return str(path)


class TestMarketFiles:
    def test_round_trip_is_bit_exact(self, tmp_path):
        spec = MarketSpec(lam=[0.1, 1.0 / 3.0], theta0=[0.2, np.pi], A=[[2.0, 0.1], [0.1, 1.0 / 7.0]],
                          c=[1e-17, -0.3], sigma0_sq=0.7)
        manager = ConfigManager()
        path = str(tmp_path / "nested" / "market.json")
        manager.save_market(spec, path)
        loaded = manager.load_market(path)
        for name in ("lam", "theta0", "A", "c"):
            np.testing.assert_array_equal(getattr(loaded, name), getattr(spec, name))
        assert loaded.sigma0_sq == spec.sigma0_sq

    def test_missing_linear_term_defaults_to_zero(self):
        manager = ConfigManager()
        data = {key: value for key, value in MARKET.items() if key != "c"}
        spec = manager.market_from_config(manager.parse_market(data))
        np.testing.assert_array_equal(spec.c, [0.0, 0.0])
        assert spec.sigma0_sq == 1.0

    def test_length_mismatch(self):
        with pytest.raises(ConfigError, match="A must have length 4"):
            ConfigManager().parse_market(dict(MARKET, A=[1.0, 0.0, 1.0]))

    def test_invalid_market_values_surface_as_spec_errors(self):
        manager = ConfigManager()
        with pytest.raises(SpecValidationError):
            manager.market_from_config(manager.parse_market(dict(MARKET, A=[1.0, 2.0, 2.0, 1.0])))

    def test_malformed_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(ConfigError, match="Malformed JSON"):
            ConfigManager().load_market(str(path))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="Cannot read"):
            ConfigManager().load_market(str(tmp_path / "absent.json"))


class TestExperimentFiles:
    def test_unknown_keys_are_named(self):
        with pytest.raises(ConfigError) as excinfo:
            ConfigManager().parse_experiment({"market": dict(MARKET, gamma=1.0), "simulate": {"eta": 0.1, "steps": 5}})
        assert set(excinfo.value.keys) == {"market.gamma", "simulate.steps"}
        assert "Unknown configuration key: market.gamma" in str(excinfo.value)

    def test_market_source_is_exclusive(self):
        manager = ConfigManager()
        with pytest.raises(ConfigError, match="either 'market' or 'market_path'"):
            manager.parse_experiment({"simulate": {"eta": 0.1}})
        with pytest.raises(ConfigError, match="must not set both"):
            manager.parse_experiment({"market": MARKET, "market_path": "m.json"})

    def test_relative_market_path(self, tmp_path):
        os.makedirs(tmp_path / "markets")
        write_json(tmp_path / "markets" / "figure.json", MARKET)
        path = write_json(tmp_path / "experiment.json", {"market_path": "markets/figure.json",
                                                         "stable_point": {}})
        manager = ConfigManager()
        config = manager.load_experiment(path)
        assert os.path.isabs(config.market_path)
        assert manager.resolve_market(config).L_n == 14.0

    def test_section_defaults(self):
        config = ConfigManager().parse_experiment({"market": MARKET, "simulate": {"eta": [0.05]}})
        assert config.simulate.T == 100
        assert not config.simulate.stochastic
        assert config.ode is None

    def test_bifurcation_grid(self):
        manager = ConfigManager()
        ranged = manager.parse_experiment({"market": MARKET, "bifurcation": {"eta": 0.05, "L_min": 0.0,
                                                                             "L_max": 20.0, "L_steps": 81}})
        grid = ranged.bifurcation.grid()
        assert len(grid) == 81
        assert grid[4] == pytest.approx(1.0)
        explicit = manager.parse_experiment({"market": MARKET, "bifurcation": {"eta": 0.05, "L_grid": [3.0, 1.0]}})
        assert explicit.bifurcation.grid() == [3.0, 1.0]
        with pytest.raises(ConfigError, match="L_grid"):
            manager.parse_experiment({"market": MARKET, "bifurcation": {"eta": 0.05, "L_min": 0.0}})

    def test_seed_list(self):
        assert StochasticConfig(eta=0.1, seed=5, ensemble=3).seed_list() == [5, 6, 7]
        assert StochasticConfig(eta=0.1, seed=5, ensemble=3).seed_list(override=10) == [10, 11, 12]
        assert StochasticConfig(eta=0.1, seeds=[9, 4]).seed_list() == [9, 4]


class TestRecipeRegistry:
    def test_shipped_recipes_are_valid(self):
        registry = get_recipe_registry()
        for name in REQUIRED_RECIPES:
            assert registry.has_recipe(name)
        assert registry.get_commands("fig1c") == ["simulate", "chaos"]
        assert registry.get_commands("fig1d") == ["stochastic"]
        assert registry.get_recipe("fig1b").simulate.eta == 0.05

    def test_shipped_markets_load(self):
        registry = get_recipe_registry()
        manager = ConfigManager()
        for name in registry.get_recipe_names():
            spec = manager.resolve_market(registry.get_recipe(name))
            np.testing.assert_array_equal(spec.A, np.diag([3.0, 7.0]))

    def test_unknown_recipe(self):
        with pytest.raises(ConfigError, match="not found"):
            get_recipe_registry().get_recipe("fig9z")

    def test_missing_required_recipe(self, tmp_path):
        write_json(tmp_path / "only.json", {"market": MARKET, "stable_point": {}})
        with pytest.raises(ConfigError, match="'fig1a' not found"):
            RecipeRegistry(recipes_dir=str(tmp_path))

    def test_invalid_recipe_fails_validation(self, tmp_path):
        write_json(tmp_path / "bad.json", {"market": MARKET, "simulate": {"eta": 0.1, "typo": 1}})
        write_json(tmp_path / "empty.json", {"market": MARKET})
        with pytest.raises(ConfigError) as excinfo:
            RecipeRegistry(recipes_dir=str(tmp_path), required=())
        assert excinfo.value.keys == ["bad"]
        assert "configures no command section" in str(excinfo.value)

    def test_custom_directory(self, tmp_path):
        write_json(tmp_path / "mine.json", {"market": MARKET, "description": "custom", "ode": {"eta": 0.1}})
        registry = RecipeRegistry(recipes_dir=str(tmp_path), required=("mine",))
        assert registry.get_recipe_names() == ["mine"]
        assert registry.get_description("mine") == "custom"
        assert registry.get_recipe_path("mine").endswith("mine.json")
