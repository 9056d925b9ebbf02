"""
Centralized registry for figure-reproduction recipes.
Single source of truth for recipe discovery, validation and metadata.
"""

import glob
import logging
import os
from typing import Dict, List, Optional

from config_manager import ConfigManager, ExperimentConfig
from constants import AppConfig, LogMessages, ValidationMessages
from model import ConfigError

logger = logging.getLogger(__name__)

COMMAND_SECTIONS = {
    "stable-point": "stable_point",
    "simulate": "simulate",
    "ode": "ode",
    "chaos": "chaos",
    "bifurcation": "bifurcation",
    "stochastic": "stochastic",
}

# Recipes the acceptance suite relies on
REQUIRED_RECIPES = (
    "fig1a", "fig1b", "fig1c", "fig1d", "fig1e", "fig1f",
    "fig2a", "fig2b", "sec5_stable_point", "carrying_capacity",
)


class RecipeRegistry:
    """
    Registry that auto-discovers the JSON recipes shipped in recipes/ and validates them.
    """

    def __init__(self, recipes_dir: Optional[str] = None, required: tuple = REQUIRED_RECIPES):
        self.recipes_dir = recipes_dir or os.path.join(os.path.dirname(os.path.abspath(__file__)),
                                                       AppConfig.RECIPES_DIR)
        self._config_manager = ConfigManager()
        self._recipes: Dict[str, ExperimentConfig] = {}
        self._paths: Dict[str, str] = {}
        self._load_errors: Dict[str, str] = {}
        self._required = required

        self._discover_recipes()

        # Validate the registry
        self._validate_registry()

    def _discover_recipes(self) -> None:
        """Load every *.json file in the recipes directory."""
        pattern = os.path.join(self.recipes_dir, "*" + AppConfig.RECIPE_EXTENSION)
        for path in sorted(glob.glob(pattern)):
            name = os.path.splitext(os.path.basename(path))[0]
            try:
                self._recipes[name] = self._config_manager.load_experiment(path)
                self._paths[name] = path
                logger.debug(LogMessages.RECIPE_DISCOVERED.format(recipe_name=name))
            except ConfigError as e:
                self._load_errors[name] = str(e)
                logger.warning(LogMessages.RECIPE_LOAD_WARNING.format(recipe_name=name, error=e))

    def _validate_registry(self) -> None:
        """Validate that the registry is properly configured."""
        errors = []

        for name, error in self._load_errors.items():
            errors.append(f"Recipe '{name}' failed to load: {error}")

        for name in self._required:
            if name not in self._recipes and name not in self._load_errors:
                errors.append(ValidationMessages.RECIPE_NOT_FOUND.format(name=name))

        # Every recipe must configure at least one command
        for name, recipe in self._recipes.items():
            if not self.get_commands(name):
                errors.append(f"Recipe '{name}' configures no command section")
            if recipe.market_path is not None and not os.path.exists(recipe.market_path):
                errors.append(f"Recipe '{name}' refers to a missing market file: {recipe.market_path}")

        if errors:
            error_msg = LogMessages.REGISTRY_VALIDATION_ERROR.format(
                errors="\n".join(f"  - {error}" for error in errors))
            logger.error(error_msg)
            raise ConfigError(error_msg, keys=sorted(self._load_errors))

        logger.info(LogMessages.REGISTRY_VALIDATED.format(recipe_count=len(self._recipes)))

    # Public interface methods

    def get_recipe_names(self) -> List[str]:
        return sorted(self._recipes)

    def has_recipe(self, name: str) -> bool:
        return name in self._recipes

    def get_recipe(self, name: str) -> ExperimentConfig:
        """Get a recipe by name; unknown names raise ConfigError."""
        if name not in self._recipes:
            raise ConfigError(ValidationMessages.RECIPE_NOT_FOUND.format(name=name), keys=[name])
        return self._recipes[name]

    def get_recipe_path(self, name: str) -> str:
        self.get_recipe(name)
        return self._paths[name]

    def get_description(self, name: str) -> str:
        recipe = self.get_recipe(name)
        return recipe.description or name

    def get_commands(self, name: str) -> List[str]:
        """CLI commands whose section the recipe configures."""
        recipe = self._recipes[name]
        return [command for command, section in COMMAND_SECTIONS.items() if getattr(recipe, section) is not None]


# Global registry instance
_registry_instance: Optional[RecipeRegistry] = None


def get_recipe_registry() -> RecipeRegistry:
    """Get the global recipe registry instance (singleton pattern)."""
    global _registry_instance
    if _registry_instance is None:
        _registry_instance = RecipeRegistry()
    return _registry_instance
