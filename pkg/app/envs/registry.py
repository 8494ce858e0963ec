"""
Registry of named environments with JSON-style configuration overrides.
"""
from typing import Any, Callable, Dict, List, Optional, Tuple, Type

from pydantic import BaseModel, ValidationError

from ..config.logging_config import logger
from ..utils.errors import ConfigError
from .base import Environment
from .hdg import HdgConfig, build_hdg
from .taxi import TaxiConfig, build_taxi
from .two_rooms import TwoRoomsConfig, build_two_rooms


class EnvironmentRegistry:
    """
    Maps environment names to a config class, preset overrides and builder.
    """

    def __init__(self):
        self._entries: Dict[str, Tuple[Type[BaseModel], Dict[str, Any], Callable[[Any], Environment]]] = {}

    def register(
        self,
        name: str,
        config_class: Type[BaseModel],
        builder: Callable[[Any], Environment],
        presets: Optional[Dict[str, Any]] = None,
    ) -> None:
        self._entries[name] = (config_class, dict(presets or {}), builder)

    def names(self) -> List[str]:
        return sorted(self._entries)

    def config_for(self, name: str, overrides: Optional[Dict[str, Any]] = None) -> BaseModel:
        """
        Validated configuration for a named environment.

        Args:
            name: Registered environment name.
            overrides: Field overrides applied on top of the presets.

        Returns:
            BaseModel: The environment's config object.

        Raises:
            ConfigError: For unknown names or invalid overrides.
        """
        if name not in self._entries:
            raise ConfigError(f"Unknown environment '{name}'. Available: {', '.join(self.names())}")
        config_class, presets, _ = self._entries[name]
        try:
            return config_class(**{**presets, **(overrides or {})})
        except ValidationError as e:
            raise ConfigError(f"Invalid configuration for '{name}': {str(e)}")

    def make(self, name: str, overrides: Optional[Dict[str, Any]] = None) -> Environment:
        config = self.config_for(name, overrides)
        _, _, builder = self._entries[name]
        logger.debug(f"Building environment '{name}'")
        return builder(config)


environment_registry = EnvironmentRegistry()
environment_registry.register("taxi", TaxiConfig, build_taxi)
environment_registry.register("taxi-fickle", TaxiConfig, build_taxi, {"fickle": True})
environment_registry.register("taxi-fuel", TaxiConfig, build_taxi, {"fuel": True})
environment_registry.register("hdg", HdgConfig, build_hdg)
environment_registry.register("hdg-safe", HdgConfig, build_hdg, {"approximate": False})
environment_registry.register("two-rooms", TwoRoomsConfig, build_two_rooms)


def make_environment(name: str, overrides: Optional[Dict[str, Any]] = None) -> Environment:
    """Build a registered environment."""
    return environment_registry.make(name, overrides)
