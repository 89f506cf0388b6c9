"""
Module for ConfigGetter and related sub-classes.
An instance of ConfigGetter has a 'get' method which returns a configuration dict
(see [config.Config](Config)).
"""

import copy
from typing import Any, Dict, Optional

from .config import Config
from .config_error import ConfigError


def _override(c1: Config, c2: Config, path: str = "") -> None:
    # Values of c2 replace the values of c1 for the same keys,
    # recursively for tables. c2 may not introduce new keys.
    for key, value2 in c2.items():
        where = f"{path}/{key}" if path else key
        try:
            value1 = c1[key]
        except KeyError:
            raise ConfigError(f"can not override '{where}' (no such configuration key)", where)
        if isinstance(value2, dict):
            if not isinstance(value1, dict):
                raise ConfigError(f"can not override '{where}' (expected a table)", where)
            _override(value1, value2, where)
        else:
            if isinstance(value1, dict):
                raise ConfigError(f"can not override '{where}' (a table is required)", where)
            c1[key] = value2


class ConfigGetter:
    """
    Abstract super class for objects instantiating
    [config.Config](Config) dictionaries.

    Args:
      info: an arbitrary string, used in error messages
      override: if provided, corresponding values will be replaced
        in the configuration dict before being returned by the get function.
    """

    def __init__(
        self,
        info: str,
        override: Optional[Config] = None,
    ) -> None:
        self._info = info
        self._override = override

    @property
    def info(self) -> str:
        return self._info

    def set_override(self, override: Config) -> None:
        """
        Overwrite the 'override' configuration provided
        to the constructor
        """
        self._override = override

    def _get(self, kwargs: Dict[str, Any]) -> Config:
        raise NotImplementedError()

    def get(self, **kwargs) -> Config:
        """
        Returns a configuration dictionary (a deep copy: callers may
        modify it freely).
        If an 'override' has been provided to the constructor, updates
        the configuration accordingly before returning it.
        """
        config = copy.deepcopy(self._get(kwargs))
        if self._override is not None:
            _override(config, self._override)
        return config


class FixedDict(ConfigGetter):
    """
    Returns the configuration dictionary that was
    passed to it as argument, possibly updated by
    the override configuration.
    """

    def __init__(
        self,
        config: Config,
        override: Optional[Config] = None,
    ) -> None:
        super().__init__("fixed configuration", override=override)
        self._config = config

    def _get(self, kwargs={}):
        return self._config
