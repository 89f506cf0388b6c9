"""
Default settings of the markerplan pipeline, and the load_settings function
which merges a user toml file over them.

All lengths ending with '_m' are in meters, lengths ending with '_units'
are in structure units (multiples of the structure's unit cell).
"""

import copy
from pathlib import Path
from typing import Any, Dict, Optional, Union

from .config import Config
from .config_error import ConfigError
from .config_getter import FixedDict
from .config_toml import StaticTomlConfigGetter, Vars

DEFAULT_SETTINGS: Config = {
    "certainty": {
        "alpha_m": 0.02,
        "c_min": 0.95,
    },
    "noise": {
        "lambda_i": 1e-4,
    },
    "simulation": {
        "marker_side_m": 0.15,
        "sigma_px": 0.5,
        "trials": 200,
        "workers": 1,
    },
    "calibration": {
        "rho_bounds": [0.3, 2.0],
        "theta_bounds_deg": [0.0, 75.0],
        "n_rho": 25,
        "n_theta": 25,
        "n_phi": 10,
        "safety_factor": 1.1,
        "conservative_floor": 0.95,
    },
    "coverage": {
        "hover_m": 0.3,
        "array_radius_m": 0.2,
        "n_rings": 8,
        "n_angles": 16,
        "search_max_m": 3.0,
        "tolerance_m": 1e-4,
    },
    "planner": {
        "extent": "diameter",
        # 0: the largest pairwise distance allowed within a cluster
        "hop_radius": 0.0,
        "min_hop_support": 2,
        "restarts": 10,
        "max_iterations": 100,
    },
    "checker": {
        "hover_units": 1.5,
        "min_visible": 2,
        "view_cone_deg": 95.0,
    },
    "sweep": {
        "workers": 1,
    },
}
"""
Default configuration, one table per concern.
"""


def default_settings() -> Config:
    """
    A (deep) copy of [DEFAULT_SETTINGS]().
    """
    return copy.deepcopy(DEFAULT_SETTINGS)


def load_settings(
    path: Optional[Union[str, Path]] = None,
    vars: Vars = None,
    override: Optional[Config] = None,
) -> Config:
    """
    Returns the default settings updated with the content of the
    toml file (if any) and then with 'override' (if any).

    Arguments:
      path: toml file, possibly a jinja2 template
      vars: variables used to render the template (toml file or dict)
      override: values applied last

    Raises:
      ConfigError: the toml file has keys not present in the default settings
      FileNotFoundError: no file at 'path'
    """
    config = default_settings()
    if path is not None:
        user = StaticTomlConfigGetter(path, vars=vars).get()
        config = FixedDict(config, override=user).get()
    if override is not None:
        config = FixedDict(config, override=override).get()
    return config


def section(config: Config, name: str) -> Dict[str, Any]:
    """
    Returns the table 'name' of the configuration.

    Raises:
      ConfigError if there is no such table
    """
    try:
        table = config[name]
    except KeyError:
        raise ConfigError(f"configuration is missing the table '{name}'", name)
    if not isinstance(table, dict):
        raise ConfigError(f"configuration entry '{name}' must be a table", name)
    return table
def read_float(table: Dict[str, Any], key: str, label: str) -> float:
    """
    Returns table[key] as a float.

    Raises:
      ConfigError if the key is missing or the value is not a number
    """
    where = f"{label}/{key}"
    try:
        value = table[key]
    except KeyError:
        raise ConfigError(f"{label}: missing the key '{key}'", where)
    if isinstance(value, bool):
        raise ConfigError(f"{where}: expected a number, got {value!r}", where)
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: expected a number, got {value!r}", where)


def read_int(table: Dict[str, Any], key: str, label: str) -> int:
    """
    Returns table[key] as an int.

    Raises:
      ConfigError if the key is missing or the value is not an integer
    """
    where = f"{label}/{key}"
    try:
        value = table[key]
    except KeyError:
        raise ConfigError(f"{label}: missing the key '{key}'", where)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{where}: expected an integer, got {value!r}", where)
    return value
