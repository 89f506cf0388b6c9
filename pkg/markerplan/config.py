"""
Module defining the Config type.
A Config is a dictionary, which values can be also a Config (recursive type).
A Config holds the settings of the markerplan pipeline (certainty requirement,
simulation, calibration, planner and checker parameters). Instances are
usually obtained via the get function of a
[config_getter.ConfigGetter](configuration getter), or via
[settings.load_settings]().

For example:

```python
  config: Config = load_settings(Path("settings.toml"))
  params = CertaintyParams.from_config(config)
```
"""

from typing import Any, Dict, Union

Config = Dict[str, Union[Any, "Config"]]
"""
A configuration dictionary.
"""
