"""
Concrete subclass of [config_getter.ConfigGetter]() reading the configuration
from toml files. The toml file may be a jinja2 template, rendered with
variables read from another toml file (or from a dictionary) before being
parsed, e.g.

```toml
# settings.toml
[certainty]
alpha_m = {{ alpha }}
```

```toml
# vars.toml
alpha = 0.02
```
"""

from pathlib import Path
from typing import Any, Dict, Optional, Union

import jinja2
import toml
import tomli

from .config import Config
from .config_error import ConfigError
from .config_getter import ConfigGetter

Vars = Optional[Union[Path, str, Dict[str, Any]]]


class TomlConfigError(ConfigError):
    """
    To be raised when the toml config
    file can not be parsed.
    """


def _render_with_vars(vars: Vars, config_toml_path: Path) -> str:
    if vars is None:
        return config_toml_path.read_text()
    if isinstance(vars, (Path, str)):
        vars_file = str(vars)
        try:
            data = toml.load(vars_file)
        except (toml.decoder.TomlDecodeError, OSError) as e:
            raise ConfigError(f"error while reading the variables file {vars_file}: {e}")
    else:
        data = vars
    template_loader = jinja2.FileSystemLoader(
        searchpath=config_toml_path.parent.as_posix()
    )
    template_env = jinja2.Environment(
        loader=template_loader, undefined=jinja2.StrictUndefined
    )
    template = template_env.get_template(config_toml_path.name)
    try:
        return template.render(data)
    except jinja2.UndefinedError as e:
        raise ConfigError(f"{config_toml_path}: {e}")


class StaticTomlConfigGetter(ConfigGetter):
    """
    Subclass of [config_getter.ConfigGetter]() that
    reads a configuration dictionary from a toml formatted file,
    once (upon the first call to 'get').

    Arguments:
      path: path to the toml file
      override: see [config_getter.ConfigGetter]()
      vars: toml file (or dictionary) of template variables

    Raises:
      FileNotFoundError if the file does not exist.
      TomlConfigError if the file does not contain valid toml syntax
    """

    def __init__(
        self,
        path: Union[str, Path],
        override: Optional[Config] = None,
        vars: Vars = None,
    ) -> None:
        super().__init__(str(path), override=override)
        path = Path(path)
        if not path.is_file():
            raise FileNotFoundError(f"failed to find configuration file {path}")
        self._path = path.resolve()
        self._config: Optional[Config] = None
        self._vars = vars

    def _get(self, kwargs: Dict[str, Any] = {}) -> Config:
        if self._config is None:
            content = _render_with_vars(self._vars, self._path)
            try:
                self._config = tomli.loads(content)
            except tomli.TOMLDecodeError as e:
                raise TomlConfigError(f"failed to parse {self._path}: {e}")
        return self._config
