"""
Module defining the ConfigError class, raised when a [config.Config](Config)
has unexpected key(s) or value(s). Aborts a command with exit status 2.
"""

from typing import Optional


class ConfigError(Exception):
    """
    To be thrown when a [config.Config](Config)
    has unexpected key(s) or value(s)

    Arguments:
      message: description of the error
      key: path of the offending entry ('table/key'), if known
    """

    exit_code = 2

    def __init__(self, message: str, key: Optional[str] = None) -> None:
        super().__init__(message)
        self.key = key
