"""
Module defining get_error_info and exit_code, used by the command line
interface to turn an exception into a log line and a process exit status.
"""

import os
import traceback
from typing import Optional, Tuple

from .config_error import ConfigError
from .errors import MarkerPlanError


def _package_of(filepath: str) -> Optional[str]:
    parts = filepath.split(os.sep)
    if len(parts) < 2:
        return None
    return parts[-2]


def get_error_info(
    error: BaseException, filters: Tuple[str, ...] = ("markerplan",)
) -> str:
    """
    Summarizes the error on a single line: its class, its message and
    the innermost traceback frame located in a package whose name
    contains one of the filters.

    Arguments:
      error: the exception to summarize
      filters: package names (or substrings of) of interest
    """
    frames = traceback.extract_tb(error.__traceback__)
    frames = [
        f
        for f in frames
        if any(flt in (_package_of(f.filename) or "") for flt in filters)
    ]
    if not frames:
        return f"{type(error).__name__}: {error}"
    frame = frames[-1]
    package = _package_of(frame.filename)
    filename = os.path.basename(frame.filename)
    return str(
        f"{type(error).__name__}: {error} "
        f"({package}/{filename} line {frame.lineno}, function {frame.name})"
    )


def exit_code(error: BaseException) -> int:
    """
    Exit status for an exception aborting a subcommand: the exit_code
    attribute of markerplan errors, 2 for configuration and
    input/output errors, 1 for anything else.
    """
    if isinstance(error, (MarkerPlanError, ConfigError)):
        return int(error.exit_code)
    if isinstance(error, (OSError, ValueError)):
        return 2
    return 1
