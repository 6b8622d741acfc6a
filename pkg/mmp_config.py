"""
Mol2Trans Configuration
Environment defaults, key=value run configuration files and logging setup
"""

import logging
import os
import sys
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Any, Callable, Dict, List, Mapping, Optional

from dotenv import dotenv_values, load_dotenv

from mmp_errors import UsageError

logger = logging.getLogger(__name__)

# .env in the working directory supplies environment defaults
load_dotenv()

LOG_FORMAT = '%(asctime)s %(levelname)s: %(message)s [in %(pathname)s:%(lineno)d]'
CONSOLE_FORMAT = '%(levelname)s: %(message)s'


class Config:
    """Environment-backed defaults"""
    # Concurrency
    THREADS = int(os.environ.get('MOL2TRANS_THREADS') or 0) or os.cpu_count() or 1

    # Reproducibility
    SEED = int(os.environ.get('MOL2TRANS_SEED') or 0)

    # Logging
    LOG_LEVEL = os.environ.get('LOG_LEVEL') or 'INFO'
    LOG_FILE = os.environ.get('LOG_FILE') or None


# Config keys that may come from the environment layer
ENVIRONMENT_DEFAULTS = {
    'threads': lambda: Config.THREADS,
    'seed': lambda: Config.SEED,
    'log_level': lambda: Config.LOG_LEVEL,
}


# Settings that change how a run executes but never what it outputs
RUNTIME_KEYS = {'threads', 'log_level'}


def normalize_key(key: str) -> str:
    """`max-core` and `max_core` name the same setting"""
    return key.strip().lstrip('-').replace('-', '_')


class RunConfig:
    """Fully resolved settings of one command run.

    Precedence: explicit flag > config file > environment default > built-in default.
    """

    def __init__(self, command: str, values: Dict[str, Any], sources: Dict[str, str]):
        self.command = command
        self.values = values
        self.sources = sources

    def __getitem__(self, key: str) -> Any:
        return self.values[key]

    def get(self, key: str, default: Any = None) -> Any:
        return self.values.get(key, default)

    @classmethod
    def resolve(cls, command: str, flags: Mapping[str, Any], defaults: Mapping[str, Any],
                converters: Mapping[str, Callable[[str], Any]],
                config_file: Optional[str] = None) -> 'RunConfig':
        """Merge the layers for `command`; flags left at None count as unset"""
        file_values: Dict[str, str] = {}
        if config_file:
            if not Path(config_file).is_file():
                raise UsageError(f"config file not found: {config_file}")
            for raw_key, raw_value in dotenv_values(config_file).items():
                key = normalize_key(raw_key)
                if key not in defaults:
                    raise UsageError(f"unknown config key '{raw_key}' for '{command}'")
                if raw_value is None:
                    raise UsageError(f"config key '{raw_key}' has no value")
                file_values[key] = raw_value

        values: Dict[str, Any] = {}
        sources: Dict[str, str] = {}
        for key, default in defaults.items():
            if flags.get(key) is not None:
                values[key], sources[key] = flags[key], 'flag'
            elif key in file_values:
                convert = converters.get(key, str)
                try:
                    values[key] = convert(file_values[key])
                except (TypeError, ValueError) as e:
                    raise UsageError(f"bad value for config key '{key}': {e}")
                sources[key] = 'file'
            elif key in ENVIRONMENT_DEFAULTS:
                values[key], sources[key] = ENVIRONMENT_DEFAULTS[key](), 'env'
            else:
                values[key], sources[key] = default, 'default'

        logger.debug(f"Resolved {command} config: {values}")
        return cls(command, values, sources)

    def provenance_lines(self) -> List[str]:
        """`# key=value` header lines, sorted by key; runtime-only keys left out"""
        lines = [f"# command={self.command}"]
        for key in sorted(set(self.values) - RUNTIME_KEYS):
            lines.append(f"# {key}={format_value(self.values[key])}")
        return lines


def format_value(value: Any) -> str:
    if isinstance(value, (list, tuple)):
        return ','.join(format_value(v) for v in value)
    if value is None:
        return ''
    return str(value)


def parse_int_list(text: str) -> List[int]:
    """'1,10,20' -> [1, 10, 20]"""
    try:
        values = [int(part) for part in text.split(',') if part.strip()]
    except ValueError:
        raise ValueError(f"expected comma-separated integers, got '{text}'")
    if not values:
        raise ValueError("expected at least one integer")
    return values


def parse_float_list(text: str) -> List[float]:
    try:
        values = [float(part) for part in text.split(',') if part.strip()]
    except ValueError:
        raise ValueError(f"expected comma-separated numbers, got '{text}'")
    if not values:
        raise ValueError("expected at least one number")
    return values


class _StderrHandler(logging.StreamHandler):
    """Stream handler bound to whatever sys.stderr is at emit time"""

    def __init__(self):
        super().__init__(sys.stderr)

    @property
    def stream(self):
        return sys.stderr

    @stream.setter
    def stream(self, value):
        pass


_installed_handlers: List[logging.Handler] = []


def setup_logging(level: Optional[str] = None, log_file: Optional[str] = None) -> None:
    """Log to standard error and, when a log file is configured, a rotating file"""
    level_name = (level or Config.LOG_LEVEL).upper()
    level_value = getattr(logging, level_name, None)
    if not isinstance(level_value, int):
        raise UsageError(f"unknown log level: {level}")

    root = logging.getLogger()
    for handler in _installed_handlers:
        root.removeHandler(handler)
        handler.close()
    _installed_handlers.clear()

    console_handler = _StderrHandler()
    console_handler.setFormatter(logging.Formatter(CONSOLE_FORMAT))
    console_handler.setLevel(level_value)
    root.addHandler(console_handler)
    _installed_handlers.append(console_handler)

    log_file = log_file or Config.LOG_FILE
    if log_file:
        Path(log_file).parent.mkdir(parents=True, exist_ok=True)
        file_handler = RotatingFileHandler(
            log_file,
            maxBytes=10240000,  # 10MB
            backupCount=10
        )
        file_handler.setFormatter(logging.Formatter(LOG_FORMAT))
        file_handler.setLevel(level_value)
        root.addHandler(file_handler)
        _installed_handlers.append(file_handler)

    root.setLevel(level_value)
