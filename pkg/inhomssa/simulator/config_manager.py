import copy
import os
from typing import Any, Dict, Optional

import yaml

from .exceptions import ConfigError

# Seconds per unit suffix
_UNIT_SECONDS = {
    's': 1.0,
    'm': 60.0,
    'h': 3600.0,
    'd': 86400.0,
    'y': 365.25 * 86400.0,
}


def parse_duration(value, unit: str = 'h') -> float:
    """Parse a time with an optional unit suffix into model time units.

    Args:
        value: Number, or string such as ``"20"``, ``"20h"``, ``"10y"`` or ``"30m"``.
        unit: Time unit of the model (one of s, m, h, d, y). Bare numbers are
            taken in this unit.

    Returns:
        The duration in model units.
    """
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    text = str(value).lower().strip()
    try:
        if text and text[-1] in _UNIT_SECONDS:
            return float(text[:-1]) * _UNIT_SECONDS[text[-1]] / _UNIT_SECONDS[unit]
        return float(text)
    except ValueError:
        raise ValueError(f"cannot parse duration {value!r}") from None


class Config:
    """Handles loading and validation of experiment configurations.

    Sections and fields are addressed with dotted paths such as
    ``"mlmc.target_sd"``; errors name the offending path.
    """

    # Default configuration values
    DEFAULTS = {
        'experiment': {
            'command': 'simulate',
            'model': 'dimer',
            'model_file': None,
            'name': None,
            'seed': 2024,
            'workers': 1,
            'batch_size': 50,
            'T': None,
            'initial': None,
            'bound_window': None,
        },
        'simulate': {
            'method': 'extrande',
            'n': 100,
            'target_sd': None,
            'tol': 1e-10,
            'tau_step': None,
            'exact_channels': [],
            'species': None,
            'at': None,
            'dump_paths': 1,
        },
        'couple': {
            'param': 'amplitude',
            'h': None,
            'coupling': 'stacked',
            'n': 100,
            'species': None,
            'grid_points': 101,
            'dump_pairs': 1,
        },
        'sensitivity': {
            'param': 'amplitude',
            'h': None,
            'coupling': 'stacked',
            'n': 1000,
            'functional': 'endpoint',
            'species': None,
            'at': None,
            'grid_points': 101,
            'target_sd': None,
            'max_samples': 1000000,
            'max_seconds': None,
        },
        'mlmc': {
            'M': 4,
            'levels': [2, 3],
            'target_sd': 0.1,
            'exact_channels': [],
            'exact_level': True,
            'species': None,
            'pilot': 100,
            'max_samples': 1000000,
            'max_seconds': None,
            'compare_direct': False,
        },
        'output': {
            'directory': 'results',
            'prefix': None,
            'report': None,
            'record_timing': False,
        },
    }

    COMMANDS = ('simulate', 'couple', 'sensitivity', 'mlmc')

    def __init__(self, config_path: Optional[str] = None):
        """Initialize the configuration.

        Args:
            config_path: Path to the YAML configuration file. If None, uses default values.
        """
        self._config = copy.deepcopy(self.DEFAULTS)
        self.config_path = config_path

        if config_path:
            self.load()

    def load(self, config_path: Optional[str] = None) -> None:
        """Load configuration from a YAML file.

        Args:
            config_path: Path to the YAML configuration file. Uses instance path if None.

        Raises:
            ConfigError: The file is missing, unparsable, or has unknown fields.
        """
        if config_path:
            self.config_path = config_path

        if not self.config_path or not os.path.exists(self.config_path):
            raise ConfigError('config', f"configuration file {self.config_path!r} not found")

        try:
            with open(self.config_path, 'r') as f:
                user_config = yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            raise ConfigError('config', f"cannot parse {self.config_path}: {e}") from None
        if not isinstance(user_config, dict):
            raise ConfigError('config', "top level must be a mapping of sections")
        self.update(user_config)

    def save(self, config_path: Optional[str] = None) -> None:
        """Save current configuration to a YAML file.

        Args:
            config_path: Path to save the configuration. Uses instance path if None.
        """
        if config_path:
            self.config_path = config_path

        if not self.config_path:
            return

        os.makedirs(os.path.dirname(os.path.abspath(self.config_path)), exist_ok=True)
        with open(self.config_path, 'w') as f:
            yaml.safe_dump(self._config, f, default_flow_style=False, sort_keys=False)

    def get(self, key: str, default: Any = None) -> Any:
        """Get a configuration value.

        Args:
            key: Dotted path, e.g. ``"mlmc.M"``.
            default: Default value if the key is unset (None).

        Returns:
            The configuration value or default if not set.
        """
        section, _, field = key.partition('.')
        value = self._config.get(section, {}).get(field) if field else self._config.get(section)
        return default if value is None else value

    def set(self, key: str, value: Any) -> None:
        """Set a configuration value.

        Args:
            key: Dotted path of a known field.
            value: Value to set.

        Raises:
            ConfigError: The field is unknown.
        """
        section, _, field = key.partition('.')
        if section not in self.DEFAULTS or field not in self.DEFAULTS[section]:
            raise ConfigError(key, "unknown configuration field")
        self._config[section][field] = value

    def update(self, new_config: Dict[str, Any]) -> None:
        """Update configuration with new values.

        Args:
            new_config: Nested dictionary ``{section: {field: value}}``.
        """
        for section, fields in new_config.items():
            if section not in self.DEFAULTS:
                raise ConfigError(str(section), "unknown configuration section")
            if not isinstance(fields, dict):
                raise ConfigError(str(section), "section must be a mapping")
            for field, value in fields.items():
                self.set(f"{section}.{field}", value)

    def to_dict(self) -> Dict[str, Any]:
        """Get the current configuration as a dictionary."""
        return copy.deepcopy(self._config)

    def require_int(self, key: str, minimum: int = None) -> int:
        value = self.get(key)
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(key, f"expected an integer, got {value!r}")
        if minimum is not None and value < minimum:
            raise ConfigError(key, f"must be at least {minimum}, got {value!r}")
        return value

    def require_float(self, key: str, positive: bool = True, optional: bool = False) -> Optional[float]:
        value = self.get(key)
        if value is None and optional:
            return None
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(key, f"expected a number, got {value!r}")
        if positive and not value > 0:
            raise ConfigError(key, f"must be positive, got {value!r}")
        return float(value)

    def require_choice(self, key: str, choices) -> str:
        value = self.get(key)
        if value not in choices:
            raise ConfigError(key, f"expected one of {', '.join(map(str, choices))}, got {value!r}")
        return value

    def get_duration(self, key: str, unit: str = 'h') -> Optional[float]:
        """A duration field in model units, or None if unset."""
        value = self.get(key)
        if value is None:
            return None
        try:
            duration = parse_duration(value, unit)
        except ValueError as e:
            raise ConfigError(key, str(e)) from None
        if not duration > 0:
            raise ConfigError(key, f"must be positive, got {value!r}")
        return duration

    def get_channels(self, key: str):
        """A list of 1-based channel indices."""
        value = self.get(key) or []
        if isinstance(value, (int, str)):
            value = [value]
        try:
            channels = tuple(sorted({int(k) for k in value}))
        except (TypeError, ValueError):
            raise ConfigError(key, f"expected channel numbers, got {value!r}") from None
        if any(k < 1 for k in channels):
            raise ConfigError(key, "channels are numbered from 1")
        return channels

    def validate(self) -> None:
        """Check the fields every command relies on.

        Raises:
            ConfigError: With the dotted path of the first invalid field.
        """
        self.require_choice('experiment.command', self.COMMANDS)
        seed = self.require_int('experiment.seed', 0)
        if seed >= 2 ** 64:
            raise ConfigError('experiment.seed', "must fit in 64 unsigned bits")
        self.require_int('experiment.workers', 1)
        self.require_int('experiment.batch_size', 1)
        self.require_float('experiment.bound_window', optional=True)
        command = self.get('experiment.command')
        if command == 'simulate':
            self.require_choice('simulate.method', ('extrande', 'hitting-time', 'tau-leap'))
            if self.get('simulate.target_sd') is None:
                self.require_int('simulate.n', 1)
            else:
                self.require_float('simulate.target_sd')
            self.require_float('simulate.tol')
        elif command == 'couple':
            self.require_choice('couple.coupling', ('independent', 'crn', 'thinning', 'stacked'))
            self.require_int('couple.n', 1)
            self.require_float('couple.h', optional=True)
            self.require_int('couple.grid_points', 2)
        elif command == 'sensitivity':
            self.require_choice('sensitivity.coupling', ('independent', 'crn', 'thinning', 'stacked'))
            self.require_choice('sensitivity.functional', ('endpoint', 'grid', 'extinction'))
            self.require_int('sensitivity.n', 1)
            self.require_float('sensitivity.h', optional=True)
            self.require_float('sensitivity.target_sd', optional=True)
            self.require_int('sensitivity.max_samples', 2)
            self.require_float('sensitivity.max_seconds', optional=True)
        elif command == 'mlmc':
            self.require_int('mlmc.M', 2)
            self.require_float('mlmc.target_sd')
            self.require_int('mlmc.pilot', 2)
            self.require_int('mlmc.max_samples', 2)
            levels = self.get('mlmc.levels')
            if (not isinstance(levels, (list, tuple)) or len(levels) != 2
                    or not all(isinstance(v, int) and not isinstance(v, bool) for v in levels)
                    or not 0 <= levels[0] <= levels[1]):
                raise ConfigError('mlmc.levels', f"expected [ell0, L] with 0 <= ell0 <= L, got {levels!r}")
