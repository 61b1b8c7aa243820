import configparser
import logging
import os
from typing import Any, Callable, Dict, List, Optional

import yaml

logger = logging.getLogger(__name__)


def load_yaml(file_path: str) -> Dict[str, Any]:
    """
    Read an experiment file. JSON documents are valid YAML, so both formats
    go through ``yaml.safe_load``. Anything other than a mapping yields {}.
    """
    try:
        with open(file_path, 'r', encoding='utf-8') as f:
            data = yaml.safe_load(f)
    except FileNotFoundError:
        logger.error("Experiment file not found: %s", file_path)
        return {}
    except yaml.YAMLError as e:
        logger.error("Could not parse %s: %s", file_path, e)
        return {}

    if data is None:
        logger.info("File '%s' is empty; nothing to load.", file_path)
        return {}
    if not isinstance(data, dict):
        logger.warning("File '%s' holds a %s, not a mapping; ignoring it.",
                       file_path, type(data).__name__)
        return {}
    return data


def _float_list(raw: str) -> List[float]:
    values = [float(item) for item in raw.split(',') if item.strip()]
    if not values:
        raise ValueError(raw)
    return values


def _boolean(raw: str) -> bool:
    lowered = raw.strip().lower()
    if lowered not in configparser.ConfigParser.BOOLEAN_STATES:
        raise ValueError(raw)
    return configparser.ConfigParser.BOOLEAN_STATES[lowered]


# converter and the wording used when a value does not parse
_KINDS: Dict[type, tuple] = {
    int: (int, "an integer"),
    float: (float, "a number"),
    bool: (_boolean, "a boolean"),
    list: (_float_list, "comma-separated numbers"),
    str: (str.strip, "a string"),
}


class ConfigManager:
    """
    Typed access to ``config.ini``.

    Each section property returns a dict of parsed values. A missing file,
    section or key means the built-in default; a value that does not parse
    is logged and replaced by the default as well.
    """

    INFERENCE_DEFAULTS: Dict[str, Any] = {
        'max_outer_iterations': 500,
        'objective_tolerance': 1e-8,
        'kkt_tolerance': 1e-7,
        'thresholds': [0.01, 0.05, 0.1],
        'init_scale': 1e-3,
        'd_v_floor': 1e-8,
        'max_inner_iterations': 200,
        'method': 'newton',
        'solver': 'block',
    }
    EXPERIMENT_DEFAULTS: Dict[str, Any] = {
        'vertex_counts': [10, 30, 50],
        'fill_fractions': [0.1, 0.3, 0.5],
        'edge_probability': 0.3,
        'trials': 20,
        'samples': 50000,
        'd_low': 0.2,
        'd_high': 1.0,
        'k_margin': 1.5,
    }
    LOGGING_DEFAULTS: Dict[str, Any] = {
        'level': 'INFO',
        'log_dir': 'logs',
        'file_logging': True,
    }

    def __init__(self, config_dir: str = 'config'):
        self.config_file = os.path.join(config_dir, 'config.ini')
        self.config = configparser.ConfigParser()
        self._section_map: Dict[str, str] = {}
        self._cache: Dict[str, Dict[str, Any]] = {}
        self.load_config()

    def load_config(self) -> None:
        """(Re)read the file; a missing file leaves every value at default."""
        if os.path.exists(self.config_file):
            self.config.read(self.config_file, encoding='utf-8')
        else:
            logger.info("No configuration at %s; using defaults.",
                        self.config_file)
        self._section_map = {
            self._canonical_section_key(section): section
            for section in self.config.sections()
        }
        self._cache.clear()

    @staticmethod
    def _canonical_section_key(section: str) -> str:
        return ''.join(ch for ch in section.lower() if ch.isalnum())

    def _resolve_section(self, section: str) -> str:
        return self._section_map.get(self._canonical_section_key(section),
                                     section)

    def _typed(self, section: str, key: str, fallback: Any) -> Any:
        raw = self.get(section, key)
        if raw is None:
            return list(fallback) if isinstance(fallback, list) else fallback
        convert, expected = _KINDS[type(fallback)]
        try:
            return convert(raw)
        except ValueError:
            logger.warning(
                f"Invalid value for '{key}' in section '[{section}]'. "
                f"Expected {expected}, but got '{raw}'. "
                f"Using default value: {fallback}.")
            return list(fallback) if isinstance(fallback, list) else fallback

    def _section(self, section: str, defaults: Dict[str, Any],
                 post: Optional[Callable[[Dict[str, Any]], None]] = None
                 ) -> Dict[str, Any]:
        if section not in self._cache:
            values = {
                key: self._typed(section, key, default)
                for key, default in defaults.items()
            }
            if post is not None:
                post(values)
            self._cache[section] = values
        return self._cache[section]

    @property
    def inference(self) -> Dict[str, Any]:
        """[inference]; keys match the InferenceOptions fields."""
        return self._section('inference', self.INFERENCE_DEFAULTS)

    @property
    def experiment(self) -> Dict[str, Any]:
        """
        [experiment]; ``d_low``/``d_high`` are folded into ``d_range`` so
        the dict can seed an ExperimentConfig directly.
        """

        def finish(values: Dict[str, Any]) -> None:
            values['vertex_counts'] = [int(v) for v in values['vertex_counts']]
            values['d_range'] = [values.pop('d_low'), values.pop('d_high')]

        return self._section('experiment', self.EXPERIMENT_DEFAULTS, finish)

    @property
    def logging(self) -> Dict[str, Any]:

        def finish(values: Dict[str, Any]) -> None:
            values['level'] = values['level'].upper()

        return self._section('logging', self.LOGGING_DEFAULTS, finish)

    @property
    def runtime(self) -> Dict[str, Any]:
        """[runtime]; ``threads`` is None (use every CPU) unless positive."""
        threads = self._typed('runtime', 'threads', 0)
        return {'threads': threads if threads > 0 else None}

    def get(self, section: str, key: str, fallback: Any = None) -> Any:
        """Raw string value of ``key``, or ``fallback`` when absent."""
        return self.config.get(self._resolve_section(section),
                               key,
                               fallback=fallback)

