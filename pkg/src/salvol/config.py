"""Run configuration and logging setup."""

import json
from copy import deepcopy
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, TypedDict, Union, cast

import uvlog

from salvol.errors import ConfigError

__all__ = [
    "DEFAULT_CONFIG",
    "STRATEGIES",
    "RunConfig",
    "get_logger",
    "configure_logging",
    "merge_dicts",
    "resolve_config",
    "load_config_file",
]

ROOT_LOGGER_NAME = "salvol"

StrategyName = Literal["naive", "distance-limited", "inhibition-of-return", "random-baseline"]
STRATEGIES = ("naive", "distance-limited", "inhibition-of-return", "random-baseline")
LogFormat = Literal["text", "json"]


class _FixationsConfig(TypedDict, total=False):
    bin_width_s: float
    image_dims: List[int]


class _VolumeConfig(TypedDict, total=False):
    dims: List[int]
    dt_s: float
    bandwidths: List[float]
    wrap_width: bool


class _SamplingConfig(TypedDict, total=False):
    strategy: StrategyName
    mask_sigma_px: float
    num_scanpaths: int
    seed: int


class _MetricConfig(TypedDict, total=False):
    position: float
    direction: float
    length: float
    duration: float
    max_workers: int


class _LoggingConfig(TypedDict, total=False):
    level: uvlog.LevelName
    format: LogFormat


class RunConfig(TypedDict, total=False):
    fixations: _FixationsConfig
    volume: _VolumeConfig
    sampling: _SamplingConfig
    metric: _MetricConfig
    logging: _LoggingConfig


DEFAULT_CONFIG: RunConfig = {
    "fixations": {
        "bin_width_s": 0.1,
        "image_dims": [6000, 3000],
    },
    "volume": {
        "dims": [12, 300, 600],
        "dt_s": 25.0 / 12,
        "bandwidths": [4.0, 20.0, 20.0],
        "wrap_width": False,
    },
    "sampling": {
        "strategy": "naive",
        "mask_sigma_px": 40.0,
        "num_scanpaths": 40,
        "seed": 0,
    },
    "metric": {
        "position": 1.0,
        "direction": 0.0,
        "length": 0.0,
        "duration": 0.0,
        "max_workers": 1,
    },
    "logging": {
        "level": "INFO",
        "format": "text",
    },
}  #: documented defaults of every subcommand


def get_logger(name: str = "", /) -> uvlog.Logger:
    """Get a persistent logger in the library namespace.

    Loggers are looked up on each call, so a logger requested after :py:func:`configure_logging` uses the newly
    configured handlers.
    """
    full_name = f"{ROOT_LOGGER_NAME}.{name}" if name else ROOT_LOGGER_NAME
    return uvlog.get_logger(full_name, persistent=True)


def configure_logging(level: uvlog.LevelName = "INFO", fmt: LogFormat = "text") -> uvlog.Logger:
    """Send all library logs to stderr with the given level and formatter."""
    if fmt not in ("text", "json"):
        raise ConfigError(f'Unknown log format "{fmt}"\n\nFix: use "text" or "json"', key="logging.format")
    if level not in uvlog.name_to_level:
        raise ConfigError(f'Unknown log level "{level}"', key="logging.level")
    return uvlog.configure(
        {
            "loggers": {"": {"level": level, "handlers": ["stderr"]}},
            "handlers": {"stderr": {"formatter": fmt, "level": "DEBUG"}},
            "formatters": {
                "text": {"format": "{asctime} | {level:8} | {name} | {message}"},
                "json": {"keys": ["asctime", "level", "name", "message", "exc_info"]},
            },
        }
    )


def merge_dicts(from_dict: dict, to_dict: dict) -> dict:
    """Merge `to_dict` over `from_dict`: nested dicts are merged, other values replaced.

    >>> merge_dicts({'a': {'x': 1, 'y': 2}, 'b': 1}, {'a': {'y': 3}})
    {'a': {'x': 1, 'y': 3}, 'b': 1}
    """
    _new_dict = {**from_dict}
    for key, value in to_dict.items():
        if key in _new_dict and isinstance(value, dict) and isinstance(_new_dict[key], dict):
            _new_dict[key] = merge_dicts(_new_dict[key], value)
        else:
            _new_dict[key] = value
    return _new_dict


def load_config_file(path: Union[str, Path], /) -> Dict[str, Any]:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"Config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"Config file {path} must contain a JSON object")
    return data


def resolve_config(*overrides: Optional[Dict[str, Any]]) -> RunConfig:
    """Merge overrides (in order) over the defaults and validate the result.

    >>> resolve_config({'sampling': {'seed': 7}})['sampling']['seed']
    7
    """
    config = cast(dict, deepcopy(DEFAULT_CONFIG))
    for override in overrides:
        if override:
            unknown = set(override) - set(config)
            if unknown:
                raise ConfigError(f"Unknown config sections: {sorted(unknown)}", key=sorted(unknown)[0])
            config = merge_dicts(config, override)
    _validate(config)
    return cast(RunConfig, config)


def _require(condition: bool, message: str, key: str) -> None:
    if not condition:
        raise ConfigError(message, key=key)


def _validate(config: dict) -> None:
    fixations, volume, sampling, metric = config["fixations"], config["volume"], config["sampling"], config["metric"]
    _require(fixations["bin_width_s"] > 0, "Duration bin width must be positive", "fixations.bin_width_s")
    _require(
        len(fixations["image_dims"]) == 2 and all(int(v) >= 1 for v in fixations["image_dims"]),
        "Image dims must be two positive integers (width, height)",
        "fixations.image_dims",
    )
    dims = volume["dims"]
    _require(
        len(dims) == 3 and int(dims[0]) >= 0 and int(dims[1]) >= 1 and int(dims[2]) >= 1,
        "Volume dims must be (T, H, W) with H, W >= 1 and T >= 1 (or 0 to derive T from the data)",
        "volume.dims",
    )
    _require(volume["dt_s"] > 0, "Slice duration must be positive", "volume.dt_s")
    _require(
        len(volume["bandwidths"]) == 3 and all(v > 0 for v in volume["bandwidths"]),
        "Bandwidths must be three positive numbers (t, h, w)",
        "volume.bandwidths",
    )
    _require(
        sampling["strategy"] in STRATEGIES,
        f'Unknown strategy "{sampling["strategy"]}"\n\nFix: use one of {", ".join(STRATEGIES)}',
        "sampling.strategy",
    )
    _require(sampling["mask_sigma_px"] > 0, "Mask sigma must be positive", "sampling.mask_sigma_px")
    _require(int(sampling["num_scanpaths"]) >= 1, "At least one scanpath must be generated", "sampling.num_scanpaths")
    _require(0 <= int(sampling["seed"]) < 2**64, "Seed must be an unsigned 64-bit integer", "sampling.seed")
    weights = [metric[key] for key in ("position", "direction", "length", "duration")]
    _require(all(w >= 0 for w in weights) and sum(weights) > 0, "Metric weights must be non-negative, not all zero", "metric")
    _require(int(metric["max_workers"]) >= 1, "max_workers must be at least 1", "metric.max_workers")
