from dataclasses import asdict, dataclass, field
from logging.config import dictConfig
from pathlib import Path
from typing import Dict, Mapping, Optional, Union
import logging

from config_loader import load_configs


class UnpackMixin(Mapping):
    """A mixin class to unpack dataclass attributes as a mapping."""

    def __iter__(self):
        return iter(asdict(self).keys())

    def __len__(self):
        return len(asdict(self))

    def __getitem__(self, key):
        if key not in asdict(self):
            raise KeyError(f"Key {key} not found in {self.__class__.__name__}")
        return getattr(self, key)


@dataclass(frozen=True)
class ToleranceConfig(UnpackMixin):
    """Numerical tolerances shared by the linear algebra and the validity checks."""

    rank: float = 1e-10  # relative singular-value threshold
    psd: float = 1e-10  # absolute floor for Hermitian eigenvalue checks
    symmetry: float = 1e-9
    residual: float = 1e-8  # runtime postcondition checks on canonical forms
    ill_conditioned_factor: float = 10.0


@dataclass(frozen=True)
class OracleConfig(UnpackMixin):
    """Configuration for the truncated Fock-space oracle."""

    cutoff: int = 40  # highest photon number kept, matrices are (cutoff + 1) square
    padding: int = 20  # extra photon numbers used when building states
    max_cutoff: int = 80
    nodes_1d: int = 201
    nodes_2d: int = 121
    gaussian_tail: float = 1e-12  # integrand size at the quadrature window edge
    validated_radius: float = 3.0  # |z| up to which Weyl matrices are trusted at cutoff 40
    convergence_rtol: float = 1e-3


@dataclass(frozen=True)
class SamplingConfig(UnpackMixin):
    """Configuration for outcome sampling."""

    seed: int = 0
    n: int = 1000


@dataclass(frozen=True)
class ObservablesConfig(UnpackMixin):
    """Top level configuration."""

    tolerances: ToleranceConfig = field(default_factory=ToleranceConfig)
    oracle: OracleConfig = field(default_factory=OracleConfig)
    sampling: SamplingConfig = field(default_factory=SamplingConfig)


def get_nested_value(config: Dict, target_key: str):
    """
    Retrieve a nested value from a configuration dictionary.

    Args:
        config: The dictionary to search.
        target_key: The key to find.

    Returns:
        The value associated with the target key, or None if not found.
    """
    if target_key in config:
        return config[target_key]

    for key, value in config.items():
        if isinstance(value, dict):
            result = get_nested_value(value, target_key)
            if result is not None:
                return result

    return None


def initialize_logging(logging_config: Union[Dict, str]) -> logging.Logger:
    """
    Initialize the logger.

    Args:
        logging_config: The logging configuration dictionary or file path.

    Returns:
        A logger instance.
    """
    if isinstance(logging_config, str):
        logging_config = load_configs(logging_config)
    for handler in logging_config.get("handlers", {}).values():
        if "filename" in handler:
            Path(handler["filename"]).parent.mkdir(parents=True, exist_ok=True)
    dictConfig(logging_config)
    return logging.getLogger("gaussian_observables")


def initialize_config(config: Optional[Union[str, Path]] = None) -> ObservablesConfig:
    """
    Initialize the configuration.

    Args:
        config: The configuration file path. Defaults are used when omitted.

    Returns:
        An ObservablesConfig with every missing key filled from the defaults.
    """
    if config is None:
        return ObservablesConfig()

    loaded = load_configs(str(config))
    section = get_nested_value(loaded, "gaussian_observables") or {}

    tolerances = ToleranceConfig(**section.get("tolerances", {}))
    oracle = OracleConfig(**section.get("oracle", {}))
    sampling = SamplingConfig(**section.get("sampling", {}))

    return ObservablesConfig(tolerances=tolerances, oracle=oracle, sampling=sampling)


DEFAULT_CONFIG = ObservablesConfig()
