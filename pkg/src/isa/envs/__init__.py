from .base import GridEnv, GroundTruth, EnvSpec, StepResult
from .navigation import GridNavigation
from .shooting import GridShooting
from .unlock import GridUnlock
from ..core import ConfigurationError

REGISTRY = {
    "gridnavigation": GridNavigation,
    "gridunlock": GridUnlock,
    "gridshooting": GridShooting,
}


def make_env(name: str, **params) -> GridEnv:
    try:
        cls = REGISTRY[name.lower()]
    except KeyError:
        raise ConfigurationError(f"unknown environment {name!r}; choose from {sorted(REGISTRY)}") from None
    try:
        return cls(**params)
    except TypeError as exc:
        raise ConfigurationError(f"bad parameters for {name}: {exc}") from None


__all__ = ["GridEnv", "GroundTruth", "EnvSpec", "StepResult", "GridNavigation",
           "GridShooting", "GridUnlock", "REGISTRY", "make_env"]
