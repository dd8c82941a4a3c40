"""Bandit policies, a regret benchmark harness and a delayed-feedback trial simulator."""
from .errors import (BanditLabError, ConfigError, InvalidConfigurationError, PopulationError,
                     UndefinedBoundError, UndefinedCurveError, UndefinedTestError,
                     UnsupportedConfigurationError)
from .kernel import BACKEND

__version__ = "0.1.0"
