"""INI configuration files for the command-line tools.

A file holds up to four sections::

    [experiment]              ; benchmark grid (bench, tune)
    arm_count = 2, 5, 10, 50
    variance = 0.0001, 0.01, 1
    family = normal
    mean_mode = uniform
    horizon = 1000
    repetitions = 1000
    master_seed = 0

    [algorithms]              ; bench
    names = epsilon_greedy, softmax, ucb1
    softmax.tau = 0.01        ; fixes a parameter for every cell

    [tune]
    algorithm = softmax
    parameter = tau
    grid = 0.0007, 0.001, 0.005, 0.01, 0.05, 0.1

    [trial]
    population = in           ; "in", "out" or a CSV path
    strategies = randomization, epsilon_greedy
    epsilon_greedy.epsilon = 0.05
    randomization.ratio = 1, 1
    patient_count = 360
    accrual_weeks = 30
    feedback_delay_days = 14
    repetitions = 1000
    seed = 0

Unknown sections or keys are errors.  Parameters not fixed in the file
fall back to :data:`TUNED_PARAMS` for the cell, then to
:data:`FALLBACK_PARAMS`.
"""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from typing import Optional

from .core import ALGORITHM_PARAMETERS
from .env import Family, MeanSamplingMode
from .errors import ConfigError, InvalidConfigurationError, UnsupportedConfigurationError
from .trial import DEFAULT_STRATEGIES, DEFAULT_STRATEGY_PARAMS, STRATEGY_NAMES

ALGORITHMS = tuple(ALGORITHM_PARAMETERS)

# Tuned parameters per (arm count, reward standard deviation), read off the
# tuned reference runs of the benchmark grid.
TUNED_PARAMS = {
    (2, 0.01): {"epsilon": 0.005, "tau": 0.001, "pursuit": 0.1, "rc": (0.4, 0.98)},
    (2, 0.1): {"epsilon": 0.001, "tau": 0.01, "pursuit": 0.1, "rc": (0.4, 0.98)},
    (2, 1.0): {"epsilon": 0.05, "tau": 0.1, "pursuit": 0.05, "rc": (0.4, 0.98)},
    (5, 0.01): {"epsilon": 0.005, "tau": 0.001, "pursuit": 0.4, "rc": (0.1, 0.95)},
    (5, 0.1): {"epsilon": 0.001, "tau": 0.01, "pursuit": 0.25, "rc": (0.1, 0.95)},
    (5, 1.0): {"epsilon": 0.05, "tau": 0.1, "pursuit": 0.05, "rc": (0.01, 0.9)},
    (10, 0.01): {"epsilon": 0.001, "tau": 0.001, "pursuit": 0.5, "rc": (0.01, 0.98)},
    (10, 0.1): {"epsilon": 0.005, "tau": 0.01, "pursuit": 0.5, "rc": (0.1, 0.95)},
    (10, 1.0): {"epsilon": 0.1, "tau": 0.05, "pursuit": 0.05, "rc": (0.1, 0.98)},
    (50, 0.01): {"epsilon": 0.005, "tau": 0.001, "pursuit": 0.5, "rc": (0.01, 0.98)},
    (50, 0.1): {"epsilon": 0.005, "tau": 0.01, "pursuit": 0.5, "rc": (0.1, 0.98)},
    (50, 1.0): {"epsilon": 0.01, "tau": 0.007, "pursuit": 0.5, "rc": (0.01, 0.98)},
}
FALLBACK_PARAMS = {"epsilon": 0.01, "tau": 0.01, "pursuit": 0.1, "rc": (0.1, 0.95)}

DEFAULT_ARM_COUNTS = (2, 5, 10, 50)
DEFAULT_VARIANCES = (0.0001, 0.01, 1.0)
TAU_GRID = (0.0007, 0.001, 0.005, 0.01, 0.05, 0.1)


def cell_params(algorithm: str, arm_count: int, variance: float) -> dict:
    """Default parameters of ``algorithm`` on one benchmark cell."""
    sd = round(math.sqrt(variance), 9)
    row = TUNED_PARAMS.get((arm_count, sd), FALLBACK_PARAMS)
    if algorithm == "epsilon_greedy":
        return {"epsilon": row["epsilon"]}
    if algorithm == "softmax":
        return {"tau": row["tau"]}
    if algorithm == "pursuit":
        return {"beta": row["pursuit"]}
    if algorithm == "reinforcement_comparison":
        alpha, beta = row["rc"]
        return {"alpha": alpha, "beta": beta}
    return {}


@dataclass
class BenchConfig:
    arm_counts: tuple = DEFAULT_ARM_COUNTS
    variances: tuple = DEFAULT_VARIANCES
    families: tuple = (Family.NORMAL,)
    mean_mode: MeanSamplingMode = MeanSamplingMode.UNIFORM_ON_01
    horizon: int = 1000
    repetitions: int = 1000
    master_seed: Optional[int] = None
    algorithms: tuple = ALGORITHMS
    fixed_params: dict = field(default_factory=dict)  # algorithm -> {param: value}
    tune_algorithm: str = "softmax"
    tune_parameter: str = "tau"
    tune_grid: tuple = TAU_GRID

    def params_for(self, algorithm, arm_count, variance):
        params = cell_params(algorithm, arm_count, variance)
        params.update(self.fixed_params.get(algorithm, {}))
        return params


@dataclass
class TrialSettings:
    population: str = "in"
    strategies: tuple = DEFAULT_STRATEGIES
    strategy_params: dict = field(default_factory=dict)
    patient_count: int = 360
    accrual_weeks: int = 30
    feedback_delay_days: int = 14
    repetitions: int = 1000
    seed: Optional[int] = None

    def params_for(self, strategy):
        params = dict(DEFAULT_STRATEGY_PARAMS[strategy])
        params.update(self.strategy_params.get(strategy, {}))
        return params


@dataclass
class Config:
    bench: BenchConfig = field(default_factory=BenchConfig)
    trial: TrialSettings = field(default_factory=TrialSettings)
    has_tune: bool = False
    raw: dict = field(default_factory=dict)


# --- value parsers ---------------------------------------------------------

def _list(path, text):
    items = [t.strip() for t in text.split(",")]
    if not items or any(t == "" for t in items):
        raise ConfigError(path, f"expected a comma-separated list, got {text!r}")
    return items


def _int(path, text, minimum=None):
    try:
        value = int(text.strip())
    except ValueError:
        raise ConfigError(path, f"expected an integer, got {text!r}") from None
    if minimum is not None and value < minimum:
        raise ConfigError(path, f"must be at least {minimum}, got {value}")
    return value


def _float(path, text, positive=False):
    try:
        value = float(text.strip())
    except ValueError:
        raise ConfigError(path, f"expected a number, got {text!r}") from None
    if not math.isfinite(value):
        raise ConfigError(path, f"expected a finite number, got {text!r}")
    if positive and not value > 0:
        raise ConfigError(path, f"must be positive, got {value}")
    return value


def _seed(path, text):
    value = _int(path, text, minimum=0)
    if value >= 2 ** 64:
        raise ConfigError(path, "seed must fit in 64 bits")
    return value


def _dotted(path, key, allowed_names, param_table):
    name, _, param = key.partition(".")
    if name not in allowed_names:
        raise ConfigError(path, f"unknown algorithm {name!r}")
    if param not in param_table[name]:
        raise ConfigError(path, f"{name} has no parameter {param!r}; "
                                f"expected one of {list(param_table[name])}")
    return name, param


# --- sections --------------------------------------------------------------

_EXPERIMENT_KEYS = {"arm_count", "variance", "family", "mean_mode", "horizon",
                    "repetitions", "master_seed"}
_TUNE_KEYS = {"algorithm", "parameter", "grid"}
_TRIAL_KEYS = {"population", "strategies", "patient_count", "accrual_weeks",
               "feedback_delay_days", "repetitions", "seed"}
_STRATEGY_PARAM_TABLE = {name: tuple(DEFAULT_STRATEGY_PARAMS[name]) for name in STRATEGY_NAMES}


def _parse_experiment(items, bench):
    for key, text in items:
        path = f"experiment.{key}"
        if key not in _EXPERIMENT_KEYS:
            raise ConfigError(path, "unknown key")
        if key == "arm_count":
            bench.arm_counts = tuple(_int(path, t, minimum=1) for t in _list(path, text))
        elif key == "variance":
            bench.variances = tuple(_float(path, t, positive=True) for t in _list(path, text))
        elif key == "family":
            try:
                bench.families = tuple(Family.parse(t) for t in _list(path, text))
            except UnsupportedConfigurationError as exc:
                raise ConfigError(path, str(exc)) from None
        elif key == "mean_mode":
            try:
                bench.mean_mode = MeanSamplingMode.parse(text)
            except UnsupportedConfigurationError as exc:
                raise ConfigError(path, str(exc)) from None
        elif key == "horizon":
            bench.horizon = _int(path, text, minimum=1)
        elif key == "repetitions":
            bench.repetitions = _int(path, text, minimum=1)
        elif key == "master_seed":
            bench.master_seed = _seed(path, text)
    if bench.horizon < max(bench.arm_counts):
        raise ConfigError("experiment.horizon", "must be at least the largest arm_count")


def _parse_algorithms(items, bench):
    fixed = {}
    for key, text in items:
        path = f"algorithms.{key}"
        if key == "names":
            if text.strip() == "":
                raise ConfigError(path, "the algorithm list is empty")
            names = _list(path, text)
            for n in names:
                if n not in ALGORITHMS:
                    raise ConfigError(path, f"unknown algorithm {n!r}; choose from {list(ALGORITHMS)}")
            bench.algorithms = tuple(names)
        elif "." in key:
            name, param = _dotted(path, key, ALGORITHMS, ALGORITHM_PARAMETERS)
            fixed.setdefault(name, {})[param] = _float(path, text, positive=True)
        else:
            raise ConfigError(path, "unknown key")
    bench.fixed_params = fixed


def _parse_tune(items, bench):
    for key, text in items:
        path = f"tune.{key}"
        if key not in _TUNE_KEYS:
            raise ConfigError(path, "unknown key")
        if key == "algorithm":
            if text.strip() not in ALGORITHMS:
                raise ConfigError(path, f"unknown algorithm {text.strip()!r}")
            bench.tune_algorithm = text.strip()
        elif key == "parameter":
            bench.tune_parameter = text.strip()
        elif key == "grid":
            bench.tune_grid = tuple(_float(path, t, positive=True) for t in _list(path, text))
    if bench.tune_parameter not in ALGORITHM_PARAMETERS[bench.tune_algorithm]:
        raise ConfigError("tune.parameter", f"{bench.tune_algorithm} has no parameter "
                                            f"{bench.tune_parameter!r}")


def _parse_trial(items, trial):
    params = {}
    for key, text in items:
        path = f"trial.{key}"
        if "." in key:
            name, param = _dotted(path, key, STRATEGY_NAMES, _STRATEGY_PARAM_TABLE)
            if param == "ratio":
                parts = tuple(_float(path, t, positive=True) for t in _list(path, text))
                if len(parts) != 2:
                    raise ConfigError(path, "ratio needs exactly two parts")
                params.setdefault(name, {})[param] = parts
            else:
                params.setdefault(name, {})[param] = _float(path, text, positive=True)
            continue
        if key not in _TRIAL_KEYS:
            raise ConfigError(path, "unknown key")
        if key == "population":
            trial.population = text.strip()
        elif key == "strategies":
            names = _list(path, text)
            for n in names:
                if n not in STRATEGY_NAMES:
                    raise ConfigError(path, f"unknown strategy {n!r}")
            trial.strategies = tuple(names)
        elif key == "patient_count":
            trial.patient_count = _int(path, text, minimum=1)
        elif key == "accrual_weeks":
            trial.accrual_weeks = _int(path, text, minimum=1)
        elif key == "feedback_delay_days":
            trial.feedback_delay_days = _int(path, text, minimum=0)
        elif key == "repetitions":
            trial.repetitions = _int(path, text, minimum=1)
        elif key == "seed":
            trial.seed = _seed(path, text)
    trial.strategy_params = params


def parse_config(text: str) -> Config:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    parser.optionxform = str  # keys are case sensitive
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("<file>", f"not a valid INI file: {exc}") from None
    cfg = Config()
    sections = parser.sections()
    for s in sections:
        if s not in ("experiment", "algorithms", "tune", "trial"):
            raise ConfigError(s, "unknown section")
    if "experiment" in sections:
        _parse_experiment(parser.items("experiment"), cfg.bench)
    if "algorithms" in sections:
        _parse_algorithms(parser.items("algorithms"), cfg.bench)
    if "tune" in sections:
        cfg.has_tune = True
        _parse_tune(parser.items("tune"), cfg.bench)
    if "trial" in sections:
        _parse_trial(parser.items("trial"), cfg.trial)
    cfg.raw = {s: dict(parser.items(s)) for s in sections}
    _validate_values(cfg)
    return cfg


def _validate_values(cfg):
    # Range checks owned by the policy constructors.
    from .core import make_policy
    from .trial import StrategySpec
    for name, params in cfg.bench.fixed_params.items():
        try:
            make_policy(name, 2, {**cell_params(name, 10, 0.01), **params})
        except InvalidConfigurationError as exc:
            raise ConfigError(f"algorithms.{name}", str(exc)) from None
    for name, params in cfg.trial.strategy_params.items():
        try:
            StrategySpec(name, params)
        except InvalidConfigurationError as exc:
            raise ConfigError(f"trial.{name}", str(exc)) from None


def load_config(path) -> Config:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
