"""Monte-Carlo regret experiments.

Each repetition ``r`` of stream ``s`` draws from
``SeedSequence(master_seed, spawn_key=(s, r))``, split into three child
streams: arm means, policy uniforms and reward noise.  Results are stored
by repetition index and reduced in index order, so aggregates do not
depend on the thread count or on scheduling.  Since the algorithm and
reward family are not part of the key, different algorithms and families
see the same arm means (common random numbers).
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import kernel
from .core import ALGORITHM_CODES, ALGORITHM_PARAMETERS, OPTIMISTIC_INITIAL_VALUE
from .env import (BanditInstance, Family, MeanSamplingMode, reward_from_draws,
                  sample_means, standard_draws)
from .errors import (InvalidConfigurationError, UndefinedBoundError,
                     UnsupportedConfigurationError)

# Upper bound on uniforms any policy consumes per turn (two in select, one in update).
UNIFORMS_PER_TURN = 3


@dataclass(frozen=True)
class ExperimentConfig:
    arm_count: int
    variance: float
    algorithm: str
    params: dict = field(default_factory=dict)
    family: Family = Family.NORMAL
    mean_mode: MeanSamplingMode = MeanSamplingMode.UNIFORM_ON_01
    horizon: int = 1000
    repetitions: int = 1000
    master_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "family", Family.parse(self.family))
        object.__setattr__(self, "mean_mode", MeanSamplingMode.parse(self.mean_mode))
        object.__setattr__(self, "params", dict(self.params))
        if self.arm_count < 1:
            raise InvalidConfigurationError("arm_count must be positive")
        if self.family is not Family.BERNOULLI and not self.variance > 0.0:
            raise InvalidConfigurationError("variance must be positive")
        if self.horizon < self.arm_count:
            raise InvalidConfigurationError("horizon must be at least arm_count")
        if self.repetitions < 1:
            raise InvalidConfigurationError("repetitions must be positive")
        expected = ALGORITHM_PARAMETERS.get(self.algorithm)
        if expected is None:
            raise InvalidConfigurationError(f"unknown algorithm {self.algorithm!r}")
        if sorted(self.params) != sorted(expected):
            raise InvalidConfigurationError(
                f"{self.algorithm} expects parameters {list(expected)}, got {sorted(self.params)}")

    def kernel_params(self):
        values = [float(self.params[p]) for p in ALGORITHM_PARAMETERS[self.algorithm]]
        values += [0.0] * (2 - len(values))
        return values[0], values[1]


@dataclass
class RunMetrics:
    per_turn_regret: np.ndarray
    optimal_play: np.ndarray
    play_counts: np.ndarray

    @property
    def cumulative_regret(self) -> np.ndarray:
        return np.cumsum(self.per_turn_regret)

    @property
    def total_regret(self) -> float:
        return float(self.cumulative_regret[-1])

    @property
    def optimal_fraction(self) -> float:
        return float(np.mean(self.optimal_play))


@dataclass
class AggregateMetrics:
    mean_total_regret: float
    std_error_total_regret: float
    regret_curve: np.ndarray
    optimal_fraction_curve: np.ndarray
    total_regrets: np.ndarray

    @property
    def cumulative_regret_curve(self) -> np.ndarray:
        return np.cumsum(self.regret_curve)

    @property
    def repetitions(self) -> int:
        return len(self.total_regrets)


def repetition_streams(master_seed: int, stream: int, repetition: int):
    """``(means_rng, policy_rng, noise_rng)`` for one repetition."""
    seq = np.random.SeedSequence(int(master_seed), spawn_key=(int(stream), int(repetition)))
    return tuple(np.random.default_rng(s) for s in seq.spawn(3))


def _episode(config: ExperimentConfig, means, policy_rng, noise_rng, run_episode=None,
             unplayed_random=False):
    run_episode = run_episode or kernel.run_episode
    a, b = standard_draws(config.family, noise_rng, config.horizon)
    u = policy_rng.random(UNIFORMS_PER_TURN * config.horizon)
    p1, p2 = config.kernel_params()
    sd = math.sqrt(config.variance) if config.variance > 0 else 0.0
    regret, optimal, counts = run_episode(
        ALGORITHM_CODES[config.algorithm], p1, p2, np.ascontiguousarray(means, dtype=float),
        config.family.value, sd, a, b, u, OPTIMISTIC_INITIAL_VALUE, unplayed_random)
    return RunMetrics(regret, optimal, counts)


def play(policy, instance: BanditInstance, rng, horizon: int) -> RunMetrics:
    """Generic loop for any object with ``select``/``update``."""
    a, b = standard_draws(instance.family, rng, horizon)
    means = instance.means
    best = instance.best_mean
    regret = np.empty(horizon)
    optimal = np.empty(horizon, dtype=bool)
    counts = np.zeros(instance.arm_count, dtype=np.int_)
    for t in range(horizon):
        arm = policy.select(rng)
        r = reward_from_draws(instance.family.value, means[arm], instance.sd,
                              float(a[t]), float(b[t]))
        policy.update(arm, r, rng)
        regret[t] = best - means[arm]
        optimal[t] = means[arm] == best
        counts[arm] += 1
    return RunMetrics(regret, optimal, counts)


def run_single(config: ExperimentConfig, instance: BanditInstance, rng: np.random.Generator,
               policy=None, run_episode=None) -> RunMetrics:
    """One horizon on a fixed instance.

    With ``policy`` given, that object is played through :func:`play`;
    otherwise the configured algorithm runs on the selected kernel.
    """
    if instance.arm_count != config.arm_count or instance.family is not config.family:
        raise InvalidConfigurationError("instance does not match the experiment configuration")
    if policy is not None:
        return play(policy, instance, rng, config.horizon)
    return _episode(config, instance.means, rng, rng, run_episode)


def _draw_means(config, means_rng):
    means = sample_means(config.arm_count, config.mean_mode, means_rng)
    if config.family is Family.INVERSE_GAUSSIAN:
        # Zero has probability 2**-53 per draw; redraw rather than fail.
        while np.any(means <= 0.0):
            means = sample_means(config.arm_count, config.mean_mode, means_rng)
    return means


def run_experiment(config: ExperimentConfig, threads: int = 1, stream: int = 0,
                   run_episode=None) -> AggregateMetrics:
    R, T = config.repetitions, config.horizon
    regrets = np.empty((R, T))
    optimal = np.empty((R, T), dtype=bool)

    def work(r):
        means_rng, policy_rng, noise_rng = repetition_streams(config.master_seed, stream, r)
        means = _draw_means(config, means_rng)
        m = _episode(config, means, policy_rng, noise_rng, run_episode)
        regrets[r] = m.per_turn_regret
        optimal[r] = m.optimal_play

    if threads <= 1:
        for r in range(R):
            work(r)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(work, range(R)))
    return aggregate(regrets, optimal)


def aggregate(regrets: np.ndarray, optimal: np.ndarray) -> AggregateMetrics:
    totals = regrets.sum(axis=1)
    R = len(totals)
    se = float(np.std(totals, ddof=1) / math.sqrt(R)) if R > 1 else 0.0
    return AggregateMetrics(
        mean_total_regret=float(np.mean(totals)),
        std_error_total_regret=se,
        regret_curve=regrets.mean(axis=0),
        optimal_fraction_curve=optimal.mean(axis=0),
        total_regrets=totals,
    )


@dataclass
class TuneResult:
    parameter: str
    best_value: float
    table: list  # (value, AggregateMetrics) in grid order

    @property
    def best(self) -> AggregateMetrics:
        return dict(self.table)[self.best_value]


def tune(config: ExperimentConfig, parameter: str, grid: Sequence[float],
         threads: int = 1, run_episode=None, common_streams: bool = True) -> TuneResult:
    """Grid search minimising mean total regret; ties go to the smaller value.

    With ``common_streams`` every grid point replays the same repetition
    streams, so neighbouring values are compared on identical instances
    and noise.  Otherwise grid point ``i`` uses seed stream ``i``.
    """
    if len(grid) == 0:
        raise InvalidConfigurationError("tuning grid is empty")
    if parameter not in ALGORITHM_PARAMETERS[config.algorithm]:
        raise InvalidConfigurationError(
            f"{config.algorithm} has no parameter {parameter!r}")
    table = []
    for i, value in enumerate(grid):
        params = dict(config.params)
        params[parameter] = float(value)
        cfg = replace(config, params=params)
        stream = 0 if common_streams else i
        table.append((float(value), run_experiment(cfg, threads, stream=stream,
                                                   run_episode=run_episode)))
    best_value = min(table, key=lambda row: (row[1].mean_total_regret, row[0]))[0]
    return TuneResult(parameter, best_value, table)


def _bernoulli_kl(p: float, q: float) -> float:
    def term(a, b):
        if a == 0.0:
            return 0.0
        if b == 0.0:
            return math.inf
        return a * math.log(a / b)
    return term(p, q) + term(1.0 - p, 1.0 - q)


def lai_robbins_bound(instance: BanditInstance, turn: int, variance: Optional[float] = None) -> float:
    """Asymptotic lower bound ``sum_k gap_k * ln(turn) / KL(p_k || p*)``.

    This is a reference curve, not a finite-time guarantee.
    """
    if turn < 1:
        raise InvalidConfigurationError("turn must be positive")
    gaps = instance.gaps
    if not any(g > 0.0 for g in gaps):
        raise UndefinedBoundError("no suboptimal arm: the bound needs a positive gap")
    family = instance.family
    if family not in (Family.NORMAL, Family.BERNOULLI):
        raise UnsupportedConfigurationError(
            f"closed-form KL divergence not available for {family.label} rewards")
    var = instance.variance if variance is None else variance
    best = instance.best_mean
    lt = math.log(turn)
    total = 0.0
    for mu, gap in zip(instance.means, gaps):
        if gap <= 0.0:
            continue
        if family is Family.NORMAL:
            kl = gap * gap / (2.0 * var)
        else:
            kl = _bernoulli_kl(mu, best)
        if math.isinf(kl):
            continue
        total += gap * lt / kl
    return total
