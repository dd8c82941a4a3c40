"""Bandit instances with moment-matched reward families.

All location-scale families are sampled as ``mean + sd * z`` where ``z``
is a standardised draw (zero mean, unit variance).  Inverse Gaussian and
Bernoulli rewards are built from a normal/uniform pair instead.  The
per-draw transform :func:`reward_from_draws` is the single definition of
a reward; the compiled kernel reimplements it verbatim.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import InvalidConfigurationError, UnsupportedConfigurationError

EULER_GAMMA = 0.5772156649015329
SQRT3 = math.sqrt(3.0)
SQRT6 = math.sqrt(6.0)
GUMBEL_SCALE = SQRT6 / math.pi  # std of a unit-scale Gumbel is pi / sqrt(6)


class Family(Enum):
    NORMAL = 0
    UNIFORM = 1
    TRIANGULAR = 2
    INVERSE_GAUSSIAN = 3
    GUMBEL = 4
    BERNOULLI = 5

    @classmethod
    def parse(cls, name):
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower().replace("-", "_").replace(" ", "_")
        aliases = {"inverse_gaussian": "INVERSE_GAUSSIAN", "wald": "INVERSE_GAUSSIAN",
                   "ig": "INVERSE_GAUSSIAN", "gaussian": "NORMAL"}
        try:
            return cls[aliases.get(key, key.upper())]
        except KeyError:
            raise UnsupportedConfigurationError(f"unknown reward family {name!r}") from None

    @property
    def label(self):
        return self.name.lower()


class MeanSamplingMode(Enum):
    UNIFORM_ON_01 = "uniform"
    NORMAL_AROUND_05 = "normal"

    @classmethod
    def parse(cls, name):
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower()
        for mode in cls:
            if key in (mode.value, mode.name.lower()):
                return mode
        raise UnsupportedConfigurationError(f"unknown mean sampling mode {name!r}")


# Normal means use the spread of U(0, 1): variance 1/12.
NORMAL_MEANS_STD = math.sqrt(1.0 / 12.0)


@dataclass(frozen=True)
class NormalParams:
    mean: float
    std: float


@dataclass(frozen=True)
class UniformParams:
    low: float
    high: float


@dataclass(frozen=True)
class TriangularParams:
    low: float
    mode: float
    high: float


@dataclass(frozen=True)
class GumbelParams:
    location: float
    scale: float


@dataclass(frozen=True)
class InverseGaussianParams:
    mean: float
    shape: float


@dataclass(frozen=True)
class BernoulliParams:
    p: float

    @property
    def variance(self):
        return self.p * (1.0 - self.p)


def distribution_params(family, mean: float, variance: float):
    """Parameters of ``family`` having the requested mean and variance.

    Bernoulli ignores ``variance``; its variance is ``p * (1 - p)``.
    """
    family = Family.parse(family)
    if family is Family.BERNOULLI:
        if not 0.0 <= mean <= 1.0:
            raise InvalidConfigurationError(f"Bernoulli mean must lie in [0, 1], got {mean}")
        return BernoulliParams(mean)
    if not variance > 0.0:
        raise InvalidConfigurationError(f"variance must be positive, got {variance}")
    sd = math.sqrt(variance)
    if family is Family.NORMAL:
        return NormalParams(mean, sd)
    if family is Family.UNIFORM:
        return UniformParams(mean - SQRT3 * sd, mean + SQRT3 * sd)
    if family is Family.TRIANGULAR:
        return TriangularParams(mean - SQRT6 * sd, mean, mean + SQRT6 * sd)
    if family is Family.GUMBEL:
        scale = sd * SQRT6 / math.pi
        return GumbelParams(mean - EULER_GAMMA * scale, scale)
    if not mean > 0.0:
        raise UnsupportedConfigurationError(
            f"inverse Gaussian rewards need a positive mean, got {mean}")
    return InverseGaussianParams(mean, mean ** 3 / variance)


def standard_draws(family, rng: np.random.Generator, size: int):
    """Pre-draw the two noise streams consumed by :func:`reward_from_draws`."""
    family = Family.parse(family)
    if family is Family.NORMAL:
        a = rng.standard_normal(size)
    elif family is Family.UNIFORM:
        a = rng.uniform(-SQRT3, SQRT3, size)
    elif family is Family.TRIANGULAR:
        a = rng.triangular(-SQRT6, 0.0, SQRT6, size)
    elif family is Family.GUMBEL:
        a = (rng.gumbel(0.0, 1.0, size) - EULER_GAMMA) * GUMBEL_SCALE
    elif family is Family.INVERSE_GAUSSIAN:
        a = rng.standard_normal(size)
    else:
        a = rng.random(size)
    if family is Family.INVERSE_GAUSSIAN:
        b = rng.random(size)
    else:
        b = np.zeros(size)
    return a, b


def inverse_gaussian_from_draws(mean: float, shape: float, z: float, u: float) -> float:
    """Michael-Schucany-Haas transform of a normal ``z`` and uniform ``u``.

    The root is written as ``4 mu lam d / (d + s)^2`` rather than as the
    textbook difference, which cancels catastrophically when
    ``mean / shape`` is large.
    """
    d = mean * z * z
    if d == 0.0:
        x = mean
    else:
        s = math.sqrt(4.0 * shape * d + d * d)
        x = 4.0 * mean * shape * d / ((d + s) * (d + s))
    if u <= mean / (mean + x):
        return x
    return mean * mean / x


def reward_from_draws(family_code: int, mean: float, sd: float, a: float, b: float) -> float:
    if family_code == 5:
        return 1.0 if a < mean else 0.0
    if family_code == 3:
        return inverse_gaussian_from_draws(mean, mean * mean * mean / (sd * sd), a, b)
    return mean + sd * a


def rewards_from_draws(family, mean: float, sd: float, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Vectorised :func:`reward_from_draws`."""
    family = Family.parse(family)
    a = np.asarray(a, dtype=float)
    if family is Family.BERNOULLI:
        return (a < mean).astype(float)
    if family is Family.INVERSE_GAUSSIAN:
        shape = mean ** 3 / (sd * sd)
        d = mean * a * a
        s = np.sqrt(4.0 * shape * d + d * d)
        with np.errstate(invalid="ignore", divide="ignore"):
            x = np.where(d == 0.0, mean, 4.0 * mean * shape * d / ((d + s) * (d + s)))
        return np.where(np.asarray(b) <= mean / (mean + x), x, mean * mean / x)
    return mean + sd * a


@dataclass(frozen=True)
class BanditInstance:
    """K arms sharing one variance and one reward family."""

    means: tuple
    variance: float
    family: Family = Family.NORMAL
    variance_derived: bool = field(default=False)

    def __post_init__(self):
        means = tuple(float(m) for m in self.means)
        if not means:
            raise InvalidConfigurationError("a bandit needs at least one arm")
        if any(not 0.0 <= m <= 1.0 for m in means):
            raise InvalidConfigurationError("arm means must lie in [0, 1]")
        family = Family.parse(self.family)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "family", family)
        if family is Family.BERNOULLI:
            object.__setattr__(self, "variance_derived", True)
        else:
            if not self.variance > 0.0:
                raise InvalidConfigurationError(f"variance must be positive, got {self.variance}")
            if family is Family.INVERSE_GAUSSIAN and min(means) <= 0.0:
                raise UnsupportedConfigurationError(
                    "inverse Gaussian rewards need strictly positive arm means")
        object.__setattr__(self, "variance", float(self.variance))

    @property
    def arm_count(self) -> int:
        return len(self.means)

    @property
    def best_mean(self) -> float:
        return max(self.means)

    @property
    def gaps(self) -> tuple:
        best = self.best_mean
        return tuple(best - m for m in self.means)

    @property
    def sd(self) -> float:
        return math.sqrt(self.variance)

    def arm_variance(self, arm: int) -> float:
        if self.family is Family.BERNOULLI:
            m = self.means[arm]
            return m * (1.0 - m)
        return self.variance

    def params(self, arm: int):
        return distribution_params(self.family, self.means[arm], self.variance)


def sample_means(arm_count: int, mode, rng: np.random.Generator) -> np.ndarray:
    """Draw ``arm_count`` true means in ``[0, 1]``.

    Normal mode rejects and redraws values outside the unit interval.
    """
    if arm_count < 1:
        raise InvalidConfigurationError("a bandit needs at least one arm")
    mode = MeanSamplingMode.parse(mode)
    if mode is MeanSamplingMode.UNIFORM_ON_01:
        return rng.random(arm_count)
    out = np.empty(arm_count)
    filled = 0
    while filled < arm_count:
        draw = rng.normal(0.5, NORMAL_MEANS_STD, arm_count)
        draw = draw[(draw >= 0.0) & (draw <= 1.0)]
        take = min(len(draw), arm_count - filled)
        out[filled:filled + take] = draw[:take]
        filled += take
    return out


def sample_reward(instance: BanditInstance, arm: int, rng: np.random.Generator) -> float:
    if not 0 <= arm < instance.arm_count:
        raise InvalidConfigurationError(f"arm {arm} out of range for {instance.arm_count} arms")
    a, b = standard_draws(instance.family, rng, 1)
    return reward_from_draws(instance.family.value, instance.means[arm], instance.sd,
                             float(a[0]), float(b[0]))


def sample_rewards(instance: BanditInstance, arm: int, rng: np.random.Generator,
                   size: int) -> np.ndarray:
    a, b = standard_draws(instance.family, rng, size)
    return rewards_from_draws(instance.family, instance.means[arm], instance.sd, a, b)


def make_instance(means: Sequence[float], variance: float, family="normal") -> BanditInstance:
    return BanditInstance(tuple(means), variance, Family.parse(family))
