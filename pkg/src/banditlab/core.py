"""Arm-selection and update rules for the six bandit policies.

Every policy exposes the same two calls:

``select(rng) -> int``
    choose the next arm.  ``rng`` is anything with a ``random()`` method
    returning floats in ``[0, 1)`` (``numpy.random.Generator``,
    ``random.Random`` or a pre-drawn buffer).
``update(arm, reward, rng=None)``
    feed back the reward of a pulled arm.

The arithmetic in this module is mirrored operation for operation by the
compiled kernel in ``_ckernel.pyx``; both consume uniforms in the same
order, so a run driven by the same buffer is bit-identical across
backends.  Keep the two in sync when touching either.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

from .errors import InvalidConfigurationError

OPTIMISTIC_INITIAL_VALUE = 1.0

# Integer codes shared with the compiled kernel.
EPSILON_GREEDY = 0
SOFTMAX = 1
PURSUIT = 2
REINFORCEMENT_COMPARISON = 3
UCB1 = 4
UCB1_TUNED = 5

ALGORITHM_CODES = {
    "epsilon_greedy": EPSILON_GREEDY,
    "softmax": SOFTMAX,
    "pursuit": PURSUIT,
    "reinforcement_comparison": REINFORCEMENT_COMPARISON,
    "ucb1": UCB1,
    "ucb1_tuned": UCB1_TUNED,
}

# Parameter names per algorithm, in kernel argument order.
ALGORITHM_PARAMETERS = {
    "epsilon_greedy": ("epsilon",),
    "softmax": ("tau",),
    "pursuit": ("beta",),
    "reinforcement_comparison": ("alpha", "beta"),
    "ucb1": (),
    "ucb1_tuned": (),
}


@dataclass(frozen=True)
class ArmStats:
    """Running statistics of one arm.

    ``sum_of_squares`` holds the centred sum of squares
    ``sum((r - mean)**2)`` accumulated with Welford's recurrence, so the
    population variance is ``sum_of_squares / pull_count``.
    """

    pull_count: int = 0
    empirical_mean: float = OPTIMISTIC_INITIAL_VALUE
    sum_of_squares: float = 0.0

    @property
    def variance(self) -> float:
        if self.pull_count == 0:
            return 0.0
        v = self.sum_of_squares / self.pull_count
        return v if v > 0.0 else 0.0


def welford_step(n: int, mean: float, m2: float, reward: float):
    """One incremental mean/variance step; returns ``(n, mean, m2)``.

    The first observation replaces the (optimistic) prior mean outright.
    """
    n += 1
    if n == 1:
        return 1, reward, 0.0
    delta = reward - mean
    mean = mean + delta / n
    m2 = m2 + delta * (reward - mean)
    return n, mean, m2


def update_arm_stats(stats: ArmStats, reward: float) -> ArmStats:
    n, mean, m2 = welford_step(stats.pull_count, stats.empirical_mean,
                               stats.sum_of_squares, reward)
    return ArmStats(n, mean, m2)


def population_variance(n: int, m2: float) -> float:
    if n == 0:
        return 0.0
    v = m2 / n
    return v if v > 0.0 else 0.0


def argmax_random_tie(values: Sequence[float], rng) -> int:
    """Index of the maximum; ties are broken uniformly with one draw.

    No uniform is consumed when the maximum is unique.
    """
    k = len(values)
    best = values[0]
    for i in range(1, k):
        if values[i] > best:
            best = values[i]
    ties = [i for i in range(k) if values[i] == best]
    if len(ties) == 1:
        return ties[0]
    idx = int(rng.random() * len(ties))
    if idx >= len(ties):
        idx = len(ties) - 1
    return ties[idx]


def softmax_probabilities(values: Sequence[float], tau: float) -> list:
    """Boltzmann distribution ``exp(v_i / tau) / sum_j exp(v_j / tau)``.

    Exponents are shifted by the maximum, so any finite input is safe.
    """
    if not tau > 0.0:
        raise InvalidConfigurationError(f"temperature must be positive, got {tau}")
    if len(values) == 0:
        raise InvalidConfigurationError("softmax over an empty vector")
    m = values[0]
    for v in values:
        if v > m:
            m = v
    weights = [math.exp((v - m) / tau) for v in values]
    total = 0.0
    for w in weights:
        total += w
    return [w / total for w in weights]


def sample_index(probs: Sequence[float], u: float) -> int:
    """Inverse-CDF draw from a probability vector."""
    cum = 0.0
    last = 0
    for i, p in enumerate(probs):
        if p > 0.0:
            last = i
        cum += p
        if u < cum:
            return i
    return last


def pursuit_update(probs: Sequence[float], greedy: int, beta: float) -> list:
    """Move the simplex a fraction ``beta`` toward the greedy vertex."""
    out = []
    for i, p in enumerate(probs):
        if i == greedy:
            out.append(p + beta * (1.0 - p))
        else:
            out.append(p + beta * (0.0 - p))
    return out


def reinforcement_comparison_update(preferences: Sequence[float], mean_reward: float,
                                    arm: int, reward: float, alpha: float, beta: float):
    """Return ``(preferences, mean_reward)`` after one observed reward.

    The played arm's preference moves by ``beta`` times the advantage over
    the *current* baseline; the baseline is refreshed afterwards.
    """
    prefs = list(preferences)
    prefs[arm] = prefs[arm] + beta * (reward - mean_reward)
    mean_reward = (1.0 - alpha) * mean_reward + alpha * reward
    return prefs, mean_reward


def ucb1_index(empirical_mean: float, pull_count: int, turn: int) -> float:
    if pull_count < 1:
        raise InvalidConfigurationError("UCB index needs at least one pull of the arm")
    if turn < 1:
        raise InvalidConfigurationError("UCB index needs turn >= 1")
    return empirical_mean + math.sqrt(2.0 * math.log(turn) / pull_count)


def ucb1_tuned_index(empirical_mean: float, variance_estimate: float,
                     pull_count: int, turn: int) -> float:
    if pull_count < 1:
        raise InvalidConfigurationError("UCB index needs at least one pull of the arm")
    if turn < 1:
        raise InvalidConfigurationError("UCB index needs turn >= 1")
    lt = math.log(turn)
    v = variance_estimate + math.sqrt(2.0 * lt / pull_count)
    return empirical_mean + math.sqrt(lt / pull_count * min(0.25, v))


class Policy:
    """Shared per-arm bookkeeping; subclasses supply ``select``."""

    name = "policy"

    def __init__(self, arm_count: int, initial_value: float = OPTIMISTIC_INITIAL_VALUE):
        if arm_count < 1:
            raise InvalidConfigurationError("a bandit needs at least one arm")
        self.arm_count = int(arm_count)
        self.initial_value = float(initial_value)
        self.counts = [0] * self.arm_count
        self.means = [self.initial_value] * self.arm_count
        self.m2 = [0.0] * self.arm_count
        self.turn = 0

    @property
    def arm_stats(self) -> list:
        return [ArmStats(n, mu, s) for n, mu, s in zip(self.counts, self.means, self.m2)]

    def variance(self, arm: int) -> float:
        return population_variance(self.counts[arm], self.m2[arm])

    def select(self, rng) -> int:
        raise NotImplementedError

    def update(self, arm: int, reward: float, rng=None) -> None:
        n, mu, s = welford_step(self.counts[arm], self.means[arm], self.m2[arm], reward)
        self.counts[arm] = n
        self.means[arm] = mu
        self.m2[arm] = s
        self.turn += 1

    def probabilities(self) -> list:
        """Current selection distribution over arms."""
        raise NotImplementedError

    def params(self) -> dict:
        return {}

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.params().items())
        return f"{type(self).__name__}(arm_count={self.arm_count}{', ' if args else ''}{args})"


def _greedy_spread(values: Sequence[float]) -> list:
    best = max(values)
    ties = [i for i, v in enumerate(values) if v == best]
    share = 1.0 / len(ties)
    return [share if i in ties else 0.0 for i in range(len(values))]


class EpsilonGreedy(Policy):
    name = "epsilon_greedy"

    def __init__(self, arm_count, epsilon, initial_value=OPTIMISTIC_INITIAL_VALUE):
        if not 0.0 <= epsilon <= 1.0:
            raise InvalidConfigurationError(f"epsilon must lie in [0, 1], got {epsilon}")
        super().__init__(arm_count, initial_value)
        self.epsilon = float(epsilon)

    def select(self, rng):
        if rng.random() < self.epsilon:
            arm = int(rng.random() * self.arm_count)
            return arm if arm < self.arm_count else self.arm_count - 1
        return argmax_random_tie(self.means, rng)

    def probabilities(self):
        k = self.arm_count
        greedy = _greedy_spread(self.means)
        return [(1.0 - self.epsilon) * g + self.epsilon / k for g in greedy]

    def params(self):
        return {"epsilon": self.epsilon}


class Softmax(Policy):
    name = "softmax"

    def __init__(self, arm_count, tau, initial_value=OPTIMISTIC_INITIAL_VALUE):
        if not tau > 0.0:
            raise InvalidConfigurationError(f"tau must be positive, got {tau}")
        super().__init__(arm_count, initial_value)
        self.tau = float(tau)

    def select(self, rng):
        return sample_index(softmax_probabilities(self.means, self.tau), rng.random())

    def probabilities(self):
        return softmax_probabilities(self.means, self.tau)

    def params(self):
        return {"tau": self.tau}


class Pursuit(Policy):
    """Explicit simplex nudged toward the greedy arm after every update."""

    name = "pursuit"

    def __init__(self, arm_count, beta, initial_value=OPTIMISTIC_INITIAL_VALUE):
        if not 0.0 < beta < 1.0:
            raise InvalidConfigurationError(f"beta must lie in (0, 1), got {beta}")
        super().__init__(arm_count, initial_value)
        self.beta = float(beta)
        self.probs = [1.0 / self.arm_count] * self.arm_count

    def select(self, rng):
        return sample_index(self.probs, rng.random())

    def update(self, arm, reward, rng=None):
        super().update(arm, reward)
        greedy = argmax_random_tie(self.means, rng)
        self.probs = pursuit_update(self.probs, greedy, self.beta)

    def probabilities(self):
        return list(self.probs)

    def params(self):
        return {"beta": self.beta}


class ReinforcementComparison(Policy):
    """Boltzmann selection (temperature 1) over learned preferences."""

    name = "reinforcement_comparison"

    def __init__(self, arm_count, alpha, beta, initial_value=OPTIMISTIC_INITIAL_VALUE,
                 initial_mean_reward=0.0):
        if not 0.0 < alpha < 1.0:
            raise InvalidConfigurationError(f"alpha must lie in (0, 1), got {alpha}")
        if not 0.0 < beta < 1.0:
            raise InvalidConfigurationError(f"beta must lie in (0, 1), got {beta}")
        super().__init__(arm_count, initial_value)
        self.alpha = float(alpha)
        self.beta = float(beta)
        self.preferences = [0.0] * self.arm_count
        self.mean_reward = float(initial_mean_reward)

    def select(self, rng):
        return sample_index(softmax_probabilities(self.preferences, 1.0), rng.random())

    def update(self, arm, reward, rng=None):
        super().update(arm, reward)
        self.preferences, self.mean_reward = reinforcement_comparison_update(
            self.preferences, self.mean_reward, arm, reward, self.alpha, self.beta)

    def probabilities(self):
        return softmax_probabilities(self.preferences, 1.0)

    def params(self):
        return {"alpha": self.alpha, "beta": self.beta}


class UCB1(Policy):
    """Upper-confidence-bound rule; unplayed arms are always tried first.

    ``unplayed`` picks among arms with no observed reward yet: ``"index"``
    takes the lowest index (the classic one-pull-per-arm warm-up),
    ``"random"`` draws uniformly, which is the sensible choice when
    feedback is delayed and several arms can be pending at once.
    """

    name = "ucb1"

    def __init__(self, arm_count, unplayed="index"):
        if unplayed not in ("index", "random"):
            raise InvalidConfigurationError(f"unknown unplayed-arm rule {unplayed!r}")
        super().__init__(arm_count, 0.0)
        self.unplayed = unplayed

    def _unplayed_arm(self, rng) -> Optional[int]:
        fresh = [i for i, n in enumerate(self.counts) if n == 0]
        if not fresh:
            return None
        if self.unplayed == "index" or len(fresh) == 1:
            return fresh[0]
        idx = int(rng.random() * len(fresh))
        return fresh[idx if idx < len(fresh) else len(fresh) - 1]

    def index(self, arm: int) -> float:
        return ucb1_index(self.means[arm], self.counts[arm], self.turn)

    def indices(self) -> list:
        return [self.index(i) for i in range(self.arm_count)]

    def select(self, rng):
        arm = self._unplayed_arm(rng)
        if arm is not None:
            return arm
        return argmax_random_tie(self.indices(), rng)

    def probabilities(self):
        fresh = [i for i, n in enumerate(self.counts) if n == 0]
        if fresh:
            if self.unplayed == "index":
                return [1.0 if i == fresh[0] else 0.0 for i in range(self.arm_count)]
            return [1.0 / len(fresh) if i in fresh else 0.0 for i in range(self.arm_count)]
        return _greedy_spread(self.indices())

    def params(self):
        return {}


class UCB1Tuned(UCB1):
    name = "ucb1_tuned"

    def index(self, arm):
        return ucb1_tuned_index(self.means[arm], self.variance(arm), self.counts[arm], self.turn)


def make_policy(name: str, arm_count: int, params: Optional[dict] = None, *,
                initial_value: float = OPTIMISTIC_INITIAL_VALUE,
                unplayed: str = "index") -> Policy:
    """Build a policy from its registry name and parameter mapping."""
    params = dict(params or {})
    expected = ALGORITHM_PARAMETERS.get(name)
    if expected is None:
        raise InvalidConfigurationError(f"unknown algorithm {name!r}")
    missing = [p for p in expected if p not in params]
    extra = [p for p in params if p not in expected]
    if missing or extra:
        raise InvalidConfigurationError(
            f"{name} takes parameters {list(expected)}; missing {missing}, unexpected {extra}")
    if name == "epsilon_greedy":
        return EpsilonGreedy(arm_count, params["epsilon"], initial_value)
    if name == "softmax":
        return Softmax(arm_count, params["tau"], initial_value)
    if name == "pursuit":
        return Pursuit(arm_count, params["beta"], initial_value)
    if name == "reinforcement_comparison":
        return ReinforcementComparison(arm_count, params["alpha"], params["beta"], initial_value)
    if name == "ucb1":
        return UCB1(arm_count, unplayed)
    return UCB1Tuned(arm_count, unplayed)
