"""Pure-Python horizon loop driving the ``core`` policy objects.

Same signature and results as the compiled ``_ckernel.run_episode``.
"""
import numpy as np

from .core import make_policy, ALGORITHM_PARAMETERS
from .env import reward_from_draws

_NAMES = {code: name for code, name in enumerate(ALGORITHM_PARAMETERS)}


class UniformBuffer:
    """Pre-drawn uniforms served through a ``random()`` method."""

    __slots__ = ("_values", "_pos")

    def __init__(self, values):
        self._values = list(values)
        self._pos = 0

    def random(self):
        if self._pos >= len(self._values):
            raise IndexError("uniform buffer exhausted")
        v = self._values[self._pos]
        self._pos += 1
        return v

    @property
    def consumed(self):
        return self._pos


def _params(name, p1, p2):
    keys = ALGORITHM_PARAMETERS[name]
    return dict(zip(keys, (p1, p2)))


def run_episode(algo, p1, p2, means, family, sd, noise_a, noise_b, uniforms,
                init_value=1.0, unplayed_random=False):
    name = _NAMES[int(algo)]
    means = [float(m) for m in means]
    k = len(means)
    horizon = len(noise_a)
    if len(noise_b) != horizon:
        raise ValueError("noise streams must have equal length")
    policy = make_policy(name, k, _params(name, p1, p2), initial_value=init_value,
                         unplayed="random" if unplayed_random else "index")
    stream = UniformBuffer(uniforms)
    na = list(map(float, noise_a))
    nb = list(map(float, noise_b))
    best = max(means)
    regret = np.empty(horizon)
    optimal = np.empty(horizon, dtype=bool)
    family = int(family)
    for t in range(horizon):
        arm = policy.select(stream)
        r = reward_from_draws(family, means[arm], sd, na[t], nb[t])
        policy.update(arm, r, stream)
        regret[t] = best - means[arm]
        optimal[t] = means[arm] == best
    return regret, optimal, np.asarray(policy.counts, dtype=np.int_)
