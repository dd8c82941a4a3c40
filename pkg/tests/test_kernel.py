"""The compiled horizon loop must agree bit for bit with the Python fallback."""
import numpy as np
import pytest

from banditlab import kernel
from banditlab.core import ALGORITHM_CODES
from banditlab.env import Family, standard_draws
from banditlab.harness import UNIFORMS_PER_TURN

compiled = pytest.mark.skipif(kernel.compiled_run_episode is None,
                              reason="compiled extension not built")

PARAMS = {
    "epsilon_greedy": (0.1, 0.0),
    "softmax": (0.05, 0.0),
    "pursuit": (0.2, 0.0),
    "reinforcement_comparison": (0.1, 0.9),
    "ucb1": (0.0, 0.0),
    "ucb1_tuned": (0.0, 0.0),
}


def inputs(family, k, horizon, seed, means=None):
    rng = np.random.default_rng(seed)
    if means is None:
        means = rng.random(k)
        if family is Family.INVERSE_GAUSSIAN:
            means = np.maximum(means, 1e-3)
    a, b = standard_draws(family, rng, horizon)
    u = rng.random(UNIFORMS_PER_TURN * horizon)
    return np.asarray(means, dtype=float), a, b, u


def both(algo, family, k=7, horizon=400, seed=0, sd=0.3, means=None, unplayed_random=False):
    means, a, b, u = inputs(family, k, horizon, seed, means)
    p1, p2 = PARAMS[algo]
    args = (ALGORITHM_CODES[algo], p1, p2, means, family.value, sd, a, b, u, 1.0,
            unplayed_random)
    return kernel.python_run_episode(*args), kernel.compiled_run_episode(*args)


@compiled
@pytest.mark.parametrize("algo", list(PARAMS))
@pytest.mark.parametrize("family", list(Family))
def test_backends_identical(algo, family):
    (r1, o1, c1), (r2, o2, c2) = both(algo, family, seed=family.value * 10 + ALGORITHM_CODES[algo])
    assert r1.tobytes() == r2.tobytes()
    assert np.array_equal(o1, o2) and np.array_equal(c1, c2)


@compiled
@pytest.mark.parametrize("algo", list(PARAMS))
def test_backends_identical_under_ties(algo):
    # Equal means force the tie-breaking path on every greedy step.
    (r1, o1, c1), (r2, o2, c2) = both(algo, Family.BERNOULLI, k=4, means=[0.5] * 4)
    assert np.array_equal(c1, c2) and r1.tobytes() == r2.tobytes()
    assert r1.sum() == 0.0 and o1.all()


@compiled
@pytest.mark.parametrize("algo", ["ucb1", "ucb1_tuned"])
def test_backends_identical_random_unplayed(algo):
    (r1, _, c1), (r2, _, c2) = both(algo, Family.NORMAL, unplayed_random=True)
    assert np.array_equal(c1, c2) and r1.tobytes() == r2.tobytes()


@compiled
def test_extreme_values():
    for sd in (1e-9, 50.0):
        (r1, _, c1), (r2, _, c2) = both("softmax", Family.NORMAL, sd=sd, k=3)
        assert np.array_equal(c1, c2) and r1.tobytes() == r2.tobytes()


@pytest.mark.parametrize("run", [kernel.python_run_episode,
                                 pytest.param(kernel.compiled_run_episode, marks=compiled)])
def test_short_uniform_buffer_raises(run):
    means, a, b, u = inputs(Family.NORMAL, 3, 100, 0)
    with pytest.raises(IndexError):
        run(ALGORITHM_CODES["epsilon_greedy"], 1.0, 0.0, means, 0, 0.1, a, b, u[:10], 1.0, False)


def test_counts_and_regret_shape():
    means, a, b, u = inputs(Family.NORMAL, 5, 300, 2)
    regret, optimal, counts = kernel.run_episode(ALGORITHM_CODES["ucb1"], 0.0, 0.0, means, 0,
                                                 0.1, a, b, u, 1.0, False)
    assert regret.shape == (300,) and optimal.shape == (300,)
    assert counts.sum() == 300 and (regret >= 0).all()
    assert np.array_equal(optimal, regret == 0.0)


def test_backend_name():
    assert kernel.BACKEND in ("cython", "python")
    if kernel.compiled_run_episode is not None:
        assert kernel.run_episode is kernel.compiled_run_episode
