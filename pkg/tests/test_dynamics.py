import numpy as np
import pytest

from urnlab.dynamics import (
    UrnState,
    choose_colour,
    default_checkpoints,
    initial_state,
    replay,
    simulate,
    step,
    transitions,
)
from urnlab.errors import MissingCheckpoint, NegativeCount, Overflow
from urnlab.martingale import expected_composition
from urnlab.model import build_model, zoo
from urnlab.rng import CounterRNG


def test_choose_colour():
    counts = np.array([2, 0, 3])
    assert [choose_colour(counts, p) for p in range(5)] == [0, 0, 2, 2, 2]


def test_step_adds_column():
    m = zoo("friedman(1,2)")
    rng = CounterRNG(0, 0)
    s = step(m, initial_state(m), rng)
    col = rng.index(0, 2)
    assert s.n == 1
    assert s.counts.tolist() == (m.X0 + m.R[:, col]).tolist()


def test_step_with_generator():
    m = zoo("cyclic(3)")
    s = initial_state(m)
    g = np.random.default_rng(0)
    for _ in range(50):
        s = step(m, s, g)
    assert s.total == m.balls_at(50)


def test_step_rejects_bad_state():
    m = zoo("polya")
    with pytest.raises(NegativeCount):
        step(m, UrnState(0, np.array([5, 5])), CounterRNG(0))


def test_transitions():
    m = zoo("mary(3)")
    probs, succ = transitions(m, [3, 1], 3)
    assert np.allclose(probs, [0.75, 0.25])
    assert succ.tolist() == [[2, 3], [6, -1]]


def test_default_checkpoints():
    assert default_checkpoints(10).tolist() == [1, 2, 5, 10]
    assert default_checkpoints(8, extra=[3]).tolist() == [1, 2, 3, 4, 8]


@pytest.mark.parametrize("name", ["friedman(5,1)", "mary(4)", "burn(3)", "cyclic(4)"])
def test_conservation(name):
    m = zoo(name)
    b = simulate(m, 500, 40, seed=9, audit=True)
    for n in b.checkpoints:
        assert np.all(b.at(n).sum(axis=1) == m.balls_at(n))
        assert np.all(b.at(n) >= 0)


def test_replay_matches_batch():
    m = zoo("burn(2)")
    b = simulate(m, 300, 6, seed=123)
    for i in range(6):
        assert replay(m, 300, 123, i).counts.tolist() == b.at(300)[i].tolist()


def test_workers_do_not_change_results():
    m = zoo("friedman(1,2)")
    a = simulate(m, 2000, 37, seed=4, workers=1)
    b = simulate(m, 2000, 37, seed=4, workers=5)
    assert np.array_equal(a.counts, b.counts)
    assert a.digest() == b.digest()
    assert simulate(m, 2000, 37, seed=5, workers=1).digest() != a.digest()


def test_missing_checkpoint_and_overflow():
    m = zoo("polya")
    b = simulate(m, 100, 2, checkpoints=[10, 50])
    assert b.checkpoints.tolist() == [10, 50, 100]
    with pytest.raises(MissingCheckpoint):
        b.at(11)
    with pytest.raises(Overflow):
        simulate(m, m.max_horizon() + 1, 1)


@pytest.mark.parametrize("name", ["friedman(1,2)", "friedman(5,1)", "cyclic(3)",
                                  "mary(5)", "burn(2)"])
def test_mean_matches_recursion(name):
    m = zoo(name)
    n, N = 400, 4000
    b = simulate(m, n, N, seed=17)
    x = b.at(n).astype(float)
    mean, se = x.mean(axis=0), x.std(axis=0, ddof=1) / np.sqrt(N)
    target = expected_composition(m, n)
    assert np.all(np.abs(mean - target) <= 5 * se + 1e-9)


def test_single_colour_absorbing():
    m = build_model([[2, 1], [0, 1]], [1, 0])
    b = simulate(m, 50, 3)
    assert np.all(b.at(50)[:, 1] == 0)
