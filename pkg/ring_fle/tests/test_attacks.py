import math

import pytest

from .._attacks import (
    basic_single_attack,
    bernoulli_positions,
    cubic_attack,
    cubic_distances,
    cubic_positions,
    default_bernoulli_p,
    equal_positions,
    naive_attack,
    randomized_attack,
)
from .._oracle import validate_execution
from .._protocols import SecretInput, draw_inputs, honest_strategies
from .._ring import RingConfig, simulate
from .._utils import PreconditionError


def run_attack(config, attack, inputs):
    strategies = honest_strategies(config)
    for a, strategy in attack.items():
        strategies[a] = strategy
    return simulate(config, strategies, inputs)


@pytest.mark.parametrize("w", range(8))
def test_basic_single(w, rng):
    config = RingConfig(n=8, protocol="basic", coalition=(0,))
    for _ in range(5):
        _, outcome = run_attack(config, {0: basic_single_attack(w, 8)}, draw_inputs(8, rng))
        assert outcome.leader == w


@pytest.mark.parametrize("w", range(9))
def test_naive(w, rng):
    config = RingConfig(n=9, origin=1, coalition=(0, 3, 6))
    for _ in range(5):
        transcript, outcome = run_attack(config, naive_attack((0, 3, 6), w, 9), draw_inputs(9, rng))
        assert outcome.leader == w
        assert validate_execution(transcript, config.coalition, 9).leader == w


def test_naive_refuses_long_segments():
    with pytest.raises(PreconditionError):
        naive_attack((0, 4), 0, 9)


def test_cubic_schedule():
    assert cubic_distances(3, 15) == [6, 4, 2]
    assert cubic_positions([6, 4, 2], 15) == [0, 7, 12]
    assert cubic_positions([6, 4, 2], 15, first=10) == [10, 2, 7]
    # Off-canonical sizes lower the largest entries and keep the schedule legal.
    distances = cubic_distances(4, 30)
    assert sum(distances) == 26
    assert distances[-1] <= 3
    assert all(a <= b + 3 for a, b in zip(distances, distances[1:]))


def test_cubic_schedule_infeasible():
    with pytest.raises(PreconditionError):
        cubic_distances(2, 100)
    with pytest.raises(PreconditionError):
        cubic_attack(3, [2, 2, 5], 0)


@pytest.mark.parametrize("w", range(15))
def test_cubic(w, rng):
    config = RingConfig(n=15, origin=1, coalition=(0, 7, 12))
    for _ in range(3):
        transcript, outcome = run_attack(config, cubic_attack(3, [6, 4, 2], w), draw_inputs(15, rng))
        assert outcome.leader == w
        assert validate_execution(transcript, config.coalition, 15).leader == w


def test_randomized_with_distinct_secrets():
    n = 8
    config = RingConfig(n=n, origin=1, coalition=(0, 2, 4, 6))
    inputs = [SecretInput(p) for p in range(n)]
    for w in range(n):
        _, outcome = run_attack(config, randomized_attack(1, w, n, config.coalition), inputs)
        assert outcome.leader == w


def test_randomized_refuses_c():
    with pytest.raises(PreconditionError):
        randomized_attack(0, 0, 8, (0, 4))


def test_placements(rng):
    assert equal_positions(9, 3) == [0, 3, 6]
    assert equal_positions(40, 4) == [0, 10, 20, 30]
    with pytest.raises(PreconditionError):
        equal_positions(3, 5)
    assert default_bernoulli_p(1024) == pytest.approx(math.sqrt(8 * math.log(1024) / 1024))
    assert bernoulli_positions(50, 0.0, rng) == []
    assert bernoulli_positions(50, 1.0, rng) == list(range(50))
