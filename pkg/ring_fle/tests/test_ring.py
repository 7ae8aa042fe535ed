import dataclasses
import functools
import io

import pytest

from .._attacks import cubic_attack, cubic_positions
from .._protocols import SecretInput, alead_strategy, draw_inputs, honest_strategies
from .._ring import (
    ABORT,
    BUDGET_FACTOR,
    RECV,
    SEND,
    Failure,
    Outcome,
    Processor,
    RingConfig,
    RoundRobinScheduler,
    Transcript,
    outcome_of,
    segments,
    simulate,
    tampered,
)
from .._utils import ConfigError, TranscriptError


class Chatter(Processor):
    "Wakes, then answers every message forever."

    wakes = True

    def __init__(self, pid, n, secret):
        super().__init__(pid, n)

    def on_wake(self):
        self.send(1)

    def on_receive(self, message):
        self.send(message.value)


class Silent(Processor):
    def __init__(self, pid, n, secret):
        super().__init__(pid, n)

    def on_receive(self, message):
        pass


def test_segments():
    assert segments([0, 3, 6], 9) == {0: (1, 2), 3: (4, 5), 6: (7, 8)}
    assert segments([1, 0], 4) == {0: (), 1: (2, 3)}
    assert segments([], 5) == {}


@pytest.mark.parametrize(
    "kwargs",
    [
        {"n": 1},
        {"n": 4, "origin": 4},
        {"n": 4, "coalition": (1, 1)},
        {"n": 4, "coalition": (5,)},
        {"n": 4, "protocol": "chang-roberts"},
        {"n": 4, "schedule": "fifo"},
    ],
)
def test_config_rejects(kwargs):
    with pytest.raises(ConfigError):
        RingConfig(**kwargs)


def test_config_normalizes_coalition():
    config = RingConfig(n=9, coalition=[6, 0, 3])
    assert config.coalition == (0, 3, 6)
    assert config.k == 3
    assert config.honest == (1, 2, 4, 5, 7, 8)
    assert config.distances() == [2, 2, 2]


def test_outcome_of():
    assert outcome_of([2, 2, 2]) == Outcome(leader=2)
    assert outcome_of([2, ABORT, 2]).failure is Failure.ABORT
    assert outcome_of([1, 2, 2]).failure is Failure.DISAGREEMENT
    assert outcome_of([1, None, 1]).failure is Failure.NONTERMINATION
    assert outcome_of([5, 5], n=4).failure is Failure.ABORT
    assert outcome_of([3, 3]).label == 3
    assert outcome_of([None, None]).label == "nontermination"


def test_outcome_is_leader_or_failure():
    with pytest.raises(ValueError):
        Outcome()
    with pytest.raises(ValueError):
        Outcome(leader=1, failure=Failure.ABORT)


@pytest.mark.parametrize("schedule", ["rr", "random"])
def test_honest_alead_elects_sum(schedule, rng):
    config = RingConfig(n=7, origin=3, schedule=schedule, seed=11)
    inputs = draw_inputs(7, rng)
    transcript, outcome = simulate(config, honest_strategies(config), inputs)
    assert outcome.elected
    assert outcome.leader == sum(s.d for s in inputs) % 7
    assert transcript.quiescent and not transcript.budget_exhausted
    assert transcript.config is config
    transcript.check()
    # Every processor sends and receives exactly n messages.
    for p in range(7):
        assert len(transcript.sends(p)) == 7
        assert len(transcript.receives(p)) == 7


def test_record_false_keeps_outputs(rng):
    config = RingConfig(n=6)
    inputs = draw_inputs(6, rng)
    recorded, outcome = simulate(config, honest_strategies(config), inputs)
    bare, bare_outcome = simulate(config, honest_strategies(config), inputs, record=False)
    assert bare.events == []
    assert bare.outputs == recorded.outputs
    assert bare_outcome == outcome


def test_triggers_record_activation(rng):
    config = RingConfig(n=5)
    transcript, _ = simulate(config, honest_strategies(config), draw_inputs(5, rng))
    first = transcript.events[0]
    assert (first.kind, first.proc, first.trigger) == (SEND, 0, 0)
    for event in transcript.events:
        if event.kind == SEND and event.trigger:
            assert event.trigger <= len(transcript.receives(event.proc))
        if event.kind == RECV:
            assert event.trigger is None


def test_jsonl_round_trip(rng):
    config = RingConfig(n=5)
    transcript, _ = simulate(config, honest_strategies(config), draw_inputs(5, rng))
    buffer = io.StringIO()
    transcript.to_jsonl(buffer)
    buffer.seek(0)
    loaded = Transcript.from_jsonl(buffer, outputs=transcript.outputs)
    assert loaded.n == 5
    assert loaded.events == transcript.events
    assert loaded.sent_values() == transcript.sent_values()


def test_jsonl_rejects_malformed_lines():
    with pytest.raises(TranscriptError):
        Transcript.from_jsonl(['{"seq": 0, "kind": "send"}'])
    lines = [
        '{"seq": 0, "kind": "send", "proc": 0, "ordinal": 1, "value": 3}',
        '{"seq": 1, "kind": "recv", "proc": 1, "ordinal": 1, "value": 2}',
    ]
    with pytest.raises(TranscriptError):
        Transcript.from_jsonl(lines, n=2)


def test_step_budget():
    n = 2
    config = RingConfig(n=n)
    strategies = [functools.partial(Chatter, p, n) for p in range(n)]
    transcript, outcome = simulate(config, strategies, [None] * n)
    assert outcome.failure is Failure.NONTERMINATION
    assert outcome.budget_exhausted
    assert transcript.budget_exhausted and not transcript.quiescent
    assert len(transcript.events) <= BUDGET_FACTOR * n * n + n


def test_quiescent_deadlock():
    n = 3
    config = RingConfig(n=n)
    strategies = [functools.partial(Silent, p, n) for p in range(n)]
    transcript, outcome = simulate(config, strategies, [None] * n)
    assert outcome.failure is Failure.NONTERMINATION
    assert not outcome.budget_exhausted
    assert transcript.quiescent
    assert transcript.events == []


def test_strategy_count_must_match():
    config = RingConfig(n=4)
    with pytest.raises(ConfigError):
        simulate(config, honest_strategies(config)[:3], [SecretInput(0)] * 4)


def test_untouched_tampering_is_honest(rng):
    config = RingConfig(n=6, coalition=(2,))
    inputs = draw_inputs(6, rng)
    strategies = honest_strategies(config)
    _, honest = simulate(config, strategies, inputs)
    strategies[2] = tampered(alead_strategy(2, 6), {})
    _, wrapped = simulate(config, strategies, inputs)
    assert wrapped == honest


def test_tampered_drop_stalls_the_ring(rng):
    config = RingConfig(n=5, coalition=(2,))
    strategies = honest_strategies(config)
    strategies[2] = tampered(strategies[2], {1: ("drop", 0)})
    transcript, outcome = simulate(config, strategies, draw_inputs(5, rng))
    assert len(transcript.sends(2)) == 4
    assert not outcome.elected


def test_round_robin_rotates_over_ready_links():
    scheduler = RoundRobinScheduler()
    for link in (3, 1, 4):
        scheduler.mark(link)
    assert [scheduler.pick() for _ in range(4)] == [1, 3, 4, 1]
    scheduler.unmark(3)
    assert [scheduler.pick() for _ in range(2)] == [4, 1]
    with pytest.raises(TypeError):
        RoundRobinScheduler(seed=1)


def _schedule_cases(case):
    n, w = 15, 4
    if case == "honest":
        config = RingConfig(n=n)
        return config, honest_strategies(config)
    if case == "cubic":
        config = RingConfig(n=n, coalition=cubic_positions((6, 4, 2), n, first=1))
        strategies = honest_strategies(config)
        for a, strategy in cubic_attack(3, (6, 4, 2), w, first=1).items():
            strategies[a] = strategy
        return config, strategies
    config = RingConfig(n=n, coalition=(2,))
    strategies = honest_strategies(config)
    strategies[2] = tampered(strategies[2], {3: ("add", 1), 9: ("duplicate", 0)}, adopt=True)
    return config, strategies


@pytest.mark.parametrize("case", ["honest", "cubic", "tampered"])
def test_outcome_does_not_depend_on_the_schedule(case, rng):
    config, strategies = _schedule_cases(case)
    for _ in range(3):
        inputs = draw_inputs(config.n, rng)
        outcomes = {
            simulate(dataclasses.replace(config, schedule=schedule, seed=seed), strategies, inputs)[1]
            for schedule, seed in (("rr", 0), ("random", 1), ("random", 2))
        }
        assert len(outcomes) == 1
