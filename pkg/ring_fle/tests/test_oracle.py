import numpy as np
import pytest

from .._oracle import (
    build_graphs,
    fuzz_deviation,
    is_validated,
    reachable,
    recv_event,
    segment_map,
    send_event,
    validate_execution,
    validation_chain,
    validation_send_events,
)
from .._protocols import draw_inputs, honest_strategies
from .._ring import RingConfig, simulate, tampered
from .._utils import TranscriptError, UnknownEventError


def test_segment_map():
    layout = segment_map([0, 1, 5], 8)
    assert layout.lengths == {0: 0, 1: 3, 5: 2}
    assert layout.exposed == (1, 5)
    assert layout.honest == (2, 3, 4, 6, 7)


def test_validation_send_events():
    assert validation_send_events(0, 5) == (send_event(0, 2), send_event(4, 2))
    assert validation_send_events(3, 5) == (send_event(3, 8), send_event(2, 8))
    assert validation_chain(3)[:2] == [send_event(0, 2), send_event(2, 2)]


def test_honest_execution_is_valid(rng):
    config = RingConfig(n=6)
    inputs = draw_inputs(6, rng)
    transcript, outcome = simulate(config, honest_strategies(config), inputs)
    verdict = validate_execution(transcript, (), 6)
    assert verdict.valid
    assert verdict.leader == outcome.leader
    assert str(verdict) == f"Valid({outcome.leader})"


def deviate(n, coalition, edits, rng):
    config = RingConfig(n=n, origin=1, coalition=coalition)
    strategies = honest_strategies(config)
    for a in coalition:
        strategies[a] = tampered(strategies[a], edits, adopt=True)
    return simulate(config, strategies, draw_inputs(n, rng))


def test_short_adversary_is_condition_1(rng):
    transcript, outcome = deviate(5, (0,), {2: ("drop", 0)}, rng)
    verdict = validate_execution(transcript, (0,), 5)
    assert (verdict.condition, verdict.witness) == (1, 0)
    assert not outcome.elected
    assert verdict.to_dict() == {"verdict": "invalid", "condition": 1, "witness": 0}


def test_wrong_replay_is_condition_3(rng):
    transcript, outcome = deviate(5, (0,), {5: ("add", 1)}, rng)
    verdict = validate_execution(transcript, (0,), 5)
    assert (verdict.condition, verdict.witness) == (3, 1)
    assert not outcome.elected


def test_unequal_sums_are_condition_2(rng):
    transcript, outcome = deviate(6, (0, 3), {}, rng)
    assert validate_execution(transcript, (0, 3), 6).valid
    config = RingConfig(n=6, origin=1, coalition=(0, 3))
    strategies = honest_strategies(config)
    strategies[3] = tampered(strategies[3], {4: ("add", 1)}, adopt=True)
    transcript, outcome = simulate(config, strategies, draw_inputs(6, rng))
    verdict = validate_execution(transcript, (0, 3), 6)
    assert verdict.condition == 2
    assert verdict.witness == (0, 3)
    assert not outcome.elected


def test_oracle_refuses_phase_transcripts(phase_config, rng):
    transcript, _ = simulate(phase_config, honest_strategies(phase_config), draw_inputs(8, rng, 128))
    with pytest.raises(TranscriptError):
        validate_execution(transcript, (), 8)
    honest = RingConfig(n=5)
    transcript, _ = simulate(honest, honest_strategies(honest), draw_inputs(5, rng))
    with pytest.raises(TranscriptError):
        validate_execution(transcript, range(5), 5)


def agrees(deviation):
    transcript, outcome = simulate(*deviation)
    config = deviation.config
    verdict = validate_execution(transcript, config.coalition, config.n)
    if verdict.valid:
        return outcome.elected and outcome.leader == verdict.leader
    return not outcome.elected


def test_fuzzed_deviations_agree():
    for seed in range(300):
        rng = np.random.default_rng(seed)
        deviation = fuzz_deviation(int(rng.integers(4, 9)), rng)
        assert agrees(deviation), seed


@pytest.mark.slow
def test_fuzzed_deviations_agree_acceptance():
    for seed in range(10_000):
        rng = np.random.default_rng([seed, 9])
        deviation = fuzz_deviation(int(rng.integers(4, 9)), rng)
        assert agrees(deviation), seed


def test_graphs_of_honest_phase(phase_config, rng):
    n = phase_config.n
    transcript, outcome = simulate(phase_config, honest_strategies(phase_config), draw_inputs(n, rng, 128))
    assert outcome.elected
    graphs = build_graphs(transcript)
    assert graphs.acyclic()
    assert graphs.cd_outside_hb() == []
    chain = validation_chain(n)
    assert all(reachable(graphs.hb, a, b) for a, b in zip(chain, chain[1:]))
    assert all(is_validated(h, graphs, n) for h in range(n))


def test_graph_queries(phase_config, rng):
    transcript, _ = simulate(phase_config, honest_strategies(phase_config), draw_inputs(8, rng, 128))
    graphs = build_graphs(transcript)
    first, arrival = send_event(0, 1), recv_event(1, 1)
    assert reachable(graphs.hb, first, arrival)
    assert not reachable(graphs.hb, arrival, first)
    assert not reachable(graphs.hb, first, first)
    with pytest.raises(UnknownEventError):
        reachable(graphs.hb, first, send_event(0, 99))
    assert is_validated(0, graphs, 99) is None


def test_graphs_need_phase_transcripts(rng):
    config = RingConfig(n=5)
    transcript, _ = simulate(config, honest_strategies(config), draw_inputs(5, rng))
    with pytest.raises(TranscriptError):
        build_graphs(transcript)
