import math

import networkx as nx
import pytest

from .. import _treesim
from .._treesim import (
    ProtocolTree,
    Terminal,
    Turn,
    assure,
    assure_search_two_party,
    assuring_coalition,
    decompose_half,
    enumerate_two_party_protocols,
    graph_from_dict,
    graph_to_dict,
    load_graph,
    load_protocol,
    lower_bit_protocol,
    parity_protocol,
    protocol_from_dict,
    protocol_to_dict,
    replay_witness,
    run_honest,
    tree_assure_search,
    verify_k_simulation,
)
from .._utils import GraphError, ProtocolTreeError
from .conftest import DATA_DIR


def test_verify_k_simulation(path3):
    path = nx.path_graph(3)
    assert verify_k_simulation(path3, path, {0: 0, 1: 1, 2: 2}, 1)
    check = verify_k_simulation(path3, nx.cycle_graph(3), {0: 0, 1: 1, 2: 2}, 1)
    assert check.condition == "tree"
    assert verify_k_simulation(path3, path, {0: 0, 1: 1}, 1).condition == "domain"
    check = verify_k_simulation(path3, path, {0: 0, 1: 2, 2: 1}, 1)
    assert (check.condition, check.witness) == ("homomorphism", (0, 1))
    single = nx.Graph()
    single.add_node(0)
    assert verify_k_simulation(path3, single, {0: 0, 1: 0, 2: 0}, 2).condition == "size"
    check = verify_k_simulation(path3, nx.path_graph(2), {0: 0, 1: 1, 2: 0}, 2)
    assert (check.condition, check.witness) == ("connected", (0, [0, 2]))


def test_decompose_cycle(cycle5):
    simulation = decompose_half(cycle5)
    assert simulation.k == 3
    assert simulation.fibers() == {0: [0, 1, 4], 1: [2, 3]}
    assert sorted(simulation.tree.edges) == [(0, 1)]


def test_decompose_refuses_disconnected():
    with pytest.raises(GraphError):
        decompose_half(load_graph(DATA_DIR / "disconnected.yaml"))
    with pytest.raises(GraphError):
        decompose_half(nx.Graph())


def test_decompose_every_small_graph():
    for graph in nx.graph_atlas_g():
        if graph.number_of_nodes() == 0 or not nx.is_connected(graph):
            continue
        simulation = decompose_half(graph)
        k = math.ceil(graph.number_of_nodes() / 2)
        assert simulation.k == k
        assert verify_k_simulation(graph, simulation.tree, simulation.mapping, k)


@pytest.mark.slow
def test_decompose_random_graphs():
    checked = 0
    for seed in range(2000):
        graph = nx.gnp_random_graph(3 + seed % 10, 0.3, seed=seed)
        if not nx.is_connected(graph):
            continue
        simulation = decompose_half(graph)
        assert verify_k_simulation(graph, simulation.tree, simulation.mapping, simulation.k)
        checked += 1
        if checked == 500:
            break
    assert checked >= 100


def test_graph_documents(cycle5):
    assert graph_to_dict(cycle5) == {"nodes": [0, 1, 2, 3, 4], "edges": [[0, 1], [0, 4], [1, 2], [2, 3], [3, 4]]}
    assert graph_to_dict(graph_from_dict(graph_to_dict(cycle5))) == graph_to_dict(cycle5)
    with pytest.raises(GraphError):
        graph_from_dict({"edges": [[0, 0]]})
    with pytest.raises(GraphError):
        graph_from_dict({"nodes": [1]})


def test_xor_last_mover_assures_both_bits(xor_protocol):
    assert run_honest(xor_protocol, {"A": 1, "B": 1}) == {"A": 0, "B": 0}
    assured = assure_search_two_party(xor_protocol)
    assert set(assured) == {("B", 0), ("B", 1)}
    for (party, bit), witness in assured.items():
        assert replay_witness(xor_protocol, {party}, bit, witness)
    assert assure(xor_protocol, {"A"}, 0) is None


def test_replay_rejects_a_wrong_witness(xor_protocol):
    witness = assure(xor_protocol, {"B"}, 0)
    assert not replay_witness(xor_protocol, {"B"}, 1, witness)
    assert not replay_witness(xor_protocol, {"B"}, 0, {})


def _totality(max_depth):
    count = 0
    for protocol in enumerate_two_party_protocols(max_depth=max_depth):
        assured = assure_search_two_party(protocol)
        assert ("A", 0) in assured or ("B", 1) in assured
        assert ("A", 1) in assured or ("B", 0) in assured
        count += 1
    return count


def test_two_party_totality():
    assert _totality(2) > 0


@pytest.mark.slow
def test_two_party_totality_depth_3():
    assert _totality(3) > 0


def test_parity_on_a_path(path3):
    protocol = parity_protocol(path3)
    for inputs in ({0: 1, 1: 0, 2: 1}, {0: 1, 1: 1, 2: 1}):
        expected = sum(inputs.values()) % 2
        assert set(run_honest(protocol, inputs).values()) == {expected}
    found = tree_assure_search(protocol)
    assert (found.processor, found.bit, found.bits) == (0, 1, frozenset({0, 1}))
    assert replay_witness(protocol, {0}, 1, found.witness)
    assert found.to_dict()["bits"] == [0, 1]


def test_leaf_search_needs_a_tree(cycle5):
    with pytest.raises(ProtocolTreeError):
        tree_assure_search(parity_protocol(cycle5))


def test_leaf_search_checks_every_processor_once(monkeypatch, caplog):
    protocol = parity_protocol(nx.path_graph(4))
    checked = []

    def nobody(protocol, party):
        checked.append(party)
        return None

    monkeypatch.setattr(_treesim, "_single", nobody)
    assert tree_assure_search(protocol) is None
    # Leaves 0, 1, 2 are folded in order and 3 remains.
    assert checked == [0, 1, 2, 3]
    assert "No single processor assures a bit" in caplog.text


def test_assuring_coalition_on_a_cycle(cycle5):
    protocol = parity_protocol(cycle5)
    found = assuring_coalition(protocol)
    assert found.coalition == (0, 1, 4)
    assert len(found.coalition) <= math.ceil(5 / 2)
    assert replay_witness(protocol, found.coalition, found.bit, found.witness)
    assert found.to_dict()["k"] == 3


def test_unbounded_protocols_are_refused(xor_protocol):
    with pytest.raises(ProtocolTreeError):
        load_protocol(DATA_DIR / "loop.json")
    with pytest.raises(ProtocolTreeError):
        load_protocol(DATA_DIR / "xor.json", max_depth=2)
    assert xor_protocol.depth == 3


def test_turns_follow_edges(path3):
    end = Terminal({0: 0, 1: 0, 2: 0})
    with pytest.raises(ProtocolTreeError):
        ProtocolTree(path3, {0: (0,), 1: (0,), 2: (0,)}, (0,), Turn(0, 2, {0: 0}, {0: end}))
    with pytest.raises(ProtocolTreeError):
        ProtocolTree(path3, {0: (0,), 1: (0,), 2: (0,)}, (0, 1), Turn(0, 1, {0: 0}, {0: end}))


def test_lower_bit_protocol():
    network = nx.Graph()
    network.add_edge("A", "B")
    election = ProtocolTree(network, {"A": (0,), "B": (0, 1)}, (0,), Terminal({"A": 3, "B": {0: 2, 1: 5}}))
    coin = lower_bit_protocol(election)
    assert run_honest(coin, {"A": 0, "B": 0}) == {"A": 1, "B": 0}
    assert run_honest(coin, {"A": 0, "B": 1}) == {"A": 1, "B": 1}


def test_protocol_documents(xor_protocol):
    loaded = protocol_from_dict(protocol_to_dict(xor_protocol))
    for a in (0, 1):
        for b in (0, 1):
            inputs = {"A": a, "B": b}
            assert run_honest(loaded, inputs) == run_honest(xor_protocol, inputs)
    with pytest.raises(ProtocolTreeError):
        protocol_from_dict({"parties": ["A"]})
