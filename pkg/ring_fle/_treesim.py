"""
Finite coin-toss protocols on tree networks, and who can bias them.

A protocol is an explicit game tree. Each :class:`Turn` has one party send
one message, chosen as a function of its input, to a neighbour (or to itself
for an internal step of a party that simulates several processors). A
:class:`Terminal` holds every party's output. The asynchronous schedule is
folded into the tree: a coalition deviates by choosing any message at its
own turns and waits at everybody else's. At a terminal it outputs the bit it
wants, so it assures bit b exactly when every honest party outputs b.

A coalition only sees the messages it sends or receives. Its strategies,
and the witnesses returned here, are keyed by that view: the sequence of
visible ``(sender, receiver, message)`` triples.
"""
import collections
import collections.abc
import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Hashable, Optional, Tuple

import networkx as nx
import yaml

from ._utils import GraphError, ProtocolTreeError

__all__ = (
    "CoalitionAssurance",
    "ProtocolTree",
    "SimulationCheck",
    "Terminal",
    "TreeAssurance",
    "TreeSimulation",
    "Turn",
    "assure",
    "assure_search_two_party",
    "assuring_coalition",
    "decompose_half",
    "enumerate_two_party_protocols",
    "graph_from_dict",
    "graph_to_dict",
    "load_graph",
    "load_protocol",
    "lower_bit_protocol",
    "parity_protocol",
    "protocol_from_dict",
    "protocol_to_dict",
    "replay_witness",
    "run_honest",
    "simulate_on_tree",
    "tree_assure_search",
    "verify_k_simulation",
    "witness_to_list",
)
logger = logging.getLogger(__name__)


# Graphs and simulations


@dataclass(frozen=True)
class SimulationCheck:
    "Result of :func:`verify_k_simulation`; false with the violated condition."

    ok: bool
    condition: Optional[str] = None
    witness: Any = None

    def __bool__(self):
        return self.ok


@dataclass
class TreeSimulation:
    """
    A tree T together with a map f from the vertices of G onto it.

    Parameters
    ----------
    tree: networkx.Graph
    mapping: Dict
        f: V(G) -> V(T).
    k: int
        Bound on the size of every fiber f^-1(v).
    """

    tree: nx.Graph
    mapping: Dict[Hashable, Hashable]
    k: int

    def fibers(self):
        result = collections.defaultdict(list)
        for x, v in self.mapping.items():
            result[v].append(x)
        return {v: sorted(members) for v, members in result.items()}


def verify_k_simulation(graph, tree, mapping, k):
    """
    Check that ``mapping`` makes ``tree`` a k-simulation of ``graph``.

    Every edge of G must map to an edge of T or inside one fiber, every
    fiber has at most k vertices, and every fiber is connected in G.

    Returns
    -------
    check: SimulationCheck
        Truthy when all conditions hold. Otherwise ``condition`` is one of
        "tree", "domain", "homomorphism", "size", "connected" and ``witness``
        the offending vertex, edge or fiber.
    """
    if tree.number_of_nodes() == 0 or not nx.is_tree(tree):
        return SimulationCheck(False, "tree", sorted(tree.nodes))
    for x in graph.nodes:
        if x not in mapping or mapping[x] not in tree:
            return SimulationCheck(False, "domain", x)
    for x, y in graph.edges:
        fx, fy = mapping[x], mapping[y]
        if fx != fy and not tree.has_edge(fx, fy):
            return SimulationCheck(False, "homomorphism", (x, y))
    fibers = TreeSimulation(tree, mapping, k).fibers()
    for v, members in sorted(fibers.items()):
        if len(members) > k:
            return SimulationCheck(False, "size", (v, members))
    for v, members in sorted(fibers.items()):
        if not nx.is_connected(graph.subgraph(members)):
            return SimulationCheck(False, "connected", (v, members))
    return SimulationCheck(True)


def decompose_half(graph):
    """
    Map a connected graph onto a tree with fibers of at most ceil(n/2).

    The first fiber is the first ceil(n/2) vertices of a breadth-first
    search from the smallest vertex, hence connected. The remaining
    fibers are the connected components of what is left. Each of them
    touches the first fiber and no other, so the quotient is a star.

    Parameters
    ----------
    graph: networkx.Graph

    Returns
    -------
    simulation: TreeSimulation
        Tree vertices are 0 (the first fiber) and 1, 2, ... for the
        components, ordered by their smallest vertex.

    Raises
    ------
    GraphError
        If the graph is empty or disconnected.
    """
    if graph.number_of_nodes() == 0 or not nx.is_connected(graph):
        raise GraphError("Only a nonempty connected graph is a simulated tree.")
    n = graph.number_of_nodes()
    size = math.ceil(n / 2)
    source = min(graph.nodes)
    order = [source] + [v for _, v in nx.bfs_edges(graph, source, sort_neighbors=sorted)]
    first = order[:size]
    mapping = {x: 0 for x in first}
    rest = graph.subgraph(set(graph.nodes) - set(first))
    components = sorted(nx.connected_components(rest), key=min)
    tree = nx.Graph()
    tree.add_node(0)
    for index, component in enumerate(components, 1):
        tree.add_edge(0, index)
        mapping.update({x: index for x in component})
    simulation = TreeSimulation(tree, mapping, size)
    check = verify_k_simulation(graph, tree, mapping, size)
    if not check:
        raise GraphError(f"Decomposition failed its own check: {check.condition} at {check.witness}.")
    return simulation


def graph_to_dict(graph):
    return {"nodes": sorted(graph.nodes), "edges": sorted(sorted(edge) for edge in graph.edges)}


def graph_from_dict(doc):
    try:
        graph = nx.Graph()
        graph.add_nodes_from(doc.get("nodes", ()))
        graph.add_edges_from(tuple(edge) for edge in doc["edges"])
    except (KeyError, TypeError, AttributeError, ValueError) as err:
        raise GraphError(f"Malformed graph document: {err!r}") from err
    if nx.number_of_selfloops(graph):
        raise GraphError("A network has no self-loops.")
    return graph


def load_graph(path):
    "Read a graph document (JSON or YAML)."
    with open(path) as file:
        return graph_from_dict(yaml.safe_load(file))


# Protocol trees


@dataclass
class Terminal:
    """
    End of a protocol.

    ``outputs`` maps every party to its output, either a constant or a
    mapping from the party's input to its output.
    """

    outputs: Dict[Hashable, Any]

    def output_of(self, party, value):
        output = self.outputs[party]
        if isinstance(output, collections.abc.Mapping):
            return output.get(value)
        return output


@dataclass
class Turn:
    "``sender`` sends ``choice[input]`` to ``receiver``; the protocol continues at ``children[message]``."

    sender: Hashable
    receiver: Hashable
    choice: Dict[Hashable, Hashable]
    children: Dict[Hashable, Any] = field(default_factory=dict)


def _freeze(value):
    if isinstance(value, list):
        return tuple(_freeze(item) for item in value)
    return value


def _thaw(value):
    if isinstance(value, tuple):
        return [_thaw(item) for item in value]
    return value


@dataclass
class ProtocolTree:
    """
    A finite protocol over a network.

    Parameters
    ----------
    network: networkx.Graph
        Parties are its vertices.
    inputs: Dict
        Finite input set of every party; the input space is their product.
    alphabet: Tuple
        Messages. Every turn branches on all of them.
    root: Terminal or Turn
    max_depth: int, optional
        Reject trees deeper than this.

    Raises
    ------
    ProtocolTreeError
        If a turn uses a non-edge, a choice or terminal output does not
        cover its party's inputs, a turn misses a branch, or a party's
        choices or outputs differ between histories it cannot tell apart.
    """

    network: nx.Graph
    inputs: Dict[Hashable, Tuple]
    alphabet: Tuple
    root: Any
    max_depth: Optional[int] = None

    def __post_init__(self):
        self.inputs = {party: tuple(values) for party, values in self.inputs.items()}
        self.alphabet = tuple(self.alphabet)
        self.validate()

    @property
    def parties(self):
        return tuple(sorted(self.network.nodes))

    @property
    def depth(self):
        "Tree levels, counting terminals; a bare terminal has depth 1."

        def walk(node):
            if isinstance(node, Terminal):
                return 1
            return 1 + max(walk(child) for child in node.children.values())

        return walk(self.root)

    def validate(self):
        parties = set(self.parties)
        if set(self.inputs) != parties:
            raise ProtocolTreeError(f"Inputs are given for {sorted(self.inputs)}, parties are {sorted(parties)}.")
        empty = [party for party, values in self.inputs.items() if not values]
        if empty:
            raise ProtocolTreeError(f"Parties {empty} have no inputs.")
        if not self.alphabet:
            raise ProtocolTreeError("The message alphabet is empty.")
        seen = {party: {} for party in parties}
        stack = [(self.root, (), 1)]
        while stack:
            node, path, level = stack.pop()
            if self.max_depth is not None and level > self.max_depth:
                raise ProtocolTreeError(f"The protocol is deeper than {self.max_depth}.")
            if isinstance(node, Terminal):
                for party in parties:
                    if party not in node.outputs:
                        raise ProtocolTreeError(f"Terminal after {path} has no output for {party!r}.")
                    outputs = tuple(node.output_of(party, value) for value in self.inputs[party])
                    self._consistent(seen[party], ("out", _view(path, {party})), outputs, party)
                continue
            if not isinstance(node, Turn):
                raise ProtocolTreeError(f"Unknown node {node!r} after {path}.")
            s, r = node.sender, node.receiver
            if s not in parties or r not in parties:
                raise ProtocolTreeError(f"Turn {s!r} -> {r!r} names a party outside the network.")
            if s != r and not self.network.has_edge(s, r):
                raise ProtocolTreeError(f"Turn {s!r} -> {r!r} is not an edge of the network.")
            if set(node.choice) != set(self.inputs[s]):
                raise ProtocolTreeError(f"Choice of {s!r} after {path} does not cover its inputs.")
            if set(node.children) != set(self.alphabet) or not set(node.choice.values()) <= set(self.alphabet):
                raise ProtocolTreeError(f"Turn of {s!r} after {path} does not branch on the alphabet.")
            choice = tuple(node.choice[value] for value in self.inputs[s])
            self._consistent(seen[s], ("send", _view(path, {s})), choice, s)
            for m, child in node.children.items():
                stack.append((child, path + ((s, r, m),), level + 1))

    @staticmethod
    def _consistent(seen, key, value, party):
        if seen.setdefault(key, value) != value:
            raise ProtocolTreeError(f"Party {party!r} acts differently on the same view {key[1]}.")


def _view(path, coalition):
    return tuple(step for step in path if step[0] in coalition or step[1] in coalition)


def run_honest(protocol, inputs):
    """
    Outputs of every party when everybody follows the protocol.

    Parameters
    ----------
    protocol: ProtocolTree
    inputs: Dict
        Input of every party.

    Returns
    -------
    outputs: Dict
    """
    node = protocol.root
    while isinstance(node, Turn):
        node = node.children[node.choice[inputs[node.sender]]]
    return {party: node.output_of(party, inputs[party]) for party in protocol.parties}


class _Game:
    "A coalition against the honest rest of one protocol."

    def __init__(self, protocol, coalition):
        self.protocol = protocol
        self.coalition = frozenset(coalition)
        unknown = self.coalition - set(protocol.parties)
        if unknown:
            raise ProtocolTreeError(f"Coalition members {sorted(unknown)} are not parties.")
        self.honest = tuple(p for p in protocol.parties if p not in self.coalition)
        self.index = {p: i for i, p in enumerate(self.honest)}

    def profiles(self):
        return itertools.product(*(self.protocol.inputs[h] for h in self.honest))

    def advance(self, node, profile):
        "Play honest turns; return what the coalition saw and the next node it acts at."
        seen = []
        while isinstance(node, Turn) and node.sender not in self.coalition:
            m = node.choice[profile[self.index[node.sender]]]
            if node.receiver in self.coalition:
                seen.append((node.sender, node.receiver, m))
            node = node.children[m]
        return tuple(seen), node

    def honest_output(self, terminal, profile, bit):
        return all(terminal.output_of(h, profile[self.index[h]]) == bit for h in self.honest)

    def solve(self, pairs, bit, view, witness):
        turns = []
        for node, profile in pairs:
            if isinstance(node, Terminal):
                if not self.honest_output(node, profile, bit):
                    return False
            else:
                turns.append((node, profile))
        if not turns:
            return True
        for m in self.protocol.alphabet:
            branches = collections.defaultdict(list)
            for node, profile in turns:
                seen, child = self.advance(node.children[m], profile)
                branches[((node.sender, node.receiver, m),) + seen].append((child, profile))
            trial = {}
            if all(self.solve(branch, bit, view + step, trial) for step, branch in branches.items()):
                witness.update(trial)
                witness[view] = m
                return True
        return False


def assure(protocol, coalition, bit):
    """
    Search for a deviation of ``coalition`` forcing every honest party to output ``bit``.

    Parameters
    ----------
    protocol: ProtocolTree
    coalition: Iterable
    bit: int

    Returns
    -------
    witness: Dict or None
        Maps each view at which the coalition must act to its message, or
        None if the coalition cannot assure ``bit``.
    """
    game = _Game(protocol, coalition)
    branches = collections.defaultdict(list)
    for profile in game.profiles():
        seen, node = game.advance(protocol.root, profile)
        branches[seen].append((node, profile))
    witness = {}
    if all(game.solve(pairs, bit, view, witness) for view, pairs in branches.items()):
        return witness
    return None


def replay_witness(protocol, coalition, bit, witness):
    """
    Play ``witness`` against every honest input profile.

    Returns
    -------
    ok: bool
        True if every run ends with all honest parties outputting ``bit``.
    """
    game = _Game(protocol, coalition)
    for profile in game.profiles():
        view, node = game.advance(protocol.root, profile)
        while isinstance(node, Turn):
            m = witness.get(view)
            if m is None:
                return False
            step = (node.sender, node.receiver, m)
            seen, node = game.advance(node.children[m], profile)
            view = view + (step,) + seen
        if not game.honest_output(node, profile, bit):
            return False
    return True


def assure_search_two_party(protocol):
    """
    Which party can force which bit in a two-party protocol.

    Returns
    -------
    assured: Dict[Tuple[party, int], Dict]
        Maps each assured ``(party, bit)`` to its witness. For every protocol
        either the first party assures 0 or the second assures 1, and either
        the first assures 1 or the second assures 0.

    Raises
    ------
    ProtocolTreeError
        If the protocol does not have exactly two parties.
    """
    if len(protocol.parties) != 2:
        raise ProtocolTreeError(f"Expected two parties, got {protocol.parties}.")
    assured = {}
    for party in protocol.parties:
        for bit in (0, 1):
            witness = assure(protocol, {party}, bit)
            if witness is not None:
                assured[party, bit] = witness
    return assured


@dataclass
class TreeAssurance:
    processor: Hashable
    bit: int
    witness: Dict
    bits: frozenset

    def to_dict(self):
        return {
            "processor": _thaw(self.processor),
            "bit": self.bit,
            "bits": sorted(self.bits),
            "witness": witness_to_list(self.witness),
        }


def _single(protocol, party):
    found = {}
    for bit in (1, 0):
        witness = assure(protocol, {party}, bit)
        if witness is not None:
            found[bit] = witness
    if not found:
        return None
    bit = max(found)
    return TreeAssurance(party, bit, found[bit], frozenset(found))


def tree_assure_search(protocol):
    """
    Find one processor of a tree network that assures a bit.

    Repeatedly takes the smallest leaf of the remaining tree. If the leaf
    assures a bit against everybody else, it is returned; otherwise it is
    folded into its neighbour, which simulates it from then on. The last
    remaining processor is checked the same way, so every processor is
    checked exactly once.

    Parameters
    ----------
    protocol: ProtocolTree

    Returns
    -------
    assurance: TreeAssurance or None

    Raises
    ------
    ProtocolTreeError
        If the network is not a tree.
    """
    network = protocol.network
    if network.number_of_nodes() == 0 or not nx.is_tree(network):
        raise ProtocolTreeError("Leaf folding needs a tree network.")
    remaining = network.copy()
    while remaining.number_of_nodes() > 1:
        leaf = min(v for v in remaining if remaining.degree(v) == 1)
        found = _single(protocol, leaf)
        if found is not None:
            return found
        neighbour = next(iter(remaining[leaf]))
        logger.debug("Leaf %r assures nothing; folding it into %r.", leaf, neighbour)
        remaining.remove_node(leaf)
    (last,) = remaining.nodes
    found = _single(protocol, last)
    if found is None:
        logger.warning(
            "No single processor assures a bit in this protocol; %d were checked.", network.number_of_nodes()
        )
    return found


def simulate_on_tree(protocol, simulation):
    """
    Run a protocol of G on the tree of a simulation.

    Tree vertex v plays every processor of f^-1(v). Its input is the tuple
    of their inputs in sorted order, and it outputs their common output, or
    None if they disagree. Messages inside a fiber become internal steps.

    Raises
    ------
    GraphError
        If the simulation does not verify or some tree vertex has an empty
        fiber.
    """
    check = verify_k_simulation(protocol.network, simulation.tree, simulation.mapping, simulation.k)
    if not check:
        raise GraphError(f"Not a simulation: {check.condition} at {check.witness}.")
    fibers = simulation.fibers()
    if set(fibers) != set(simulation.tree.nodes):
        raise GraphError("Every tree vertex must simulate at least one processor.")
    f = simulation.mapping
    slot = {x: members.index(x) for members in fibers.values() for x in members}
    inputs = {
        v: tuple(itertools.product(*(protocol.inputs[x] for x in members))) for v, members in fibers.items()
    }

    def relabel(node):
        if isinstance(node, Terminal):
            outputs = {}
            for v, members in fibers.items():
                table = {}
                for combo in inputs[v]:
                    values = {node.output_of(x, combo[slot[x]]) for x in members}
                    table[combo] = values.pop() if len(values) == 1 else None
                outputs[v] = table
            return Terminal(outputs)
        s = node.sender
        choice = {combo: node.choice[combo[slot[s]]] for combo in inputs[f[s]]}
        children = {m: relabel(child) for m, child in node.children.items()}
        return Turn(f[s], f[node.receiver], choice, children)

    return ProtocolTree(simulation.tree.copy(), inputs, protocol.alphabet, relabel(protocol.root))


@dataclass
class CoalitionAssurance:
    coalition: Tuple
    bit: int
    witness: Dict
    simulation: TreeSimulation

    def to_dict(self):
        return {
            "coalition": list(self.coalition),
            "bit": self.bit,
            "k": self.simulation.k,
            "witness": witness_to_list(self.witness),
        }


def assuring_coalition(protocol, graph=None):
    """
    A connected coalition of at most ceil(n/2) processors that assures a bit.

    Decomposes the network onto a tree, runs the protocol there, finds a
    tree vertex v0 that assures a bit and returns its fiber f^-1(v0) with a
    witness strategy in the original protocol.

    Returns
    -------
    assurance: CoalitionAssurance or None
    """
    graph = protocol.network if graph is None else graph
    simulation = decompose_half(graph)
    found = tree_assure_search(simulate_on_tree(protocol, simulation))
    if found is None:
        return None
    coalition = tuple(simulation.fibers()[found.processor])
    witness = assure(protocol, coalition, found.bit)
    if witness is None:
        logger.warning("Fiber %s assures %d on the tree but not in the graph.", coalition, found.bit)
        return None
    return CoalitionAssurance(coalition, found.bit, witness, simulation)


def lower_bit_protocol(protocol):
    "Coin toss from a leader election protocol: every output becomes its lowest bit."

    def low(value):
        return value & 1 if isinstance(value, int) else None

    def project(node):
        if isinstance(node, Terminal):
            outputs = {}
            for party, output in node.outputs.items():
                if isinstance(output, collections.abc.Mapping):
                    outputs[party] = {value: low(o) for value, o in output.items()}
                else:
                    outputs[party] = low(output)
            return Terminal(outputs)
        children = {m: project(child) for m, child in node.children.items()}
        return Turn(node.sender, node.receiver, dict(node.choice), children)

    return ProtocolTree(protocol.network.copy(), protocol.inputs, protocol.alphabet, project(protocol.root))


def parity_protocol(network, root=None):
    """
    Coin toss by the sum of input bits mod 2 over a spanning tree.

    Reports of subtree parities flow up to ``root``, which adds its own input
    and sends the result back down. Every party outputs that result.

    Parameters
    ----------
    network: networkx.Graph
        Connected.
    root: optional
        Defaults to the smallest vertex.

    Returns
    -------
    protocol: ProtocolTree
    """
    if network.number_of_nodes() == 0 or not nx.is_connected(network):
        raise GraphError("The parity protocol needs a nonempty connected network.")
    root = min(network.nodes) if root is None else root
    order = [root] + [v for _, v in nx.bfs_edges(network, root, sort_neighbors=sorted)]
    parent = dict(nx.bfs_predecessors(network, root, sort_neighbors=sorted))
    steps = [(x, parent[x]) for x in reversed(order[1:])]
    steps += [(parent[x], x) for x in order[1:]]
    bits = (0, 1)

    def known(x, got):
        "Bit x holds: the broadcast result, or the parity of its subtree reports."
        if x != root and parent[x] in got[x]:
            return None, got[x][parent[x]]
        return sum(got[x].values()) % 2, None

    def build(index, got):
        if index == len(steps):
            outputs = {}
            for x in order:
                partial, result = known(x, got)
                outputs[x] = result if result is not None else {b: (b + partial) % 2 for b in bits}
            return Terminal(outputs)
        s, r = steps[index]
        partial, result = known(s, got)
        choice = {b: result for b in bits} if result is not None else {b: (b + partial) % 2 for b in bits}
        children = {}
        for m in bits:
            nxt = {x: dict(received) for x, received in got.items()}
            nxt[r][s] = m
            children[m] = build(index + 1, nxt)
        return Turn(s, r, choice, children)

    root_node = build(0, {x: {} for x in order})
    return ProtocolTree(network.copy(), {x: bits for x in order}, bits, root_node)


def enumerate_two_party_protocols(max_depth=3, alphabet=(0, 1), input_sizes=(1, 2), parties=("A", "B")):
    """
    Every two-party protocol up to a depth, with constant terminal outputs.

    Parameters
    ----------
    max_depth: int
        Levels, counting terminals.
    alphabet: Tuple
    input_sizes: Iterable[int]
        Each party's input set is ``range(size)`` for every listed size.
    parties: Tuple

    Yields
    ------
    protocol: ProtocolTree

    Notes
    -----
    Every terminal makes both parties output the same constant bit, so
    outputs never depend on a party's input directly, only through the
    messages that led to the terminal. A totality check over this family
    therefore covers protocols whose final output is fixed by the
    transcript, not every two-party protocol of the given depth.
    """
    network = nx.Graph()
    network.add_edge(*parties)
    for sizes in itertools.product(input_sizes, repeat=2):
        inputs = {party: tuple(range(size)) for party, size in zip(parties, sizes)}
        cache = {}

        def nodes(depth):
            if depth in cache:
                return cache[depth]
            result = [Terminal({party: bit for party in parties}) for bit in (0, 1)]
            if depth > 1:
                below = nodes(depth - 1)
                for s, r in (parties, parties[::-1]):
                    for messages in itertools.product(alphabet, repeat=len(inputs[s])):
                        choice = dict(zip(inputs[s], messages))
                        for kids in itertools.product(below, repeat=len(alphabet)):
                            result.append(Turn(s, r, choice, dict(zip(alphabet, kids))))
            cache[depth] = result
            return result

        for root in nodes(max_depth):
            yield ProtocolTree(network, inputs, alphabet, root, max_depth=max_depth)


# JSON schema


def witness_to_list(witness):
    return [[[_thaw(list(step)) for step in view], _thaw(m)] for view, m in witness.items()]


def _node_to_dict(node):
    if isinstance(node, Terminal):
        outputs = []
        for party, output in node.outputs.items():
            if isinstance(output, collections.abc.Mapping):
                output = [[_thaw(value), o] for value, o in output.items()]
            outputs.append([_thaw(party), output])
        return {"outputs": outputs}
    return {
        "sender": _thaw(node.sender),
        "receiver": _thaw(node.receiver),
        "choice": [[_thaw(value), _thaw(m)] for value, m in node.choice.items()],
        "children": [[_thaw(m), _node_to_dict(child)] for m, child in node.children.items()],
    }


def protocol_to_dict(protocol):
    return {
        "parties": [_thaw(p) for p in protocol.parties],
        "edges": [[_thaw(u), _thaw(v)] for u, v in protocol.network.edges],
        "inputs": [[_thaw(p), [_thaw(value) for value in values]] for p, values in protocol.inputs.items()],
        "alphabet": [_thaw(m) for m in protocol.alphabet],
        "root": _node_to_dict(protocol.root),
    }


def protocol_from_dict(doc, max_depth=None):
    """
    Build a protocol from its JSON document.

    ``root`` is a node. A node is either ``{"outputs": [[party, output],
    ...]}``, where an output is a constant or a list of ``[input, output]``
    pairs, or ``{"sender", "receiver", "choice": [[input, message], ...],
    "children": [[message, node], ...]}``. A node may instead be
    ``{"goto": name}``, naming an entry of the optional ``nodes`` table.

    Raises
    ------
    ProtocolTreeError
        If the document is malformed or its ``goto`` references loop, i.e.
        the protocol is unbounded.
    """
    table = doc.get("nodes", {}) or {}

    def build(node, active):
        if "goto" in node:
            name = node["goto"]
            if name in active:
                raise ProtocolTreeError(f"Node {name!r} is reachable from itself: the protocol is unbounded.")
            if name not in table:
                raise ProtocolTreeError(f"Unknown node {name!r}.")
            return build(table[name], active | {name})
        if "outputs" in node:
            outputs = {}
            for party, output in node["outputs"]:
                if isinstance(output, list):
                    output = {_freeze(value): o for value, o in output}
                outputs[_freeze(party)] = output
            return Terminal(outputs)
        choice = {_freeze(value): _freeze(m) for value, m in node["choice"]}
        children = {_freeze(m): build(child, active) for m, child in node["children"]}
        return Turn(_freeze(node["sender"]), _freeze(node["receiver"]), choice, children)

    try:
        network = nx.Graph()
        network.add_nodes_from(_freeze(p) for p in doc["parties"])
        network.add_edges_from((_freeze(u), _freeze(v)) for u, v in doc.get("edges", ()))
        inputs = {_freeze(p): tuple(_freeze(v) for v in values) for p, values in doc["inputs"]}
        alphabet = tuple(_freeze(m) for m in doc["alphabet"])
        root = build(doc["root"], frozenset())
    except (KeyError, TypeError, ValueError) as err:
        if isinstance(err, ProtocolTreeError):
            raise
        raise ProtocolTreeError(f"Malformed protocol document: {err!r}") from err
    return ProtocolTree(network, inputs, alphabet, root, max_depth=max_depth)


def load_protocol(path, max_depth=None):
    "Read a protocol document (JSON or YAML)."
    with open(path) as file:
        return protocol_from_dict(yaml.safe_load(file), max_depth=max_depth)
