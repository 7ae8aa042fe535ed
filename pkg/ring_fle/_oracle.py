import functools
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, NamedTuple, Optional, Tuple

import networkx as nx

from ._protocols import NORMAL, ORIGIN, alead_strategy, draw_inputs
from ._ring import RECV, SEND, RingConfig, segments, tampered
from ._utils import TranscriptError, UnknownEventError

__all__ = (
    "DependencyGraphs",
    "Deviation",
    "SegmentMap",
    "Verdict",
    "build_graphs",
    "fuzz_deviation",
    "is_validated",
    "reachable",
    "recv_event",
    "segment_map",
    "send_event",
    "validate_execution",
    "validation_chain",
    "validation_send_events",
)
logger = logging.getLogger(__name__)


def send_event(p, i):
    return (SEND, p, i)


def recv_event(p, i):
    return (RECV, p, i)


def validation_send_events(h, n):
    """
    The events s(h) and r(h) of honest processor h.

    s(h) is h sending its own validation value as validator of round h + 1;
    r(h) is its predecessor sending the value back to it.
    """
    ordinal = 2 * (h + 1)
    return send_event(h, ordinal), send_event((h - 1) % n, ordinal)


@dataclass(frozen=True)
class SegmentMap:
    "Honest segment I_j after each adversary a_j, in ring order."

    n: int
    segments: Dict[int, Tuple[int, ...]]

    @property
    def lengths(self):
        return {a: len(run) for a, run in self.segments.items()}

    @property
    def exposed(self):
        "Adversaries whose successor is honest."
        return tuple(a for a, run in self.segments.items() if run)

    @property
    def honest(self):
        return tuple(sorted(h for run in self.segments.values() for h in run))


def segment_map(coalition, n):
    runs = segments(coalition, n)
    result = SegmentMap(n=n, segments=runs)
    if len(result.honest) + len(runs) != n and runs:
        raise ValueError(f"Segments of {sorted(runs)} do not partition the ring of {n}.")
    return result


@dataclass(frozen=True)
class Verdict:
    """
    Outcome of the validity check: Valid(leader) or Invalid(condition, witness).

    Conditions are numbered as follows: 1, an exposed adversary sent fewer
    than n messages (witness: the adversary); 2, two exposed adversaries'
    outgoing sums differ mod n (witness: the pair); 3, an adversary's last
    messages are not its segment's secrets in order (witness: the first
    honest processor that receives a wrong value).
    """

    leader: Optional[int] = None
    condition: Optional[int] = None
    witness: Any = None

    @property
    def valid(self):
        return self.condition is None

    def to_dict(self):
        if self.valid:
            return {"verdict": "valid", "leader": self.leader}
        witness = list(self.witness) if isinstance(self.witness, tuple) else self.witness
        return {"verdict": "invalid", "condition": self.condition, "witness": witness}

    def __str__(self):
        if self.valid:
            return f"Valid({self.leader})"
        return f"Invalid({self.condition}, {self.witness})"


def validate_execution(transcript, coalition, n):
    """
    Decide from a transcript whether an A-LEAD execution elects a leader.

    An execution with coalition C succeeds iff every exposed adversary sends
    at least n messages, each adversary's last l_j messages among its first
    n are the secrets of its segment in order, and the exposed adversaries'
    first n outgoing messages have equal sums mod n.

    Parameters
    ----------
    transcript: Transcript
        Recorded run of Basic-LEAD or A-LEAD.
    coalition: Iterable[int]
    n: int

    Returns
    -------
    verdict: Verdict

    Raises
    ------
    TranscriptError
        If the transcript carries tagged (PhaseAsyncLead) messages, or the
        coalition leaves no honest processor.
    """
    if any(event.tag is not None for event in transcript.events):
        raise TranscriptError("Tagged messages: not an A-LEAD family transcript.")
    coalition = sorted(set(coalition))
    if len(coalition) >= n:
        raise TranscriptError("The coalition covers the ring; there is no honest processor.")
    sent = transcript.sent_values()
    if not coalition:
        return Verdict(leader=sum(values[0] for values in sent if values) % n)
    layout = segment_map(coalition, n)
    secrets = {h: sent[h][0] % n if sent[h] else None for h in layout.honest}

    for a in layout.exposed:
        if len(sent[a]) < n:
            return Verdict(condition=1, witness=a)
    for a in layout.exposed:
        first = sent[a][:n]
        for u, h in enumerate(layout.segments[a], 1):
            if secrets[h] is None or first[n - u] % n != secrets[h]:
                return Verdict(condition=3, witness=h)
    sums = {a: sum(sent[a][:n]) % n for a in layout.exposed}
    exposed = layout.exposed
    for a, b in zip(exposed, exposed[1:]):
        if sums[a] != sums[b]:
            return Verdict(condition=2, witness=(a, b))
    return Verdict(leader=sums[exposed[0]])


class Deviation(NamedTuple):
    config: RingConfig
    strategies: list
    inputs: list


def fuzz_deviation(n, rng, max_edits=3):
    """
    Draw a random deviation from A-LEAD for agreement testing.

    The coalition has no two adjacent members and the origin is honest.
    Each adversary runs A-LEAD with up to ``max_edits`` of its sends
    perturbed, dropped or duplicated, and outputs the sum of its first n
    outgoing values.

    Parameters
    ----------
    n: int
    rng: numpy.random.Generator
    max_edits: int, optional

    Returns
    -------
    deviation: Deviation
    """
    k = int(rng.integers(1, n // 2 + 1))
    order = rng.permutation(n).tolist()
    coalition = []
    for p in order:
        if len(coalition) == k:
            break
        if (p - 1) % n not in coalition and (p + 1) % n not in coalition:
            coalition.append(p)
    honest = [p for p in range(n) if p not in coalition]
    origin = honest[int(rng.integers(len(honest)))]
    config = RingConfig(n=n, origin=origin, coalition=coalition, protocol="alead")
    strategies = [alead_strategy(p, n, ORIGIN if p == origin else NORMAL) for p in range(n)]
    kinds = ("add", "drop", "duplicate")
    for a in config.coalition:
        edits = {}
        for _ in range(int(rng.integers(0, max_edits + 1))):
            ordinal = int(rng.integers(1, n + 1))
            kind = kinds[int(rng.integers(len(kinds)))]
            edits[ordinal] = (kind, int(rng.integers(1, n)) if kind == "add" else 0)
        strategies[a] = tampered(strategies[a], edits, adopt=True)
    return Deviation(config, strategies, draw_inputs(n, rng))


@dataclass
class DependencyGraphs:
    "Happens-before and calculation-dependency graphs of one transcript."

    hb: nx.DiGraph = field(default_factory=nx.DiGraph)
    cd: nx.DiGraph = field(default_factory=nx.DiGraph)

    def acyclic(self):
        return nx.is_directed_acyclic_graph(self.hb) and nx.is_directed_acyclic_graph(self.cd)

    def cd_outside_hb(self):
        "cd edges whose endpoints are not hb-reachable; empty when cd refines hb."
        return [(u, v) for u, v in self.cd.edges if not reachable(self.hb, u, v)]


def build_graphs(transcript, coalition=()):
    """
    Build the happens-before and calculation-dependency graphs.

    Nodes are the events that occurred, keyed ``(kind, proc, ordinal)``.
    Honest processors follow PhaseAsyncLead: their odd receipts are data,
    their even receipts validation. Adversaries are described only by which
    receipt triggered each send.

    Parameters
    ----------
    transcript: Transcript
        Recorded PhaseAsyncLead run.
    coalition: Iterable[int], optional

    Returns
    -------
    graphs: DependencyGraphs

    Raises
    ------
    TranscriptError
        If the transcript is malformed or lacks PhaseAsyncLead tags or
        activation records.
    """
    transcript.check()
    sends = [e for e in transcript.events if e.kind == SEND]
    if any(e.trigger is None for e in sends):
        raise TranscriptError("Send events lack activation records.")
    if transcript.events and all(e.tag is None for e in transcript.events):
        raise TranscriptError("Untagged messages: not a PhaseAsyncLead transcript.")
    n = transcript.n
    members = set(coalition)
    graphs = DependencyGraphs()
    hb, cd = graphs.hb, graphs.cd
    for event in transcript.events:
        hb.add_node(event.key)
        cd.add_node(event.key)
    counts = {(kind, p): 0 for kind in (SEND, RECV) for p in range(n)}
    triggers = {}
    for event in transcript.events:
        counts[event.kind, event.proc] += 1
        if event.kind == SEND:
            triggers[event.proc, event.ordinal] = event.trigger

    for p in range(n):
        sent, received = counts[SEND, p], counts[RECV, p]
        q = (p + 1) % n
        for i in range(1, sent + 1):
            if i <= counts[RECV, q]:
                hb.add_edge(send_event(p, i), recv_event(q, i))
                cd.add_edge(send_event(p, i), recv_event(q, i))
            if i < sent:
                hb.add_edge(send_event(p, i), send_event(p, i + 1))
        for i in range(1, received):
            hb.add_edge(recv_event(p, i), recv_event(p, i + 1))
        for j in range(1, sent + 1):
            trigger = triggers[p, j]
            if trigger:
                hb.add_edge(recv_event(p, trigger), send_event(p, j))
            for i in range(trigger + 1, received + 1):
                hb.add_edge(send_event(p, j), recv_event(p, i))
            if p in members:
                for t in range(1, trigger + 1):
                    cd.add_edge(recv_event(p, t), send_event(p, j))
        if p not in members:
            for r in range(1, n + 1):
                if r - 1 != p and 2 * r <= min(received, sent):
                    cd.add_edge(recv_event(p, 2 * r), send_event(p, 2 * r))
                if 1 < r < n and 2 * r - 1 <= received and 2 * r + 1 <= sent:
                    cd.add_edge(recv_event(p, 2 * r - 1), send_event(p, 2 * r + 1))
    logger.debug("Built graphs: hb %d edges, cd %d edges.", hb.number_of_edges(), cd.number_of_edges())
    return graphs


def reachable(graph, e1, e2):
    """
    Whether a path of at least one edge leads from e1 to e2.

    Raises
    ------
    UnknownEventError
        If either event is not in the graph.
    """
    for event in (e1, e2):
        if event not in graph:
            raise UnknownEventError(event)
    return e1 != e2 and nx.has_path(graph, e1, e2)


def is_validated(h, graphs, n):
    """
    Whether honest h is validated: s(h) reaches r(h) in the cd graph.

    Returns None when the execution never produced s(h) or r(h).
    """
    s, r = validation_send_events(h, n)
    if s not in graphs.cd or r not in graphs.cd:
        return None
    return reachable(graphs.cd, s, r)


@functools.lru_cache(maxsize=None)
def _chain(n):
    events = []
    for h in range(n):
        events.extend(validation_send_events(h, n))
    return tuple(events)


def validation_chain(n):
    "s(0), r(0), s(1), r(1), ..., r(n - 1): the order of honest validations."
    return list(_chain(n))
