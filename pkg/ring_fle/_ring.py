import bisect
import collections
import enum
import functools
import itertools
import json
import logging
from dataclasses import dataclass, field
from typing import Any, List, NamedTuple, Optional, Tuple

import numpy as np

from ._utils import ConfigError, TranscriptError

__all__ = (
    "ABORT",
    "DATA",
    "VALIDATION",
    "PROTOCOLS",
    "RECV",
    "SCHEDULES",
    "SEND",
    "Event",
    "Failure",
    "Message",
    "Outcome",
    "Processor",
    "RingConfig",
    "Tampered",
    "Transcript",
    "outcome_of",
    "segments",
    "simulate",
    "tampered",
)
logger = logging.getLogger(__name__)

PROTOCOLS = ("basic", "alead", "phase", "phase-sum")
SCHEDULES = ("rr", "random")
SEND = "send"
RECV = "recv"
DATA = "data"
VALIDATION = "validation"
BUDGET_FACTOR = 64


class _Terminal(enum.Enum):
    ABORT = "abort"

    def __repr__(self):
        return "ABORT"


# Terminal output of a processor whose validation failed.
ABORT = _Terminal.ABORT


class Failure(str, enum.Enum):
    ABORT = "abort"
    DISAGREEMENT = "disagreement"
    NONTERMINATION = "nontermination"


@dataclass(frozen=True)
class Outcome:
    """
    Global outcome of one execution: a leader, or a failure reason.

    ``budget_exhausted`` separates a step-budget cutoff from a quiescent
    deadlock when the failure is nontermination. It does not take part in
    equality.
    """

    leader: Optional[int] = None
    failure: Optional[Failure] = None
    budget_exhausted: bool = field(default=False, compare=False)

    def __post_init__(self):
        if (self.leader is None) == (self.failure is None):
            raise ValueError("An Outcome is either a leader or a failure.")

    @property
    def elected(self):
        return self.failure is None

    @property
    def label(self):
        "Histogram key: the leader id or the failure reason."
        return self.leader if self.elected else self.failure.value

    def __str__(self):
        if self.elected:
            return f"Elected({self.leader})"
        return f"Fail({self.failure.value})"


class Message(NamedTuple):
    value: int
    tag: Optional[str] = None


class Event(NamedTuple):
    seq: int
    kind: str
    proc: int
    ordinal: int
    value: int
    tag: Optional[str] = None
    # Receive ordinal whose processing emitted this send; 0 for a wake.
    trigger: Optional[int] = None

    @property
    def key(self):
        return (self.kind, self.proc, self.ordinal)


class Processor:
    """
    Reactive state machine run by one ring position.

    Subclasses override :meth:`on_wake` and :meth:`on_receive` and act through
    :meth:`send` and :meth:`terminate`. Processors with ``wakes`` set are
    activated once, before any message is delivered.

    Parameters
    ----------
    pid: int
        Position on the ring, in ``[0, n)``.
    n: int
        Ring size.
    """

    wakes = False

    def __init__(self, pid, n):
        self.pid = pid
        self.n = n
        self.terminated = False
        self.output = None
        self._outbox = []

    def on_wake(self):
        pass

    def on_receive(self, message):
        raise NotImplementedError

    def send(self, value, tag=None):
        if self.terminated:
            logger.debug("Processor %d sent after terminating; dropped.", self.pid)
            return
        self._outbox.append(Message(int(value), tag))

    def terminate(self, output):
        if not self.terminated:
            self.terminated = True
            self.output = output

    def drain(self):
        outbox, self._outbox = self._outbox, []
        return outbox


def segments(coalition, n):
    """
    Map each adversary to the honest processors that follow it on the ring.

    Parameters
    ----------
    coalition: Iterable[int]
    n: int

    Returns
    -------
    segments: Dict[int, Tuple[int]]
        For adversary a, the maximal run a+1, a+2, ... of honest ids, in ring
        order. Adjacent adversaries map to an empty tuple.
    """
    members = sorted(set(coalition))
    result = {}
    for a in members:
        run = []
        p = (a + 1) % n
        while p not in members and p != a:
            run.append(p)
            p = (p + 1) % n
        result[a] = tuple(run)
    return result


@dataclass(frozen=True)
class RingConfig:
    """
    Static description of one ring execution.

    ``params`` carries protocol parameters (a ``PhaseParams`` for the
    PhaseAsyncLead protocols) and ``seed`` drives the seeded-random schedule.
    """

    n: int
    origin: int = 0
    coalition: Tuple[int, ...] = ()
    protocol: str = "alead"
    params: Any = None
    schedule: str = "rr"
    seed: int = 0

    def __post_init__(self):
        if int(self.n) < 2:
            raise ConfigError(f"Ring size must be at least 2, not {self.n}.")
        if not 0 <= self.origin < self.n:
            raise ConfigError(f"Origin {self.origin} is not a processor of a ring of {self.n}.")
        coalition = tuple(sorted(int(p) for p in self.coalition))
        if len(set(coalition)) != len(coalition):
            raise ConfigError(f"Coalition {self.coalition} lists a processor twice.")
        if any(not 0 <= p < self.n for p in coalition):
            raise ConfigError(f"Coalition {self.coalition} is not a subset of [0, {self.n}).")
        object.__setattr__(self, "coalition", coalition)
        if self.protocol not in PROTOCOLS:
            raise ConfigError(f"Unknown protocol {self.protocol!r}. Choose from {PROTOCOLS}.")
        if self.schedule not in SCHEDULES:
            raise ConfigError(f"Unknown schedule {self.schedule!r}. Choose from {SCHEDULES}.")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("The schedule seed must be a 64-bit unsigned integer.")

    @property
    def k(self):
        return len(self.coalition)

    @property
    def honest(self):
        members = set(self.coalition)
        return tuple(p for p in range(self.n) if p not in members)

    def segments(self):
        return segments(self.coalition, self.n)

    def distances(self):
        "Honest segment length l_j after each adversary, in coalition order."
        return [len(run) for run in self.segments().values()]


@dataclass
class Transcript:
    """
    Globally ordered send/receive log of one execution.

    ``outputs`` holds, per processor, its terminal value, ``ABORT``, or None
    if it never terminated.
    """

    n: int
    events: List[Event] = field(default_factory=list)
    outputs: List[Any] = field(default_factory=list)
    quiescent: bool = True
    budget_exhausted: bool = False
    config: Optional[RingConfig] = None

    def sends(self, p):
        return [e for e in self.events if e.kind == SEND and e.proc == p]

    def receives(self, p):
        return [e for e in self.events if e.kind == RECV and e.proc == p]

    def sent_values(self):
        "Per processor, the values it sent, in order."
        values = [[] for _ in range(self.n)]
        for event in self.events:
            if event.kind == SEND:
                values[event.proc].append(event.value)
        return values

    def to_jsonl(self, file):
        for event in self.events:
            file.write(json.dumps(event._asdict(), sort_keys=True) + "\n")

    @classmethod
    def from_jsonl(cls, file, n=None, outputs=None):
        """
        Read events written by :meth:`to_jsonl`.

        Parameters
        ----------
        file: Iterable[str]
            Open text file or any iterable of lines. Blank lines are skipped.
        n: int, optional
            Ring size. Inferred from the largest processor id if omitted.
        outputs: List, optional
            Terminal outputs, if known.
        """
        events = []
        for lineno, line in enumerate(file, 1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                event = Event(
                    seq=int(record["seq"]),
                    kind=record["kind"],
                    proc=int(record["proc"]),
                    ordinal=int(record["ordinal"]),
                    value=int(record["value"]),
                    tag=record.get("tag"),
                    trigger=record.get("trigger"),
                )
            except (KeyError, TypeError, ValueError) as err:
                raise TranscriptError(f"Malformed transcript line {lineno}: {line!r}") from err
            events.append(event)
        if n is None:
            n = max((e.proc for e in events), default=0) + 1
        transcript = cls(n=n, events=events, outputs=list(outputs or []))
        transcript.check()
        return transcript

    def check(self):
        "Raise TranscriptError unless sequencing, ordinals and FIFO hold."
        counters = collections.Counter()
        in_flight = [collections.deque() for _ in range(self.n)]
        last_seq = -1
        for event in self.events:
            if event.seq <= last_seq:
                raise TranscriptError(f"Sequence numbers must increase (at {event.seq}).")
            last_seq = event.seq
            if event.kind not in (SEND, RECV) or not 0 <= event.proc < self.n:
                raise TranscriptError(f"Malformed event {event}.")
            counters[event.kind, event.proc] += 1
            if counters[event.kind, event.proc] != event.ordinal:
                raise TranscriptError(f"Ordinals of {event.kind} at {event.proc} skip at {event}.")
            if event.kind == SEND:
                in_flight[event.proc].append(event.value)
            else:
                link = in_flight[(event.proc - 1) % self.n]
                if not link or link.popleft() != event.value:
                    raise TranscriptError(f"Receive {event} does not match a prior send.")


class RoundRobinScheduler:
    """
    Deliver from the next nonempty link at or after a rotating cursor.

    Only the set of nonempty links is consulted, never message contents.
    """

    def __init__(self):
        self._ready = []
        self._cursor = 0

    def mark(self, link):
        index = bisect.bisect_left(self._ready, link)
        if index == len(self._ready) or self._ready[index] != link:
            self._ready.insert(index, link)

    def unmark(self, link):
        index = bisect.bisect_left(self._ready, link)
        del self._ready[index]

    def pick(self):
        if not self._ready:
            return None
        index = bisect.bisect_left(self._ready, self._cursor)
        if index == len(self._ready):
            index = 0
        link = self._ready[index]
        self._cursor = link + 1
        return link


class SeededRandomScheduler(RoundRobinScheduler):
    "Deliver from a uniformly drawn nonempty link."

    BLOCK = 4096

    def __init__(self, seed=None):
        super().__init__()
        self._rng = np.random.default_rng(seed)
        self._draws = iter(())

    def pick(self):
        if not self._ready:
            return None
        try:
            u = next(self._draws)
        except StopIteration:
            self._draws = iter(self._rng.random(self.BLOCK).tolist())
            u = next(self._draws)
        return self._ready[int(u * len(self._ready))]


def _scheduler(config):
    "Only the random schedule reads the seed."
    if config.schedule == "random":
        return SeededRandomScheduler(config.seed)
    return RoundRobinScheduler()


def simulate(config, strategies, inputs, *, record=True):
    """
    Run one execution on an asynchronous unidirectional ring.

    Processors that wake spontaneously are activated first, in id order.
    Messages are then delivered one at a time along FIFO links i -> i+1
    until no link holds a message (quiescence) or the step budget of
    64 n^2 events runs out.

    Parameters
    ----------
    config: RingConfig
    strategies: Sequence[Callable]
        One per processor; ``strategies[i](inputs[i])`` builds processor i.
    inputs: Sequence
        Per-processor secret input.
    record: Bool, optional
        If False, events are not logged. Outputs and the outcome are still
        produced. True by default.

    Returns
    -------
    transcript: Transcript
    outcome: Outcome
    """
    n = config.n
    if len(strategies) != n or len(inputs) != n:
        raise ConfigError(
            f"Need exactly {n} strategies and inputs, got {len(strategies)} and {len(inputs)}."
        )
    processors = [strategy(secret) for strategy, secret in zip(strategies, inputs)]
    for pid, processor in enumerate(processors):
        if processor.pid != pid or processor.n != n:
            raise ConfigError(f"Strategy {pid} built a processor for position {processor.pid}.")
    links = [collections.deque() for _ in range(n)]
    sent = [0] * n
    received = [0] * n
    events = []
    seq = itertools.count()
    scheduler = _scheduler(config)
    budget = BUDGET_FACTOR * n * n
    steps = 0

    def flush(p, trigger):
        nonlocal steps
        outgoing = processors[p].drain()
        if outgoing and not links[p]:
            scheduler.mark(p)
        for message in outgoing:
            sent[p] += 1
            steps += 1
            links[p].append(message)
            if record:
                events.append(
                    Event(next(seq), SEND, p, sent[p], message.value, message.tag, trigger)
                )

    for p, processor in enumerate(processors):
        if processor.wakes:
            processor.on_wake()
            flush(p, 0)

    budget_exhausted = False
    while True:
        link = scheduler.pick()
        if link is None:
            break
        if steps >= budget:
            budget_exhausted = True
            logger.warning(
                "Step budget of %d events exhausted on a ring of %d; reporting nontermination.",
                budget,
                n,
            )
            break
        message = links[link].popleft()
        if not links[link]:
            scheduler.unmark(link)
        q = link + 1 if link + 1 < n else 0
        received[q] += 1
        steps += 1
        if record:
            events.append(Event(next(seq), RECV, q, received[q], message.value, message.tag))
        processor = processors[q]
        if not processor.terminated:
            processor.on_receive(message)
            flush(q, received[q])

    outputs = [p.output if p.terminated else None for p in processors]
    outcome = outcome_of(outputs, n)
    if budget_exhausted and outcome.failure is Failure.NONTERMINATION:
        outcome = Outcome(failure=Failure.NONTERMINATION, budget_exhausted=True)
    transcript = Transcript(
        n=n,
        events=events,
        outputs=outputs,
        quiescent=not budget_exhausted,
        budget_exhausted=budget_exhausted,
        config=config,
    )
    return transcript, outcome


def outcome_of(outputs, n=None):
    """
    Decide the global outcome from per-processor terminal states.

    Parameters
    ----------
    outputs: Sequence
        Per processor: an integer output, ``ABORT``, or None if it never
        terminated.
    n: int, optional
        If given, integer outputs outside ``[0, n)`` count as aborts.

    Returns
    -------
    outcome: Outcome
    """
    outputs = list(outputs)
    if any(o is ABORT for o in outputs):
        return Outcome(failure=Failure.ABORT)
    valid = {o for o in outputs if o is not None}
    if n is not None and any(not 0 <= o < n for o in valid):
        return Outcome(failure=Failure.ABORT)
    if len(valid) > 1:
        return Outcome(failure=Failure.DISAGREEMENT)
    if not valid or any(o is None for o in outputs):
        return Outcome(failure=Failure.NONTERMINATION)
    return Outcome(leader=valid.pop())


class Tampered(Processor):
    """
    Wrap a processor and edit its outgoing stream.

    Parameters
    ----------
    inner: Processor
    edits: Dict[int, Tuple[str, int]]
        Maps a 1-based ordinal of the wrapped processor's sends to one of
        ``("add", delta)``, ``("drop", 0)`` or ``("duplicate", 0)``.
    adopt: Bool, optional
        If True, terminate with the sum of the first n values actually sent,
        mod n, in place of the wrapped processor's output. A deviating
        processor adopts what its honest successors compute.
    """

    def __init__(self, inner, edits, adopt=False):
        super().__init__(inner.pid, inner.n)
        self.inner = inner
        self.wakes = inner.wakes
        self.edits = dict(edits)
        self.adopt = adopt
        self._inner_sent = 0
        self._values = []

    def on_wake(self):
        self.inner.on_wake()
        self._relay()

    def on_receive(self, message):
        if not self.inner.terminated:
            self.inner.on_receive(message)
        self._relay()

    def _emit(self, value, tag):
        self._values.append(value)
        self.send(value, tag)

    def _relay(self):
        for message in self.inner.drain():
            self._inner_sent += 1
            kind, delta = self.edits.get(self._inner_sent, ("keep", 0))
            if kind == "keep":
                self._emit(message.value, message.tag)
            elif kind == "add":
                self._emit(message.value + delta, message.tag)
            elif kind == "duplicate":
                self._emit(message.value, message.tag)
                self._emit(message.value, message.tag)
            elif kind != "drop":
                raise ValueError(f"Unknown edit {kind!r}.")
        if self.inner.terminated:
            if self.adopt:
                self.terminate(sum(self._values[: self.n]) % self.n)
            else:
                self.terminate(self.inner.output)


def _build_tampered(strategy, edits, adopt, secret):
    return Tampered(strategy(secret), edits, adopt)


def tampered(strategy, edits, adopt=False):
    "Strategy whose processors are wrapped in :class:`Tampered`."
    return functools.partial(_build_tampered, strategy, dict(edits), adopt)
