"""
Coalition strategies against the PhaseAsyncLead protocols.

Both attacks make every adversary a pipe for data: it contributes no secret
of its own and forwards data values without the one-round delay honest
processors add. Validation messages of honest rounds are forwarded
faithfully. What differs is how an adversary fills the data positions
between its pipe and the replay of its own segment's secrets, and how it
uses the validation rounds it controls. The rushing attack also decides how
long each adversary can wait, from the happens-before graph of the run.
"""
import collections
import functools
import itertools
import logging

import networkx as nx

from ._attacks import equal_positions
from ._protocols import f_eval
from ._ring import DATA, VALIDATION, Processor, segments
from ._utils import PreconditionError

__all__ = (
    "FILLER",
    "SCRIPTED",
    "PhaseAdversary",
    "PhaseRushingAdversary",
    "PipeLayout",
    "RushingPlan",
    "SumAbuseAdversary",
    "event_graph",
    "phase_rushing_attack",
    "rushing_plan",
    "rushing_positions",
    "sum_abuse_attack",
)
logger = logging.getLogger(__name__)

# Provenance markers for data positions that carry no honest secret.
FILLER = "filler"
SCRIPTED = "scripted"


class PipeLayout:
    """
    Which honest secret travels in each data position when adversaries pipe.

    Parameters
    ----------
    n: int
    coalition: Iterable[int]
    pipe: Dict[int, int]
        Last outgoing data position each adversary fills by piping.

    Notes
    -----
    An adversary at id 0 plays the origin: it must send before receiving,
    so its first outgoing data value is a filler and its pipe lags its
    receipts by one position (``shift``). Beyond its pipe an adversary's
    position t > n - l_a replays the secret of its segment member
    h_(n - t + 1); the positions in between are scripted.
    """

    def __init__(self, n, coalition, pipe):
        self.n = n
        self.segments = segments(coalition, n)
        self.coalition = tuple(self.segments)
        self.pipe = dict(pipe)
        order = self.coalition
        self.pred = {a: order[i - 1] for i, a in enumerate(order)}
        self._in = {}
        self._out = {}
        # Ascending t keeps recursion within one position, along adjacent adversaries.
        for t in range(1, n + 1):
            for a in order:
                self._out_at(a, t)
                self._in_at(a, t)

    def shift(self, a):
        return 1 if a == 0 else 0

    def _in_at(self, a, t):
        key = (a, t)
        if key not in self._in:
            run = self.segments[self.pred[a]]
            if t <= len(run):
                self._in[key] = run[len(run) - t]
            else:
                self._in[key] = self._out_at(self.pred[a], t - len(run))
        return self._in[key]

    def _out_at(self, a, t):
        key = (a, t)
        if key not in self._out:
            run = self.segments[a]
            if t <= self.shift(a):
                value = FILLER
            elif t <= self.pipe[a]:
                value = self._in_at(a, t - self.shift(a))
            elif t > self.n - len(run):
                value = run[self.n - t]
            else:
                value = SCRIPTED
            self._out[key] = value
        return self._out[key]

    def in_prov(self, a, t):
        "Provenance of the t-th data value adversary a receives."
        return self._in[a, t]

    def out_prov(self, a, t):
        "Provenance of the t-th data value adversary a sends."
        return self._out[a, t]

    def arrival(self, a, h):
        "First incoming data position of a carrying the secret of h."
        for t in range(1, self.n + 1):
            if self._in[a, t] == h:
                return t
        return None

    def covering_prefix(self, a, wanted):
        "Shortest incoming prefix of a whose honest provenance covers ``wanted``."
        missing = set(wanted)
        if not missing:
            return 0
        for t in range(1, self.n + 1):
            missing.discard(self._in[a, t])
            if not missing:
                return t
        return None


class PhaseAdversary(Processor):
    """
    Common machinery of a PhaseAsyncLead adversary.

    Outgoing messages strictly alternate data and validation. Data position
    t is a filler, a piped value, a scripted value or a replayed segment
    secret according to the layout; validation round r is forwarded unless
    its validator r - 1 is an adversary, in which case the attack decides.
    """

    def __init__(self, pid, n, target, layout, secret=None):
        super().__init__(pid, n)
        self.target = target
        self.layout = layout
        self.shift = layout.shift(pid)
        self.wakes = self.shift == 1
        self.run = layout.segments[pid]
        self.members = frozenset(layout.coalition)
        self.replay_from = [layout.arrival(pid, h) for h in self.run]
        self.in_data = []
        self.in_validation = []
        self.out_data = []
        self.out_validation = []

    def on_wake(self):
        self.pump()

    def on_receive(self, message):
        if (len(self.in_data) + len(self.in_validation)) % 2 == 0:
            self.in_data.append(message.value % self.n)
        else:
            self.in_validation.append(message.value)
        self.pump()

    def pump(self):
        n = self.n
        while len(self.out_validation) < n:
            if len(self.out_data) == len(self.out_validation):
                value = self.data_at(len(self.out_data) + 1)
                if value is None:
                    break
                self.out_data.append(value % n)
                self.send(value % n, DATA)
            else:
                value = self.validation_at(len(self.out_validation) + 1)
                if value is None:
                    break
                self.out_validation.append(value)
                self.send(value, VALIDATION)
        if len(self.out_validation) == n:
            self.terminate(self.final_output())

    def received_data(self, t):
        return self.in_data[t - 1] if t <= len(self.in_data) else None

    def received_validation(self, r):
        return self.in_validation[r - 1] if r <= len(self.in_validation) else None

    def data_at(self, t):
        n = self.n
        if t <= self.shift:
            return 0
        if t <= self.layout.pipe[self.pid]:
            return self.received_data(t - self.shift)
        if t > n - len(self.run):
            return self.received_data(self.replay_from[n - t])
        return self.scripted_data(t)

    def validation_at(self, r):
        if r - 1 in self.members:
            return self.adversary_round(r)
        return self.received_validation(r)

    def scripted_data(self, t):
        raise NotImplementedError

    def adversary_round(self, r):
        raise NotImplementedError

    def final_output(self):
        return self.target


def _equal_segments(n, positions):
    runs = segments(positions, n)
    lengths = {len(run) for run in runs.values()}
    if len(lengths) != 1:
        raise PreconditionError(f"Adversaries {sorted(runs)} are not equally spaced on a ring of {n}.")
    return runs


class SumAbuseAdversary(PhaseAdversary):
    """
    Adversary abusing validation rounds against the sum-output variant.

    In the gather round the adversaries chain the sums of the segments
    preceding them into the total honest sum S. In the broadcast round the
    first gatherer sends S and everybody forwards it. Every adversary pipes
    exactly the honest secrets outside its own segment, then sends
    ``w - S`` (corrected by any non-honest values it piped) followed by
    zeros and the replay of its segment.
    """

    def __init__(self, pid, n, target, layout, plan, secret=None):
        super().__init__(pid, n, target, layout, secret)
        self.gather_round = plan["gather"]
        self.broadcast_round = plan["broadcast"]
        self.gatherer = plan["gatherer"]
        self.pred_length = len(layout.segments[layout.pred[pid]])
        # Pipe positions carrying values that are not honest secrets.
        self.extra_positions = [
            t for t in range(1, layout.pipe[pid] - self.shift + 1)
            if not isinstance(layout.in_prov(pid, t), int)
        ]

    def own_sum(self):
        if len(self.in_data) < self.pred_length:
            return None
        return sum(self.in_data[: self.pred_length]) % self.n

    def total(self):
        if self.pid == self.gatherer:
            return self.received_validation(self.gather_round)
        return self.received_validation(self.broadcast_round)

    def scripted_data(self, t):
        if t != self.layout.pipe[self.pid] + 1:
            return 0
        total = self.total()
        if total is None:
            return None
        extra = sum(self.in_data[i - 1] for i in self.extra_positions)
        return self.target - total - extra

    def adversary_round(self, r):
        if r == self.gather_round:
            own = self.own_sum()
            if own is None:
                return None
            if self.pid == self.gatherer:
                return own
            partial = self.received_validation(r)
            return None if partial is None else (partial + own) % self.n
        if r == self.broadcast_round:
            if self.pid == self.gatherer:
                return self.total()
            return self.received_validation(r)
        if r - 1 == self.pid:
            return 0
        return self.received_validation(r)

    def final_output(self):
        return sum(self.out_data) % self.n


def _covering_layout(n, runs):
    "Shortest pipes that carry every honest secret around to its own adversary."
    honest = {h for run in runs.values() for h in run}
    pipe = {a: n - len(run) - 1 for a, run in runs.items()}
    for _ in range(len(runs) + 2):
        layout = PipeLayout(n, list(runs), pipe)
        updated = {}
        for a, run in runs.items():
            prefix = layout.covering_prefix(a, honest - set(run))
            if prefix is None:
                raise PreconditionError(f"Adversary {a} never receives every other segment's secrets.")
            updated[a] = prefix + layout.shift(a)
        if updated == pipe:
            break
        pipe = updated
    return PipeLayout(n, list(runs), pipe)


def _sum_abuse_layout(n, positions):
    runs = _equal_segments(n, positions)
    honest = {h for run in runs.values() for h in run}
    layout = _covering_layout(n, runs)
    for a, run in runs.items():
        covered = collections.Counter(
            layout.in_prov(a, t)
            for t in range(1, layout.pipe[a] - layout.shift(a) + 1)
            if isinstance(layout.in_prov(a, t), int)
        )
        if covered != collections.Counter(honest - set(run)):
            raise PreconditionError(f"The pipe of adversary {a} does not carry each other secret once.")
    return layout


def sum_abuse_attack(w, n, positions=None):
    """
    Four-adversary attack on PhaseAsyncLead with the sum output rule.

    Parameters
    ----------
    w: int
        Target leader.
    n: int
        Ring size; (n - 4) / 4 must be integral.
    positions: Iterable[int], optional
        Adversary ids. Defaults to 0, L + 1, 2(L + 1), 3(L + 1).

    Returns
    -------
    strategies: Dict[int, Callable]

    Raises
    ------
    PreconditionError
        If the segment length is not integral or the layout leaves an
        adversary without the total sum before it must commit.
    """
    if (n - 4) % 4:
        raise PreconditionError(f"The sum abuse attack needs (n - 4) / 4 integral; n={n}.")
    length = (n - 4) // 4
    if positions is None:
        positions = [i * (length + 1) for i in range(4)]
    positions = sorted(positions)
    if len(positions) != 4:
        raise PreconditionError(f"The sum abuse attack uses exactly 4 adversaries, got {len(positions)}.")
    layout = _sum_abuse_layout(n, positions)
    # Adversaries ordered by the round they validate.
    ready = [a for a in positions if a + 1 >= length + layout.shift(a)]
    if len(ready) < 2:
        raise PreconditionError("No two adversary rounds come after the segment secrets arrive.")
    gatherer, relay = ready[0], ready[1]
    plan = {"gather": gatherer + 1, "broadcast": relay + 1, "gatherer": gatherer}
    for a, run in layout.segments.items():
        commit = layout.pipe[a] + 1
        if layout.pipe[a] < plan["broadcast"]:
            raise PreconditionError(f"Adversary {a} must commit before the broadcast round.")
        if n - len(run) - commit < 0:
            raise PreconditionError(f"Adversary {a} has no room for its correcting message.")
        for u, h in enumerate(run, 1):
            q = layout.arrival(a, h)
            if q is None or q > n - u + 1 - layout.shift(a):
                raise PreconditionError(f"Secret of {h} reaches adversary {a} too late to replay.")
    logger.debug("Sum abuse layout for n=%d: pipes %s, plan %s.", n, layout.pipe, plan)
    return {a: functools.partial(SumAbuseAdversary, a, n, w, layout, plan) for a in positions}


# Most data positions an adversary leaves open for its search.
MAX_SEARCHED = 3


class RushingPlan:
    """
    When each adversary of a rushing coalition commits its data values.

    Attributes
    ----------
    layout: PipeLayout
    window: Dict[int, Tuple[int]]
        Outgoing data positions each adversary sends only after its search.
    last_round: int
        Last validation round read by f whose validator is honest, or 0.
    """

    def __init__(self, layout, window, last_round):
        self.layout = layout
        self.window = window
        self.last_round = last_round

    def __repr__(self):
        return f"RushingPlan(pipe={self.layout.pipe}, window={self.window}, last_round={self.last_round})"


def _adversary_edges(graph, layout, a):
    n = layout.n
    shift, pipe, run = layout.shift(a), layout.pipe[a], layout.segments[a]
    for t in range(1, n + 1):
        graph.add_node(("sd", a, t))
        if t > 1:
            graph.add_edge(("sv", a, t - 1), ("sd", a, t))
        if shift < t <= pipe:
            graph.add_edge(("rd", a, t - shift), ("sd", a, t))
        elif t > n - len(run):
            graph.add_edge(("rd", a, layout.arrival(a, run[n - t])), ("sd", a, t))
        graph.add_edge(("sd", a, t), ("sv", a, t))
        if (t - 1) not in layout.segments:
            graph.add_edge(("rv", a, t), ("sv", a, t))


def _honest_edges(graph, n, p):
    if p == 0:
        graph.add_edge(("sd", 0, 1), ("sv", 0, 1))
        for t in range(2, n + 1):
            graph.add_edge(("rv", 0, t), ("sv", 0, t))
        for t in range(1, n):
            graph.add_edge(("rv", 0, t), ("sd", 0, t + 1))
        return
    for t in range(1, n + 1):
        graph.add_edge(("rd", p, t), ("sd", p, t))
        trigger = "rd" if t == p + 1 else "rv"
        graph.add_edge((trigger, p, t), ("sv", p, t))


def event_graph(layout, l):
    """
    Happens-before order of a rushing execution in which nobody waits.

    Nodes are ``(kind, processor, position)`` with kind ``"sd"``/``"sv"``
    for data and validation sends and ``"rd"``/``"rv"`` for the matching
    receipts, plus one ``("info", a)`` node per adversary that follows every
    receipt its segment's view of f depends on. The order does not depend on
    the schedule: every processor's reaction to each receipt is fixed.

    Parameters
    ----------
    layout: PipeLayout
    l: int

    Returns
    -------
    graph: networkx.DiGraph
    last_round: int
    """
    n = layout.n
    graph = nx.DiGraph()
    for p in range(n):
        q = (p + 1) % n
        for t in range(1, n + 1):
            graph.add_edge(("sd", p, t), ("rd", q, t))
            graph.add_edge(("sv", p, t), ("rv", q, t))
            graph.add_edge(("rd", p, t), ("rv", p, t))
            if t < n:
                graph.add_edge(("rv", p, t), ("rd", p, t + 1))
        if p in layout.segments:
            _adversary_edges(graph, layout, p)
        else:
            _honest_edges(graph, n, p)
    honest_rounds = [r for r in range(1, n - l + 1) if (r - 1) not in layout.segments]
    for a, run in layout.segments.items():
        info = ("info", a)
        graph.add_node(info)
        for h in run:
            graph.add_edge(("rd", a, layout.arrival(a, h)), info)
        for r in honest_rounds:
            graph.add_edge(("rv", a, r), info)
    return graph, max(honest_rounds, default=0)


@functools.lru_cache(maxsize=64)
def rushing_plan(n, coalition, l):
    """
    Latest data positions each adversary can still choose after learning its view.

    An adversary must keep sending until every value its segment feeds into
    f has reached it, or the coalition deadlocks. Holding back a position
    can in turn delay what another adversary waits for, so holds are pushed
    later until the happens-before graph is acyclic.

    Parameters
    ----------
    n: int
    coalition: Tuple[int]
    l: int

    Returns
    -------
    plan: RushingPlan

    Raises
    ------
    PreconditionError
        If some segment has length k - 3 or more, or a segment secret
        reaches its adversary only after the adversary must replay it.
    """
    runs = segments(coalition, n)
    k = len(runs)
    longest = max((len(run) for run in runs.values()), default=0)
    if longest >= k - 3:
        raise PreconditionError(f"Segments must be shorter than k - 3 = {k - 3}; found {longest}.")
    layout = _covering_layout(n, runs)
    for a, run in runs.items():
        if layout.pipe[a] > n - len(run):
            raise PreconditionError(f"Adversary {a} would pipe into the replay of its own segment.")
        if any(layout.arrival(a, h) is None for h in run):
            raise PreconditionError(f"Adversary {a} never receives its own segment's secrets.")
    graph, last_round = event_graph(layout, l)
    if not nx.is_directed_acyclic_graph(graph):
        raise PreconditionError("Some segment secret reaches its adversary only after it must be replayed.")
    hold = {}
    for a, run in runs.items():
        if not run:
            continue
        committed = [node[2] for node in nx.ancestors(graph, ("info", a)) if node[:2] == ("sd", a)]
        hold[a] = max(max(committed, default=0), layout.pipe[a]) + 1

    def window(a):
        last = n - len(runs[a])
        return range(max(hold[a], last - MAX_SEARCHED + 1), last + 1)

    for a in hold:
        if window(a):
            graph.add_edge(("info", a), ("sd", a, window(a)[0]))
    while not nx.is_directed_acyclic_graph(graph):
        for u, v in nx.find_cycle(graph):
            if u[0] == "info":
                graph.remove_edge(u, v)
                hold[u[1]] = v[2] + 1
                if window(u[1]):
                    graph.add_edge(u, ("sd", u[1], window(u[1])[0]))
    windows = {a: tuple(window(a)) if a in hold else () for a in runs}
    for a in hold:
        if not windows[a]:
            logger.info("Adversary %d commits everything before it learns its view; its segment is unbiased.", a)
    plan = RushingPlan(layout, windows, last_round)
    logger.debug("Rushing plan for n=%d, l=%d: %r", n, l, plan)
    return plan


def rushing_positions(n, k, params):
    """
    Equally spaced coalition rotated to leave the worst-off adversary the widest window.

    Parameters
    ----------
    n: int
    k: int
    params: PhaseParams

    Returns
    -------
    positions: List[int]
    """
    base = equal_positions(n, k)
    best = None
    for offset in range(-(-n // k)):
        positions = tuple(sorted((p + offset) % n for p in base))
        try:
            plan = rushing_plan(n, positions, params.l)
        except PreconditionError:
            continue
        score = min(
            (len(w) for a, w in plan.window.items() if plan.layout.segments[a]),
            default=MAX_SEARCHED,
        )
        if best is None or score > best[0]:
            best = (score, positions)
    if best is None:
        # Re-raise the reason the unrotated coalition fails.
        rushing_plan(n, tuple(base), params.l)
    return list(best[1])


class PhaseRushingAdversary(PhaseAdversary):
    """
    Rushing adversary against PhaseAsyncLead with a keyed f.

    Pipes data so other segments' secrets keep moving and sends zeros at
    the positions it does not need. The positions of its window wait until
    it holds every value its segment will feed into f: the segment's own
    secrets and the validation values of honest rounds up to n - l. The
    window is then searched exhaustively for an assignment with
    f(view) = w. Validation rounds of adversaries carry 0.
    """

    def __init__(self, pid, n, target, plan, params, secret=None):
        super().__init__(pid, n, target, plan.layout, secret)
        self.params = params
        self.window = plan.window[pid]
        self.last_round = plan.last_round
        self.choice = None
        self.view = None

    def adversary_round(self, r):
        return 0

    def ready(self):
        return len(self.in_data) >= max(self.replay_from) and len(self.in_validation) >= self.last_round

    def scripted_data(self, t):
        if not self.window or t < self.window[0]:
            return 0
        if self.choice is None:
            if not self.ready():
                return None
            self.choice = self.search()
        return self.choice[t]

    def segment_view(self):
        "The data and validation vectors every processor of the segment will hold, window aside."
        n, l = self.n, self.params.l
        head = self.run[0]
        data = [0] * n
        for t, value in enumerate(self.out_data, 1):
            data[(head - t) % n] = value
        for u, h in enumerate(self.run, 1):
            data[h] = self.in_data[self.replay_from[u - 1] - 1]
        validation = [
            0 if (r - 1) in self.members else self.in_validation[r - 1] % self.params.m
            for r in range(1, n - l + 1)
        ]
        return data, validation

    def search(self):
        n = self.n
        data, validation = self.segment_view()
        head = self.run[0]
        slots = [(head - t) % n for t in self.window]
        for values in itertools.product(range(n), repeat=len(slots)):
            for slot, value in zip(slots, values):
                data[slot] = value
            if f_eval(self.params.fseed, data, validation, n) == self.target:
                self.view = (data, validation)
                return dict(zip(self.window, values))
        logger.warning(
            "Adversary %d found no assignment of positions %s electing %d; its segment is unbiased.",
            self.pid,
            list(self.window),
            self.target,
        )
        for slot in slots:
            data[slot] = 0
        self.view = (data, validation)
        return {t: 0 for t in self.window}

    def final_output(self):
        if self.view is None:
            return self.target
        data, validation = self.view
        return f_eval(self.params.fseed, data, validation, self.n)


def phase_rushing_attack(w, n, positions, params):
    """
    Rushing attack on PhaseAsyncLead.

    Parameters
    ----------
    w: int
        Target leader.
    n: int
    positions: Iterable[int]
        Adversary ids.
    params: PhaseParams

    Returns
    -------
    strategies: Dict[int, Callable]

    Raises
    ------
    PreconditionError
        If some segment has length k - 3 or more, or an adversary's own
        segment secrets reach it only after it must replay them.

    Notes
    -----
    Each adversary sends n - l_a data values before replaying its segment
    and may leave up to ``MAX_SEARCHED`` of the last of them open. The plan
    depends only on n, the coalition and l, and is cached.
    """
    params.validate(n)
    plan = rushing_plan(n, tuple(sorted(set(positions))), params.l)
    return {
        a: functools.partial(PhaseRushingAdversary, a, n, w, plan, params) for a in plan.layout.coalition
    }
