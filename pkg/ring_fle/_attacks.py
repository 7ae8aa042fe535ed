import functools
import logging
import math

from ._ring import Processor, segments
from ._utils import PreconditionError

__all__ = (
    "BasicSingleAdversary",
    "CubicAdversary",
    "NaiveAdversary",
    "RandomizedAdversary",
    "ScriptedAdversary",
    "basic_single_attack",
    "bernoulli_positions",
    "cubic_attack",
    "cubic_distances",
    "cubic_positions",
    "default_bernoulli_p",
    "equal_positions",
    "naive_attack",
    "randomized_attack",
)
logger = logging.getLogger(__name__)


class ScriptedAdversary(Processor):
    """
    Adversary whose t-th outgoing value is a function of what it has received.

    Subclasses implement :meth:`planned`, returning the value of outgoing
    position t (1-based) or None while it cannot be computed yet. Values are
    emitted greedily, in order. After ``quota`` sends the adversary
    terminates with the sum of its first n outgoing values mod n, which is
    what its honest successors compute.

    Parameters
    ----------
    pid: int
    n: int
    target: int
        The leader w the coalition forces.
    """

    quota = None

    def __init__(self, pid, n, target, secret=None):
        super().__init__(pid, n)
        self.target = target
        self.incoming = []
        self.outgoing = []
        if self.quota is None:
            self.quota = n

    def planned(self, t):
        raise NotImplementedError

    def observe(self):
        "Hook run after each receipt, before pumping."
        pass

    def on_wake(self):
        self.pump()

    def on_receive(self, message):
        self.incoming.append(message.value % self.n)
        self.observe()
        self.pump()

    def pump(self):
        while len(self.outgoing) < self.quota:
            value = self.planned(len(self.outgoing) + 1)
            if value is None:
                break
            value %= self.n
            self.outgoing.append(value)
            self.send(value)
        if len(self.outgoing) >= self.quota:
            self.terminate(self.final_output())

    def final_output(self):
        return sum(self.outgoing[: self.n]) % self.n

    def piped(self, t):
        "Incoming value t, once it has arrived."
        return self.incoming[t - 1] if t <= len(self.incoming) else None


class BasicSingleAdversary(ScriptedAdversary):
    """
    Lone adversary against Basic-LEAD.

    It withholds its secret, collects the n - 1 honest secrets, sends their
    complement to the target and then forwards what it received.
    """

    wakes = True

    def planned(self, t):
        if len(self.incoming) < self.n - 1:
            return None
        if t == 1:
            return self.target - sum(self.incoming[: self.n - 1])
        return self.incoming[t - 2]


def basic_single_attack(w, n, pid=0):
    "Strategy of a single adversary at ``pid`` forcing leader ``w`` in Basic-LEAD."
    return functools.partial(BasicSingleAdversary, pid, n, w)


class NaiveAdversary(ScriptedAdversary):
    """
    Adversary of the naive attack on A-LEAD.

    Pipes its first n - k receipts, which are the honest secrets, then sends
    a correcting message, k - l - 1 zeros and finally the l secrets of its
    own segment, in the order they arrived.
    """

    def __init__(self, pid, n, target, k, l, secret=None):
        super().__init__(pid, n, target, secret)
        self.k = k
        self.l = l

    def planned(self, t):
        n, k, l = self.n, self.k, self.l
        learned = n - k
        if t <= learned:
            return self.piped(t)
        if len(self.incoming) < learned:
            return None
        if t == learned + 1:
            tail = self.incoming[learned - l: learned]
            return self.target - sum(self.incoming[:learned]) - sum(tail)
        if t <= n - l:
            return 0
        return self.incoming[learned - l + (t - (n - l)) - 1]


def naive_attack(positions, w, n):
    """
    Coalition strategies of the naive attack against A-LEAD.

    Parameters
    ----------
    positions: Iterable[int]
        Adversary ids.
    w: int
        Target leader.
    n: int

    Returns
    -------
    strategies: Dict[int, Callable]

    Raises
    ------
    PreconditionError
        If some honest segment is longer than k - 1.
    """
    runs = segments(positions, n)
    k = len(runs)
    too_long = {a: len(run) for a, run in runs.items() if len(run) > k - 1}
    if too_long:
        raise PreconditionError(
            f"The naive attack needs every honest segment to have length at most "
            f"k - 1 = {k - 1}; segments after {too_long} are longer."
        )
    return {a: functools.partial(NaiveAdversary, a, n, w, k, len(run)) for a, run in runs.items()}


def cubic_distances(k, n):
    """
    Distance schedule l_1, ..., l_k of the cubic attack.

    The canonical schedule is l_i = (k + 1 - i)(k - 1). For other n the
    largest entry (earliest on ties) is lowered until the distances sum to
    n - k, which keeps l_k <= k - 1 and l_i <= l_(i+1) + k - 1.

    Parameters
    ----------
    k: int
        Coalition size.
    n: int
        Ring size.

    Returns
    -------
    distances: List[int]

    Raises
    ------
    PreconditionError
        If no schedule exists, i.e. k is too small for n.
    """
    honest = n - k
    capacity = (k - 1) * k * (k + 1) // 2
    if k < 2 or honest < 0 or honest > capacity:
        raise PreconditionError(
            f"No cubic schedule places {k} adversaries on a ring of {n}: it needs "
            f"n - k <= (k-1)k(k+1)/2, which holds once k >= 2 * cbrt(n) "
            f"(here 2 * cbrt(n) = {2 * n ** (1 / 3):.2f})."
        )
    distances = [(k + 1 - i) * (k - 1) for i in range(1, k + 1)]
    excess = capacity - honest
    while excess:
        index = distances.index(max(distances))
        distances[index] -= 1
        excess -= 1
    _check_cubic(distances, k)
    return distances


def _check_cubic(distances, k):
    if len(distances) != k:
        raise PreconditionError(f"Expected {k} distances, got {len(distances)}.")
    if any(d < 0 for d in distances) or distances[-1] > k - 1:
        raise PreconditionError(f"Schedule {distances} violates l_k <= k - 1.")
    for i in range(k - 1):
        if distances[i] > distances[i + 1] + k - 1:
            raise PreconditionError(f"Schedule {distances} violates l_i <= l_(i+1) + k - 1 at i={i + 1}.")


def cubic_positions(distances, n, first=0):
    "Adversary ids a_1 = first and a_(i+1) = a_i + l_i + 1."
    positions = [first % n]
    for distance in distances[:-1]:
        positions.append((positions[-1] + distance + 1) % n)
    return positions


class CubicAdversary(ScriptedAdversary):
    """
    Adversary of the cubic attack on A-LEAD.

    Transfers n - k - l receipts, sends k - 1 zeros, absorbs l more receipts,
    then sends the correcting message and replays the l secrets of its own
    segment.
    """

    def __init__(self, pid, n, target, k, l, secret=None):
        super().__init__(pid, n, target, secret)
        self.k = k
        self.l = l

    def planned(self, t):
        n, k, l = self.n, self.k, self.l
        transfer = n - k - l
        if t <= transfer:
            return self.piped(t)
        if t < n - l:
            return 0
        if len(self.incoming) < n - k:
            return None
        if t == n - l:
            return self.target - sum(self.incoming[: n - k])
        return self.incoming[t - k - 1]


def cubic_attack(k, distances, w, *, first=0):
    """
    Coalition strategies of the cubic attack against A-LEAD.

    Parameters
    ----------
    k: int
    distances: Sequence[int]
        Schedule from :func:`cubic_distances`.
    w: int
        Target leader.
    first: int, optional
        Id of a_1. 0 by default.

    Returns
    -------
    strategies: Dict[int, Callable]
    """
    distances = list(distances)
    _check_cubic(distances, k)
    n = k + sum(distances)
    positions = cubic_positions(distances, n, first)
    return {
        a: functools.partial(CubicAdversary, a, n, w, k, l) for a, l in zip(positions, distances)
    }


def default_bernoulli_p(n):
    "Adversary probability sqrt(8 ln n / n) of the randomized model."
    return math.sqrt(8 * math.log(n) / n)


class RandomizedAdversary(ScriptedAdversary):
    """
    Location-oblivious adversary against A-LEAD.

    Forwards until the first T > C whose last C receipts repeat the first C,
    estimates k' = n - T + C, then sends a correcting message and replays
    receipts n - 2k' + C + 2 through n - k'. Without a usable estimate it
    keeps piping and the trial scores as a failure.
    """

    def __init__(self, pid, n, target, c, secret=None):
        super().__init__(pid, n, target, secret)
        self.c = c
        self.cycle = None
        self.hopeless = False

    def observe(self):
        if self.cycle is not None or self.hopeless:
            return
        c, seen = self.c, len(self.incoming)
        if seen > c and self.incoming[:c] == self.incoming[seen - c:]:
            self.cycle = seen
            estimate = self.n - seen + c
            if estimate - c - 1 < 0 or self.n - 2 * estimate + c + 2 < 1:
                logger.info("Adversary %d estimated k'=%d; attack abandoned.", self.pid, estimate)
                self.hopeless = True
                self.cycle = None

    def planned(self, t):
        T = self.cycle
        if T is None or t <= T:
            return self.piped(t)
        k_est = self.n - T + self.c
        start = self.n - 2 * k_est + self.c + 2
        stop = self.n - k_est
        if t == T + 1:
            return self.target - sum(self.incoming[:T]) - sum(self.incoming[start - 1: stop])
        return self.incoming[start - 1 + (t - T - 2)]


def randomized_attack(c, w, n, positions):
    """
    Coalition strategies of the randomized-location attack.

    Each adversary runs the same strategy: it never uses the coalition size
    or its distance to the next adversary.

    Parameters
    ----------
    c: int
        Length C of the repeat used to detect the cycle.
    w: int
    n: int
    positions: Iterable[int]

    Returns
    -------
    strategies: Dict[int, Callable]
    """
    if c < 1:
        raise PreconditionError(f"C must be at least 1, got {c}.")
    return {a: functools.partial(RandomizedAdversary, a, n, w, c) for a in positions}


def equal_positions(n, k):
    "k adversaries at round(i n / k)."
    positions = sorted({round(i * n / k) % n for i in range(k)})
    if len(positions) != k:
        raise PreconditionError(f"Cannot space {k} adversaries on a ring of {n}.")
    return positions


def bernoulli_positions(n, p, rng):
    "Every processor is an adversary independently with probability p."
    return [int(i) for i in (rng.random(n) < p).nonzero()[0]]
