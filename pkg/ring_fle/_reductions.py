"""
Adapters between fair leader election, coin toss and bit consensus.

Each reduction accepts either an exact :class:`OutcomeDistribution`, in
which case it returns the exact transformed distribution, or a runner, in
which case it returns a composed runner. Runners are callables
``runner(rng)`` returning an outcome (an int, or ``FAIL``) with an
attribute ``n``.
"""
import collections
import collections.abc
import functools
import itertools
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Dict

from ._utils import PreconditionError

__all__ = (
    "FAIL",
    "ConsensusStub",
    "DistributionRunner",
    "ElectionRunner",
    "OutcomeDistribution",
    "UtilityFunction",
    "biased_bit_consensus",
    "biased_fle",
    "bit_consensus_coin_bound",
    "coin_from_bit_consensus",
    "coin_from_fle",
    "coins_leader_bound",
    "expected_utility",
    "fle_coin_bias_bound",
    "fle_from_coins",
    "majority_free_consensus",
)
logger = logging.getLogger(__name__)

FAIL = "FAIL"
_TOLERANCE = 1e-9


def _is_exact(value):
    return isinstance(value, (int, Fraction))


@dataclass(frozen=True)
class OutcomeDistribution:
    """
    Distribution over the outcomes ``0, ..., n - 1`` and ``FAIL``.

    Probabilities may be floats or :class:`fractions.Fraction`. Exact
    distributions must sum to exactly 1, empirical ones to within 1e-9.

    Parameters
    ----------
    support: Dict
        Maps an outcome to its probability. Missing outcomes have
        probability 0.
    n: int
        Number of non-failing outcomes.
    """

    support: Dict[Any, Any]
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"A distribution needs at least one outcome, not n={self.n}.")
        for outcome, probability in self.support.items():
            if outcome != FAIL and outcome not in range(self.n):
                raise ValueError(f"Outcome {outcome!r} is outside [0, {self.n}).")
            if probability < 0:
                raise ValueError(f"Negative probability {probability} for outcome {outcome!r}.")
        total = sum(self.support.values())
        if all(_is_exact(p) for p in self.support.values()):
            if total != 1:
                raise ValueError(f"Probabilities sum to {total}, not 1.")
        elif abs(total - 1) > _TOLERANCE:
            raise ValueError(f"Probabilities sum to {total}, not 1.")

    @classmethod
    def uniform(cls, n, exact=True):
        p = Fraction(1, n) if exact else 1 / n
        return cls({j: p for j in range(n)}, n)

    @classmethod
    def point(cls, outcome, n):
        return cls({outcome: Fraction(1)}, n)

    @classmethod
    def from_histogram(cls, histogram, n, fails=0):
        """
        Empirical distribution of observed outcomes.

        ``histogram`` is a sequence of counts for outcomes ``0..n-1``.
        """
        total = sum(histogram) + fails
        if total == 0:
            raise ValueError("Cannot build a distribution from zero observations.")
        support = {j: Fraction(c, total) for j, c in enumerate(histogram) if c}
        if fails:
            support[FAIL] = Fraction(fails, total)
        return cls(support, n)

    def prob(self, outcome):
        return self.support.get(outcome, 0)

    @property
    def fail_probability(self):
        return self.prob(FAIL)

    def bias(self):
        "max_j Pr(j) - 1/n."
        one = Fraction(1) if all(_is_exact(p) for p in self.support.values()) else 1.0
        return max(self.prob(j) for j in range(self.n)) - one / self.n

    def dominates(self, other):
        "Whether every outcome is at least as likely here as in ``other``."
        return all(self.prob(j) >= other.prob(j) for j in range(self.n))


def biased_fle(n, eps):
    """
    Synthetic election favouring even ids: 1/n + eps for even j, 1/n - eps for odd j.

    Its bias is eps and the parity of its leader has bias exactly n eps / 2.

    Raises
    ------
    PreconditionError
        If n is odd or eps is outside [0, 1/n].
    """
    _even(n)
    exact = _is_exact(eps)
    base = Fraction(1, n) if exact else 1 / n
    if not 0 <= eps <= base:
        raise PreconditionError(f"Bias {eps} is outside [0, 1/{n}].")
    return OutcomeDistribution({j: base + eps if j % 2 == 0 else base - eps for j in range(n)}, n)


class UtilityFunction:
    """
    Rational utility over outcomes, with u(FAIL) = 0.

    Parameters
    ----------
    values: Dict or Callable
        Utility of each outcome, in [0, 1]. Outcomes missing from a mapping
        have utility 0.
    """

    def __init__(self, values):
        if isinstance(values, collections.abc.Mapping):
            if values.get(FAIL, 0) != 0:
                raise ValueError("A rational utility assigns 0 to FAIL.")
            values = dict(values)
            self._u = lambda outcome: values.get(outcome, 0)
        else:
            self._u = values

    @classmethod
    def indicator(cls, target):
        return cls({target: 1})

    def __call__(self, outcome):
        if outcome == FAIL:
            return 0
        value = self._u(outcome)
        if not 0 <= value <= 1:
            raise ValueError(f"Utility {value} of outcome {outcome!r} is outside [0, 1].")
        return value


def expected_utility(dist, u):
    "Sum over outcomes j of Pr(j) u(j); FAIL contributes 0."
    return sum(p * u(j) for j, p in dist.support.items() if j != FAIL)


class DistributionRunner:
    "Runner sampling outcomes from an :class:`OutcomeDistribution`."

    def __init__(self, dist):
        self.dist = dist
        self.n = dist.n
        self._outcomes = list(dist.support)
        self._weights = [float(p) for p in dist.support.values()]

    def __call__(self, rng):
        return self._outcomes[int(rng.choice(len(self._outcomes), p=self._weights))]


class ElectionRunner:
    """
    Runner playing one simulated election per call.

    Parameters
    ----------
    config: RingConfig
    attack: AttackSpec, optional
    """

    def __init__(self, config, attack=None):
        from ._harness import play_trial

        self._play = play_trial
        self.config = config
        self.attack = attack
        self.n = config.n

    def __call__(self, rng):
        outcome, _ = self._play(self.config, self.attack, rng, record=False)
        return outcome.leader if outcome.elected else FAIL


class _Composed:
    def __init__(self, n, step):
        self.n = n
        self._step = step

    def __call__(self, rng):
        return self._step(rng)


@functools.singledispatch
def coin_from_fle(fle, n=None):
    """
    Coin toss from leader election: output the parity of the leader's id.

    If the election's bias is eps, the coin's bias is at most n eps / 2.

    Parameters
    ----------
    fle: OutcomeDistribution or runner
    n: int, optional
        Ring size. Taken from ``fle.n`` if omitted.

    Returns
    -------
    coin: OutcomeDistribution or runner
        Over outcomes {0, 1}.

    Raises
    ------
    PreconditionError
        If n is odd.
    """
    n = _even(n if n is not None else fle.n)

    def step(rng):
        leader = fle(rng)
        return FAIL if leader == FAIL else leader % 2

    return _Composed(n, step)


@coin_from_fle.register(OutcomeDistribution)
def _(fle, n=None):
    _even(fle.n)
    support = collections.defaultdict(int)
    for outcome, p in fle.support.items():
        support[FAIL if outcome == FAIL else outcome % 2] += p
    return OutcomeDistribution(dict(support), 2)


def _even(n):
    if n % 2:
        raise PreconditionError(f"Parity of the leader is a fair coin only for even n, not n={n}.")
    return n


def _bits(n):
    if n < 1 or n & (n - 1):
        raise PreconditionError(f"Concatenating coins elects among a power of two, not n={n}.")
    return n.bit_length() - 1


@functools.singledispatch
def fle_from_coins(coin, n):
    """
    Leader election from log2(n) independent coin tosses.

    The first coin is the most significant bit of the leader's id. A failed
    toss fails the election. If each coin has bias eps, no leader is elected
    with probability above (1/2 + eps)^log2(n).

    Parameters
    ----------
    coin: OutcomeDistribution or runner
        Over outcomes {0, 1}.
    n: int
        Power of two.

    Returns
    -------
    fle: OutcomeDistribution or runner

    Raises
    ------
    PreconditionError
        If n is not a power of two.
    """
    bits = _bits(n)

    def step(rng):
        leader = 0
        for _ in range(bits):
            bit = coin(rng)
            if bit == FAIL:
                return FAIL
            leader = 2 * leader + bit
        return leader

    return _Composed(n, step)


@fle_from_coins.register(OutcomeDistribution)
def _(coin, n):
    bits = _bits(n)
    support = {}
    for word in itertools.product((0, 1), repeat=bits):
        p = 1
        for bit in word:
            p *= coin.prob(bit)
        if p:
            support[int("".join(map(str, word)) or "0", 2)] = p
    failure = 1 - (1 - coin.fail_probability) ** bits
    if failure:
        support[FAIL] = failure
    return OutcomeDistribution(support, n)


class ConsensusStub:
    """
    Synthetic bit consensus with a known output distribution.

    When all inputs agree the output is that bit, as validity demands.
    Otherwise the output is 0 with probability ``p_zero``.
    """

    def __init__(self, p_zero):
        self.p_zero = p_zero

    def distribution(self, inputs):
        if len(set(inputs)) == 1:
            return OutcomeDistribution.point(inputs[0], 2)
        return OutcomeDistribution({0: self.p_zero, 1: 1 - self.p_zero}, 2)

    def __call__(self, inputs, rng):
        if len(set(inputs)) == 1:
            return inputs[0]
        return 0 if rng.random() < self.p_zero else 1


def biased_bit_consensus(eps):
    "Consensus stub leaning to 0 by eps whenever inputs are mixed."
    return ConsensusStub(Fraction(1, 2) + eps if _is_exact(eps) else 0.5 + eps)


def majority_free_consensus():
    "Consensus stub drawing a fair bit whenever inputs are mixed."
    return ConsensusStub(Fraction(1, 2))


@functools.singledispatch
def coin_from_bit_consensus(consensus, n, k, coalition_bit=None):
    """
    Coin toss from fair bit consensus.

    Every processor draws a uniform input bit and the processors agree on
    one bit. If the consensus has bias eps against a coalition of k, so
    does the coin, up to an additional 2^(k - n).

    Parameters
    ----------
    consensus: callable
        ``consensus(inputs, rng)`` returns a bit or ``FAIL``.
    n: int
    k: int
        Coalition size.
    coalition_bit: int, optional
        If given, the first k processors input this bit in place of a
        uniform draw.

    Returns
    -------
    coin: runner, or OutcomeDistribution for a :class:`ConsensusStub`
    """

    def step(rng):
        inputs = rng.integers(0, 2, size=n).tolist()
        if coalition_bit is not None:
            inputs[:k] = [coalition_bit] * k
        return consensus(inputs, rng)

    return _Composed(n, step)


@coin_from_bit_consensus.register(ConsensusStub)
def _(consensus, n, k, coalition_bit=None):
    fixed = (coalition_bit,) * k if coalition_bit is not None else ()
    free = n - len(fixed)
    weight = Fraction(1, 2 ** free)
    support = collections.defaultdict(int)
    # Only agreement matters to the stub, so profiles are grouped by ones.
    for ones in range(free + 1):
        inputs = fixed + (1,) * ones + (0,) * (free - ones)
        count = math.comb(free, ones)
        for outcome, p in consensus.distribution(inputs).support.items():
            support[outcome] += weight * count * p
    return OutcomeDistribution(dict(support), 2)


def fle_coin_bias_bound(n, eps):
    "Bias bound n eps / 2 of the parity coin of an eps-biased election."
    return n * eps / 2


def coins_leader_bound(n, eps):
    "Largest probability (1/2 + eps)^log2(n) of a leader elected by coins."
    bits = _bits(n)
    half = Fraction(1, 2) if _is_exact(eps) else 0.5
    return (half + eps) ** bits


def bit_consensus_coin_bound(eps, n, k):
    "Bias bound eps + 2^(k - n) of the coin built on consensus."
    return eps + Fraction(2) ** (k - n) if _is_exact(eps) else eps + 2.0 ** (k - n)
