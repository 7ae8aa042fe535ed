import functools
import hashlib
import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._ring import ABORT, DATA, VALIDATION, Processor
from ._utils import ConfigError

__all__ = (
    "ORIGIN",
    "NORMAL",
    "ALeadProcessor",
    "BasicLeadProcessor",
    "PhaseParams",
    "PhaseProcessor",
    "SecretInput",
    "SumVariantProcessor",
    "alead_strategy",
    "basic_lead_strategy",
    "draw_inputs",
    "f_eval",
    "honest_strategies",
    "phase_async_strategy",
    "phase_params",
    "sum_variant_strategy",
)
logger = logging.getLogger(__name__)

ORIGIN = "origin"
NORMAL = "normal"
_F_PERSON = b"ring-fle/f"


@dataclass(frozen=True)
class SecretInput:
    "Secrets drawn by one processor: data value d, and validation value v."

    d: int
    v: Optional[int] = None


@dataclass(frozen=True)
class PhaseParams:
    """
    Parameters of the PhaseAsyncLead protocols.

    Parameters
    ----------
    l: int
        Validation values of the last ``l`` rounds are left out of f.
    m: int
        Size of the validation alphabet.
    fseed: int
        64-bit key selecting the function f.
    """

    l: int
    m: int
    fseed: int = 0

    def validate(self, n):
        if not 1 <= self.l < n:
            raise ConfigError(f"Need 1 <= l < n, got l={self.l} for n={n}.")
        if self.m < 2:
            raise ConfigError(f"Validation alphabet m must be at least 2, got {self.m}.")
        if not 0 <= self.fseed < 2 ** 64:
            raise ConfigError("fseed must be a 64-bit unsigned integer.")
        return self

    @classmethod
    def default(cls, n, fseed=0):
        """
        Asymptotic defaults: l = ceil(10 sqrt(n)) and m = 2 n^2.

        For n below 100 the formula gives l >= n; l is then clamped to n - 1.
        """
        l = math.ceil(10 * math.sqrt(n))
        if l >= n:
            logger.info("Default l=%d does not fit a ring of %d; using l=%d.", l, n, n - 1)
            l = n - 1
        return cls(l=l, m=2 * n * n, fseed=fseed)


def draw_inputs(n, rng, m=None):
    """
    Draw a uniform secret for every processor.

    Parameters
    ----------
    n: int
    rng: numpy.random.Generator
    m: int, optional
        Validation alphabet size. If None, no validation values are drawn.

    Returns
    -------
    inputs: List[SecretInput]
    """
    d = rng.integers(0, n, size=n).tolist()
    if m is None:
        return [SecretInput(value) for value in d]
    v = rng.integers(0, m, size=n).tolist()
    return [SecretInput(dd, vv) for dd, vv in zip(d, v)]


def f_eval(fseed, d, v, n, l=None):
    """
    The keyed random function f: [n]^n x [m]^(n-l) -> [n].

    f is BLAKE2b keyed with ``fseed`` (8 bytes, little endian) over the
    little-endian uint64 encoding of ``[n, len(v), *d, *v]``. The 128-bit
    digest, read as a little-endian integer, is reduced mod n.

    Parameters
    ----------
    fseed: int
    d: Sequence[int]
        Exactly n data values.
    v: Sequence[int]
        The first n - l validation values.
    n: int
    l: int, optional
        If given, ``len(v)`` must equal ``n - l``.

    Returns
    -------
    leader: int
    """
    if len(d) != n:
        raise ValueError(f"f takes {n} data values, got {len(d)}.")
    if l is not None and len(v) != n - l:
        raise ValueError(f"f takes {n - l} validation values, got {len(v)}.")
    if not 1 <= len(v) < n:
        raise ValueError(f"f takes between 1 and {n - 1} validation values, got {len(v)}.")
    words = np.asarray([n, len(v), *d, *v], dtype="<u8")
    digest = hashlib.blake2b(
        words.tobytes(),
        digest_size=16,
        key=int(fseed).to_bytes(8, "little"),
        person=_F_PERSON,
    ).digest()
    return int.from_bytes(digest, "little") % n


class BasicLeadProcessor(Processor):
    "Basic-LEAD: everybody wakes, sends its secret and forwards."

    wakes = True

    def __init__(self, pid, n, secret):
        super().__init__(pid, n)
        self.d = secret.d
        self.received = 0
        self.total = 0

    def on_wake(self):
        self.send(self.d)

    def on_receive(self, message):
        value = message.value % self.n
        self.received += 1
        self.total += value
        if self.received < self.n:
            self.send(value)
        else:
            self.terminate(self.total % self.n if value == self.d else ABORT)


class ALeadProcessor(Processor):
    """
    A-LEAD on a unidirectional ring.

    A normal processor delays every incoming value by one message, starting
    with its own secret. The origin sends its secret when it wakes and
    forwards immediately. After n receipts each processor checks that the
    last value is its own secret and outputs the sum of what it received.
    """

    def __init__(self, pid, n, secret, role=NORMAL):
        super().__init__(pid, n)
        self.d = secret.d
        self.role = role
        self.wakes = role == ORIGIN
        self.buffer = self.d
        self.received = 0
        self.total = 0

    def on_wake(self):
        self.send(self.d)

    def on_receive(self, message):
        value = message.value % self.n
        self.received += 1
        self.total += value
        if self.role == ORIGIN:
            if self.received < self.n:
                self.send(value)
        else:
            self.send(self.buffer)
            self.buffer = value
        if self.received == self.n:
            self.terminate(self.total % self.n if value == self.d else ABORT)


class PhaseProcessor(Processor):
    """
    PhaseAsyncLead.

    Odd receipts are data messages, even receipts validation messages.
    Processor r - 1 validates round r: it sends its own validation value
    and later checks it comes back unchanged. Every other processor forwards
    validation messages immediately. Data is delayed one round, as in A-LEAD.
    The origin is processor 0 and validates round 1.

    The j-th data message received by processor i carries the secret of
    processor (i - j) mod n.
    """

    def __init__(self, pid, n, secret, params, role=NORMAL):
        super().__init__(pid, n)
        self.params = params
        self.role = role
        self.wakes = role == ORIGIN
        self.d = secret.d
        self.v = secret.v
        self.dvec = [None] * n
        self.vvec = [None] * n
        self.dvec[pid] = self.d
        self.vvec[pid] = self.v
        self.buffer = self.d
        self.received = 0
        self.round = 0

    def on_wake(self):
        self.send(self.d, DATA)
        self.send(self.v, VALIDATION)

    def on_receive(self, message):
        self.received += 1
        expected = DATA if self.received % 2 else VALIDATION
        if message.tag != expected:
            logger.debug("Processor %d got %s at receipt %d.", self.pid, message.tag, self.received)
            self.terminate(ABORT)
        elif expected == DATA:
            self.on_data(message.value % self.n)
        else:
            self.on_validation(message.value % self.params.m)

    def on_data(self, value):
        self.round += 1
        j = self.round
        if self.role == ORIGIN:
            self.buffer = value
        else:
            self.send(self.buffer, DATA)
            self.buffer = value
            if j == self.pid + 1:
                self.send(self.v, VALIDATION)
        if j == self.n:
            if value != self.d:
                self.terminate(ABORT)
        else:
            self.dvec[(self.pid - j) % self.n] = value

    def on_validation(self, value):
        j = self.round
        validator = j - 1
        if validator == self.pid:
            if value != self.v:
                self.terminate(ABORT)
                return
        else:
            self.vvec[validator] = value
            self.send(value, VALIDATION)
        if self.role == ORIGIN and j < self.n:
            self.send(self.buffer, DATA)
        if j == self.n:
            self.terminate(self.output_rule())

    def output_rule(self):
        cutoff = self.n - self.params.l
        return f_eval(self.params.fseed, self.dvec, self.vvec[:cutoff], self.n)


class SumVariantProcessor(PhaseProcessor):
    "PhaseAsyncLead with f replaced by the sum of the data values mod n."

    def output_rule(self):
        return sum(self.dvec) % self.n


def _build(cls, pid, n, args, secret):
    return cls(pid, n, secret, *args)


def basic_lead_strategy(pid, n):
    if n < 2:
        raise ConfigError(f"Ring size must be at least 2, not {n}.")
    return functools.partial(_build, BasicLeadProcessor, pid, n, ())


def alead_strategy(pid, n, role=NORMAL):
    if role not in (ORIGIN, NORMAL):
        raise ConfigError(f"Unknown role {role!r}.")
    return functools.partial(_build, ALeadProcessor, pid, n, (role,))


def phase_async_strategy(pid, n, params, role=NORMAL):
    params.validate(n)
    if (role == ORIGIN) != (pid == 0):
        raise ConfigError("PhaseAsyncLead runs with processor 0 as its origin.")
    return functools.partial(_build, PhaseProcessor, pid, n, (params, role))


def sum_variant_strategy(pid, n, role=NORMAL, params=None):
    if params is None:
        params = PhaseParams(l=1, m=2 * n * n)
    params.validate(n)
    if (role == ORIGIN) != (pid == 0):
        raise ConfigError("PhaseAsyncLead runs with processor 0 as its origin.")
    return functools.partial(_build, SumVariantProcessor, pid, n, (params, role))


def phase_params(config):
    "Protocol parameters of a phase config, filled with defaults if absent."
    if config.params is None:
        return PhaseParams.default(config.n).validate(config.n)
    return config.params.validate(config.n)


def honest_strategies(config):
    """
    Honest strategy of every processor of a ring.

    Parameters
    ----------
    config: RingConfig

    Returns
    -------
    strategies: List[Callable]
    """
    n = config.n
    if config.protocol == "basic":
        return [basic_lead_strategy(p, n) for p in range(n)]
    if config.protocol == "alead":
        return [
            alead_strategy(p, n, ORIGIN if p == config.origin else NORMAL) for p in range(n)
        ]
    if config.origin != 0:
        raise ConfigError("PhaseAsyncLead runs with processor 0 as its origin.")
    params = phase_params(config)
    roles = [ORIGIN] + [NORMAL] * (n - 1)
    if config.protocol == "phase":
        return [phase_async_strategy(p, n, params, roles[p]) for p in range(n)]
    return [sum_variant_strategy(p, n, roles[p], params) for p in range(n)]
