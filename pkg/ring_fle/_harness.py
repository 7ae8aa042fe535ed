import collections
import concurrent.futures
import csv
import dataclasses
import itertools
import json
import logging
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
import scipy.stats
import yaml
from tqdm import tqdm

from ._attacks import (
    basic_single_attack,
    bernoulli_positions,
    cubic_attack,
    cubic_distances,
    cubic_positions,
    default_bernoulli_p,
    equal_positions,
    naive_attack,
    randomized_attack,
)
from ._oracle import validate_execution
from ._phase_attacks import phase_rushing_attack, rushing_positions, sum_abuse_attack
from ._protocols import draw_inputs, honest_strategies, phase_params
from ._ring import PROTOCOLS, SCHEDULES, RingConfig, outcome_of, simulate
from ._utils import ConfigError, parse_positions, trial_rng

__all__ = (
    "ATTACKS",
    "PLACEMENTS",
    "AttackSpec",
    "TrialReport",
    "load_config",
    "play_trial",
    "run_trials",
    "sweep",
    "tv_distance",
)
logger = logging.getLogger(__name__)


# Write through tqdm to avoid overlapping with bars.
def print(*args):
    tqdm.write(" ".join(str(arg) for arg in args))


ATTACKS = ("single", "naive", "cubic", "random", "sum-abuse", "phase-rush")
PLACEMENTS = ("explicit", "equal", "cubic", "bernoulli")
_ATTACK_PROTOCOL = {
    "single": "basic",
    "naive": "alead",
    "cubic": "alead",
    "random": "alead",
    "sum-abuse": "phase-sum",
    "phase-rush": "phase",
}
_DEFAULT_PLACEMENT = {
    "single": "explicit",
    "naive": "equal",
    "cubic": "cubic",
    "random": "bernoulli",
    "sum-abuse": "equal",
    "phase-rush": "equal",
}
ERROR = "error"


@dataclass(frozen=True)
class AttackSpec:
    """
    Which coalition attacks, where it sits, and which leader it wants.

    Parameters
    ----------
    name: str
        One of ``ATTACKS``.
    target: int
        Leader w the coalition forces.
    k: int, optional
        Coalition size, for the ``equal`` and ``cubic`` placements.
    positions: Tuple[int], optional
        Explicit adversary ids. Implies the ``explicit`` placement.
    placement: str, optional
        One of ``PLACEMENTS``. Defaults depend on the attack.
    p: float, optional
        Adversary probability of the ``bernoulli`` placement.
    c: int
        Repeat length of the randomized attack.
    distances: Tuple[int], optional
        Cubic schedule. Computed from k and n if omitted.
    first: int
        Id of the first adversary of the cubic placement.
    """

    name: str
    target: int = 0
    k: Optional[int] = None
    positions: Optional[Tuple[int, ...]] = None
    placement: Optional[str] = None
    p: Optional[float] = None
    c: int = 3
    distances: Optional[Tuple[int, ...]] = None
    first: int = 0

    def __post_init__(self):
        if self.name not in ATTACKS:
            raise ConfigError(f"Unknown attack {self.name!r}. Choose from {ATTACKS}.")
        positions = parse_positions(self.positions)
        object.__setattr__(self, "positions", positions)
        if self.distances is not None:
            object.__setattr__(self, "distances", parse_positions(self.distances))
        placement = self.placement
        if placement is None:
            placement = "explicit" if positions is not None else _DEFAULT_PLACEMENT[self.name]
        if placement not in PLACEMENTS:
            raise ConfigError(f"Unknown placement {placement!r}. Choose from {PLACEMENTS}.")
        if placement == "explicit" and positions is None and self.name != "single":
            raise ConfigError(f"The {self.name} attack needs --positions for an explicit placement.")
        if placement in ("equal", "cubic") and self.k is None and self.distances is None:
            if self.name != "sum-abuse":
                raise ConfigError(f"The {placement} placement needs a coalition size --k.")
        object.__setattr__(self, "placement", placement)

    @staticmethod
    def protocol_of(name):
        "The protocol an attack targets."
        return _ATTACK_PROTOCOL[name]

    @property
    def protocol(self):
        return _ATTACK_PROTOCOL[self.name]

    def check(self, config):
        """
        Raise before any trial if this attack cannot run on ``config``.

        Attacks on fixed placements are built once, so that their
        preconditions surface here.
        """
        if config.protocol != self.protocol:
            raise ConfigError(
                f"The {self.name} attack targets the {self.protocol} protocol, not {config.protocol}."
            )
        if not 0 <= self.target < config.n:
            raise ConfigError(f"Target {self.target} is not a processor of a ring of {config.n}.")
        if self.placement != "bernoulli":
            coalition = self.coalition(config, None)
            self.strategies(_trial_config(config, coalition), coalition)
        elif self.p is not None and not 0 <= self.p <= 1:
            raise ConfigError(f"Adversary probability {self.p} is outside [0, 1].")

    def coalition(self, config, rng):
        "Adversary ids; drawn from ``rng`` for the bernoulli placement."
        n = config.n
        if self.placement == "explicit":
            return tuple(self.positions) if self.positions is not None else (0,)
        if self.placement == "equal":
            k = self.k if self.k is not None else 4
            if self.name == "phase-rush":
                return tuple(rushing_positions(n, k, phase_params(config)))
            return tuple(equal_positions(n, k))
        if self.placement == "cubic":
            distances = self.distances or cubic_distances(self.k, n)
            if len(distances) + sum(distances) != n:
                raise ConfigError(f"Cubic schedule {list(distances)} does not fill a ring of {n}.")
            return tuple(sorted(cubic_positions(distances, n, self.first)))
        p = self.p if self.p is not None else default_bernoulli_p(n)
        return tuple(bernoulli_positions(n, p, rng))

    def strategies(self, config, coalition):
        "Map each adversary id to its strategy."
        n, w = config.n, self.target
        if self.name == "single":
            if len(coalition) != 1:
                raise ConfigError(f"The single attack uses one adversary, got {len(coalition)}.")
            return {coalition[0]: basic_single_attack(w, n, coalition[0])}
        if self.name == "naive":
            return naive_attack(coalition, w, n)
        if self.name == "cubic":
            first = self.first if self.placement == "cubic" else coalition[0]
            ordered = sorted(coalition, key=lambda a: (a - first) % n)
            runs = config.segments()
            distances = [len(runs[a]) for a in ordered]
            return cubic_attack(len(ordered), distances, w, first=first)
        if self.name == "random":
            return randomized_attack(self.c, w, n, coalition)
        if self.name == "sum-abuse":
            return sum_abuse_attack(w, n, coalition)
        return phase_rushing_attack(w, n, coalition, phase_params(config))

    def to_dict(self):
        return {
            key: list(value) if isinstance(value, tuple) else value
            for key, value in dataclasses.asdict(self).items()
        }


def _trial_config(config, coalition):
    "The config one trial runs: the coalition in place and an honest A-LEAD origin."
    origin = config.origin
    if config.protocol in ("basic", "alead") and origin in coalition:
        honest = [p for p in range(config.n) if p not in coalition]
        if honest:
            logger.debug("Origin %d is an adversary; moving it to %d.", origin, honest[0])
            origin = honest[0]
    return dataclasses.replace(config, coalition=tuple(coalition), origin=origin)


def play_trial(config, attack, rng, *, record=True):
    """
    Play one election with inputs, placement and schedule drawn from ``rng``.

    Parameters
    ----------
    config: RingConfig
    attack: AttackSpec or None
    rng: numpy.random.Generator
    record: Bool, optional

    Returns
    -------
    outcome: Outcome
    transcript: Transcript
        Its events are empty unless ``record``.
    """
    coalition = attack.coalition(config, rng) if attack is not None else config.coalition
    trial = _trial_config(config, coalition)
    if trial.schedule == "random":
        trial = dataclasses.replace(trial, seed=int(rng.integers(0, 2 ** 63)))
    strategies = honest_strategies(trial)
    if attack is not None:
        for a, strategy in attack.strategies(trial, coalition).items():
            strategies[a] = strategy
    m = phase_params(trial).m if trial.protocol in ("phase", "phase-sum") else None
    inputs = draw_inputs(trial.n, rng, m)
    transcript, outcome = simulate(trial, strategies, inputs, record=record)
    return outcome, transcript


def _oracle_agrees(transcript, outcome):
    """
    Whether the validity oracle predicts what the honest processors output.

    The verdict must match both the honest outputs in the transcript and
    the outcome the trial reported.
    """
    trial = transcript.config
    verdict = validate_execution(transcript, trial.coalition, trial.n)
    honest = outcome_of([transcript.outputs[h] for h in trial.honest], trial.n)
    if verdict.valid:
        return all(o.elected and o.leader == verdict.leader for o in (outcome, honest))
    return not (outcome.elected or honest.elected)


def _run_indices(config, attack, master_seed, indices, oracle, strict):
    results = []
    for index in indices:
        try:
            outcome, transcript = play_trial(config, attack, trial_rng(master_seed, index), record=oracle)
            agrees = _oracle_agrees(transcript, outcome) if oracle else None
            results.append((index, outcome.label, agrees))
        except Exception:
            logger.exception("Error while running trial %d", index)
            if strict:
                raise
            results.append((index, ERROR, None))
    return results


@dataclass
class TrialReport:
    """
    Aggregate of many trials of one configuration.

    ``histogram[j]`` counts trials electing j, and ``failures`` counts the
    others by reason (abort, disagreement, nontermination, or error for a
    trial that raised). Together they sum to ``trials``.
    """

    config: Dict
    trials: int
    master_seed: int
    histogram: List[int]
    failures: Dict[str, int] = field(default_factory=dict)
    target: Optional[int] = None
    oracle_agreement: Optional[float] = None
    wall_time: float = 0.0

    def __post_init__(self):
        if sum(self.histogram) + sum(self.failures.values()) != self.trials:
            raise ValueError("Histogram and failures do not add up to the number of trials.")

    @property
    def n(self):
        return len(self.histogram)

    @property
    def errors(self):
        return self.failures.get(ERROR, 0)

    @property
    def epsilon_hat(self):
        "Empirical bias max_j Pr(j) - 1/n."
        return max(self.histogram) / self.trials - 1 / self.n

    @property
    def fail_rate(self):
        return {reason: count / self.trials for reason, count in sorted(self.failures.items())}

    @property
    def tv(self):
        return tv_distance(self.histogram, self.n) if sum(self.histogram) else None

    @property
    def chi2_pvalue(self):
        if sum(self.histogram) == 0 or self.n < 2:
            return None
        return float(scipy.stats.chisquare(self.histogram).pvalue)

    @property
    def target_rate(self):
        return None if self.target is None else self.histogram[self.target] / self.trials

    def to_dict(self):
        return {
            "config": self.config,
            "trials": self.trials,
            "master_seed": self.master_seed,
            "histogram": list(self.histogram),
            "failures": dict(sorted(self.failures.items())),
            "fail_rate": self.fail_rate,
            "epsilon_hat": self.epsilon_hat,
            "tv_distance": self.tv,
            "chi2_pvalue": self.chi2_pvalue,
            "target": self.target,
            "target_rate": self.target_rate,
            "oracle_agreement": self.oracle_agreement,
            "wall_time": self.wall_time,
        }

    def to_json(self, file=None):
        text = json.dumps(self.to_dict(), sort_keys=True, indent=2)
        if file is not None:
            file.write(text + "\n")
        return text

    def write_csv(self, file):
        "One row per outcome: the elected ids, then each failure reason."
        writer = csv.DictWriter(file, fieldnames=["outcome", "count", "frequency"])
        writer.writeheader()
        for j, count in enumerate(self.histogram):
            writer.writerow({"outcome": j, "count": count, "frequency": count / self.trials})
        for reason, count in sorted(self.failures.items()):
            writer.writerow({"outcome": reason, "count": count, "frequency": count / self.trials})

    def format_table(self):
        rows = [
            ("protocol", self.config.get("protocol")),
            ("n", self.n),
            ("attack", (self.config.get("attack") or {}).get("name", "none")),
            ("trials", self.trials),
            ("seed", self.master_seed),
            ("epsilon_hat", f"{self.epsilon_hat:.6f}"),
            ("tv_distance", "n/a" if self.tv is None else f"{self.tv:.6f}"),
            ("chi2_pvalue", "n/a" if self.chi2_pvalue is None else f"{self.chi2_pvalue:.4g}"),
        ]
        if self.target is not None:
            rows.append(("target_rate", f"{self.target_rate:.6f}"))
        for reason, rate in self.fail_rate.items():
            rows.append((f"fail:{reason}", f"{rate:.6f}"))
        if self.oracle_agreement is not None:
            rows.append(("oracle_agreement", f"{self.oracle_agreement:.6f}"))
        rows.append(("wall_time", f"{self.wall_time:.3f}s"))
        width = max(len(name) for name, _ in rows)
        lines = [f"{name:<{width}}  {value}" for name, value in rows]
        lines.append("histogram:")
        lines.extend(f"  {j:>4}  {count}" for j, count in enumerate(self.histogram) if count)
        return "\n".join(lines)


def _config_dict(config, attack):
    params = None
    if config.protocol in ("phase", "phase-sum"):
        params = dataclasses.asdict(phase_params(config))
    return {
        "n": config.n,
        "protocol": config.protocol,
        "schedule": config.schedule,
        "origin": config.origin,
        "coalition": list(config.coalition),
        "params": params,
        "attack": attack.to_dict() if attack is not None else None,
    }


def run_trials(
    config,
    attack=None,
    trials=1,
    master_seed=0,
    *,
    oracle=False,
    workers=1,
    progress=False,
    strict=False,
):
    """
    Run independent trials of one configuration and aggregate them.

    Parameters
    ----------
    config: RingConfig
    attack: AttackSpec, optional
        If None, everybody is honest.
    trials: int
    master_seed: int
        Trial i draws everything from ``(master_seed, i)``.
    oracle: Bool, optional
        Cross-check every trial against the validity oracle. A-LEAD family
        only.
    workers: int, optional
        Number of worker processes. 1 (the default) runs in this process.
    progress: Bool, optional
        Show a progress bar.
    strict: Bool, optional
        By default, trials that raise are logged and counted as errors.
        Set to True to debug errors.

    Returns
    -------
    report: TrialReport
    """
    if trials < 1:
        raise ConfigError(f"Need at least one trial, got {trials}.")
    if workers < 1:
        raise ConfigError(f"Need at least one worker, got {workers}.")
    if oracle and config.protocol not in ("basic", "alead"):
        raise ConfigError("The validity oracle checks Basic-LEAD and A-LEAD runs only.")
    if attack is not None:
        attack.check(config)
    elif config.protocol in ("phase", "phase-sum"):
        phase_params(config)
    start = time.monotonic()
    results = []
    chunks = [range(i, min(i + 256, trials)) for i in range(0, trials, 256)]
    with tqdm(total=trials, disable=not progress, desc="Trials") as bar:
        if workers == 1:
            for chunk in chunks:
                results.extend(_run_indices(config, attack, master_seed, chunk, oracle, strict))
                bar.update(len(chunk))
        else:
            with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as executor:
                futures = {
                    executor.submit(_run_indices, config, attack, master_seed, chunk, oracle, strict): chunk
                    for chunk in chunks
                }
                for future in concurrent.futures.as_completed(futures):
                    results.extend(future.result())
                    bar.update(len(futures[future]))
    histogram = [0] * config.n
    failures = collections.Counter()
    agreements = []
    for index, label, agrees in sorted(results):
        if isinstance(label, str):
            failures[label] += 1
            if label == ERROR:
                print("FAILED: trial", index)
        else:
            histogram[label] += 1
        if agrees is not None:
            agreements.append(agrees)
    if failures[ERROR]:
        logger.warning("%d of %d trials raised.", failures[ERROR], trials)
    return TrialReport(
        config=_config_dict(config, attack),
        trials=trials,
        master_seed=master_seed,
        histogram=histogram,
        failures=dict(failures),
        target=attack.target if attack is not None else None,
        oracle_agreement=sum(agreements) / len(agreements) if agreements else None,
        wall_time=time.monotonic() - start,
    )


def tv_distance(hist, n):
    """
    Total variation distance between a histogram and the uniform distribution.

    Parameters
    ----------
    hist: Sequence[int]
        Counts of outcomes 0, ..., n - 1. Failures are not included.
    n: int

    Returns
    -------
    distance: float
        (1/2) sum_j |hist[j] / sum(hist) - 1/n|.

    Raises
    ------
    ValueError
        If the histogram is empty.
    """
    counts = np.asarray(hist, dtype=float)
    if counts.shape != (n,):
        raise ValueError(f"Expected {n} counts, got {counts.shape[0] if counts.ndim else 0}.")
    total = counts.sum()
    if total == 0:
        raise ValueError("The histogram is empty.")
    return float(0.5 * np.abs(counts / total - 1 / n).sum())


def sweep(config, attack, grid, trials, master_seed=0, **kwargs):
    """
    Run trials over the cartesian product of parameter values.

    Parameters
    ----------
    config: RingConfig
    attack: AttackSpec or None
    grid: Dict[str, List]
        Maps a :class:`RingConfig` or :class:`AttackSpec` field name to the
        values to try, e.g. ``{"n": [8, 16], "target": [0, 3]}``.
    trials: int
    master_seed: int
    **kwargs
        Passed on to :func:`run_trials`.

    Yields
    ------
    point: Dict
        The grid point.
    report: TrialReport
    """
    config_fields = {f.name for f in dataclasses.fields(RingConfig)}
    attack_fields = {f.name for f in dataclasses.fields(AttackSpec)}
    unknown = set(grid) - config_fields - attack_fields
    if unknown:
        raise ConfigError(f"Cannot sweep over {sorted(unknown)}.")
    names = sorted(grid)
    for values in itertools.product(*(grid[name] for name in names)):
        point = dict(zip(names, values))
        point_config = dataclasses.replace(
            config, **{k: v for k, v in point.items() if k in config_fields}
        )
        point_attack = attack
        if attack is not None:
            point_attack = dataclasses.replace(
                attack, **{k: v for k, v in point.items() if k in attack_fields}
            )
        yield point, run_trials(point_config, point_attack, trials, master_seed, **kwargs)


def load_config(path):
    """
    Read a flat key/value YAML file of command-line defaults.

    Keys are long option names, with dashes or underscores.

    Returns
    -------
    options: Dict[str, object]
        Keys use underscores, as argparse destinations do.
    """
    with open(path) as file:
        doc = yaml.safe_load(file) or {}
    if not isinstance(doc, dict):
        raise ConfigError(f"Config file {path} must hold a mapping of option names to values.")
    options = {}
    for key, value in doc.items():
        if isinstance(value, (dict, list)) and key != "positions":
            raise ConfigError(f"Config key {key!r} must be a scalar.")
        options[str(key).replace("-", "_")] = value
    for name, allowed in (("protocol", PROTOCOLS), ("schedule", SCHEDULES), ("attack", ATTACKS)):
        if name in options and str(options[name]).lower() not in allowed:
            raise ConfigError(f"Config value {name}={options[name]!r} is not one of {allowed}.")
    return options
