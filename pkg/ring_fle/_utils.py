import numpy as np

__all__ = (
    "ConfigError",
    "GraphError",
    "PreconditionError",
    "ProtocolTreeError",
    "TranscriptError",
    "UnknownEventError",
    "parse_positions",
    "trial_rng",
)


class ConfigError(ValueError):
    ...


class PreconditionError(ValueError):
    """
    An attack or reduction refused to build because its preconditions fail.
    """

    ...


class TranscriptError(ValueError):
    ...


class UnknownEventError(KeyError):
    ...


class ProtocolTreeError(ValueError):
    ...


class GraphError(ValueError):
    ...


def trial_rng(master_seed, index):
    """
    Return the random generator owned by one trial.

    The stream depends only on ``(master_seed, index)``, so trials can run in
    any order or on any worker and still reproduce.
    """
    return np.random.default_rng(np.random.SeedSequence([master_seed, index]))


def parse_positions(text):
    """
    Parse a comma-separated list of processor ids like "0,3,6".
    """
    if text is None:
        return None
    if isinstance(text, (list, tuple)):
        return tuple(int(item) for item in text)
    text = str(text).strip()
    if not text:
        return ()
    try:
        return tuple(int(item) for item in text.split(","))
    except ValueError:
        raise ConfigError(f"Could not parse positions {text!r}. Expected e.g. 0,3,6")
