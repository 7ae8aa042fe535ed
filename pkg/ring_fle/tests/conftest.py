import pathlib

import numpy as np
import pytest

from .._ring import RingConfig
from .._treesim import load_graph, load_protocol

DATA_DIR = pathlib.Path(__file__).parent / "data"


def pytest_addoption(parser):
    parser.addoption(
        "--runslow",
        action="store_true",
        default=False,
        help="Also run the acceptance-scale Monte-Carlo tests.",
    )


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow", default=False):
        return
    skip = pytest.mark.skip(reason="acceptance scale; pass --runslow to run")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def rng():
    return np.random.default_rng(20200518)


@pytest.fixture(scope="module")
def xor_protocol():
    return load_protocol(DATA_DIR / "xor.json")


@pytest.fixture(scope="module")
def cycle5():
    return load_graph(DATA_DIR / "cycle5.json")


@pytest.fixture(scope="module")
def path3():
    return load_graph(DATA_DIR / "path3.json")


@pytest.fixture(scope="module")
def phase_config():
    "Honest PhaseAsyncLead on a ring of 8 with l = 3."
    from .._protocols import PhaseParams

    return RingConfig(n=8, protocol="phase", params=PhaseParams(l=3, m=2 * 8 * 8))
