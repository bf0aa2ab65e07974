import numpy as np
import pytest

from src.analysis.transform import log_leader_pyramid
from src.analysis.synth import MrwSpec, synth_mrw
from src.utils.config import SamplerConfig, load_config


def pytest_addoption(parser):
    parser.addoption(
        "--run-slow",
        action="store_true",
        default=False,
        help="Run the Monte Carlo acceptance tests"
    )
    parser.addoption(
        "--reps",
        action="store",
        type=int,
        default=20,
        help="Monte Carlo realizations per acceptance row"
    )


def pytest_collection_modifyitems(config, items):
    if config.getoption("--run-slow"):
        return
    skip = pytest.mark.skip(reason="needs --run-slow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def reps(request):
    return request.config.getoption("--reps")


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture(scope="session")
def cfg():
    return load_config()


@pytest.fixture
def fast_conf(cfg):
    """Reduced iteration budget for end-to-end runs"""
    return SamplerConfig.from_config(cfg, n_iter=12, burn_in=4, kmeans_restarts=3)


@pytest.fixture(scope="session")
def mrw_128():
    return synth_mrw(MrwSpec(n=128, c2=-0.08, seed=3))


@pytest.fixture(scope="session")
def ll_128(mrw_128):
    return log_leader_pyramid(mrw_128, 1, 3)
