import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from smib import scenarios as sc  # noqa: E402
from smib.params import MachineParams, derive_reduced_coefficients, derive_truth_coefficients, load_config  # noqa: E402


@pytest.fixture(scope="session")
def params():
    return MachineParams()


@pytest.fixture(scope="session")
def cfg():
    return load_config(None)


@pytest.fixture(scope="session")
def rc(params):
    return derive_reduced_coefficients(params)


@pytest.fixture(scope="session")
def tc(params):
    return derive_truth_coefficients(params)


@pytest.fixture(scope="session")
def models(cfg):
    return sc.Models.from_config(cfg)


@pytest.fixture(scope="session")
def eq1(models):
    return models.reduced_eq("I")


@pytest.fixture(scope="session")
def teq1(models):
    return models.truth_eq("I")


@pytest.fixture(scope="session")
def lin(models):
    return models.design_model()


@pytest.fixture(scope="session")
def runs(cfg):
    """Memoized scenario runs with default settings."""
    cache = {}

    def get(name):
        if name not in cache:
            cache[name] = sc.run(name, cfg)
        return cache[name]

    return get
