import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_dataset():
    """Ten rooms at L=40, shared across modules."""
    from edcnet.dataset import generate_dataset

    return generate_dataset(10, seed=3, edc_length=40)


def pytest_collection_modifyitems(config, items):
    if os.environ.get("EDCNET_FULLSCALE") == "1":
        return
    skip = pytest.mark.skip(reason="full-scale run; set EDCNET_FULLSCALE=1")
    for item in items:
        if "fullscale" in item.keywords:
            item.add_marker(skip)


_CRITERIA = {}


@pytest.fixture
def criterion():
    """Record one acceptance line; the terminal summary lists them all."""

    def record(number, ok, detail):
        line = f"CRITERION {number:>2}: {'PASS' if ok else 'FAIL'} - {detail}"
        _CRITERIA[number] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for n in range(1, 11):
        terminalreporter.write_line(_CRITERIA.get(n, f"CRITERION {n:>2}: NOT RUN in this session"))
