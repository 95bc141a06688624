"""
Shared pytest configuration for Mixed Intersection Simulator tests
"""

import pytest

from mixed_intersection.tools.trajectory_tool import Bounds


def pytest_addoption(parser):
    parser.addoption(
        "--runslow", action="store_true", default=False, help="run long acceptance sweeps"
    )


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running acceptance sweep")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def bounds():
    """Bounds used throughout the study: speeds in [0, 20], controls in [-5, 5]"""
    return Bounds()
