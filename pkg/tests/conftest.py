import numpy as np
import pytest

from modelfollow.cli_io import parse_config
from modelfollow.control_loop import run_episode


@pytest.fixture(scope="session")
def default_config():
    return parse_config("")


@pytest.fixture(scope="session")
def model(default_config):
    return default_config.model


@pytest.fixture(scope="session")
def episode(default_config):
    """One full 20 s learning episode with all defaults, shared read-only."""
    cfg = default_config
    return run_episode(cfg.model, cfg.reference, cfg.learning, horizon=20.0)
