import os
import sys
from unittest.mock import AsyncMock, MagicMock

import numpy as np
import pytest

# Add project root to python path so we can import modules
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from utils.measurement import build_frame  # noqa: E402
from utils.qcore import bell_state, density_from_pure  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def frame2():
    return build_frame(2)


@pytest.fixture
def frame3():
    return build_frame(3)


@pytest.fixture
def phi_minus():
    return density_from_pure(bell_state("phi-"))


@pytest.fixture
def psi_minus():
    return density_from_pure(bell_state("psi-"))


@pytest.fixture
def data_dir(tmp_path):
    """Temporary data directory, also used as the results-store location."""
    path = tmp_path / "data"
    path.mkdir()
    return path


@pytest.fixture
def mock_db(mocker):
    """Mock the results database to prevent file creation."""
    mock_db_instance = MagicMock()
    mock_db_instance.save_sweep = AsyncMock(return_value=1)
    mock_db_instance.load_latest_runs = AsyncMock(return_value=[])
    mock_db_instance.load_rows = AsyncMock(return_value=[])

    mocker.patch("commands.benchmark.get_database", AsyncMock(return_value=mock_db_instance))
    mocker.patch("eqpbench.close_database", AsyncMock())

    return mock_db_instance
