import os
from pathlib import Path

import numpy as np
import pytest

from rmtspacings.eigensolve import eigvals_symmetric
from rmtspacings.ensembles import GoeParams, sample_goe

ROOT = Path(__file__).resolve().parent.parent
BIKE_CSV = ROOT / "data" / "bike_hour_2011.csv"


@pytest.fixture(scope="session")
def goe_pool():
    """100 GOE(300) spectra, seeds 0..99."""
    return [eigvals_symmetric(sample_goe(GoeParams(300), s)) for s in range(100)]


@pytest.fixture(scope="session")
def bike_csv():
    if not BIKE_CSV.exists():
        pytest.skip("bike CSV not available")
    return str(BIKE_CSV)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(autouse=True)
def _single_worker(monkeypatch):
    monkeypatch.setenv("RMTSPACINGS_WORKERS", os.environ.get("RMTSPACINGS_TEST_WORKERS", "1"))
