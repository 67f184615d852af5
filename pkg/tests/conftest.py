"""Shared test fixtures: cheap optimizer configs and canned synthetic series."""

from pathlib import Path

import pytest

from lppls_detect.cmaes import CmaesConfig
from lppls_detect.model import generate_synthetic

FIXTURES = Path(__file__).resolve().parents[1] / "src" / "lppls_detect" / "fixtures"


def fast_cmaes(seed: int = 0, **overrides) -> CmaesConfig:
    """Single-run config that converges in well under a second on clean data."""
    defaults = dict(seed=seed, tol_fun=1e-10, restarts=1, max_generations=200)
    defaults.update(overrides)
    return CmaesConfig(**defaults)


@pytest.fixture
def clean_bubble():
    """Noiseless 80-sample positive bubble; tc sits 8 samples past the end,
    inside the endpoint filter bound for every window of 30+ samples."""
    return generate_synthetic(
        tc=87.0, m=0.6, omega=8.0, A=6.0, B=-0.8, C1=0.04, C2=-0.03, n=80
    )


@pytest.fixture
def noisy_bubble():
    return generate_synthetic(
        tc=87.0, m=0.6, omega=8.0, A=6.0, B=-0.8, C1=0.04, C2=-0.03,
        n=80, noise_sd=0.002, seed=5,
    )


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES
