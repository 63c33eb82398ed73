import pytest

from vixsabr import CapSpec, McConfig, QuadratureConfig, SabrParams


@pytest.fixture(scope="session")
def params():
    """Default parameter set used throughout the numerical studies."""
    return SabrParams(beta=0.5, rho=-0.7, omega=1.0, v0=0.1)


@pytest.fixture(scope="session")
def caps(params):
    return CapSpec.from_params(params, vol_cap=2.0, drift_cap=1.0)


@pytest.fixture(scope="session")
def quad():
    return QuadratureConfig()


@pytest.fixture(scope="session")
def mc_default():
    return McConfig()
