"""Shared fixtures. The fiber used throughout is the 55 mode step-index fiber (a = 12.5 um, NA = 0.1, 532 nm)."""

import numpy as np
import pytest
from channel import LinkConfig, TapProfile, build_tap_matrix
from config import config
from fiber import FiberSpec, solve_modes
from matrix import haar_unitary


@pytest.fixture(scope="session")
def fiber55() -> FiberSpec:
    return FiberSpec(core_radius=12.5e-6, numerical_aperture=0.1, wavelength=532e-9)


@pytest.fixture(scope="session")
def basis55(fiber55):
    return solve_modes(fiber55)


@pytest.fixture(scope="session")
def tap55(basis55) -> TapProfile:
    return build_tap_matrix(basis55)


@pytest.fixture(scope="session")
def haar55() -> np.ndarray:
    return haar_unitary(55, 1)


@pytest.fixture
def default_link(haar55, tap55) -> LinkConfig:
    """Default configuration: T_AE = T_AB Haar, edge tap, relative receiver noise 0.05, per-entry artificial noise"""
    return LinkConfig(t_ab=haar55, t_ae=haar55, tap=tap55)


@pytest.fixture
def symmetric_link(haar55) -> LinkConfig:
    """No mode dependent coupling, Eve sees the same channel as Bob"""
    return LinkConfig(t_ab=haar55, t_ae=haar55, tap=TapProfile.identity(55))


def robust_link(t: np.ndarray, tap: TapProfile) -> LinkConfig:
    """Receiver noise 0.01, low enough for attenuated channels to be reliably secure"""
    return LinkConfig(t_ab=t, t_ae=t, tap=tap, receiver_noise_std=0.01)


@pytest.fixture(autouse=True)
def clean_config():
    """Commands load their INI into the shared parser, drop it again after every test"""
    yield
    for section in config.sections():
        config.remove_section(section)
