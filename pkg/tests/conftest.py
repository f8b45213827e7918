import pytest

from src.core.potentials import CoreSpec, HardSphere, SquareWell, ZeroPotential, core_for_minimum, make_pair
from src.core.radial_solver import SolverSettings
from src.core.scales import TailSpec

# reduced units: R* = E* = 1
MU = 0.5
R_MIN_A = 0.08
R_MIN_B = 0.09


@pytest.fixture
def tail():
    return TailSpec(4, 1.0)


@pytest.fixture
def mu():
    return MU


@pytest.fixture
def model_pair(tail):
    return make_pair(CoreSpec(core_for_minimum(tail, R_MIN_A)), CoreSpec(core_for_minimum(tail, R_MIN_B)),
                     tail, MU)


@pytest.fixture
def identical_pair(tail):
    core = CoreSpec(core_for_minimum(tail, R_MIN_A))
    return make_pair(core, core, tail, MU)


@pytest.fixture
def square_well():
    return SquareWell(depth=50.0, radius=1.0)


@pytest.fixture
def hard_sphere():
    return HardSphere(1.0)


@pytest.fixture
def free_channel():
    return ZeroPotential()


@pytest.fixture
def fine_settings():
    return SolverSettings(steps_per_wavelength=2000)


def pytest_report_header(config):
    from src.core import jit
    return f"radial kernels: {jit.describe()}"
