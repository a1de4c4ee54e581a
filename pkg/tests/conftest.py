import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from nslab.spectral import SpectralField, hermitian_part

settings.register_profile("nslab", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("nslab")


def random_real_field(N, lead=(), seed=0, mean_zero=True):
    rng = np.random.default_rng(seed)
    L = 2 * N + 1
    shape = tuple(lead) + (L, L, L)
    c = hermitian_part(rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    if mean_zero:
        c[..., N, N, N] = 0.0
    return SpectralField(c)


@pytest.fixture
def field_factory():
    return random_real_field


# one line per acceptance criterion, echoed again at the end of the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
