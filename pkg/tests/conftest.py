import pytest

from dimerwave import layerpot as lp
from dimerwave import resonance as rs
from dimerwave import scatter as sc


@pytest.fixture(scope="session")
def base():
    """Unit-volume-ball dimer with gap d0 = 5 r0."""
    return lp.DimerGeometry.normalized(5.0)


@pytest.fixture(scope="session")
def caps(base):
    return lp.capacitance_set(base, 12)


@pytest.fixture(scope="session")
def consts(base):
    return sc.DimerConstants.compute(base, 12)


@pytest.fixture(scope="session")
def corrections(base):
    return rs.anti_resonance_corrections(base, lp.MediumParams.from_contrast(1e-4), 10)


@pytest.fixture(scope="session")
def delta_sweep(base):
    """Muller roots of the normalized dimer over a contrast sweep."""
    out = {}
    for d in (1e-5, 3e-5, 1e-4, 3e-4, 1e-3):
        out[d] = rs.muller_resonances(base, lp.MediumParams.from_contrast(d), 8)
    return out


_ACCEPTANCE: dict[int, str] = {}


@pytest.fixture(scope="session")
def acceptance_report():
    """Collects one pass/fail line per acceptance criterion."""
    return _ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        terminalreporter.write_line(_ACCEPTANCE[n])
