import pytest

from polsource.presets import preset
from polsource.runner import build
from polsource.spectra import FilterSpec, FrequencyGrid, make_dwdm_filter, make_source_spectrum

# (criterion, passed, detail) lines collected by test_acceptance.py
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, ok, detail in sorted(ACCEPTANCE, key=lambda r: r[0]):
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def grid():
    return FrequencyGrid.around_wavelength()


@pytest.fixture(scope="session")
def sources(grid):
    return (make_source_spectrum("H", 1540.2, 0.85, grid),
            make_source_spectrum("V", 1540.2, 0.85, grid))


@pytest.fixture(scope="session")
def filters100(grid):
    return (make_dwdm_filter(FilterSpec.itu(46, "+", 100.0), grid),
            make_dwdm_filter(FilterSpec.itu(47, "-", 100.0), grid))


_SETUPS = {}


def paper_setup(name):
    if name not in _SETUPS:
        _SETUPS[name] = build(preset(name))
    return _SETUPS[name]


@pytest.fixture(scope="session")
def setup_of():
    return paper_setup
