import os

import pytest
from hypothesis import HealthCheck, settings

from tilekmc.energetics import two_label_model
from tilekmc.lattice import SpeciesDescriptor

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.register_profile("ci", max_examples=200, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def two_species():
    return [SpeciesDescriptor(1, (0, 0, 0, 0), 0.5, "yellow"),
            SpeciesDescriptor(2, (1, 1, 1, 1), 0.5, "blue")]


@pytest.fixture
def mid_model():
    return two_label_model(0.5, 0.5, 0.5, 0.5)


@pytest.fixture
def tmp_out(tmp_path, monkeypatch):
    monkeypatch.setenv("TILEKMC_OUT", str(tmp_path / "out"))
    return tmp_path / "out"


def pytest_terminal_summary(terminalreporter):
    import acceptance_log

    if not acceptance_log.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(acceptance_log.TITLES):
        terminalreporter.write_line(acceptance_log.format_line(n))
