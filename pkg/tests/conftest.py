import numpy as np
import pytest
from hypothesis import settings

from lifshitz.lattice import LatticeGeometry
from lifshitz.potential import (
    BaseSet,
    CouplingLaw,
    PeriodicBackground,
    PotentialModel,
    StandardBreather,
    Uniform,
)

settings.register_profile("pkg", deadline=None, max_examples=50, derandomize=True)
settings.load_profile("pkg")


@pytest.fixture
def line():
    return LatticeGeometry.cubic(1)


@pytest.fixture
def breather_model(line):
    """Half-cell standard breather, height 1, uniform couplings, no background."""
    return PotentialModel(line, StandardBreather(1.0, BaseSet("half-cell")), CouplingLaw((Uniform(),)))


@pytest.fixture
def cosine_model(line):
    """Same breather on top of a cos(2 pi x) background."""
    return PotentialModel(
        line,
        StandardBreather(1.0, BaseSet("half-cell")),
        CouplingLaw((Uniform(),)),
        PeriodicBackground.cosine(1.0, 1),
    )


def random_symmetric(rng, n):
    a = rng.standard_normal((n, n))
    return (a + a.T) / 2


_ACCEPTANCE: list[tuple[str, bool, str]] = []


@pytest.fixture
def verdict():
    """Record one acceptance line and fail the test when the check does not hold."""

    def record(label: str, ok: bool, detail: str) -> None:
        _ACCEPTANCE.append((label, bool(ok), detail))
        assert ok, f"{label}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label, ok, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {label}  ({detail})")
