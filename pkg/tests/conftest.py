import numpy as np
import pytest

from cascpath.casedata import Bus, CaseData, Generator, Line
from cascpath.rts79 import rts79_case, rts79_wind_case


@pytest.fixture(scope="session")
def tri3():
    """3-bus triangle, equal reactance 0.1 pu, reference at bus 1."""
    return CaseData(
        name="tri3",
        buses=(Bus(1, True, 0.0), Bus(2, False, 100.0), Bus(3, False, 50.0)),
        lines=(
            Line(1, 1, 2, 0.1, 100.0),
            Line(2, 2, 3, 0.1, 100.0),
            Line(3, 1, 3, 0.1, 100.0),
        ),
        generators=(Generator(1, 1, 300.0, 10.0),),
    )


@pytest.fixture(scope="session")
def two_bus():
    """Hand-solvable dispatch: 100 MW gen, 80 MW load, 50 MW line."""
    return CaseData(
        name="two_bus",
        buses=(Bus(1, True, 0.0), Bus(2, False, 80.0)),
        lines=(Line(1, 1, 2, 0.1, 50.0),),
        generators=(Generator(1, 1, 100.0, 10.0),),
        shed_cost=np.array([1000.0, 1000.0]),
    )


def make_five_bus(line_fail=1e-3, gen_fail=1e-3):
    """Small ring-with-chord system used by the cascade oracle tests.

    The tight chord (line 6) makes some single failures trigger relay trips
    that do not island, so enumerations exercise every step composition:
    plain failures, failure+relay, islanding, and shedding."""
    return CaseData(
        name="five_bus",
        buses=(
            Bus(1, True, 0.0),
            Bus(2, False, 80.0),
            Bus(3, False, 60.0),
            Bus(4, False, 90.0),
            Bus(5, False, 10.0),
        ),
        lines=(
            Line(1, 1, 2, 0.10, 100.0, 1.2, line_fail),
            Line(2, 2, 3, 0.10, 80.0, 1.2, line_fail),
            Line(3, 3, 4, 0.10, 80.0, 1.2, line_fail),
            Line(4, 4, 5, 0.10, 100.0, 1.2, line_fail),
            Line(5, 5, 1, 0.10, 120.0, 1.2, line_fail),
            Line(6, 2, 4, 0.15, 30.0, 1.2, line_fail),
        ),
        generators=(
            Generator(1, 1, 200.0, 10.0, gen_fail),
            Generator(2, 3, 100.0, 30.0, gen_fail),
            Generator(3, 5, 120.0, 20.0, gen_fail),
        ),
        shed_cost=np.array([3000.0] * 5),
    )


@pytest.fixture(scope="session")
def five_bus():
    return make_five_bus()


@pytest.fixture(scope="session")
def rts79():
    return rts79_case()


@pytest.fixture(scope="session")
def rts79_wind():
    return rts79_wind_case()


def balanced_injections(rng, case, scale=100.0):
    """Random injection vector summing to zero."""
    p = rng.normal(0.0, scale, case.n_bus)
    p -= p.mean()
    return p
