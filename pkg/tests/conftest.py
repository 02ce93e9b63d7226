import pytest

from byzdetect.limits import NetworkShape, TradeoffCurves
from byzdetect.measures import BernoulliPair, GaussianShiftPair
from byzdetect.rates import build_profile


@pytest.fixture(scope="session")
def ref_pair():
    return BernoulliPair(0.02, 0.6)


@pytest.fixture(scope="session")
def ref_profile(ref_pair):
    return build_profile(ref_pair)


@pytest.fixture(scope="session")
def ref_shape():
    return NetworkShape(9, 2)


@pytest.fixture(scope="session")
def ref_curves(ref_profile, ref_shape):
    return TradeoffCurves(ref_profile, ref_shape)


@pytest.fixture(scope="session")
def gauss_profile():
    return build_profile(GaussianShiftPair(1.0))


@pytest.fixture(scope="session")
def flip_profile():
    # symmetric binary pair: p0 = 1 - p1
    return build_profile(BernoulliPair(0.1, 0.9))


# one-line verdicts collected by the acceptance suite, echoed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
