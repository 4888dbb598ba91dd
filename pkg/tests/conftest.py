import pytest
from hypothesis import settings

from branchlab.groups import standard_tori
from branchlab.scalars import make_params

CRITERIA = {
    1: "index of the norm-one filtration",
    2: "group orders",
    3: "cuspidal table integrity",
    4: "subgroup identities",
    5: "depth-zero branching",
    6: "the S_d family",
    7: "construction of rho",
    8: "positive-depth branching",
    9: "nilpotent-orbit identities and n(pi_rho)",
    10: "oracle equivalences",
}

# enumerations are memoised, so first calls are slow
settings.register_profile("branchlab", deadline=None)
settings.load_profile("branchlab")

_outcomes: dict[int, list[bool]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion this test covers")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    n = marker.args[0]
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        _outcomes.setdefault(n, []).append(rep.passed)


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n, title in CRITERIA.items():
        res = _outcomes.get(n)
        if res is None:
            status = "NOT RUN"
        else:
            status = "PASS" if all(res) else "FAIL"
        terminalreporter.write_line(f"criterion {n:2d} ({title}): {status}")


@pytest.fixture(scope="session")
def P3():
    return make_params(3, 3)


@pytest.fixture(scope="session")
def P34():
    return make_params(3, 4)


@pytest.fixture(scope="session")
def tori3(P3):
    return standard_tori(3, P3.epsilon)
