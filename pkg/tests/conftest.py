import numpy as np
import pytest

CRITERIA = {
    1: "pool counts",
    2: "gate algebra",
    3: "pure detection",
    4: "noisy detection",
    5: "fully separable ensemble",
    6: "k-separable ensemble",
    7: "numerical hygiene",
    8: "determinism",
}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")
    config._criteria = {}


def pytest_runtest_logreport(report):
    crit = getattr(report, "_criterion", None)
    if crit is None:
        return
    if report.when == "call" or report.outcome != "passed":
        results = report.config_criteria
        ok = report.outcome == "passed"
        results[crit] = results.get(crit, True) and ok


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        rep._criterion = marker.args[0]
        rep.config_criteria = item.config._criteria


def pytest_terminal_summary(terminalreporter, config):
    results = config._criteria
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n, name in CRITERIA.items():
        if n not in results:
            terminalreporter.write_line(f"criterion {n} ({name}): NOT RUN")
        else:
            terminalreporter.write_line(f"criterion {n} ({name}): {'PASS' if results[n] else 'FAIL'}")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
