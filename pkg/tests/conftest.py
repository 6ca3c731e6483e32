import numpy as np
import pytest

CRITERIA = {
    1: "texture-oracle equivalence",
    2: "feature-count budget",
    3: "confusion-matrix arithmetic",
    4: "AUC identity",
    5: "DeLong",
    6: "isotonic regression",
    7: "decision curve",
    8: "SHAP exactness",
    9: "phantom end-to-end",
    10: "determinism",
    11: "filter invariants",
}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")
    config._criteria = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    n = mark.args[0]
    state = item.config._criteria.setdefault(n, [])
    if report.failed or (report.when == "call" and report.skipped):
        state.append(False)
    elif report.when == "call" and report.passed:
        state.append(True)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = getattr(config, "_criteria", {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n, name in CRITERIA.items():
        seen = results.get(n)
        if not seen:
            status = "NOT RUN"
        else:
            status = "PASS" if all(seen) else "FAIL"
        terminalreporter.write_line(f"criterion {n:2d} {name}: {status}")
