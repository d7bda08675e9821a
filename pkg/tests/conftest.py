import pytest

_results = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, text): acceptance criterion covered by a test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    num, text = mark.args
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        _results[num] = (text, rep.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_results):
        text, outcome = _results[num]
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"{status} [{num:2d}] {text}")
