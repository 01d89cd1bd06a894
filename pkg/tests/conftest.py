import pytest

_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, text): acceptance criterion covered by the test")


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None or call.when != "call" and not (call.when == "setup" and call.excinfo):
        return
    number, text = marker.args
    ok = call.excinfo is None
    prev = _criteria.get(number, (text, True, []))
    details = prev[2] + [f"{k}={v}" for k, v in item.user_properties]
    _criteria[number] = (text, prev[1] and ok, details)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        text, ok, details = _criteria[number]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {text}")
        for d in details:
            terminalreporter.write_line(f"        {d}")


@pytest.fixture
def rng():
    import numpy as np

    return np.random.default_rng(20240601)
