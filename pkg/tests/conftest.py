import pytest

_RESULTS = pytest.StashKey[dict]()
_NOTES = pytest.StashKey[dict]()

CRITERIA = {
    1: "infection probability unit check",
    2: "face-to-face percentages per schedule type",
    3: "pattern counts against brute-force oracles",
    4: "type (xi) self-contained probability histogram",
    5: "type (xi) departmentalized day-0 histogram",
    6: "ventilation sweep lowers the median peak",
    7: "schedule type ordering of median peaks",
    8: "determinism and parallelism invariance",
    9: "conservation and phase durations",
    10: "runtime budget",
}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion the test belongs to")
    config.stash[_RESULTS] = {}
    config.stash[_NOTES] = {}


@pytest.fixture
def note(request):
    """Attach a line of detail to the acceptance summary of the current criterion."""
    marker = request.node.get_closest_marker("criterion")
    notes = request.config.stash[_NOTES]

    def add(text):
        notes.setdefault(marker.args[0], []).append(text)

    return add


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or (report.when != "call" and report.passed):
        return
    results = item.config.stash[_RESULTS]
    ok = report.passed and not report.skipped
    results.setdefault(marker.args[0], []).append((item.name, ok))


def pytest_terminal_summary(terminalreporter, config):
    results = config.stash[_RESULTS]
    if not results:
        return
    notes = config.stash[_NOTES]
    terminalreporter.section("acceptance criteria")
    for n, title in CRITERIA.items():
        if n not in results:
            continue
        failed = [name for name, ok in results[n] if not ok]
        status = "PASS" if not failed else "FAIL"
        line = f"{status} criterion {n:2d}: {title}"
        if failed:
            line += f" (failed: {', '.join(failed)})"
        terminalreporter.write_line(line)
        for text in notes.get(n, []):
            terminalreporter.write_line(f"        {text}")
