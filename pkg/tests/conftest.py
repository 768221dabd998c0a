import pytest

_results = {}
_measured = {}


def pytest_runtest_makereport(item, call):
    mark = item.get_closest_marker("criterion")
    if mark is None or call.when != "call":
        return
    number, text = mark.args
    ok = call.excinfo is None
    prev = _results.get(number, (text, True, []))
    _results[number] = (text, prev[1] and ok, prev[2] + [item.name])


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_results):
        text, ok, names = _results[number]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {number:>2}. {text}")
        for name in names:
            for line in _measured.get(name, []):
                terminalreporter.write_line(f"          {line}")


@pytest.fixture
def record(request):
    """Attach measured values to the test's report line."""

    def _record(**values):
        line = ", ".join(f"{k}={v:.4g}" if isinstance(v, float) else f"{k}={v}" for k, v in values.items())
        _measured.setdefault(request.node.name, []).append(line)

    return _record
