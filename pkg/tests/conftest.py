_RESULTS = {}


def pytest_runtest_makereport(item, call):
    mark = item.get_closest_marker("criterion")
    if mark is None or call.when not in ("setup", "call"):
        return
    number, label = mark.args
    failed = call.excinfo is not None
    if failed or number not in _RESULTS:
        _RESULTS[number] = (label, not failed)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        label, ok = _RESULTS[number]
        terminalreporter.write_line(f"criterion {number:2d} [{'PASS' if ok else 'FAIL'}] {label}")

