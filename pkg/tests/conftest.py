import pytest

_RESULTS = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_RESULTS] = {}


@pytest.fixture
def acceptance(request):
    """``report(number, ok, detail)``: print a PASS/FAIL line and keep it for the summary."""
    config = request.config
    tr = config.pluginmanager.get_plugin("terminalreporter")

    def report(number, ok, detail):
        line = f"ACCEPTANCE {number:>2} {'PASS' if ok else 'FAIL'}  {detail}"
        config.stash[_RESULTS].setdefault(number, []).append((bool(ok), line))
        if tr is not None:
            tr.write_line("")
            tr.write_line(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter, config):
    results = config.stash[_RESULTS]
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        ok = all(r for r, _ in results[number])
        terminalreporter.write_line(f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}")
        for _, line in results[number]:
            terminalreporter.write_line("    " + line)
