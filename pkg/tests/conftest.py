import pytest

CRITERIA = [f"AC-{i}" for i in range(1, 9)]
_VERDICTS = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_VERDICTS] = {}


@pytest.fixture
def verdict(request):
    """Record one acceptance verdict; it is echoed in the terminal summary."""
    store = request.config.stash[_VERDICTS]

    def record(name, passed, detail):
        store[name] = (bool(passed), detail)
        print(f"{name}: {'PASS' if passed else 'FAIL'} {detail}")
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    store = config.stash[_VERDICTS]
    if not store:
        return
    terminalreporter.section("acceptance criteria")
    for name in CRITERIA:
        if name in store:
            passed, detail = store[name]
            terminalreporter.write_line(f"{name}: {'PASS' if passed else 'FAIL'}  {detail}")
        else:
            terminalreporter.write_line(f"{name}: FAIL  (no verdict recorded)")
