import contextlib

import pytest

ACCEPTANCE = {}


@contextlib.contextmanager
def criterion(number, title):
    """Record the outcome of one acceptance criterion and re-raise failures."""
    try:
        yield
    except BaseException as exc:
        ACCEPTANCE[number] = (False, title, f"{type(exc).__name__}: {exc}".splitlines()[0])
        print(f"criterion {number} FAIL: {title}")
        raise
    else:
        ACCEPTANCE[number] = (True, title, "")
        print(f"criterion {number} PASS: {title}")


@pytest.fixture
def acceptance():
    return criterion


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, title, why = ACCEPTANCE[number]
        line = f"criterion {number} {'PASS' if ok else 'FAIL'}: {title}"
        terminalreporter.write_line(line + (f" ({why})" if why else ""))
