import os
import sys
from collections import OrderedDict

import pytest

sys.path.insert(0, os.path.dirname(__file__))

# criterion id -> list of (part, passed, detail)
_RESULTS: "OrderedDict[str, list]" = OrderedDict()


@pytest.fixture(scope="session")
def report():
    """``report(criterion, part, passed, detail)`` records one acceptance check."""
    def _report(criterion, part, passed, detail=""):
        _RESULTS.setdefault(str(criterion), []).append((part, bool(passed), detail))
        return bool(passed)
    return _report


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(_RESULTS, key=int):
        parts = _RESULTS[crit]
        ok = all(p for _, p, _ in parts)
        detail = "; ".join(f"{name} {'ok' if p else 'FAILED'} ({d})" for name, p, d in parts)
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {crit}: {detail}")
