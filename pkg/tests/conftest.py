import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

import acceptance_log  # noqa: E402


def pytest_terminal_summary(terminalreporter):
    results = acceptance_log.RESULTS
    if not results:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for num in sorted(results):
        parts = results[num]
        ok = all(p[1] for p in parts)
        detail = "; ".join(f"{name}: {'pass' if good else 'FAIL'} ({info})" for name, good, info in parts)
        tr.write_line(f"criterion {num:>2}: {'PASS' if ok else 'FAIL'} | {detail}")
