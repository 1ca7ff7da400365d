"""Collector for acceptance-criterion outcome lines.

test_acceptance.py records one line per criterion here; the conftest
terminal-summary hook prints them after the run so the pass/fail verdict
per criterion is visible even under output capture.
"""

LINES: list[str] = []


def record(number: int, passed: bool, detail: str) -> None:
    status = "PASS" if passed else "FAIL"
    line = f"criterion {number}: {status} - {detail}"
    LINES.append(line)
    print(line, flush=True)
