"""Collects one PASS/FAIL line per acceptance criterion for the terminal summary."""

LINES = []


def report(number, title, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'}  AC{number} {title}: {detail}"
    print(line)
    LINES.append(line)
    assert ok, line
