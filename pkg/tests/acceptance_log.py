"""One verdict line per acceptance criterion, echoed in the pytest terminal summary."""

import sys

LINES: list[str] = []


def record(name: str, ok: bool, detail: str = "") -> bool:
    line = f"{'PASS' if ok else 'FAIL'}  {name}" + (f"  ({detail})" if detail else "")
    LINES.append(line)
    print(line, file=sys.stderr)
    return ok
