"""Collects one pass/fail line per acceptance criterion for the terminal summary."""
from contextlib import contextmanager

RESULTS: dict[int, tuple[str, bool, str]] = {}


@contextmanager
def criterion(number: int, title: str):
    """Record whether the enclosed block passes; ``note["detail"]`` is printed alongside."""
    note = {"detail": ""}
    try:
        yield note
    except BaseException:
        RESULTS[number] = (title, False, note["detail"])
        raise
    RESULTS[number] = (title, True, note["detail"])


def summary_lines() -> list[str]:
    lines = []
    for number in sorted(RESULTS):
        title, passed, detail = RESULTS[number]
        status = "PASS" if passed else "FAIL"
        lines.append(f"criterion {number:2d} {status}  {title}" + (f"  [{detail}]" if detail else ""))
    return lines
