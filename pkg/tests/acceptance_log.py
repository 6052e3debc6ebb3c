"""Collects one PASS/FAIL line per acceptance criterion for the terminal summary."""

import time
from contextlib import contextmanager

LINES = []


@contextmanager
def criterion(number: int, title: str, limit_s: float):
    t0 = time.perf_counter()
    try:
        yield
    except BaseException as exc:
        took = time.perf_counter() - t0
        LINES.append(f"FAIL criterion {number} ({title}) {took:.1f}s/{limit_s:.0f}s: {type(exc).__name__}: {exc}"[:300])
        print(LINES[-1])
        raise
    took = time.perf_counter() - t0
    ok = took < limit_s
    LINES.append(f"{'PASS' if ok else 'FAIL'} criterion {number} ({title}) {took:.1f}s/{limit_s:.0f}s")
    print(LINES[-1])
    assert ok, f"criterion {number} took {took:.1f}s, limit {limit_s}s"
