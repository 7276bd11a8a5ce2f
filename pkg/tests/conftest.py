from __future__ import annotations

import numpy as np
import pytest

from norm2pc.ring import share, share_bits
from norm2pc.session import run_local

_ACCEPTANCE: list[tuple[str, bool, str]] = []


def two_party(fn, inputs=(None, None), backend="dealer", seed=0, **kw):
    """Run fn(session, input) on both parties; returns (out0, out1, sessions)."""
    return run_local(fn, inputs, backend=backend, seed=seed, **kw)


def shared(values, bits, rng):
    return share(np.asarray(values, dtype=object), bits, rng)


def shared_bits(values, rng):
    return share_bits(np.asarray(values), rng)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def acceptance():
    """Record one pass/fail line per acceptance criterion."""

    def record(name: str, ok: bool, detail: str = ""):
        _ACCEPTANCE.append((name, bool(ok), detail))
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
