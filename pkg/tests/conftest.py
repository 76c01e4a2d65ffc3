import re

import numpy as np
import pytest

_ACCEPTANCE: dict[str, tuple[bool, str]] = {}


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def acceptance():
    """Record one pass/fail line for an acceptance criterion (or sub-part such as ``4a``)."""

    def record(label: str, ok: bool, detail: str) -> bool:
        _ACCEPTANCE[label] = (bool(ok), detail)
        print(f"ACCEPTANCE {label}: {'PASS' if ok else 'FAIL'} - {detail}")
        return ok

    return record


def _order(label: str):
    m = re.match(r"(\d+)(.*)", label)
    return int(m.group(1)), m.group(2)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    by_number: dict[int, list[str]] = {}
    for label in sorted(_ACCEPTANCE, key=_order):
        by_number.setdefault(_order(label)[0], []).append(label)
    for number, labels in sorted(by_number.items()):
        ok = all(_ACCEPTANCE[l][0] for l in labels)
        if labels == [str(number)]:
            detail = _ACCEPTANCE[labels[0]][1]
        else:
            detail = "; ".join(f"{l} {'PASS' if _ACCEPTANCE[l][0] else 'FAIL'}: {_ACCEPTANCE[l][1]}" for l in labels)
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}")
