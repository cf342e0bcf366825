import re

import pytest

GATE_LINES = []


@pytest.fixture(scope="session")
def gate_log():
    """Collect one ``[gate NN] ... PASS/FAIL`` verdict line per release gate;
    the lines are replayed in the terminal summary where capture can't hide
    them."""

    def announce(num: int, name: str, ok: bool, detail: str = "") -> None:
        line = f"[gate {num:02d}] {name}: {'PASS' if ok else 'FAIL'}"
        if detail:
            line += f" ({detail})"
        GATE_LINES.append(line)
        print(line)  # also lands in this test's captured output

    return announce


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = list(GATE_LINES)
    for rep in terminalreporter.stats.get("skipped", []):
        if "test_acceptance" not in str(rep.nodeid):
            continue
        name = rep.nodeid.split("::")[-1]
        num = re.search(r"_c(\d+)", name)
        reason = rep.longrepr[2] if isinstance(rep.longrepr, tuple) else str(rep.longrepr)
        lines.append(f"[gate {num.group(1) if num else '??'}] {name}: "
                     f"SKIP ({reason.removeprefix('Skipped: ')})")
    if lines:
        terminalreporter.section("release gates")
        for line in sorted(lines):
            terminalreporter.line(line)
