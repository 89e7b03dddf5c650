from __future__ import annotations

import sys

import pytest
from hypothesis import settings

from golden import ABACBA_TEXT, SIG1_TEXT, SIG2_TEXT, SIG3_TEXT, SIG4_TEXT

settings.register_profile("default", max_examples=150, deadline=None)
settings.load_profile("default")


@pytest.fixture
def sig_files(tmp_path):
    texts = {
        "sig1": SIG1_TEXT,
        "sig2": SIG2_TEXT,
        "sig3": SIG3_TEXT,
        "sig4": SIG4_TEXT,
        "abacba": ABACBA_TEXT,
    }
    paths = {}
    for name, text in texts.items():
        path = tmp_path / f"{name}.trace"
        path.write_text(text)
        paths[name] = path
    return paths


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    lines = getattr(acceptance, "RESULTS", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(lines):
        terminalreporter.write_line(lines[number])
