from __future__ import annotations

import sys
from pathlib import Path

import pytest

TESTS = Path(__file__).resolve().parent
FIXTURES = TESTS / "fixtures"
sys.path.insert(0, str(FIXTURES))
sys.path.insert(0, str(TESTS))

GRADIENT_PROMPT = "Find the gradient ∇f of f(x, y) = x^2y at point (-1, 4)."


@pytest.fixture
def fixtures() -> Path:
    return FIXTURES


@pytest.fixture
def grad_solution() -> str:
    return (FIXTURES / "solutions" / "grad_q1.txt").read_text(encoding="utf-8")


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in module.summary_lines():
        terminalreporter.write_line(line)
