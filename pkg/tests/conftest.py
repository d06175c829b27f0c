import os
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("ficut", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("ficut")

MODELS = Path(__file__).resolve().parents[1] / "src" / "ficut" / "models"

# filled in by test_acceptance.py, printed after the run
ACCEPTANCE: dict[str, tuple[bool, str]] = {}


@pytest.fixture
def models_dir() -> Path:
    return MODELS


@pytest.fixture
def model_text():
    def load(name: str) -> str:
        return (MODELS / name).read_text()
    return load


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (int(k.split()[0].rstrip("ab")), k)):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")
