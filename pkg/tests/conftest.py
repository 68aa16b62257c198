from __future__ import annotations

import time
from dataclasses import dataclass
from pathlib import Path

import pytest

from fatoukit.cli import main


@dataclass
class CliBuild:
    out: Path
    code: int
    seconds: float

    @property
    def report(self) -> str:
        return (self.out / "report.txt").read_text(encoding="utf-8")


def _build(tmp_path_factory, name: str, *args: str) -> CliBuild:
    out = tmp_path_factory.mktemp(name)
    t0 = time.perf_counter()
    code = main(["build", "--out", str(out), *args])
    return CliBuild(out, code, time.perf_counter() - t0)


@pytest.fixture(scope="session")
def build_k1(tmp_path_factory) -> CliBuild:
    return _build(tmp_path_factory, "k1", "--mode", "oscillating", "--stages", "1")


@pytest.fixture(scope="session")
def build_k3(tmp_path_factory) -> CliBuild:
    return _build(tmp_path_factory, "k3", "--mode", "oscillating", "--stages", "3")


@pytest.fixture(scope="session")
def build_invariant(tmp_path_factory) -> CliBuild:
    return _build(tmp_path_factory, "inv", "--mode", "invariant", "--stages", "2", "--delta", "0.05")


@pytest.fixture(scope="session")
def build_baker(tmp_path_factory) -> CliBuild:
    return _build(tmp_path_factory, "baker", "--mode", "baker", "--stages", "2", "--phi", "affine(-1,0)")


# -- acceptance summary ---------------------------------------------------------
ACCEPTANCE: dict = {}


def record_criterion(number: int, title: str, passed: bool, detail: str = "") -> None:
    ACCEPTANCE[number] = (title, passed, detail)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, passed, detail = ACCEPTANCE[number]
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {title}"
        if detail:
            line += f"  ({detail})"
        terminalreporter.write_line(line)
