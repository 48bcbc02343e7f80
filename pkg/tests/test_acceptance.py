"""The acceptance matrix, one test per criterion.

Each test prints a single ``criterion N name: PASS|FAIL (seconds)`` line
straight to the terminal, so the verdicts are visible under output capture.
All comparisons are exact; the time budgets are the stated laptop targets.
"""

import subprocess
import sys
import time

import pytest

from cartan_coh.suite import CRITERIA, run_criterion

SEED = 7
BUDGET_SECONDS = {1: 1, 2: 1, 3: 300, 4: 30, 5: 10, 6: 1, 7: 30, 8: 120, 9: 120, 10: 120}


def _line(capsys, number, name, ok, seconds, note=""):
    with capsys.disabled():
        status = "PASS" if ok else "FAIL"
        print(f"\ncriterion {number:>2} {name}: {status} ({seconds:.2f}s){note}")


@pytest.mark.parametrize("criterion", CRITERIA, ids=[f"{c.number}-{c.name}" for c in CRITERIA])
def test_criterion(criterion, capsys):
    start = time.perf_counter()
    verdict = run_criterion(criterion, SEED)
    elapsed = time.perf_counter() - start
    in_budget = elapsed < BUDGET_SECONDS[criterion.number]
    note = "" if verdict.ok else f" first failure: {verdict.first_failure}"
    if not in_budget:
        note += f" over the {BUDGET_SECONDS[criterion.number]}s budget"
    _line(capsys, criterion.number, criterion.name, verdict.ok and in_budget, elapsed, note)
    assert verdict.ok, verdict.failures
    assert verdict.checked > 0
    assert in_budget


def test_criterion_11_suite_is_deterministic(capsys):
    cmd = [sys.executable, "-m", "cartan_coh.cli", "suite", "--all", "--seed", str(SEED)]
    start = time.perf_counter()
    first = subprocess.run(cmd, capture_output=True, check=False)
    second = subprocess.run(cmd, capture_output=True, check=False)
    elapsed = time.perf_counter() - start
    same = first.stdout == second.stdout and first.returncode == second.returncode
    ok = same and first.returncode == 0 and len(first.stdout) > 0
    _line(capsys, 11, "suite_determinism", ok, elapsed)
    assert first.returncode == 0, first.stderr.decode()
    assert first.stdout == second.stdout
