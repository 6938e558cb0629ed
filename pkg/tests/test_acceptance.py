from __future__ import annotations

import subprocess
import sys
from pathlib import Path

import pytest

from toeplab import acceptance

from conftest import ACCEPTANCE_LINES

ROOT = Path(__file__).resolve().parents[1]
BASELINE = ROOT / "configs" / "baseline.json"


@pytest.fixture(scope="module")
def results():
    out = {}
    for r in acceptance.run(echo=print):
        out[r.id] = r
        ACCEPTANCE_LINES.append(r.line())
    return out


@pytest.mark.parametrize("cid", sorted(acceptance.CHECKS))
def test_criterion(results, cid):
    r = results[cid]
    assert r.passed, f"criterion {cid} ({r.title}) failed: {r.details}"
    assert r.within_time, f"criterion {cid} took {r.elapsed:.1f}s, limit {acceptance.RUNTIME_LIMITS[cid]}s"


def report_all(cwd):
    proc = subprocess.run([sys.executable, "-m", "toeplab.cli", "report-all", "--config", str(BASELINE),
                           "--out", "report.json"], capture_output=True, text=True, cwd=cwd)
    return proc.returncode, (Path(cwd) / "report.json").read_bytes()


def test_criterion_16_determinism(tmp_path):
    (tmp_path / "a").mkdir()
    (tmp_path / "b").mkdir()
    code_a, bytes_a = report_all(tmp_path / "a")
    code_b, bytes_b = report_all(tmp_path / "b")
    same = bytes_a == bytes_b and code_a == code_b
    ok = same and code_a == 0
    ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] 16 determinism (byte-identical={same}, exit={code_a})")
    assert same
    assert code_a == 0, f"report-all exit {code_a} on the baseline config"
