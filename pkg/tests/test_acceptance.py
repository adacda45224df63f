"""Acceptance battery at full scale: one test per criterion, stated tolerances.

Each test prints a single PASS/FAIL line for its criterion. Runtime bounds
from the criteria are asserted where stated.
"""

import subprocess
import sys
import time

import numpy as np
import pytest

from dyadica.harness import suite as st


def _report(name, rep, elapsed=None, budget=None):
    status = "PASS" if rep.passed else "FAIL"
    extra = f" value={rep.value:.6g}"
    if budget is not None:
        extra += f" ({elapsed:.2f}s <= {budget}s)"
    print(f"[{status}] {name}:{extra}")


def test_criterion_01_haar_suite():
    # 50 random (mu, b) at n=m=1, L=4: cancellation <= 1e-12 * ||b|| mu(I),
    # biorthogonality <= 1e-10, reconstruction <= 1e-10; runtime <= 10 s
    t0 = time.perf_counter()
    rep = st.criterion_1_haar_suite(instances=50, L=4)
    dt = time.perf_counter() - t0
    _report("criterion 1 (haar suite)", rep, dt, 10)
    assert rep.passed
    assert dt <= 10.0
    assert rep.details["worst_cancellation"] <= 1e-12
    assert rep.details["worst_biorthogonality"] <= 1e-10
    assert rep.details["worst_reconstruction_rel"] <= 1e-10


def test_criterion_02_parseval():
    rep = st.criterion_2_parseval(instances=20, L=4)
    _report("criterion 2 (parseval degeneration)", rep)
    assert rep.passed
    assert rep.value <= 1e-10


def test_criterion_03_embedding():
    # 1000 instances, ratio <= 4 on every one, at least one >= 1; <= 30 s
    t0 = time.perf_counter()
    rep = st.criterion_3_embedding(instances=1000, L=4)
    dt = time.perf_counter() - t0
    _report("criterion 3 (carleson embedding)", rep, dt, 30)
    assert rep.passed
    assert dt <= 30.0
    assert rep.details["max_ratio"] <= 4.0
    assert rep.details["achieved_ratio_ge_1"]
    assert rep.details["packing_violations"] == 0


def test_criterion_04_averaging_identity():
    # exact: all 64 shift pairs at n=m=1, L=3, r=1, gamma=1/4, 5 random f,
    # relative discrepancy <= 1e-10 against the reachable target; MC at L=6
    # with 200 trials within 3 standard errors; runtime <= 2 min
    t0 = time.perf_counter()
    rep = st.criterion_4_averaging(exact_fs=5, mc_trials=200, mc_L=6, G=4)
    dt = time.perf_counter() - t0
    _report("criterion 4 (averaging identity)", rep, dt, 120)
    assert rep.passed
    assert dt <= 120.0
    assert rep.details["worst_exact_rel"] <= 1e-10
    assert rep.details["nontrivial_pi_rel"] <= 1e-10
    dev = abs(rep.details["mc_estimate"] - rep.details["mc_target"])
    assert dev <= 3 * rep.details["mc_se"] + 1e-9 * rep.details["mc_target"]


def test_criterion_05_goodness_pi():
    rep = st.criterion_5_goodness(oracle_L=5, pi_trials=10_000)
    _report("criterion 5 (goodness and pi_good)", rep)
    assert rep.passed
    assert rep.value == 0.0  # zero classifier/oracle mismatches
    assert rep.details["r_gt_L_pi_one"]


def test_criterion_06_decay():
    rep = st.criterion_6_decay(cubes=20)
    _report("criterion 6 (geometric decay)", rep)
    assert rep.passed
    assert rep.details["Fk_ok"] and rep.details["Gi_ok"]
    assert rep.value <= 4.0


def test_criterion_07_schur():
    rep = st.criterion_7_schur(draws=200)
    _report("criterion 7 (schur bound)", rep)
    assert rep.passed
    assert rep.value <= rep.threshold


def test_criterion_08_discrimination():
    rep = st.criterion_8_discrimination(L=4, omega_count=20)
    _report("criterion 8 (carleson discrimination)", rep)
    assert rep.passed
    assert rep.details["annihilating_max_ratio"] <= 1e-20
    rel = abs(rep.details["violator_full_square"] - rep.details["closed_form"])
    assert rel / rep.details["closed_form"] <= 0.01
    assert rep.details["violator_flagged"]


def test_criterion_09_probe():
    # probe(L=6)/probe(L=4) in [1/2, 2], verifiers green first; <= 5 min
    t0 = time.perf_counter()
    rep = st.criterion_9_probe(L_pair=(4, 6), verify_first=True)
    dt = time.perf_counter() - t0
    _report("criterion 9 (boundedness probe)", rep, dt, 300)
    assert rep.passed
    assert dt <= 300.0
    assert 0.5 <= rep.value <= 2.0
    assert all(v["passed"] for v in rep.details["verifiers"].values())


def test_criterion_10_determinism(tmp_path):
    # `dyadica suite` twice with one seed: byte-identical reports
    cfg = tmp_path / "suite.toml"
    cfg.write_text(
        "\n".join(
            [
                "seed = 424242",
                "[measure_n]",
                'preset = "uniform"',
                "n = 1",
                "L = 3",
                "[measure_m]",
                'preset = "uniform"',
                "n = 1",
                "L = 3",
                "[suite]",
                'profile = "quick"',
            ]
        )
    )
    outs = []
    for k in range(2):
        out = tmp_path / f"suite{k}.json"
        proc = subprocess.run(
            [
                sys.executable,
                "-m",
                "dyadica.harness.cli",
                "suite",
                "--config",
                str(cfg),
                "--out",
                str(out),
            ],
            capture_output=True,
        )
        assert proc.returncode == 0, proc.stderr.decode()
        outs.append(out.read_bytes())
    identical = outs[0] == outs[1]
    print(f"[{'PASS' if identical else 'FAIL'}] criterion 10 (determinism): byte-identical={identical}")
    assert identical
