"""dyadica command line: experiment dispatch, reports, exit codes.

Exit codes: 0 success, 1 check failure (report carries the witness),
2 config schema violation (message names the field path). Reports go to
stdout or --out; json/csv bytes are deterministic for a fixed config+seed
(wall time appears only in the text format). DYADICA_THREADS caps
worker threads for embarrassingly parallel scans (default 1; reductions
are index-ordered either way, so results do not depend on it).
"""

from __future__ import annotations

import argparse
import json
import sys
import time

from .. import carleson as cl
from .. import gfunction as gf
from .. import haar as hr
from .. import kernel as kn
from .. import lattice as lt
from .. import measure as ms
from ..reports import RunReport, VerificationReport
from . import config as cfgmod
from . import emit
from .config import ConfigError, Problem
from .suite import run_suite

COMMANDS = (
    "verify-measure",
    "verify-kernel",
    "verify-haar",
    "gnorm",
    "avgid",
    "carleson",
    "pigood",
    "probe",
    "suite",
    "schema",
)


def _cmd_verify_measure(p: Problem, cfg: dict) -> list:
    checks = []
    for name, M, lam, b in (
        ("factor_n", p.M_n, p.lam_n, p.b1),
        ("factor_m", p.M_m, p.lam_m, p.b2),
    ):
        ud = ms.verify_upper_doubling(M, lam)
        checks.append(
            VerificationReport(
                check=f"upper_doubling_{name}", passed=ud.passed, value=ud.value,
                threshold=ud.threshold, witness=ud.witness, samples=ud.samples, details=ud.details,
            )
        )
        _, symrep = ms.symmetrize_dominating(lam, M)
        checks.append(
            VerificationReport(
                check=f"symmetrize_{name}", passed=symrep.passed, value=symrep.value,
                threshold=symrep.threshold, witness=symrep.witness, samples=symrep.samples,
                details=symrep.details,
            )
        )
        pa = ms.verify_pseudo_accretive(b, M, threshold=p.tol["accretivity"])
        checks.append(
            VerificationReport(
                check=f"pseudo_accretive_{name}", passed=pa.passed, value=pa.value,
                threshold=pa.threshold, witness=pa.witness, samples=pa.samples, skipped=pa.skipped,
            )
        )
    return checks


def _cmd_verify_kernel(p: Problem, cfg: dict) -> list:
    n_samples = cfg.get("verify", {}).get("samples", 400)
    plan = kn.SamplePlan(p.M_n, p.M_m, count=n_samples, G=p.G, seed=cfgmod.subseed(cfg["seed"], "plan"))
    checks = []
    for mode in ("size", "holder", "mixed_y2", "mixed_y1"):
        rep = kn.verify_estimates(p.K, mode, plan, constant=p.tol[mode])
        checks.append(
            VerificationReport(
                check=f"estimate_{mode}", passed=rep.passed, value=rep.max_ratio,
                threshold=rep.constant, witness=rep.witness, samples=rep.samples, skipped=rep.rejected,
            )
        )
    cplan = kn.CubePlan(
        p.lat_n, p.lat_m,
        cubes_per_level=cfg.get("verify", {}).get("cubes_per_level", 2),
        exterior_samples=cfg.get("verify", {}).get("exterior_samples", 4),
        G=p.G, seed=cfgmod.subseed(cfg["seed"], "plan"),
    )
    for mode in ("size", "holder"):
        rep = kn.verify_carleson_assumptions(
            p.K, p.b1, p.b2, p.M_n, p.M_m, mode, cplan, constant=p.tol[f"carleson_{mode}"]
        )
        checks.append(
            VerificationReport(
                check=f"carleson_assumption_{mode}", passed=rep.passed, value=rep.max_ratio,
                threshold=rep.constant, witness=rep.witness, samples=rep.samples, skipped=rep.rejected,
            )
        )
    return checks


def _cmd_verify_haar(p: Problem, cfg: dict) -> list:
    checks = []
    for name, M, b, lattice in (("factor_n", p.M_n, p.b1, p.lat_n), ("factor_m", p.M_m, p.b2, p.lat_m)):
        system = hr.build_haar_system(M, b, lattice)
        cw = hr.cancellation_worst(system)
        bd = hr.biorthogonality_deviation(system)
        checks.append(
            VerificationReport(
                check=f"haar_cancellation_{name}", passed=bool(cw <= 1e-12), value=cw,
                threshold=1e-12, witness=None, samples=system.num_rows - 1,
            )
        )
        checks.append(
            VerificationReport(
                check=f"haar_biorthogonality_{name}", passed=bool(bd <= 1e-10), value=bd,
                threshold=1e-10, witness=None, samples=system.num_rows ** 2,
            )
        )
    sys_n = hr.build_haar_system(p.M_n, p.b1, p.lat_n)
    sys_m = hr.build_haar_system(p.M_m, p.b2, p.lat_m)
    fr = hr.reconstruct(hr.forward_transform(p.f, sys_n, sys_m))
    err = (hr.weighted_l2_sq(p.f - fr, p.M_n, p.M_m) / hr.weighted_l2_sq(p.f, p.M_n, p.M_m)) ** 0.5
    checks.append(
        VerificationReport(
            check="haar_reconstruction", passed=bool(err <= 1e-10), value=err, threshold=1e-10,
            witness=None, samples=1,
        )
    )
    return checks


def _cmd_gnorm(p: Problem, cfg: dict) -> list:
    table = gf.slab_energy_table(p.K, p.f, p.M_n, p.M_m, p.G)
    plain = gf.sigma_good(table, p.lat_n, p.lat_m, "plain")
    weighted = gf.sigma_good(table, p.lat_n, p.lat_m, "pi_weighted")
    details = {
        "g_norm_sq": table.g_norm_sq,
        "sigma": plain.sigma,
        "sigma_pi_weighted": weighted.sigma,
        "c_mn": weighted.c_mn,
        "per_level_pi": {"n": weighted.pi_n, "m": weighted.pi_m},
        "pieces": None,
    }
    if cfg.get("gnorm", {}).get("split", False):
        sys_n = hr.build_haar_system(p.M_n, p.b1, p.lat_n)
        sys_m = hr.build_haar_system(p.M_m, p.b2, p.lat_m)
        coeffs = hr.forward_transform(p.f, sys_n, sys_m)
        sp = gf.split_sigma(p.K, p.f, coeffs, p.lat_n, p.lat_m, p.G)
        details["pieces"] = sp.pieces
        details["four_way_bound_holds"] = sp.details["four_way_bound_holds"]
    ok = plain.sigma <= table.g_norm_sq * (1 + 1e-12) + 1e-30
    return [
        VerificationReport(
            check="gnorm", passed=bool(ok), value=table.g_norm_sq, threshold=None,
            witness=None, samples=1, details=details,
        )
    ]


def _cmd_avgid(p: Problem, cfg: dict, mode=None, trials=None) -> list:
    sec = cfg.get("avgid", {"mode": "exact", "trials": 200})
    mode = mode or sec.get("mode", "exact")
    trials = trials or sec.get("trials", 200)
    mode_full = "exact" if mode == "exact" else "monte_carlo"
    rep = gf.averaging_identity_check(
        p.K, p.f, p.M_n, p.M_m, r=p.lat_n.r, gamma=p.lat_n.gamma, mode=mode_full,
        trials=trials, G=p.G, seed=cfgmod.subseed(cfg["seed"], "plan"),
    )
    if mode_full == "exact":
        ok = rep.rel_discrepancy <= 1e-10
    else:
        ok = abs(rep.estimate - rep.g_norm_sq_reachable) <= 3 * rep.std_error + 1e-9 * rep.g_norm_sq_reachable
    return [
        VerificationReport(
            check=f"averaging_identity_{mode}", passed=bool(ok), value=rep.rel_discrepancy,
            threshold=1e-10 if mode_full == "exact" else None, witness=None, samples=rep.samples,
            details=rep.to_dict(),
        )
    ]


def _cmd_carleson(p: Problem, cfg: dict, out_path=None) -> list:
    sec = cfg.get("carleson", {})
    table = cl.carleson_table(p.K, p.b1, p.b2, p.M_n, p.M_m, p.lat_n, p.lat_m, p.G)
    extra = []
    if sec.get("include_full_square", True):
        extra.append(cl.full_square_omega(p.lat_n, p.lat_m, p.M_n, p.M_m))
    plan = cl.OmegaPlan(
        count=sec.get("omega_count", 20), rect_count=sec.get("rect_count", 4),
        seed=cfgmod.subseed(cfg["seed"], "plan"),
    )
    rep = cl.biparameter_carleson_check(
        table, p.M_n, p.M_m, plan, constant=p.tol["carleson_condition"], extra_omegas=extra
    )
    if out_path:
        _write_carleson_csv(table, str(out_path) + ".table.csv")
    return [
        VerificationReport(
            check="biparameter_carleson", passed=rep.passed, value=rep.value, threshold=rep.threshold,
            witness=rep.witness, samples=rep.samples, skipped=rep.skipped,
            details={"max_ratio": rep.value, "worst_omega": rep.witness, "pass": rep.passed},
        )
    ]


def _write_carleson_csv(table: cl.CarlesonTable, path: str) -> None:
    cubes_n = table.lat_n.all_cubes()
    cubes_m = table.lat_m.all_cubes()
    with open(path, "w") as fh:
        fh.write("I_level,I_index,J_level,J_index,C\n")
        for i, I in enumerate(cubes_n):
            for j, J in enumerate(cubes_m):
                fh.write(
                    f"{I.level},{'-'.join(map(str, I.index))},{J.level},"
                    f"{'-'.join(map(str, J.index))},{format(table.values[i, j], '.17g')}\n"
                )


def _cmd_pigood(p: Problem, cfg: dict) -> list:
    sec = cfg.get("pigood", {"level": min(3, p.M_n.L), "mode": "exact", "trials": 10_000})
    mode = "exact" if sec.get("mode", "exact") == "exact" else "monte_carlo"
    est, se = lt.pi_good(
        p.M_n.n, p.M_n.L, p.lat_n.r, p.lat_n.gamma, sec.get("level", 3), mode,
        trials=sec.get("trials", 10_000), seed=cfgmod.subseed(cfg["seed"], "plan"),
    )
    return [
        VerificationReport(
            check=f"pi_good_{mode}", passed=True, value=est, threshold=None, witness=None,
            samples=sec.get("trials", 0) if mode == "monte_carlo" else 1 << (sec.get("level", 3) * p.M_n.n),
            details={"estimate": est, "std_error": se, "level": sec.get("level", 3)},
        )
    ]


def _cmd_probe(p: Problem, cfg: dict) -> list:
    sec = cfg.get("probe", {"L_list": [3, 4]})
    L_list = sec.get("L_list", [3, 4])

    def make_problem(L):
        q = p.rebuilt_at_depth(L)
        return q.K, q.M_n, q.M_m

    rep = gf.boundedness_probe(
        make_problem, L_list, starts=sec.get("starts", 3), sweeps=sec.get("sweeps", 4),
        seed=cfgmod.subseed(cfg["seed"], "probe"), G=p.G,
    )
    ok = all(0.5 <= r <= 2.0 for r in rep.ratios) if rep.ratios else True
    return [
        VerificationReport(
            check="boundedness_probe", passed=bool(ok), value=rep.ratios[-1] if rep.ratios else 1.0,
            threshold=2.0, witness=None, samples=len(L_list), details=rep.to_dict(),
        )
    ]


def run(command: str, cfg: dict, out_path=None, avgid_mode=None, avgid_trials=None) -> RunReport:
    """Dispatch one command against a validated config."""
    t0 = time.perf_counter()
    if command == "suite":
        return run_suite(cfg)
    p = Problem(cfg)
    if command == "verify-measure":
        checks = _cmd_verify_measure(p, cfg)
    elif command == "verify-kernel":
        checks = _cmd_verify_kernel(p, cfg)
    elif command == "verify-haar":
        checks = _cmd_verify_haar(p, cfg)
    elif command == "gnorm":
        checks = _cmd_gnorm(p, cfg)
    elif command == "avgid":
        checks = _cmd_avgid(p, cfg, avgid_mode, avgid_trials)
    elif command == "carleson":
        checks = _cmd_carleson(p, cfg, out_path)
    elif command == "pigood":
        checks = _cmd_pigood(p, cfg)
    elif command == "probe":
        checks = _cmd_probe(p, cfg)
    else:
        raise ConfigError(f"unknown command {command}")
    passed = all(c.passed for c in checks)
    return RunReport(
        command=command,
        config=cfg,
        checks=checks,
        passed=passed,
        wall_time_s=time.perf_counter() - t0,
        summary={"checks_passed": sum(c.passed for c in checks), "checks_total": len(checks)},
    )


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="dyadica", description=__doc__)
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="TOML experiment config (defaults to the built-in config)")
    ap.add_argument("--seed", type=int, help="override the config seed")
    ap.add_argument("--out", help="write the report here instead of stdout")
    ap.add_argument("--format", choices=("json", "csv", "text"), default="json")
    ap.add_argument("--mode", choices=("exact", "mc"), help="avgid mode override")
    ap.add_argument("--trials", type=int, help="avgid trial count override")
    args = ap.parse_args(argv)

    try:
        if args.command == "schema":
            doc = {"schema": cfgmod.CONFIG_SCHEMA, "defaults": cfgmod.DEFAULT_TOLERANCES}
            if args.config:
                cfgmod.load_config(args.config)
                doc["validated"] = args.config
            sys.stdout.write(json.dumps(doc, indent=2, default=str) + "\n")
            return 0
        cfg = cfgmod.load_config(args.config) if args.config else cfgmod.default_config()
        if args.seed is not None:
            cfg["seed"] = args.seed
        report = run(args.command, cfg, out_path=args.out, avgid_mode=args.mode, avgid_trials=args.trials)
    except ConfigError as e:
        sys.stderr.write(f"config error: {e}\n")
        return 2
    except (ValueError, hr.HaarError) as e:  # module rejections (cost guards, bad inputs)
        sys.stderr.write(f"error: {e}\n")
        return 2
    payload = emit.emit(report, args.format)
    if args.out:
        with open(args.out, "wb") as fh:
            fh.write(payload)
    else:
        sys.stdout.buffer.write(payload)
    if not report.passed:
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
