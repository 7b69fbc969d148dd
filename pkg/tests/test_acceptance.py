"""Acceptance suite: one test per criterion, one printed verdict line each.

Every tolerance and configuration here is frozen; the random streams are
pinned by the master seed, so each criterion is an exact, repeatable check.
"""

import json
import subprocess
import sys
import time

import numpy as np

from farboot.bootstrap import BootstrapConfig, bootstrap_statistics
from farboot.estimation import FixedRule, LogRule, PolyRule, fit
from farboot.harness import default_config, rate_condition_table, run_experiment
from farboot.hilbert import HsOp, adjoint, hs_norm, kron, op_norm, FuncVec
from farboot.mallows import mallows_bruteforce, mallows_d2
from farboot.process import (
    ExponentialSpectrum,
    FarModel,
    InnovationSpec,
    PolynomialSpectrum,
    dense_random_psi,
    diagonal_exponential_psi,
    ma_closed_form_path,
    simulate,
)
from farboot.rng import derive_seed, make_rng

MASTER = 20260808


def _verdict(number: int, name: str, ok: bool, detail: str = "") -> None:
    status = "PASS" if ok else "FAIL"
    line = f"[acceptance {number}] {name}: {status}"
    if detail:
        line += f" ({detail})"
    print(line, flush=True)
    assert ok, line


# --------------------------------------------------------------------------
# 1. Algebraic identity suite


def test_criterion_1_algebraic_identities():
    t0 = time.perf_counter()
    dims = (3, 5, 10)
    sizes = (50, 200, 1000)
    worst = 0.0
    count = 0
    for i in range(100):
        d = dims[i % 3]
        n = sizes[(i // 3) % 3]
        seed = derive_seed(MASTER, 10, i)
        if i % 2 == 0:
            psi = diagonal_exponential_psi(0.9, 0.5, d)
        else:
            psi = dense_random_psi(0.7, d, seed=seed)
        model = FarModel(psi, InnovationSpec(d, ExponentialSpectrum(1.0, 0.5)))
        s = simulate(model, n, burn_in=0, seed=seed)
        f = fit(s, FixedRule(1 + i % min(3, d)))
        errs = []
        # projection identities
        errs.append(hs_norm(f.pi_hat_k - f.gamma_hat @ f.gamma_dagger))
        errs.append(hs_norm(f.pi_hat_k - f.gamma_dagger @ f.gamma_hat))
        errs.append(hs_norm(f.psi_hat @ f.pi_hat_k - f.psi_hat))
        # score-operator identities against the simulation truth
        sn = s.eps.T @ s.xs[:n]
        errs.append(np.linalg.norm(sn - n * (f.c_hat.mat - psi.mat @ f.gamma_hat.mat), "fro"))
        lhs = f.psi_hat.mat - psi.mat @ f.pi_hat_k.mat
        errs.append(np.linalg.norm(lhs - (sn / n) @ f.gamma_dagger.mat, "fro"))
        # exact second-moment expansion of the raw residuals
        e = f.raw_residuals
        p, g, c = f.psi_hat.mat, f.gamma_hat.mat, f.c_hat.mat
        rhs = (
            g - c @ p.T - p @ c.T + p @ g @ p.T
            + (np.outer(s.xs[-1], s.xs[-1]) - np.outer(s.xs[0], s.xs[0])) / n
        )
        errs.append(np.linalg.norm((e.T @ e) / n - rhs, "fro"))
        # moving-average representation of the generated path
        ma = ma_closed_form_path(psi, s.xs[0], s.eps)
        errs.append(float(np.max(np.abs(ma - s.xs))))
        worst = max(worst, max(errs))
        count += 1
    elapsed = time.perf_counter() - t0
    _verdict(
        1,
        "algebraic identity suite",
        count == 100 and worst <= 1e-9 and elapsed < 30,
        f"100 fits, worst residual {worst:.2e}, {elapsed:.1f}s",
    )


# --------------------------------------------------------------------------
# 2. Norm-calculus suite


def test_criterion_2_norm_calculus():
    t0 = time.perf_counter()
    rng = make_rng(MASTER, 20)
    worst = 0.0
    for _ in range(500):
        d = int(rng.integers(2, 9))
        a = HsOp(rng.standard_normal((d, d)))
        b = HsOp(rng.standard_normal((d, d)))
        s_op = HsOp(rng.standard_normal((d, d)))
        y, z = FuncVec(rng.standard_normal(d)), FuncVec(rng.standard_normal(d))
        # rank-one calculus: transposition and composition rules
        worst = max(worst, hs_norm(adjoint(kron(y, z)) - kron(z, y)))
        lhs = b @ kron(y, z) @ adjoint(a)
        worst = max(worst, hs_norm(lhs - kron(a(y), b(z))))
        worst = max(
            worst,
            abs(hs_norm(kron(y, z)) - np.linalg.norm(y.coeffs) * np.linalg.norm(z.coeffs)),
        )
        # norm inequalities (violations measured, must stay within slack)
        worst = max(worst, op_norm(a) - hs_norm(a))
        worst = max(worst, hs_norm(a @ s_op @ b) - op_norm(a) * hs_norm(s_op) * op_norm(b))
        # eigenvalue stability under symmetric perturbation
        sym = a.mat @ a.mat.T
        pert = 0.1 * (b.mat + b.mat.T)
        lam1 = np.sort(np.linalg.eigvalsh(sym))[::-1]
        lam2 = np.sort(np.linalg.eigvalsh(sym + pert))[::-1]
        worst = max(worst, float(np.max(np.abs(lam1 - lam2)) - np.linalg.norm(pert, 2)))
    elapsed = time.perf_counter() - t0
    _verdict(
        2,
        "norm-calculus suite",
        worst <= 1e-10 and elapsed < 10,
        f"500 instances, worst slack {worst:.2e}, {elapsed:.1f}s",
    )


# --------------------------------------------------------------------------
# 3. Exact optimal-assignment distance


def test_criterion_3_mallows_exactness():
    t0 = time.perf_counter()
    rng = make_rng(MASTER, 30)
    worst = 0.0
    for i in range(200):
        m = int(rng.integers(2, 8))
        if i % 2 == 0:
            d = int(rng.choice([1, 2, 5]))
            xs, ys = rng.standard_normal((m, d)), rng.standard_normal((m, d))
        else:
            m = min(m, 6)
            dd = int(rng.choice([2, 3]))
            xs = rng.standard_normal((m, dd, dd)).reshape(m, -1)
            ys = rng.standard_normal((m, dd, dd)).reshape(m, -1)
        worst = max(worst, abs(mallows_d2(xs, ys) - mallows_bruteforce(xs, ys)))
    axiom_worst = 0.0
    for _ in range(200):
        m, d = int(rng.integers(2, 10)), int(rng.integers(1, 5))
        xs, ys, zs = (rng.standard_normal((m, d)) for _ in range(3))
        dxy, dyx = mallows_d2(xs, ys), mallows_d2(ys, xs)
        axiom_worst = max(axiom_worst, abs(dxy - dyx))
        axiom_worst = max(axiom_worst, mallows_d2(xs, xs[rng.permutation(m)]))
        axiom_worst = max(axiom_worst, mallows_d2(xs, zs) - dxy - mallows_d2(ys, zs))
        shift = rng.standard_normal(d)
        axiom_worst = max(axiom_worst, abs(mallows_d2(xs + shift, ys + shift) - dxy))
        axiom_worst = max(axiom_worst, abs(mallows_d2(2.0 * xs, 2.0 * ys) - 2.0 * dxy))
    elapsed = time.perf_counter() - t0
    _verdict(
        3,
        "assignment solver vs brute force and metric axioms",
        worst <= 1e-10 and axiom_worst <= 1e-10 and elapsed < 30,
        f"worst oracle gap {worst:.2e}, worst axiom slack {axiom_worst:.2e}, {elapsed:.1f}s",
    )


# --------------------------------------------------------------------------
# 4. Bootstrap lag-1 centering discrimination


def test_criterion_4_lag1_centering_discrimination():
    t0 = time.perf_counter()
    model = FarModel(
        diagonal_exponential_psi(0.93, 0.8, 5), InnovationSpec(5, ExponentialSpectrum(1.0, 0.5))
    )
    n, B = 200, 5000
    correct = 0
    eligible = 0
    for ds in range(100):
        s = simulate(model, n, burn_in=500, seed=derive_seed(MASTER, 40, ds))
        f = fit(s, FixedRule(2))
        stats = bootstrap_statistics(
            f, BootstrapConfig(B=B, x0_policy="zero", seed=derive_seed(MASTER, 41, ds))
        )
        projected = f.c_hat.mat @ f.pi_hat_k.mat
        separation = np.linalg.norm(f.c_hat.mat - projected, "fro")
        band = np.sqrt(np.sum(stats.cs.var(axis=0, ddof=1)) / B)
        if separation > 10 * band:
            eligible += 1
            m = stats.cs.mean(axis=0)
            if np.linalg.norm(m - projected, "fro") < np.linalg.norm(m - f.c_hat.mat, "fro"):
                correct += 1
    elapsed = time.perf_counter() - t0
    _verdict(
        4,
        "bootstrap mean of lag-1 statistic centers at the projected estimate",
        correct >= 95 and elapsed < 300,
        f"{correct}/100 datasets discriminate ({eligible} eligible), {elapsed:.0f}s",
    )


# --------------------------------------------------------------------------
# 5. Innovation-law trend (t1)


def test_criterion_5_innovation_law_trend():
    t0 = time.perf_counter()
    report = run_experiment("t1", default_config("t1", master_seed=MASTER))
    elapsed = time.perf_counter() - t0
    med = report.medians
    _verdict(
        5,
        "residual-law distance decreases and clears the noise floor",
        report.strictly_decreasing
        and report.floor_ratio_energy > 3.0
        and report.verdict == "pass"
        and elapsed < 300,
        f"medians {['%.3f' % m for m in med]}, energy ratio {report.floor_ratio_energy:.2f}, "
        f"{elapsed:.0f}s",
    )


# --------------------------------------------------------------------------
# 6. Bootstrap statistic trends (t2, t3, t4) and the centering contrast


def test_criterion_6_bootstrap_trends():
    t0 = time.perf_counter()
    details = []
    ok = True
    naive_contrast_ok = False
    for exp in ("t2", "t3", "t4"):
        report = run_experiment(exp, default_config(exp, master_seed=MASTER))
        good = (
            report.trend_violations <= 1
            and report.floor_ratio_energy > 3.0
            and report.verdict == "pass"
        )
        ok = ok and good
        details.append(
            f"{exp}: viol {report.trend_violations}, ratio {report.floor_ratio_energy:.1f}"
        )
        if exp == "t4":
            naive = report.extras["naive_centering_medians"]
            idx = report.config["n_grid"].index(200)
            naive_contrast_ok = naive[idx] > report.medians[idx]
            details.append(
                f"t4 naive {naive[idx]:.3f} > corrected {report.medians[idx]:.3f} at n=200"
            )
    elapsed = time.perf_counter() - t0
    _verdict(
        6,
        "bootstrap mean/covariance/lag-1 trends with correct centerings",
        ok and naive_contrast_ok and elapsed < 900,
        "; ".join(details) + f", {elapsed:.0f}s",
    )


# --------------------------------------------------------------------------
# 7. Truncation-rate tables


def test_criterion_7_rate_tables():
    t0 = time.perf_counter()
    grid = (10**3, 10**4, 10**5, 10**6)
    exp_table = rate_condition_table(ExponentialSpectrum(1.0, 0.5), grid, LogRule(0.5, 0.05))
    poly_table = rate_condition_table(PolynomialSpectrum(1.0, 2.0), grid, PolyRule(2.0, 0.01))
    ok = (
        exp_table.gap_load_decreasing
        and exp_table.inv_ratio_bounded
        and exp_table.inv_lam_bounded
        and poly_table.gap_load_decreasing
        and poly_table.inv_ratio_bounded
        and poly_table.inv_lam_bounded
    )
    # spot values reproduce hand arithmetic exactly
    ok = ok and LogRule(0.5, 0.05).bound(1000) == 0          # clamps to level 1
    ok = ok and PolyRule(2.0, 0.01).bound(10_000) == 1       # floor(10^0.16)
    fixed = rate_condition_table(ExponentialSpectrum(1.0, 0.5), grid, FixedRule(1))
    a1 = 0.25  # first spacing of the exponential spectrum with c=1, rho=0.5
    ok = ok and all(r.gap_load == (1.0 / r.n) / a1**2 for r in fixed.rows)
    # one-level truncation keeps the load decaying exactly like 1/n
    ratios = [fixed.rows[i].gap_load / fixed.rows[i + 1].gap_load for i in range(3)]
    ok = ok and all(abs(r - 10.0) < 1e-12 for r in ratios)
    elapsed = time.perf_counter() - t0
    _verdict(
        7,
        "rate-condition tables monotone/bounded with exact spot values",
        ok and elapsed < 5,
        f"{elapsed:.2f}s",
    )


# --------------------------------------------------------------------------
# 8. Byte-identical reruns of the validation front door


def test_criterion_8_reproducibility(tmp_path):
    config = tmp_path / "mc.toml"
    config.write_text(
        """
[model]
dim = 4
burn_in = 300

[model.psi]
kind = "diagonal_exponential"
gamma = 0.9
rho = 0.7

[model.spectrum]
kind = "exponential"
c = 1.0
rho = 0.5

[fit]
k_rule = "log:0.75:0.005"

[mc]
n_grid = [60, 120]
R = 50
B = 50
master_seed = 424242
"""
    )
    outs = []
    for tag in ("runA", "runB"):
        r = subprocess.run(
            [
                sys.executable, "-m", "farboot.cli", "validate",
                "--experiment", "t3", "--config", str(config),
                "--out-dir", str(tmp_path / tag),
            ],
            capture_output=True,
            text=True,
        )
        assert r.returncode in (0, 1), r.stderr
        outs.append((r.stdout, (tmp_path / tag / "report.json").read_bytes(),
                     (tmp_path / tag / "raw_values.csv").read_bytes()))
    same = outs[0] == outs[1]
    _verdict(8, "validate reruns are byte-identical", same, "stdout, report.json, raw CSV")
