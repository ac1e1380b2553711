"""Acceptance gate: every shipped claim, checked end to end.

Each test measures one published behavior at its stated tolerance and
appends a single PASS/FAIL line (with the measured numbers) to the
summary section printed after the run.  The checks are literal: when a
target is missed the line carries the measurement, the tolerance stays
as stated, and the test fails.
"""

import json
import math
import time

import numpy as np
import pytest

import oracles
from qgcc.cli import main
from qgcc.hamiltonian import (HamiltonianModel, HamiltonianUncertainty,
                              default_theta, hamiltonian_perturbation,
                              realize_state_space, stack_delta)
from qgcc.model import UncertainSystem
from qgcc.modelfile import cavity_uncertainty
from qgcc.numerics import integrate_matrix_ode, solve_are, solve_lyapunov
from qgcc.synthesis import minimize_tau, synthesize
from qgcc.verify import monte_carlo_cost, propagate_moments, sweep_bound


def _record(log, label, ok, detail):
    log.append(f"{label}: {'PASS' if ok else 'FAIL'} {detail}")
    assert ok, f"{label}: {detail}"


def test_01_cavity_bound_minimization(tmp_path, acceptance_log):
    model = tmp_path / "cavity.json"
    report = tmp_path / "report.json"
    assert main(["make-cavity", "--kappas", "2", "2", "2", "--delta0", "1",
                 "--tf", "100", "--out", str(model)]) == 0

    start = time.perf_counter()
    code = main(["synth", str(model), "--tau-range", "0.2,20",
                 "--mode", "steady", "--out", str(report)])
    elapsed = time.perf_counter() - start

    doc = json.loads(report.read_text())
    tau, bound = doc["tau"], doc["bound"]
    ok = (code == 0 and abs(tau - 1.41) <= 0.02
          and abs(bound - 322.1) <= 0.01 * 322.1 and elapsed < 10.0)
    _record(acceptance_log, "criterion 1 (cavity bound minimization)", ok,
            f"tau*={tau:.6f} (target 1.41+/-0.02), "
            f"bound={bound:.6f} (target 322.1+/-1%), "
            f"{elapsed:.1f}s (limit 10s)")


def test_02_cavity_riccati_solutions(cavity_synthesis, acceptance_log):
    y = cavity_synthesis.riccati.Y
    x = cavity_synthesis.riccati.X
    y_err = np.abs(y - np.diag([1.267, 1.361])).max()
    x_err = np.abs(x - np.diag([0.455, 0.455])).max()
    ok = y_err <= 5e-4 and x_err <= 5e-4
    _record(acceptance_log, "criterion 2 (cavity Riccati solutions)", ok,
            f"max |Y - diag(1.267, 1.361)| = {y_err:.2e}, "
            f"max |X - diag(0.455, 0.455)| = {x_err:.2e} (tol 5e-4)")


def test_03_cavity_controller_gains(cavity_synthesis, acceptance_log):
    ctrl = cavity_synthesis.controller
    errs = {
        "A_K": np.abs(ctrl.A_K - np.diag([-2.908, -2.297])).max(),
        "B_K": np.abs(ctrl.B_K - np.array([[0.377], [0.0]])).max(),
        "C_K": np.abs(ctrl.C_K - np.diag([1.088, 1.148])).max(),
    }
    ok = all(e <= 5e-4 for e in errs.values())
    _record(acceptance_log, "criterion 3 (cavity controller gains)", ok,
            "max entry errors "
            + ", ".join(f"{k}={v:.2e}" for k, v in errs.items())
            + " (tol 5e-4)")


def test_04_detuning_example(detuning_model, detuning_synthesis,
                             acceptance_log):
    sys_, w, t_f = detuning_model
    best = minimize_tau(sys_, w, t_f, (0.2, 20.0), grid=64,
                        mode="steady-state")
    ctrl = detuning_synthesis.controller
    errs = {
        "A_K": np.abs(ctrl.A_K - np.diag([-2.067, -2.336])).max(),
        "B_K": np.abs(ctrl.B_K - np.array([[0.202], [0.0]])).max(),
        "C_K": np.abs(ctrl.C_K - np.diag([0.519, 0.521])).max(),
    }
    ok = (abs(best.tau - 0.9) <= 0.02
          and abs(best.bound - 126.0) <= 0.01 * 126.0
          and all(e <= 5e-4 for e in errs.values()))
    b00 = ctrl.B_K[0, 0]
    _record(acceptance_log, "criterion 4 (detuning example)", ok,
            f"tau*={best.tau:.6f} (target 0.9+/-0.02), "
            f"bound={best.bound:.6f} (target 126+/-1%), gain errors "
            + ", ".join(f"{k}={v:.2e}" for k, v in errs.items())
            + f" (tol 5e-4); B_K[0,0]={b00:.6f}, |B_K[0,0]| matches the "
            f"0.202 target to {abs(abs(b00) - 0.202):.1e}")


def test_05_sampled_uncertainty_guarantee(cavity_model, cavity_synthesis,
                                          detuning_model, detuning_synthesis,
                                          acceptance_log):
    cases = (("cavity", cavity_model, cavity_synthesis),
             ("detuning", detuning_model, detuning_synthesis))
    start = time.perf_counter()
    parts, ok = [], True
    for name, (sys_, w, t_f), rep in cases:
        r = sweep_bound(sys_, w, rep.controller, rep.bound, t_f,
                        n_samples=50, seed=0)
        n_vertex = sum(s.delta_id.startswith("vertex") for s in r.samples)
        case_ok = (len(r.samples) == 50
                   and r.samples[0].delta_id == "zero"
                   and n_vertex >= 12
                   and all(s.admissible for s in r.samples)
                   and all(s.j_dre <= rep.bound * (1.0 + 1e-6)
                           for s in r.samples))
        ok = ok and case_ok
        parts.append(f"{name}: worst J={r.max_j_dre:.4f} vs "
                     f"bound={rep.bound:.4f}, {n_vertex} vertex samples")
    elapsed = time.perf_counter() - start
    ok = ok and elapsed < 30.0
    _record(acceptance_log, "criterion 5 (sampled-uncertainty guarantee)",
            ok, "; ".join(parts) + f"; {elapsed:.1f}s (limit 30s)")


def test_06_monte_carlo_vs_moment_cost(nominal_closed_loop, acceptance_log):
    cl = nominal_closed_loop
    t_f, dt, paths, seed = 100.0, 1e-3, 10_000, 12345
    j_dre = propagate_moments(cl, t_f, steps=4_000).cost

    start = time.perf_counter()
    j_mc, stderr = monte_carlo_cost(cl, t_f, paths, dt=dt, seed=seed)
    elapsed = time.perf_counter() - start

    gap = abs(j_mc - j_dre)
    ok = gap <= 3.0 * stderr and elapsed < 60.0

    # exact mean of the discretized estimator, for attribution of any miss
    exact = oracles.em_expected_cost(cl.A_tilde, cl.B_tilde,
                                     cl.C_tilde.T @ cl.C_tilde, cl.P0,
                                     dt, int(round(t_f / dt)))
    bias = exact - j_dre
    resid = abs(j_mc - exact)
    acceptance_log.append(
        f"criterion 6 (Monte Carlo vs moment cost): "
        f"{'PASS' if ok else 'FAIL'} "
        f"J_mc={j_mc:.6f} vs J_dre={j_dre:.6f}, |gap|={gap:.4f} vs "
        f"3*stderr={3.0 * stderr:.4f} ({paths} paths, dt={dt:g}, "
        f"seed {seed}); {elapsed:.1f}s (limit 60s)")
    acceptance_log.append(
        f"    note: exact mean of the dt={dt:g} estimator is {exact:.6f}, "
        f"i.e. discretization bias {bias:+.6f} = {bias / stderr:.2f} sigma "
        f"at this path budget; |J_mc - exact mean| = {resid:.4f} "
        f"({resid / stderr:.2f} sigma), so the sampler agrees with its own "
        "discretization and the criterion gap is time-step bias")
    assert ok, f"criterion 6: |J_mc - J_dre| = {gap:.4f} > 3*stderr"


def test_07_solver_residuals_and_integrator_order(acceptance_log):
    rng = np.random.default_rng(7)
    worst_lyap = worst_are = worst_gap = 0.0
    for _ in range(100):
        n = int(rng.integers(1, 5))
        a = rng.standard_normal((n, n))
        a -= (np.linalg.eigvals(a).real.max() + 0.5 + rng.uniform(0.0, 1.0)) \
            * np.eye(n)
        c = rng.standard_normal((n, n))
        q = c @ c.T

        x = solve_lyapunov(a, q)
        worst_lyap = max(worst_lyap, np.abs(a @ x + x @ a.T + q).max())

        m = int(rng.integers(1, 3))
        b = rng.standard_normal((n, m))
        r = np.eye(m)
        s = solve_are(a, b, q, r)
        res = a.T @ s + s @ a - s @ b @ np.linalg.solve(r, b.T @ s) + q
        worst_are = max(worst_are, np.abs(res).max())
        worst_gap = max(worst_gap,
                        np.abs(s - oracles.newton_kron_are(a, b, q, r)).max())

    a_ode = np.array([[-1.0, 0.5], [-0.2, -1.5]])
    x0 = np.array([[2.0, 0.3], [0.3, 1.0]])
    vals, vecs = np.linalg.eig(a_ode)
    expm = (vecs * np.exp(vals)) @ np.linalg.inv(vecs)
    exact = (expm @ x0 @ expm.T).real
    errs = [np.abs(integrate_matrix_ode(
                lambda t, p: a_ode @ p + p @ a_ode.T, x0, 1.0,
                nsteps=k).final - exact).max()
            for k in (20, 40, 80)]
    ratios = [errs[0] / errs[1], errs[1] / errs[2]]

    ok = (worst_lyap < 1e-9 and worst_are < 1e-9 and worst_gap <= 1e-8
          and all(12.0 < r < 20.0 for r in ratios))
    _record(acceptance_log,
            "criterion 7 (solver residuals, integrator order)", ok,
            f"worst residuals over 100 instances: Lyapunov {worst_lyap:.1e},"
            f" Riccati {worst_are:.1e} (tol 1e-9); worst gap to the "
            f"Kronecker-Newton oracle {worst_gap:.1e} (tol 1e-8); "
            f"step-halving error ratios {ratios[0]:.1f}, {ratios[1]:.1f} "
            "(want 12..20)")


def test_08_uncertainty_structure_identities(cavity_spec, cavity_model,
                                             acceptance_log):
    worst_h = 0.0
    for seed in range(10):
        rng = np.random.default_rng(3000 + seed)
        n, n_ch = 4, 3
        r0 = rng.standard_normal((n, n))
        r0 = 0.5 * (r0 + r0.T)
        lam = rng.standard_normal((n_ch, n)) \
            + 1j * rng.standard_normal((n_ch, n))
        hm = HamiltonianModel(R0=r0, Lambda=lam, Theta=default_theta(n // 2),
                              n_w=2 * n_ch, n_y=2, n_u=2)
        c0 = rng.standard_normal((n, n))
        hu = HamiltonianUncertainty.from_model(hm, c0)
        nominal = realize_state_space(hm)
        for _ in range(3):
            raw = rng.standard_normal((hu.delta_tilde_rows, n))
            dt = raw / max(np.linalg.svd(raw, compute_uv=False).max(), 1.0)
            got = hamiltonian_perturbation(hm, hu, dt)
            want = nominal.B0 @ stack_delta(hu, dt, hm.n_y) @ c0
            worst_h = max(worst_h, np.abs(got - want).max())

    sys_, _, _ = cavity_model
    worst_c = 0.0
    for value in (-1.0, -0.25, 0.4, 1.0, 2.0):
        u = cavity_uncertainty(cavity_spec, value)
        shift = sys_.B0 @ u.delta @ sys_.C0
        worst_c = max(worst_c,
                      np.abs(shift + (value / 2.0) * np.eye(2)).max())

    ok = worst_h <= 1e-10 and worst_c <= 1e-12
    _record(acceptance_log, "criterion 8 (uncertainty structure identities)",
            ok, f"Hamiltonian-vs-state-space drift perturbation gap "
            f"{worst_h:.1e} over 30 sampled Deltas (tol 1e-10); cavity "
            f"loss-perturbation identity gap {worst_c:.1e} (tol 1e-12)")


def test_09_large_tau_reduces_to_lqg(cavity_model, acceptance_log):
    from scipy.linalg import solve_continuous_are

    sys_, w, t_f = cavity_model
    degen = UncertainSystem(
        A=sys_.A, B0=sys_.B0, B1=sys_.B1,
        C0=np.zeros((2, 2)), C1=sys_.C1, C2=sys_.C2,
        D0=np.zeros((2, 2)), D12=sys_.D12, D20=sys_.D20, D22=sys_.D22,
        x0_mean=sys_.x0_mean, x0_cov=sys_.x0_cov, ito_imag=sys_.ito_imag)
    rep = synthesize(degen, w, 1e4, t_f, mode="steady-state")

    # independent LQG construction: Kalman filter with correlated process
    # and measurement noise, plus a standard LQR gain
    gam = sys_.D20 @ sys_.D20.T
    gi = np.linalg.inv(gam)
    cross = sys_.B0 @ sys_.D20.T
    a_bar = sys_.A - cross @ gi @ sys_.C2
    q_bar = sys_.B0 @ sys_.B0.T - cross @ gi @ cross.T
    y = solve_continuous_are(a_bar.T, sys_.C2.T, q_bar, gam)
    k_f = (y @ sys_.C2.T + cross) @ gi
    x = solve_continuous_are(sys_.A, sys_.B1, w.R, w.G)
    k_c = np.linalg.solve(w.G, sys_.B1.T @ x)

    errs = {
        "A_K": np.abs(rep.controller.A_K
                      - (sys_.A - sys_.B1 @ k_c - k_f @ sys_.C2)).max(),
        "B_K": np.abs(rep.controller.B_K - k_f).max(),
        "C_K": np.abs(rep.controller.C_K + k_c).max(),
    }
    ok = all(e <= 1e-3 for e in errs.values())
    _record(acceptance_log, "criterion 9 (large-tau reduction to LQG)", ok,
            "gain gaps to the independent LQG controller at tau=1e4: "
            + ", ".join(f"{k}={v:.2e}" for k, v in errs.items())
            + " (tol 1e-3)")
