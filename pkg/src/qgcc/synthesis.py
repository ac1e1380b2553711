"""Guaranteed-cost controller synthesis.

Pipeline: check the structural assumptions, solve a coupled pair of
Riccati equations (a forward filter equation and a backward control
equation, both carrying uncertainty terms scaled by a parameter tau),
verify the spectral coupling condition rho(Y X) < tau, build the
output-feedback controller gains, and evaluate the guaranteed cost bound.
minimize_tau sweeps tau on a log grid and refines the best point by
golden section, since the bound is smooth inside the feasible set but
the set's edges (Riccati escape, coupling failure) have to be found by
probing.

Cost convention: the quadratic cost is (1/2) integral of
<x' R x + u' G u> dt, and the bound V_tau reported here is an upper bound
for that quantity over every admissible uncertainty.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import (
    Blowup,
    InfeasibleSynthesis,
    InvalidSpec,
    NoFeasibleTau,
    NotPositive,
    NotPSD,
    NumericError,
    SingularCoupling,
)
from .model import Controller, CostWeights, UncertainSystem
from .numerics import (
    OdeTrajectory,
    integrate_matrix_ode,
    newton_riccati,
    spectral_radius,
)

_C0_FLOOR = 1e-10          # uniform positivity floor for the filter solution
_PSD_TOL = 1e-9            # PSD slack for the control solution
_COUPLING_SLACK = 1e-9     # rho_max must clear tau by this much
_COND_LIMIT = 1e12         # condition ceiling for I - Y X / tau
_STEADY_FACTOR = 50.0      # horizon >= 50 / slowest decay rate => steady mode

MatrixOrTrajectory = Union[np.ndarray, OdeTrajectory]


# ---------------------------------------------------------------------------
# tau-scaled notation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TauNotation:
    """The tau-scaled weights entering both Riccati equations."""

    tau: float
    R_tau: np.ndarray
    G_tau: np.ndarray
    Upsilon_tau: np.ndarray

    @classmethod
    def build(cls, sys: UncertainSystem, w: CostWeights,
              tau: float) -> "TauNotation":
        if not (tau > 0.0 and math.isfinite(tau)):
            raise InfeasibleSynthesis(f"tau must be positive, got {tau}")
        r_tau = w.R + tau * sys.C0.T @ sys.C0
        g_tau = w.G + tau * sys.D0.T @ sys.D0
        ups = tau * sys.C0.T @ sys.D0
        if np.linalg.eigvalsh(0.5 * (g_tau + g_tau.T)).min() <= 0.0:
            raise InfeasibleSynthesis("G_tau is not positive definite")
        return cls(tau=float(tau), R_tau=r_tau, G_tau=g_tau, Upsilon_tau=ups)


# ---------------------------------------------------------------------------
# assumption checks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AssumptionVerdict:
    passed: bool
    factorization_residual: float
    d0: float

    def as_dict(self) -> dict:
        return {
            "passed": bool(self.passed),
            "factorization_residual": float(self.factorization_residual),
            "d0": float(self.d0),
        }


def _psd_sqrt(m: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(0.5 * (m + m.T))
    vals = np.clip(vals, 0.0, None)
    return vecs @ np.diag(np.sqrt(vals)) @ vecs.T


def check_assumption1(sys: UncertainSystem, w: CostWeights) -> AssumptionVerdict:
    """Structural cost factorization and output-noise rank condition.

    Requires C1 = [R^(1/2); 0], D12 = [0; G^(1/2)] (stacked), and
    D20 D20' uniformly positive definite with margin d0 > 1e-10.
    """
    n, n_u = sys.n, sys.n_u
    q = sys.C1.shape[0]
    if q != n + n_u or sys.D12.shape[0] != q:
        resid = math.inf
    else:
        c1_want = np.vstack([_psd_sqrt(w.R), np.zeros((n_u, n))])
        d12_want = np.vstack([np.zeros((n, n_u)), _psd_sqrt(w.G)])
        resid = max(float(np.abs(sys.C1 - c1_want).max()),
                    float(np.abs(sys.D12 - d12_want).max()))
    gam = sys.D20 @ sys.D20.T
    d0 = float(np.linalg.eigvalsh(0.5 * (gam + gam.T)).min()) if gam.size else 0.0
    return AssumptionVerdict(
        passed=(resid < 1e-10 and d0 > 1e-10),
        factorization_residual=resid, d0=d0)


# ---------------------------------------------------------------------------
# Riccati pair
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RiccatiPair:
    """Solutions of the filter/control Riccati pair plus feasibility data."""

    Y: MatrixOrTrajectory
    X: MatrixOrTrajectory
    mode: str                   # "steady-state" or "finite-horizon"
    feasible: bool
    c0_margin: float            # min eigenvalue of Y over the horizon
    rho_max: float              # max spectral radius of Y X over the horizon


def _decay_rate(a: np.ndarray) -> float:
    """Slowest decay rate of a, or 0 when a is not Hurwitz."""
    reals = np.linalg.eigvals(a).real
    if reals.size == 0 or reals.max() >= 0.0:
        return 0.0
    return float(-reals.max())


def pick_mode(sys: UncertainSystem, horizon: float) -> str:
    """Steady-state when the horizon dwarfs the plant's slowest decay."""
    rate = _decay_rate(sys.A)
    if rate > 0.0 and horizon >= _STEADY_FACTOR / rate:
        return "steady-state"
    return "finite-horizon"


def resolve_mode(sys: UncertainSystem, horizon: float, mode: str) -> str:
    if mode == "auto":
        return pick_mode(sys, horizon)
    if mode not in ("steady-state", "finite-horizon"):
        raise InvalidSpec(
            f"mode must be 'auto', 'steady-state' or 'finite-horizon', "
            f"got {mode!r}")
    return mode


def _relax_horizon(sys: UncertainSystem) -> float:
    rate = _decay_rate(sys.A)
    if rate <= 0.0:
        return _STEADY_FACTOR
    return _STEADY_FACTOR / rate


def _filter_pieces(sys: UncertainSystem, tn: TauNotation):
    gam = sys.D20 @ sys.D20.T
    gam_inv = np.linalg.inv(gam)
    abar = sys.A - sys.B0 @ sys.D20.T @ gam_inv @ sys.C2
    quad = sys.C2.T @ gam_inv @ sys.C2 - tn.R_tau / tn.tau
    nv = sys.n_v
    noise = sys.B0 @ (np.eye(nv) - sys.D20.T @ gam_inv @ sys.D20) @ sys.B0.T
    return abar, quad, noise


def solve_filter_riccati(sys: UncertainSystem, w: CostWeights, tau: float,
                         horizon: float, mode: str,
                         nsteps: int = 10_000) -> tuple[MatrixOrTrajectory, float]:
    """Forward filter Riccati solution Y and its positivity margin.

    Finite-horizon mode integrates from Y(0) = x0_cov over [0, horizon];
    steady-state mode relaxes the same equation coarsely and polishes the
    limit with a Newton solve.  Raises Blowup on Riccati escape
    (an infeasible tau) and NotPositive when min eig Y <= 1e-10.
    """
    tn = TauNotation.build(sys, w, tau)
    abar, quad, noise = _filter_pieces(sys, tn)

    def rhs(_t, y):
        return abar @ y + y @ abar.T - y @ quad @ y + noise

    if mode == "finite-horizon":
        traj = integrate_matrix_ode(rhs, sys.x0_cov, horizon, nsteps=nsteps)
        c0 = min(float(np.linalg.eigvalsh(v).min()) for v in traj.values)
        if c0 <= _C0_FLOOR:
            raise NotPositive(
                f"filter solution min eigenvalue {c0:.3e} <= 1e-10")
        return traj, c0

    relax = integrate_matrix_ode(rhs, sys.x0_cov, _relax_horizon(sys), nsteps=400)
    y = newton_riccati(abar.T, quad, noise, relax.final)
    c0 = float(np.linalg.eigvalsh(y).min())
    if c0 <= _C0_FLOOR:
        raise NotPositive(f"filter solution min eigenvalue {c0:.3e} <= 1e-10")
    return y, c0


def solve_control_riccati(sys: UncertainSystem, w: CostWeights, tau: float,
                          horizon: float, mode: str,
                          nsteps: int = 10_000) -> MatrixOrTrajectory:
    """Backward control Riccati solution X, certified symmetric PSD.

    Finite-horizon mode integrates backward from X(horizon) = 0;
    steady-state mode relaxes backward and polishes with Newton.  Raises
    Blowup on escape and NotPSD when the solution dips below PSD.
    """
    tn = TauNotation.build(sys, w, tau)
    g_inv = np.linalg.inv(tn.G_tau)
    ahat = sys.A - sys.B1 @ g_inv @ tn.Upsilon_tau.T
    qhat = tn.R_tau - tn.Upsilon_tau @ g_inv @ tn.Upsilon_tau.T
    quad = sys.B1 @ g_inv @ sys.B1.T - sys.B0 @ sys.B0.T / tau

    def rhs(_t, x):
        # backward equation: -dX/dt = Ahat' X + X Ahat + Qhat - X quad X
        return -(ahat.T @ x + x @ ahat + qhat - x @ quad @ x)

    n = sys.n
    if mode == "finite-horizon":
        traj = integrate_matrix_ode(rhs, np.zeros((n, n)), horizon,
                                    nsteps=nsteps, backward=True)
        worst = min(float(np.linalg.eigvalsh(v).min()) for v in traj.values)
        if worst < -_PSD_TOL:
            raise NotPSD(f"control solution min eigenvalue {worst:.3e}")
        return traj

    relax = integrate_matrix_ode(rhs, np.zeros((n, n)), _relax_horizon(sys),
                                 nsteps=400, backward=True)
    x = newton_riccati(ahat, quad, qhat, relax.initial)
    worst = float(np.linalg.eigvalsh(x).min())
    if worst < -_PSD_TOL:
        raise NotPSD(f"control solution min eigenvalue {worst:.3e}")
    return x


def _paired_values(y: MatrixOrTrajectory, x: MatrixOrTrajectory):
    """Yield (Y_k, X_k) samples; trajectories must share their grid."""
    y_traj = isinstance(y, OdeTrajectory)
    x_traj = isinstance(x, OdeTrajectory)
    if not y_traj and not x_traj:
        yield y, x
        return
    if y_traj != x_traj:
        raise InfeasibleSynthesis(
            "filter and control solutions must both be steady or both sampled")
    if y.times.shape != x.times.shape or not np.allclose(y.times, x.times):
        raise InfeasibleSynthesis("filter and control grids differ")
    for yk, xk in zip(y.values, x.values):
        yield yk, xk


def check_coupling(y: MatrixOrTrajectory, x: MatrixOrTrajectory,
                   tau: float) -> tuple[bool, float]:
    """Spectral coupling condition rho(Y X) < tau over the horizon."""
    rho_max = 0.0
    for yk, xk in _paired_values(y, x):
        rho_max = max(rho_max, spectral_radius(yk @ xk))
    return rho_max < tau - _COUPLING_SLACK, rho_max


def _gains_at(sys: UncertainSystem, tn: TauNotation, y: np.ndarray,
              x: np.ndarray):
    gam = sys.D20 @ sys.D20.T
    innov = y @ sys.C2.T + sys.B0 @ sys.D20.T
    b_k = np.linalg.solve(gam.T, innov.T).T
    coupling = np.eye(sys.n) - y @ x / tn.tau
    cond = float(np.linalg.cond(coupling))
    if not math.isfinite(cond) or cond > _COND_LIMIT:
        raise SingularCoupling(
            f"I - Y X / tau has condition number {cond:.3e}")
    s_inv = np.linalg.inv(coupling)
    c_k = -np.linalg.solve(tn.G_tau, sys.B1.T @ x + tn.Upsilon_tau.T) @ s_inv
    a_k = (sys.A + y @ tn.R_tau / tn.tau - b_k @ sys.C2
           + (sys.B1 + y @ tn.Upsilon_tau / tn.tau) @ c_k
           - b_k @ sys.D22 @ c_k)
    return a_k, b_k, c_k, innov, s_inv


def build_controller(sys: UncertainSystem, w: CostWeights, tau: float,
                     y: MatrixOrTrajectory, x: MatrixOrTrajectory) -> Controller:
    """Output-feedback controller gains from the Riccati pair.

    Steady-state inputs give the constant controller; the controller state
    starts at the plant's initial mean.  For sampled trajectories use
    build_gain_schedule.
    """
    if isinstance(y, OdeTrajectory) or isinstance(x, OdeTrajectory):
        raise InfeasibleSynthesis(
            "build_controller takes steady matrices; "
            "use build_gain_schedule for sampled solutions")
    tn = TauNotation.build(sys, w, tau)
    a_k, b_k, c_k, _, _ = _gains_at(sys, tn, y, x)
    return Controller(A_K=a_k, B_K=b_k, C_K=c_k, x_K0=sys.x0_mean)


@dataclass(frozen=True)
class GainSchedule:
    """Controller gains sampled on the Riccati grid (finite-horizon mode)."""

    times: np.ndarray
    A_K: np.ndarray
    B_K: np.ndarray
    C_K: np.ndarray
    x_K0: np.ndarray

    def frozen_at(self, index: int) -> Controller:
        return Controller(A_K=self.A_K[index], B_K=self.B_K[index],
                          C_K=self.C_K[index], x_K0=self.x_K0)


def build_gain_schedule(sys: UncertainSystem, w: CostWeights, tau: float,
                        y: OdeTrajectory, x: OdeTrajectory) -> GainSchedule:
    """Time-varying gains evaluated at every grid point of the pair."""
    tn = TauNotation.build(sys, w, tau)
    aks, bks, cks = [], [], []
    for yk, xk in _paired_values(y, x):
        a_k, b_k, c_k, _, _ = _gains_at(sys, tn, yk, xk)
        aks.append(a_k)
        bks.append(b_k)
        cks.append(c_k)
    return GainSchedule(times=y.times.copy(), A_K=np.array(aks),
                        B_K=np.array(bks), C_K=np.array(cks),
                        x_K0=sys.x0_mean)


def cost_bound(sys: UncertainSystem, w: CostWeights, tau: float,
               y: MatrixOrTrajectory, x: MatrixOrTrajectory,
               ctrl: Controller | None, horizon: float) -> float:
    """Guaranteed cost bound V_tau for the synthesized controller.

    2 V_tau = x0' X(0) (I - Y0 X(0)/tau)^(-1) x0
              + integral of tr[Y R_tau + B_K (Y C2' + B0 D20')' X (I - Y X/tau)^(-1)]

    evaluated with the steady matrices (constant integrand times horizon)
    or along the sampled trajectories (trapezoid rule).  B_K inside the
    integrand is rebuilt from Y at each sample, so in finite-horizon mode
    the bound uses the time-varying gain; with steady inputs this equals
    the frozen controller's gain and ctrl (kept for interface symmetry)
    is not consulted.
    """
    tn = TauNotation.build(sys, w, tau)
    gam = sys.D20 @ sys.D20.T

    def integrand(yk, xk):
        coupling = np.eye(sys.n) - yk @ xk / tn.tau
        cond = float(np.linalg.cond(coupling))
        if not math.isfinite(cond) or cond > _COND_LIMIT:
            raise SingularCoupling(
                f"I - Y X / tau has condition number {cond:.3e}")
        innov = yk @ sys.C2.T + sys.B0 @ sys.D20.T
        b_k = np.linalg.solve(gam.T, innov.T).T
        term = b_k @ innov.T @ xk @ np.linalg.inv(coupling)
        return float(np.trace(yk @ tn.R_tau + term))

    if isinstance(y, OdeTrajectory):
        vals = np.array([integrand(yk, xk) for yk, xk in _paired_values(y, x)])
        dt = np.diff(y.times)
        integral = float(np.sum(0.5 * (vals[1:] + vals[:-1]) * dt))
        x0_mat = x.values[0]
    else:
        integral = integrand(y, x) * horizon
        x0_mat = x

    x0 = sys.x0_mean
    init_coupling = np.eye(sys.n) - sys.x0_cov @ x0_mat / tn.tau
    init_term = float(x0 @ x0_mat @ np.linalg.solve(init_coupling, x0))
    return 0.5 * (init_term + integral)


# ---------------------------------------------------------------------------
# tau search
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TauSample:
    """One evaluated tau: either a bound or the reason it was infeasible."""

    tau: float
    feasible: bool
    bound: float = math.inf
    rho_max: float = math.nan
    c0_margin: float = math.nan
    fail_reason: str = ""


@dataclass(frozen=True)
class SynthesisReport:
    """Everything a feasible synthesis produced.

    In finite-horizon mode the full time-varying gain schedule rides along
    and the controller field freezes the gains in effect at t = 0.
    """

    controller: Controller
    tau: float
    bound: float
    riccati: RiccatiPair
    assumptions: dict
    horizon: float
    notes: dict = field(default_factory=dict)
    schedule: GainSchedule | None = None


def evaluate_tau(sys: UncertainSystem, w: CostWeights, tau: float,
                 horizon: float, mode: str) -> TauSample:
    """Feasibility probe at one tau; never raises for per-point failures."""
    mode = resolve_mode(sys, horizon, mode)
    try:
        y, c0 = solve_filter_riccati(sys, w, tau, horizon, mode)
        x = solve_control_riccati(sys, w, tau, horizon, mode)
        ok, rho = check_coupling(y, x, tau)
        if not ok:
            return TauSample(tau=tau, feasible=False, rho_max=rho,
                             c0_margin=c0,
                             fail_reason=f"coupling rho={rho:.6g} >= tau")
        bound = cost_bound(sys, w, tau, y, x, None, horizon)
        return TauSample(tau=tau, feasible=True, bound=bound, rho_max=rho,
                         c0_margin=c0)
    except (InfeasibleSynthesis, NumericError) as exc:
        return TauSample(tau=tau, feasible=False,
                         fail_reason=f"{type(exc).__name__}: {exc}")


def _synthesize_at(sys: UncertainSystem, w: CostWeights, tau: float,
                   horizon: float, mode: str) -> SynthesisReport:
    a1 = check_assumption1(sys, w)
    y, c0 = solve_filter_riccati(sys, w, tau, horizon, mode)
    x = solve_control_riccati(sys, w, tau, horizon, mode)
    ok, rho = check_coupling(y, x, tau)
    pair = RiccatiPair(Y=y, X=x, mode=mode, feasible=ok, c0_margin=c0,
                       rho_max=rho)
    if not ok:
        raise InfeasibleSynthesis(
            f"coupling condition failed: rho(YX)={rho:.6g} >= tau={tau:.6g}")
    schedule = None
    if mode == "steady-state":
        ctrl = build_controller(sys, w, tau, y, x)
    else:
        schedule = build_gain_schedule(sys, w, tau, y, x)
        ctrl = schedule.frozen_at(0)
    bound = cost_bound(sys, w, tau, y, x, ctrl, horizon)
    assumptions = {
        "assumption1": a1.as_dict(),
        "assumption2": {
            "filter_positive": {"passed": True, "c0_margin": float(c0)},
            "control_psd": {"passed": True},
            "coupling": {"passed": True, "rho_max": float(rho),
                         "tau": float(tau)},
        },
    }
    return SynthesisReport(controller=ctrl, tau=float(tau),
                           bound=float(bound), riccati=pair,
                           assumptions=assumptions, horizon=float(horizon),
                           schedule=schedule)


def synthesize(sys: UncertainSystem, w: CostWeights, tau: float,
               horizon: float, mode: str = "auto") -> SynthesisReport:
    """Full synthesis at a fixed tau; raises on any infeasibility."""
    mode = resolve_mode(sys, horizon, mode)
    a1 = check_assumption1(sys, w)
    if not a1.passed:
        raise InfeasibleSynthesis(
            "assumption 1 failed: factorization residual "
            f"{a1.factorization_residual:.3e}, d0={a1.d0:.3e}")
    return _synthesize_at(sys, w, tau, horizon, mode)


def minimize_tau(sys: UncertainSystem, w: CostWeights, horizon: float,
                 tau_range: tuple[float, float], grid: int = 64,
                 mode: str = "auto") -> SynthesisReport:
    """Minimize the cost bound over tau.

    Log-spaced grid probe, then golden-section refinement around the best
    feasible grid point down to relative bracket width 1e-4.  The report
    notes record every grid sample and whether the minimizer sits on the
    searched range's edge.
    """
    lo, hi = tau_range
    if not (0.0 < lo < hi):
        raise InfeasibleSynthesis(f"invalid tau range ({lo}, {hi})")
    mode = resolve_mode(sys, horizon, mode)
    a1 = check_assumption1(sys, w)
    if not a1.passed:
        raise InfeasibleSynthesis(
            "assumption 1 failed: factorization residual "
            f"{a1.factorization_residual:.3e}, d0={a1.d0:.3e}")

    taus = np.geomspace(lo, hi, int(grid))
    samples = [evaluate_tau(sys, w, t, horizon, mode) for t in taus]
    feasible = [s for s in samples if s.feasible]
    if not feasible:
        reasons = {s.fail_reason.split(":")[0] for s in samples}
        raise NoFeasibleTau(
            f"no feasible tau in [{lo:.6g}, {hi:.6g}]; "
            f"failure kinds: {sorted(reasons)}")

    best_idx = int(np.argmin([s.bound if s.feasible else math.inf
                              for s in samples]))
    boundary_hit = best_idx in (0, len(samples) - 1)

    def bound_at(t: float) -> float:
        s = evaluate_tau(sys, w, t, horizon, mode)
        return s.bound if s.feasible else math.inf

    a = taus[max(best_idx - 1, 0)]
    b = taus[min(best_idx + 1, len(taus) - 1)]
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = bound_at(c), bound_at(d)
    while (b - a) > 1e-4 * 0.5 * (a + b):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = bound_at(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = bound_at(d)
    tau_star = 0.5 * (a + b)

    candidates = [(samples[best_idx].bound, samples[best_idx].tau)]
    probe = evaluate_tau(sys, w, tau_star, horizon, mode)
    if probe.feasible:
        candidates.append((probe.bound, probe.tau))
    candidates.sort()
    tau_best = candidates[0][1]

    report = _synthesize_at(sys, w, tau_best, horizon, mode)
    notes = dict(report.notes)
    notes.update({
        "tau_search": {
            "range": [float(lo), float(hi)],
            "grid": int(grid),
            "boundary_hit": bool(boundary_hit),
            "n_feasible": len(feasible),
        },
        "grid_samples": [
            {"tau": float(s.tau), "feasible": bool(s.feasible),
             "bound": (float(s.bound) if s.feasible else None),
             "rho_max": (float(s.rho_max) if math.isfinite(s.rho_max) else None),
             "fail_reason": s.fail_reason or None}
            for s in samples
        ],
    })
    return SynthesisReport(controller=report.controller, tau=report.tau,
                           bound=report.bound, riccati=report.riccati,
                           assumptions=report.assumptions,
                           horizon=report.horizon, notes=notes,
                           schedule=report.schedule)
