"""Solver unit tests, cross-checked against independent oracles."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from qgcc.errors import Blowup, NoStabilizingSolution, NotHurwitz
from qgcc.numerics import (OdeTrajectory, integrate_matrix_ode,
                           newton_riccati, solve_are, solve_lyapunov,
                           spectral_radius)


def _hurwitz(rng, n):
    a = rng.standard_normal((n, n))
    shift = max(np.linalg.eigvals(a).real.max(), 0.0)
    return a - (shift + 0.5 + rng.uniform(0.0, 1.0)) * np.eye(n)


def _psd(rng, n):
    c = rng.standard_normal((n, n))
    return c @ c.T


class TestLyapunov:
    def test_scalar_closed_form(self):
        # a x + x a + q = 0 -> x = -q / (2a)
        x = solve_lyapunov(np.array([[-2.0]]), np.array([[4.0]]))
        assert abs(x[0, 0] - 1.0) < 1e-14

    @settings(max_examples=30, deadline=None)
    @given(st.integers(1, 4), st.integers(0, 10_000))
    def test_residual_random(self, n, seed):
        rng = np.random.default_rng(seed)
        a, q = _hurwitz(rng, n), _psd(rng, n)
        x = solve_lyapunov(a, q)
        resid = np.linalg.norm(a @ x + x @ a.T + q, "fro")
        assert resid < 1e-9 * (1.0 + np.linalg.norm(q, "fro"))
        assert np.allclose(x, x.T)

    def test_rejects_unstable(self):
        with pytest.raises(NotHurwitz):
            solve_lyapunov(np.array([[1.0]]), np.array([[1.0]]))

    def test_rejects_marginal(self):
        with pytest.raises(NotHurwitz):
            solve_lyapunov(np.zeros((1, 1)), np.eye(1))


class TestAre:
    @settings(max_examples=25, deadline=None)
    @given(st.integers(1, 4), st.integers(1, 2), st.integers(0, 10_000))
    def test_matches_independent_newton(self, n, m, seed):
        rng = np.random.default_rng(seed)
        a = rng.standard_normal((n, n))
        b = rng.standard_normal((n, m))
        q = _psd(rng, n) + 0.1 * np.eye(n)
        r = _psd(rng, m) + 0.5 * np.eye(m)
        x = solve_are(a, b, q, r)
        resid = a.T @ x + x @ a + q - x @ b @ np.linalg.solve(r, b.T) @ x
        assert np.linalg.norm(resid, "fro") < 1e-9 * (1 + np.linalg.norm(q))
        x_oracle = oracles.newton_kron_are(a, b, q, r, x)
        assert np.abs(x - x_oracle).max() < 1e-8
        # stabilizing: closed loop Hurwitz
        acl = a - b @ np.linalg.solve(r, b.T @ x)
        assert np.linalg.eigvals(acl).real.max() < 0.0

    def test_matches_scipy(self):
        from scipy.linalg import solve_continuous_are
        rng = np.random.default_rng(5)
        a = rng.standard_normal((3, 3))
        b = rng.standard_normal((3, 2))
        q, r = _psd(rng, 3) + 0.1 * np.eye(3), np.eye(2)
        assert np.allclose(solve_are(a, b, q, r),
                           solve_continuous_are(a, b, q, r), atol=1e-9)

    def test_uncontrollable_unstable_mode(self):
        # unstable mode invisible to b: no stabilizing solution exists
        a = np.diag([1.0, -1.0])
        b = np.array([[0.0], [1.0]])
        with pytest.raises(NoStabilizingSolution):
            solve_are(a, b, np.eye(2), np.eye(1))


class TestNewtonRiccati:
    def test_sign_indefinite_quadratic_term(self):
        # a's + sa + q + 0.5 s^2 = 0: the sign the dedicated ARE solver
        # will not take; scalar closed form s = 6 - sqrt(34) per axis
        a = -3.0 * np.eye(2)
        q = np.eye(2)
        m = -0.5 * np.eye(2)  # newton_riccati solves a'x + xa + q - xmx = 0
        x = newton_riccati(a, m, q, np.zeros((2, 2)))
        want = 6.0 - np.sqrt(34.0)
        assert np.abs(x - want * np.eye(2)).max() < 1e-10

    def test_worst_case_rate_matches_game_oracle(self, nominal_closed_loop,
                                                 cavity_synthesis):
        # independent route to the steady bound: a game Riccati equation on
        # the assembled closed loop, never touching the synthesis solvers
        cl = nominal_closed_loop
        tau = cavity_synthesis.tau
        ztz = np.zeros((cl.dim, cl.dim))
        ztz[:2, :2] = np.eye(2)  # uncertainty output reads plant state only
        q = cl.C_tilde.T @ cl.C_tilde + tau * ztz
        s = oracles.game_riccati(cl.A_tilde, cl.B_tilde, q, tau)
        rate = float(np.trace(cl.B_tilde.T @ s @ cl.B_tilde))
        assert rate == pytest.approx(oracles.FROZEN_CAVITY["rate"], rel=1e-9)
        horizon = cavity_synthesis.horizon
        assert cavity_synthesis.bound == pytest.approx(0.5 * rate * horizon,
                                                       rel=1e-9)


class TestSpectralRadius:
    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 6), st.integers(0, 10_000))
    def test_matches_eigvals(self, n, seed):
        m = np.random.default_rng(seed).standard_normal((n, n))
        assert spectral_radius(m) == pytest.approx(
            np.abs(np.linalg.eigvals(m)).max(), rel=1e-9, abs=1e-12)


class TestIntegrator:
    def test_matches_matrix_exponential(self):
        a = np.array([[-1.0, 0.3], [0.0, -2.0]])
        x0 = np.eye(2)
        sol = integrate_matrix_ode(lambda t, x: a @ x + x @ a.T, x0, 2.0,
                                   nsteps=400)
        vals, vecs = np.linalg.eig(a)
        expm = (vecs * np.exp(vals * 2.0)) @ np.linalg.inv(vecs)
        exact = (expm @ x0 @ expm.T).real
        assert np.abs(sol.final - exact).max() < 1e-10

    def test_fourth_order_ratio(self):
        # halving the step shrinks the error ~16x
        a = np.array([[-1.0, 0.5], [-0.2, -1.5]])
        x0 = np.array([[2.0, 0.3], [0.3, 1.0]])

        def rhs(t, x):
            return a @ x + x @ a.T

        vals, vecs = np.linalg.eig(a)
        expm = (vecs * np.exp(vals * 1.0)) @ np.linalg.inv(vecs)
        exact = (expm @ x0 @ expm.T).real

        errs = [np.abs(integrate_matrix_ode(rhs, x0, 1.0, nsteps=n).final
                       - exact).max() for n in (20, 40, 80)]
        for coarse, fine in zip(errs, errs[1:]):
            assert 12.0 < coarse / fine < 20.0

    def test_backward_inverts_forward(self):
        a = np.array([[-0.7, 0.2], [0.1, -1.1]])

        def rhs(t, x):
            return a @ x + x @ a.T + np.eye(2)

        fwd = integrate_matrix_ode(rhs, np.eye(2), 3.0, nsteps=600)
        back = integrate_matrix_ode(rhs, fwd.final, 3.0, nsteps=600,
                                    backward=True)
        assert np.abs(back.initial - np.eye(2)).max() < 1e-9
        assert back.times[0] == 0.0 and back.times[-1] == 3.0

    def test_blowup_raises(self):
        with pytest.raises(Blowup):
            integrate_matrix_ode(lambda t, x: 50.0 * x, np.eye(1), 10.0,
                                 nsteps=1000)

    def test_trajectory_validation(self):
        with pytest.raises(ValueError):
            OdeTrajectory(times=np.array([0.0, 0.0, 1.0]),
                          values=np.zeros((3, 1, 1)))
        with pytest.raises(ValueError):
            OdeTrajectory(times=np.array([0.5, 1.0]),
                          values=np.zeros((2, 1, 1)))

    def test_interpolation(self):
        tr = OdeTrajectory(times=np.array([0.0, 1.0]),
                           values=np.array([[[0.0]], [[2.0]]]))
        assert tr.at(0.25)[0, 0] == pytest.approx(0.5)
        assert tr.at(-1.0)[0, 0] == 0.0
        assert tr.at(9.0)[0, 0] == 2.0
