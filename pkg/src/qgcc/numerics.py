"""Dense matrix-equation and ODE kernels.

Sizes in this package are tiny (a handful of modes), so every solver here
is a direct dense method: Lyapunov equations go through the Kronecker
linear system, Riccati equations through Newton iterations, and moment
equations through fixed-step RK4.  Each routine validates its own result
and raises a typed error instead of returning garbage.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import (
    Blowup,
    NoStabilizingSolution,
    NotHurwitz,
    SingularSystem,
)

# residual acceptance scale shared by the equation solvers
_RESID_TOL = 1e-9
# norm ceiling above which a trajectory is declared divergent
_BLOWUP_NORM = 1e12


def _as_square(m: np.ndarray, name: str) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise SingularSystem(f"{name} must be square, got shape {m.shape}")
    return m


def spectral_radius(m: np.ndarray) -> float:
    """Largest eigenvalue magnitude of a square matrix.

    Uses a full dense eigensolve up to order 32; beyond that a power
    iteration with a 1e-12 relative stopping rule takes over.  Everything
    in this package is far below the cutoff.
    """
    m = _as_square(m, "matrix")
    n = m.shape[0]
    if n <= 32:
        return float(np.max(np.abs(np.linalg.eigvals(m)))) if n else 0.0
    rng = np.random.default_rng(0)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    last = 0.0
    for _ in range(10_000):
        w = m @ (m.T @ v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        est = np.sqrt(nw)
        if abs(est - last) <= 1e-12 * max(est, 1.0):
            return float(est)
        last = est
    return float(last)


def solve_lyapunov(a: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Solve a x + x a^T + q = 0 for Hurwitz a.

    Raises NotHurwitz when any eigenvalue of a has real part >= -1e-12,
    and SingularSystem when the Kronecker system cannot be solved to a
    residual below 1e-9 * (1 + ||q||).
    """
    a = _as_square(a, "a")
    q = _as_square(q, "q")
    if a.shape != q.shape:
        raise SingularSystem(
            f"a and q must have matching shapes, got {a.shape} and {q.shape}")
    n = a.shape[0]
    reals = np.linalg.eigvals(a).real
    if reals.size and reals.max() >= -1e-12:
        raise NotHurwitz(
            f"matrix has eigenvalue with real part {reals.max():.3e} >= -1e-12")
    eye = np.eye(n)
    k = np.kron(eye, a) + np.kron(a, eye)
    try:
        x = np.linalg.solve(k, -q.reshape(-1)).reshape(n, n)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(f"Kronecker system is singular: {exc}") from exc
    if np.allclose(q, q.T, atol=1e-13 * (1.0 + np.abs(q).max())):
        x = 0.5 * (x + x.T)
    resid = np.linalg.norm(a @ x + x @ a.T + q, "fro")
    if not np.isfinite(resid) or resid >= _RESID_TOL * (1.0 + np.linalg.norm(q, "fro")):
        raise SingularSystem(
            f"Lyapunov residual {resid:.3e} exceeds tolerance; system too ill-conditioned")
    return x


def solve_are(a: np.ndarray, b: np.ndarray, q: np.ndarray,
              r: np.ndarray) -> np.ndarray:
    """Stabilizing solution of a^T x + x a - x b r^-1 b^T x + q = 0.

    Newton-Kleinman iteration: each step solves a Lyapunov equation for
    the next iterate, starting from a Bass-shift stabilizing gain.  Raises
    NoStabilizingSolution if 200 iterations do not converge or the result
    is not stabilizing and positive semidefinite.
    """
    a = _as_square(a, "a")
    q = _as_square(q, "q")
    r = _as_square(r, "r")
    b = np.asarray(b, dtype=float)
    if b.ndim != 2 or b.shape[0] != a.shape[0] or b.shape[1] != r.shape[0]:
        raise SingularSystem(
            f"b shape {b.shape} incompatible with a {a.shape} and r {r.shape}")
    try:
        np.linalg.cholesky(r + 1e-300 * np.eye(r.shape[0]))
    except np.linalg.LinAlgError as exc:
        raise SingularSystem("input weight r is not positive definite") from exc

    n = a.shape[0]
    # Bass shift: p solves the shifted Lyapunov equation; pinv covers
    # stable uncontrollable modes, which need no feedback
    beta = float(np.linalg.norm(a, "fro")) + 1.0
    p = solve_lyapunov(-(a + beta * np.eye(n)), 2.0 * b @ b.T)
    k = b.T @ np.linalg.pinv(p)

    qnorm = 1.0 + np.linalg.norm(q, "fro")
    x = np.zeros_like(a)
    for _ in range(200):
        acl = a - b @ k
        try:
            x = solve_lyapunov(acl.T, q + k.T @ r @ k)
        except NotHurwitz as exc:
            raise NoStabilizingSolution(
                "iterate lost closed-loop stability") from exc
        k_next = np.linalg.solve(r, b.T @ x)
        resid = np.linalg.norm(a.T @ x + x @ a - x @ b @ k_next + q, "fro")
        if resid < 1e-11 * qnorm:
            break
        k = k_next
    else:
        raise NoStabilizingSolution("Newton-Kleinman did not converge in 200 iterations")

    x = 0.5 * (x + x.T)
    if np.linalg.eigvalsh(x).min() < -1e-9 * qnorm:
        raise NoStabilizingSolution("converged solution is not positive semidefinite")
    closed = a - b @ np.linalg.solve(r, b.T @ x)
    if np.linalg.eigvals(closed).real.max() >= 0.0:
        raise NoStabilizingSolution("converged solution is not stabilizing")
    return x


def newton_riccati(a: np.ndarray, m: np.ndarray, q: np.ndarray,
                   x0: np.ndarray, tol: float = 1e-12,
                   maxit: int = 100) -> np.ndarray:
    """Solve a^T x + x a + q - x m x = 0 by damped Newton from x0.

    m and q may be indefinite, which rules out Newton-Kleinman; the
    linearized step is solved through the Kronecker system instead.  The
    caller supplies x0 close to the wanted branch (here: the limit of the
    associated differential equation).  Raises NoStabilizingSolution when
    the iteration stalls or the step system is singular.
    """
    a = _as_square(a, "a")
    m = _as_square(m, "m")
    q = _as_square(q, "q")
    x = 0.5 * (x0 + x0.T)
    n = a.shape[0]
    eye = np.eye(n)
    qnorm = 1.0 + np.linalg.norm(q, "fro")

    def resid(xm: np.ndarray) -> np.ndarray:
        return a.T @ xm + xm @ a + q - xm @ m @ xm

    rn = np.linalg.norm(resid(x), "fro")
    for _ in range(maxit):
        if rn < tol * qnorm:
            return 0.5 * (x + x.T)
        acl = a - m @ x
        jac = np.kron(eye, acl.T) + np.kron(acl.T, eye)
        try:
            dx = np.linalg.solve(jac, -resid(x).reshape(-1)).reshape(n, n)
        except np.linalg.LinAlgError as exc:
            raise NoStabilizingSolution(
                "Newton step system is singular") from exc
        dx = 0.5 * (dx + dx.T)
        step = 1.0
        while step > 1e-9:
            xn = x + step * dx
            rnn = np.linalg.norm(resid(xn), "fro")
            if rnn < rn:
                x, rn = xn, rnn
                break
            step *= 0.5
        else:
            raise NoStabilizingSolution("Newton iteration stalled")
    if rn < 1e-9 * qnorm:
        return 0.5 * (x + x.T)
    raise NoStabilizingSolution(
        f"Newton did not reach tolerance, residual {rn:.3e}")


@dataclass(frozen=True)
class OdeTrajectory:
    """Fixed-grid solution of a matrix ODE on [0, tf].

    times is strictly increasing with times[0] == 0 and times[-1] == tf,
    regardless of the direction the equation was integrated in;
    values[k] is the solution matrix at times[k].
    """

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or t.size < 2 or np.any(np.diff(t) <= 0.0):
            raise ValueError("times must be a strictly increasing 1-d grid")
        if t[0] != 0.0:
            raise ValueError("grid must start at 0")
        if self.values.shape[0] != t.size:
            raise ValueError("values and times lengths differ")

    @property
    def final(self) -> np.ndarray:
        return self.values[-1]

    @property
    def initial(self) -> np.ndarray:
        return self.values[0]

    def at(self, t: float) -> np.ndarray:
        """Linear interpolation between grid points."""
        t = float(t)
        times = self.times
        if t <= times[0]:
            return self.values[0]
        if t >= times[-1]:
            return self.values[-1]
        j = int(np.searchsorted(times, t))
        w = (t - times[j - 1]) / (times[j] - times[j - 1])
        return (1.0 - w) * self.values[j - 1] + w * self.values[j]


def integrate_matrix_ode(rhs: Callable[[float, np.ndarray], np.ndarray],
                         x0: np.ndarray, tf: float, nsteps: int = 10_000,
                         backward: bool = False) -> OdeTrajectory:
    """Classical RK4 on a matrix-valued ODE over [0, tf].

    forward:  solves dx/dt = rhs(t, x),  x(0) = x0
    backward: solves dx/dt = rhs(t, x),  x(tf) = x0, by marching the
              time-reversed equation; the returned grid is increasing in
              absolute time either way.

    The iterate is symmetrized after every step (all equations in this
    package preserve symmetry; the projection suppresses drift).  Raises
    Blowup as soon as the iterate stops being finite or its Frobenius
    norm passes 1e12.
    """
    x = np.array(x0, dtype=float)
    if x.ndim != 2 or x.shape[0] != x.shape[1]:
        raise ValueError(f"state must be a square matrix, got shape {x.shape}")
    if not np.isfinite(tf) or tf <= 0.0:
        raise ValueError("tf must be positive and finite")
    nsteps = int(nsteps)
    if nsteps < 1:
        raise ValueError("nsteps must be at least 1")

    h = tf / nsteps
    values = np.empty((nsteps + 1,) + x.shape)
    values[0] = x

    def clock(s: float) -> float:
        return tf - s if backward else s

    sign = -1.0 if backward else 1.0
    for k in range(nsteps):
        s = k * h
        k1 = sign * rhs(clock(s), x)
        k2 = sign * rhs(clock(s + 0.5 * h), x + 0.5 * h * k1)
        k3 = sign * rhs(clock(s + 0.5 * h), x + 0.5 * h * k2)
        k4 = sign * rhs(clock(s + h), x + h * k3)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        x = 0.5 * (x + x.T)
        nx = np.linalg.norm(x, "fro")
        if not np.isfinite(nx) or nx > _BLOWUP_NORM:
            t_bad = clock((k + 1) * h)
            raise Blowup(
                f"trajectory norm {nx:.3e} at t={t_bad:.6g} exceeds 1e12")
        values[k + 1] = x

    times = np.linspace(0.0, tf, nsteps + 1)
    if backward:
        values = values[::-1].copy()
    return OdeTrajectory(times=times, values=values)
