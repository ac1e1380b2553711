"""System, controller, uncertainty and closed-loop value types.

The plant is a linear quantum stochastic system in quadrature form with a
norm-bounded real uncertainty block: the drift is A + B0 Delta C0 with
Delta^T Delta <= I, the measured output picks up D20 Delta C0, and the
control feedthrough picks up B0 Delta D0.  The controller is an ordinary
classical LTI system.  Everything here is an immutable value; assembly of
the closed loop is a pure function of (system, controller, uncertainty).

Quantum structure enters only through two scalars of data: the initial
symmetrized covariance x0_cov and the skew part ito_imag of the noise Ito
matrix.  Only the symmetric part of the Ito matrix (the identity) ever
reaches a computation; the skew part is carried for model fidelity and
serialization round-trips.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, InvalidSpec

_ADMISSIBLE_TOL = 1e-12


def _mat(value, name: str) -> np.ndarray:
    m = np.asarray(value, dtype=float)
    if m.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-dimensional, got ndim={m.ndim}")
    return m


def _vec(value, name: str) -> np.ndarray:
    v = np.asarray(value, dtype=float).reshape(-1)
    if v.ndim != 1:
        raise DimensionMismatch(f"{name} must be a vector")
    return v


@dataclass(frozen=True)
class UncertainSystem:
    """Uncertain plant data.

    Shapes: A (n,n), B0 (n,n_v), B1 (n,n_u), C0 (p,n), C1 (q,n),
    C2 (n_y,n), D0 (p,n_u), D12 (q,n_u), D20 (n_y,n_v), D22 (n_y,n_u).
    The uncertainty block Delta is (delta_rows, delta_cols) = (n_v, p) so
    that B0 Delta C0, D20 Delta C0 and B0 Delta D0 are all well formed.
    """

    A: np.ndarray
    B0: np.ndarray
    B1: np.ndarray
    C0: np.ndarray
    C1: np.ndarray
    C2: np.ndarray
    D0: np.ndarray
    D12: np.ndarray
    D20: np.ndarray
    D22: np.ndarray
    x0_mean: np.ndarray
    x0_cov: np.ndarray
    ito_imag: np.ndarray
    delta_rows: int = 0
    delta_cols: int = 0

    def __post_init__(self):
        conv = {
            "A": _mat(self.A, "A"), "B0": _mat(self.B0, "B0"),
            "B1": _mat(self.B1, "B1"), "C0": _mat(self.C0, "C0"),
            "C1": _mat(self.C1, "C1"), "C2": _mat(self.C2, "C2"),
            "D0": _mat(self.D0, "D0"), "D12": _mat(self.D12, "D12"),
            "D20": _mat(self.D20, "D20"), "D22": _mat(self.D22, "D22"),
            "x0_mean": _vec(self.x0_mean, "x0_mean"),
            "x0_cov": _mat(self.x0_cov, "x0_cov"),
            "ito_imag": _mat(self.ito_imag, "ito_imag"),
        }
        for k, v in conv.items():
            object.__setattr__(self, k, v)

        n = self.A.shape[0]
        if self.A.shape != (n, n):
            raise DimensionMismatch(f"A must be square, got {self.A.shape}")
        n_v = self.B0.shape[1]
        n_u = self.B1.shape[1]
        n_y = self.C2.shape[0]
        p = self.C0.shape[0]
        q = self.C1.shape[0]
        checks = [
            ("B0", self.B0.shape, (n, n_v)),
            ("B1", self.B1.shape, (n, n_u)),
            ("C0", self.C0.shape, (p, n)),
            ("C1", self.C1.shape, (q, n)),
            ("C2", self.C2.shape, (n_y, n)),
            ("D0", self.D0.shape, (p, n_u)),
            ("D12", self.D12.shape, (q, n_u)),
            ("D20", self.D20.shape, (n_y, n_v)),
            ("D22", self.D22.shape, (n_y, n_u)),
            ("x0_cov", self.x0_cov.shape, (n, n)),
            ("ito_imag", self.ito_imag.shape, (n_v, n_v)),
        ]
        for name, got, want in checks:
            if got != want:
                raise DimensionMismatch(f"{name} has shape {got}, expected {want}")
        if self.x0_mean.shape != (n,):
            raise DimensionMismatch(
                f"x0_mean has length {self.x0_mean.shape[0]}, expected {n}")

        if not np.allclose(self.x0_cov, self.x0_cov.T, atol=1e-10):
            raise DimensionMismatch("x0_cov must be symmetric")
        if np.linalg.eigvalsh(0.5 * (self.x0_cov + self.x0_cov.T)).min() < -1e-10:
            raise DimensionMismatch("x0_cov must be positive semidefinite")
        if not np.allclose(self.ito_imag, -self.ito_imag.T, atol=1e-10):
            raise DimensionMismatch("ito_imag must be skew-symmetric")

        dr = self.delta_rows or n_v
        dc = self.delta_cols or p
        if (dr, dc) != (n_v, p):
            raise DimensionMismatch(
                f"Delta block declared ({dr},{dc}) but B0*Delta*C0 needs ({n_v},{p})")
        object.__setattr__(self, "delta_rows", dr)
        object.__setattr__(self, "delta_cols", dc)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def n_v(self) -> int:
        return self.B0.shape[1]

    @property
    def n_u(self) -> int:
        return self.B1.shape[1]

    @property
    def n_y(self) -> int:
        return self.C2.shape[0]


@dataclass(frozen=True)
class CostWeights:
    """Quadratic weights: R on the plant state, G on the control input."""

    R: np.ndarray
    G: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "R", _mat(self.R, "R"))
        object.__setattr__(self, "G", _mat(self.G, "G"))
        for name, m in (("R", self.R), ("G", self.G)):
            if m.shape[0] != m.shape[1]:
                raise DimensionMismatch(f"{name} must be square, got {m.shape}")
            if not np.allclose(m, m.T, atol=1e-10):
                raise DimensionMismatch(f"{name} must be symmetric")
        if np.linalg.eigvalsh(self.R).min() < -1e-10:
            raise DimensionMismatch("R must be positive semidefinite")
        if np.linalg.eigvalsh(self.G).min() <= 0.0:
            raise DimensionMismatch("G must be positive definite")


@dataclass(frozen=True)
class Controller:
    """Classical LTI output-feedback controller."""

    A_K: np.ndarray
    B_K: np.ndarray
    C_K: np.ndarray
    x_K0: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "A_K", _mat(self.A_K, "A_K"))
        object.__setattr__(self, "B_K", _mat(self.B_K, "B_K"))
        object.__setattr__(self, "C_K", _mat(self.C_K, "C_K"))
        object.__setattr__(self, "x_K0", _vec(self.x_K0, "x_K0"))
        n_k = self.A_K.shape[0]
        if self.A_K.shape != (n_k, n_k):
            raise DimensionMismatch(f"A_K must be square, got {self.A_K.shape}")
        if self.B_K.shape[0] != n_k:
            raise DimensionMismatch(
                f"B_K has {self.B_K.shape[0]} rows, expected {n_k}")
        if self.C_K.shape[1] != n_k:
            raise DimensionMismatch(
                f"C_K has {self.C_K.shape[1]} columns, expected {n_k}")
        if self.x_K0.shape != (n_k,):
            raise DimensionMismatch(
                f"x_K0 has length {self.x_K0.shape[0]}, expected {n_k}")

    @property
    def n_k(self) -> int:
        return self.A_K.shape[0]


@dataclass(frozen=True)
class Uncertainty:
    """A concrete real uncertainty matrix.

    Admissible means largest singular value <= 1 + 1e-12.  Inadmissible
    matrices are rejected unless allow_inadmissible is set; that path
    exists purely for diagnostic probing outside the guaranteed set, and
    such samples are flagged so reports can exclude them from pass/fail.
    """

    delta: np.ndarray
    allow_inadmissible: bool = False
    admissible: bool = field(init=False, default=True)

    def __post_init__(self):
        object.__setattr__(self, "delta", _mat(self.delta, "delta"))
        sig = float(np.linalg.svd(self.delta, compute_uv=False).max()) \
            if min(self.delta.shape) else 0.0
        ok = sig <= 1.0 + _ADMISSIBLE_TOL
        if not ok and not self.allow_inadmissible:
            raise InvalidSpec(
                f"uncertainty has largest singular value {sig:.6g} > 1")
        object.__setattr__(self, "admissible", ok)

    @property
    def sigma_max(self) -> float:
        if min(self.delta.shape) == 0:
            return 0.0
        return float(np.linalg.svd(self.delta, compute_uv=False).max())


@dataclass(frozen=True)
class ClosedLoop:
    """Assembled closed-loop system for moment propagation and simulation."""

    A_tilde: np.ndarray
    B_tilde: np.ndarray
    C_tilde: np.ndarray
    eta0_mean: np.ndarray
    P0: np.ndarray

    @property
    def dim(self) -> int:
        return self.A_tilde.shape[0]


def assemble_closed_loop(sys: UncertainSystem, ctrl: Controller,
                         unc: Uncertainty) -> ClosedLoop:
    """Compose plant, controller and a concrete uncertainty matrix.

    The closed-loop state is (plant state, controller state); the output
    weighting row is [C1, D12 C_K]; the noise enters through
    [B0; B_K D20].  The uncertainty perturbs the three affine blocks
    A + B0 Delta C0, (B1 + B0 Delta D0) C_K and B_K (C2 + D20 Delta C0).
    """
    d = unc.delta
    if d.shape != (sys.n_v, sys.C0.shape[0]):
        raise DimensionMismatch(
            f"block B0*Delta*C0: Delta has shape {d.shape}, "
            f"expected ({sys.n_v},{sys.C0.shape[0]})")
    if ctrl.B_K.shape[1] != sys.n_y:
        raise DimensionMismatch(
            f"block B_K*C2: B_K has {ctrl.B_K.shape[1]} columns, "
            f"expected {sys.n_y}")
    if ctrl.C_K.shape[0] != sys.n_u:
        raise DimensionMismatch(
            f"block B1*C_K: C_K has {ctrl.C_K.shape[0]} rows, "
            f"expected {sys.n_u}")

    a_pert = sys.A + sys.B0 @ d @ sys.C0
    b1_pert = sys.B1 + sys.B0 @ d @ sys.D0
    c2_pert = sys.C2 + sys.D20 @ d @ sys.C0
    d22_pert = sys.D22 + sys.D20 @ d @ sys.D0

    n, n_k = sys.n, ctrl.n_k
    a_tilde = np.block([
        [a_pert, b1_pert @ ctrl.C_K],
        [ctrl.B_K @ c2_pert, ctrl.A_K + ctrl.B_K @ d22_pert @ ctrl.C_K],
    ])
    b_tilde = np.vstack([sys.B0, ctrl.B_K @ sys.D20])
    c_tilde = np.hstack([sys.C1, sys.D12 @ ctrl.C_K])
    eta0 = np.concatenate([sys.x0_mean, ctrl.x_K0])
    p0 = np.zeros((n + n_k, n + n_k))
    p0[:n, :n] = sys.x0_cov
    return ClosedLoop(A_tilde=a_tilde, B_tilde=b_tilde, C_tilde=c_tilde,
                      eta0_mean=eta0, P0=p0)


def _haar_orthogonal(rng: np.random.Generator, n: int) -> np.ndarray:
    """Haar-distributed orthogonal matrix via sign-fixed QR."""
    z = rng.standard_normal((n, n))
    q, r = np.linalg.qr(z)
    return q * np.sign(np.diag(r))


def sample_uncertainty(sys: UncertainSystem, strategy: str,
                       seed: int) -> Uncertainty:
    """Draw one admissible uncertainty matrix.

    zero:        Delta = 0
    vertex:      all singular values exactly 1 (boundary of the ball)
    random-ball: singular values i.i.d. uniform on [0, 1]

    Directions are Haar-random from the seed; identical (strategy, seed)
    pairs always reproduce the same matrix.
    """
    rows, cols = sys.delta_rows, sys.delta_cols
    if strategy == "zero":
        return Uncertainty(np.zeros((rows, cols)))
    rng = np.random.default_rng(seed)
    k = min(rows, cols)
    u = _haar_orthogonal(rng, rows)[:, :k]
    v = _haar_orthogonal(rng, cols)[:, :k]
    if strategy == "vertex":
        sig = np.ones(k)
    elif strategy == "random-ball":
        sig = rng.uniform(0.0, 1.0, size=k)
    else:
        raise InvalidSpec(f"unknown sampling strategy {strategy!r}")
    return Uncertainty(u @ np.diag(sig) @ v.T)


def noise_covariance(sys: UncertainSystem) -> np.ndarray:
    """Symmetric part of the noise Ito matrix: the identity on n_v."""
    return np.eye(sys.n_v)
