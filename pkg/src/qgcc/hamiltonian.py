"""Realize state-space models from physical oscillator data.

Input data: a quadratic Hamiltonian matrix R0, a complex field-coupling
matrix Lambda (one row per input channel), and the commutation matrix
Theta of the quadrature vector.  The realization formulas below map these
to the ten-matrix uncertain system used everywhere else.

Channel bookkeeping: each optical channel contributes two quadratures.
The channels are ordered (measured, other, control-last): the first N_y
channels are measured, the last N_u drive the system through the control
input, and the ones in between carry structured Hamiltonian uncertainty.

The formulas are applied exactly as stated; no normalization factor is
assumed between this parameterization and a directly-written quadrature
state space.  convention_scale() measures that factor on the reference
cavity instead (it comes out 0.5: a displayed coupling row twice the
effective one), and callers that want the directly-written matrices apply
it to Lambda themselves.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NonRealResult, StructureMismatch
from .model import UncertainSystem

_REALITY_TOL = 1e-10
_IDENTITY_TOL = 1e-10


def permutation(n_pairs: int) -> np.ndarray:
    """Even-odd sorting permutation on a 2*n_pairs vector.

    Sends (a1, a2, ..., a_{2N}) to (a1, a3, ..., a_{2N-1}, a2, a4, ..., a_{2N}).
    """
    if n_pairs < 1:
        raise DimensionMismatch("permutation needs at least one pair")
    size = 2 * n_pairs
    order = list(range(0, size, 2)) + list(range(1, size, 2))
    return np.eye(size)[order]


def build_gamma(n_channels: int) -> np.ndarray:
    """Quadrature-to-field similarity block for n_channels optical channels.

    Gamma = P * blockdiag(0.5 [[1, i], [1, -i]]); satisfies
    Gamma Gamma^dagger = I/2.
    """
    if n_channels < 1:
        raise DimensionMismatch("need at least one channel")
    cell = 0.5 * np.array([[1.0, 1.0j], [1.0, -1.0j]])
    diag = np.kron(np.eye(n_channels), cell)
    return permutation(n_channels) @ diag


def default_theta(n_modes: int) -> np.ndarray:
    """Commutation matrix for the a = (x1 + i x2)/2 quadrature convention."""
    return np.kron(np.eye(n_modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))


@dataclass(frozen=True)
class HamiltonianModel:
    """Physical data: Hamiltonian matrix, coupling rows, commutation matrix.

    n_w, n_y, n_u count quadratures (two per channel); Lambda has
    n_w/2 rows and n columns.
    """

    R0: np.ndarray
    Lambda: np.ndarray
    Theta: np.ndarray
    n_w: int
    n_y: int
    n_u: int

    def __post_init__(self):
        r0 = np.asarray(self.R0, dtype=float)
        lam = np.asarray(self.Lambda, dtype=complex)
        th = np.asarray(self.Theta, dtype=float)
        object.__setattr__(self, "R0", r0)
        object.__setattr__(self, "Lambda", lam)
        object.__setattr__(self, "Theta", th)
        n = r0.shape[0]
        if r0.shape != (n, n):
            raise DimensionMismatch(f"R0 must be square, got {r0.shape}")
        if n % 2:
            raise DimensionMismatch("state dimension must be even (mode pairs)")
        if th.shape != (n, n):
            raise DimensionMismatch(f"Theta has shape {th.shape}, expected {(n, n)}")
        if not np.allclose(th, -th.T, atol=1e-12):
            raise DimensionMismatch("Theta must be skew-symmetric")
        for name in ("n_w", "n_y", "n_u"):
            val = getattr(self, name)
            if val < 0 or val % 2:
                raise DimensionMismatch(f"{name} must be a nonnegative even count")
        if self.n_y > self.n_w or self.n_u >= self.n_w:
            raise DimensionMismatch(
                "need n_y <= n_w and n_u < n_w (at least one non-control channel)")
        if lam.shape != (self.n_w // 2, n):
            raise DimensionMismatch(
                f"Lambda has shape {lam.shape}, expected {(self.n_w // 2, n)}")

    @property
    def n(self) -> int:
        return self.R0.shape[0]

    @property
    def n_v(self) -> int:
        return self.n_w - self.n_u


@dataclass(frozen=True)
class HamiltonianUncertainty:
    """Structured Hamiltonian perturbation data.

    The uncertainty enters the Hamiltonian matrix through the non-measured,
    non-control channels: the stacked block Delta = [0; delta_tilde] has a
    zero row for every measured quadrature, and delta_tilde (with
    delta_tilde delta_tilde^T <= I) occupies the remaining rows.
    """

    C0: np.ndarray
    Gamma0: np.ndarray
    delta_tilde_rows: int

    @classmethod
    def from_model(cls, hm: HamiltonianModel, c0: np.ndarray) -> "HamiltonianUncertainty":
        c0 = np.asarray(c0, dtype=float)
        if c0.shape != (hm.n, hm.n):
            raise DimensionMismatch(
                f"C0 has shape {c0.shape}, expected {(hm.n, hm.n)}")
        gamma0 = build_gamma(hm.n_w // 2)[:, : hm.n_v]
        return cls(C0=c0, Gamma0=gamma0, delta_tilde_rows=hm.n_v - hm.n_y)


def _require_real(m: np.ndarray, what: str) -> np.ndarray:
    worst = float(np.abs(m.imag).max()) if m.size else 0.0
    if worst > _REALITY_TOL:
        raise NonRealResult(
            f"{what} has imaginary residue {worst:.3e}; "
            "coupling and commutation conventions are inconsistent")
    return np.ascontiguousarray(m.real)


def _realized_a(hm: HamiltonianModel, r: np.ndarray) -> np.ndarray:
    lam = hm.Lambda
    return _require_real(
        np.asarray(2.0 * hm.Theta @ (r + (lam.conj().T @ lam).imag), dtype=complex),
        "drift matrix")


def realize_state_space(hm: HamiltonianModel) -> UncertainSystem:
    """Nominal quadrature state space of a Hamiltonian model.

    The measured output consists of both quadratures of the first n_y/2
    channels; the control channels are the last n_u/2.  The produced
    system has an empty uncertainty channel (use realize_uncertain to
    install one).
    """
    n, n_w, n_y, n_u = hm.n, hm.n_w, hm.n_y, hm.n_u
    n_v = hm.n_v
    lam = hm.Lambda
    n_ch = n_w // 2

    gamma = build_gamma(n_ch)
    a = _realized_a(hm, hm.R0)
    b_all = _require_real(
        2.0j * hm.Theta @ np.hstack([-lam.conj().T, lam.T]) @ gamma,
        "input matrix")
    b0, b1 = b_all[:, :n_v], b_all[:, n_v:]

    if n_y:
        n_meas = n_y // 2
        sel = np.hstack([np.eye(n_meas), np.zeros((n_meas, n_ch - n_meas))])
        selector = np.block([
            [sel, np.zeros_like(sel)],
            [np.zeros_like(sel), sel],
        ])
        stack = np.vstack([lam + lam.conj(), -1.0j * lam + 1.0j * lam.conj()])
        c2 = _require_real(permutation(n_meas).T @ selector @ stack,
                           "measured output matrix")
    else:
        c2 = np.zeros((0, n))
    if n_y > n_v:
        raise DimensionMismatch(
            "measured channels exceed non-control channels; no room for D20")
    d20 = np.hstack([np.eye(n_y), np.zeros((n_y, n_v - n_y))])

    return UncertainSystem(
        A=a, B0=b0, B1=b1,
        C0=np.zeros((0, n)), C1=np.zeros((0, n)), C2=c2,
        D0=np.zeros((0, n_u)), D12=np.zeros((0, n_u)),
        D20=d20, D22=np.zeros((n_y, n_u)),
        x0_mean=np.zeros(n), x0_cov=np.eye(n),
        ito_imag=np.kron(np.eye(n_v // 2), np.array([[0.0, 1.0], [-1.0, 0.0]])),
    )


def stack_delta(hu: HamiltonianUncertainty, delta_tilde: np.ndarray,
                n_y: int) -> np.ndarray:
    """Embed a delta_tilde block into the full uncertainty matrix [0; dt]."""
    dt = np.asarray(delta_tilde, dtype=float)
    n = hu.C0.shape[0]
    if dt.shape != (hu.delta_tilde_rows, n):
        raise DimensionMismatch(
            f"delta_tilde has shape {dt.shape}, "
            f"expected {(hu.delta_tilde_rows, n)}")
    return np.vstack([np.zeros((n_y, n)), dt])


def hamiltonian_perturbation(hm: HamiltonianModel, hu: HamiltonianUncertainty,
                             delta_tilde: np.ndarray) -> np.ndarray:
    """Drift perturbation computed through the Hamiltonian-matrix route.

    Perturbs R0 by real(i [-Lambda^dagger, Lambda^T] Gamma0 Delta C0) and
    re-realizes the drift; returns A(R) - A(R0).  Independent of the
    state-space route B0 Delta C0, which is what makes the structural
    identity between the two a meaningful test.
    """
    lam = hm.Lambda
    delta = stack_delta(hu, delta_tilde, hm.n_y)
    dr_c = 1.0j * np.hstack([-lam.conj().T, lam.T]) @ hu.Gamma0 @ delta @ hu.C0
    dr = _require_real(dr_c, "Hamiltonian perturbation")
    return _realized_a(hm, hm.R0 + dr) - _realized_a(hm, hm.R0)


def realize_uncertain(hm: HamiltonianModel,
                      hu: HamiltonianUncertainty) -> UncertainSystem:
    """Uncertain quadrature state space with the structured C0 installed.

    Before returning, the structural identity A(R0 + perturbation) - A(R0)
    = B0 Delta C0 is checked on a small deterministic sample of admissible
    delta_tilde blocks; StructureMismatch signals a bookkeeping error in
    the channel layout.
    """
    nominal = realize_state_space(hm)
    n = hm.n

    rng = np.random.default_rng(20240817)
    samples = [np.zeros((hu.delta_tilde_rows, n))]
    if hu.delta_tilde_rows:
        for _ in range(3):
            raw = rng.standard_normal((hu.delta_tilde_rows, n))
            s = np.linalg.svd(raw, compute_uv=False).max()
            samples.append(raw / max(s, 1.0))
    for dt in samples:
        via_r = hamiltonian_perturbation(hm, hu, dt)
        via_ss = nominal.B0 @ stack_delta(hu, dt, hm.n_y) @ hu.C0
        err = float(np.abs(via_r - via_ss).max())
        if err > _IDENTITY_TOL:
            raise StructureMismatch(
                f"drift perturbation mismatch {err:.3e} between the "
                "Hamiltonian route and B0*Delta*C0")

    return UncertainSystem(
        A=nominal.A, B0=nominal.B0, B1=nominal.B1,
        C0=hu.C0, C1=np.zeros((0, n)), C2=nominal.C2,
        D0=np.zeros((n, hm.n_u)), D12=np.zeros((0, hm.n_u)),
        D20=nominal.D20, D22=nominal.D22,
        x0_mean=nominal.x0_mean, x0_cov=nominal.x0_cov,
        ito_imag=nominal.ito_imag,
    )


def convention_scale(kappas: tuple[float, float, float] = (2.0, 2.0, 2.0),
                     omega0: float = 0.0) -> float:
    """Measured scale between coupling-row conventions, on a reference cavity.

    Builds a one-mode three-channel cavity twice: once directly in
    quadrature form (drift -(gamma/2) I plus the detuning block) and once
    through realize_state_space with coupling rows (sqrt(kappa_i),
    sqrt(kappa_i) i).  The drift depends quadratically on a single scale s
    applied to the coupling rows; the least-squares s is returned after
    verifying that the input matrices then agree to 1e-10 as well.
    """
    k1, k2, k3 = kappas
    gamma = k1 + k2 + k3
    a_direct = -(gamma / 2.0) * np.eye(2)
    if omega0:
        a_direct = a_direct + np.array([[0.0, -omega0], [omega0, 0.0]])
    b_direct = np.hstack([
        -np.sqrt(k1) * np.eye(2), -np.sqrt(k2) * np.eye(2),
        -np.sqrt(k3) * np.eye(2),
    ])

    lam = np.array([[np.sqrt(k), np.sqrt(k) * 1.0j] for k in kappas])
    theta = default_theta(1)
    r0 = -(omega0 / 2.0) * np.eye(2)
    # drift = 2 Theta R0 + s^2 * M with M = 2 Theta Im(Lambda^dagger Lambda)
    m = 2.0 * theta @ (lam.conj().T @ lam).imag
    target = a_direct - 2.0 * theta @ r0
    s_sq = float(np.sum(m * target) / np.sum(m * m))
    if s_sq <= 0.0:
        raise StructureMismatch("calibration produced a nonpositive scale")
    s = float(np.sqrt(s_sq))

    hm = HamiltonianModel(R0=r0, Lambda=s * lam, Theta=theta,
                          n_w=6, n_y=2, n_u=2)
    sys = realize_state_space(hm)
    resid = max(
        float(np.abs(sys.A - a_direct).max()),
        float(np.abs(np.hstack([sys.B0, sys.B1]) - b_direct).max()),
    )
    if resid > _IDENTITY_TOL:
        raise StructureMismatch(
            f"calibrated constructions still disagree by {resid:.3e}")
    return s
