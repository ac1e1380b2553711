"""Model files: a JSON interchange format for uncertain plants.

A model file carries exactly one plant description (a raw state-space
stanza or a Hamiltonian stanza that gets realized on load), the cost
weights, and the horizon.  Parsing is strict: unknown keys are errors,
matrices must be rectangular, and every cross-dimension is checked with
a message naming both offending blocks before the plant object is built.

Complex entries (the coupling operator rows) are stored as [re, im]
pairs since JSON has no complex type.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, InvalidSpec, ParseError, UnknownKey
from .hamiltonian import (HamiltonianModel, HamiltonianUncertainty,
                          default_theta, realize_uncertain)
from .model import CostWeights, Uncertainty, UncertainSystem

SCHEMA_VERSION = "1"

_STATESPACE_KEYS = ("A", "B0", "B1", "C0", "C1", "C2", "D0", "D12",
                    "D20", "D22", "x0_mean", "Y0", "ito_imag")
_HAMILTONIAN_KEYS = ("R0", "Lambda", "Theta", "n_w", "n_y", "n_u", "C0")


@dataclass(frozen=True)
class ModelFile:
    """Parsed, validated content of a model file."""

    schema_version: str
    kind: str          # "statespace" or "hamiltonian"
    stanza: dict       # typed blocks, keyed by the names above
    weights: CostWeights
    t_f: float

    def equals(self, other: "ModelFile") -> bool:
        """Field-by-field equality (ndarray-aware)."""
        if (self.schema_version, self.kind, self.t_f) != \
                (other.schema_version, other.kind, other.t_f):
            return False
        if set(self.stanza) != set(other.stanza):
            return False
        for k, v in self.stanza.items():
            o = other.stanza[k]
            if isinstance(v, np.ndarray):
                if not (isinstance(o, np.ndarray) and v.shape == o.shape
                        and np.array_equal(v, o)):
                    return False
            elif v != o:
                return False
        return (np.array_equal(self.weights.R, other.weights.R)
                and np.array_equal(self.weights.G, other.weights.G))


# ---------------------------------------------------------------------------
# strict JSON helpers
# ---------------------------------------------------------------------------

def _expect_mapping(obj, where: str) -> dict:
    if not isinstance(obj, dict):
        raise ParseError(f"{where} must be an object, got {type(obj).__name__}")
    return obj


def _reject_unknown(obj: dict, where: str, allowed) -> None:
    extras = sorted(set(obj) - set(allowed))
    if extras:
        raise UnknownKey(f"unknown key '{extras[0]}' in {where}")


def _require(obj: dict, where: str, key: str):
    if key not in obj:
        raise ParseError(f"missing key '{key}' in {where}")
    return obj[key]


def _scalar(obj: dict, where: str, key: str) -> float:
    v = _require(obj, where, key)
    if isinstance(v, bool) or not isinstance(v, (int, float)) \
            or not math.isfinite(v):
        raise ParseError(f"key '{key}' in {where} must be a finite number")
    return float(v)


def _count(obj: dict, where: str, key: str) -> int:
    v = _require(obj, where, key)
    if isinstance(v, bool) or not isinstance(v, int) or v < 0:
        raise ParseError(f"key '{key}' in {where} must be a nonnegative integer")
    return v


def _matrix(obj: dict, where: str, key: str) -> np.ndarray:
    v = _require(obj, where, key)
    if not isinstance(v, list) or any(not isinstance(r, list) for r in v):
        raise ParseError(f"key '{key}' in {where} must be a list of rows")
    widths = {len(r) for r in v}
    if len(widths) > 1:
        raise ParseError(f"key '{key}' in {where} is ragged: row lengths {sorted(widths)}")
    try:
        m = np.array(v, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"key '{key}' in {where}: non-numeric entry ({exc})")
    if m.size and not np.all(np.isfinite(m)):
        raise ParseError(f"key '{key}' in {where} contains non-finite entries")
    if m.ndim == 1:         # zero-row matrix serialized as []
        m = m.reshape(0, 0)
    return m


def _vector(obj: dict, where: str, key: str) -> np.ndarray:
    v = _require(obj, where, key)
    if not isinstance(v, list) or any(isinstance(e, list) for e in v):
        raise ParseError(f"key '{key}' in {where} must be a flat list")
    try:
        return np.array(v, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"key '{key}' in {where}: non-numeric entry ({exc})")


def _complex_matrix(obj: dict, where: str, key: str) -> np.ndarray:
    v = _require(obj, where, key)
    if not isinstance(v, list) or any(not isinstance(r, list) for r in v):
        raise ParseError(f"key '{key}' in {where} must be a list of rows")
    rows = []
    for i, r in enumerate(v):
        row = []
        for j, e in enumerate(r):
            if (not isinstance(e, list) or len(e) != 2
                    or any(isinstance(x, bool) or not isinstance(x, (int, float))
                           for x in e)):
                raise ParseError(
                    f"key '{key}' in {where}: entry ({i},{j}) must be a "
                    "[re, im] pair")
            row.append(complex(e[0], e[1]))
        rows.append(row)
    widths = {len(r) for r in rows}
    if len(widths) > 1:
        raise ParseError(f"key '{key}' in {where} is ragged: row lengths {sorted(widths)}")
    return np.array(rows, dtype=complex) if rows else np.zeros((0, 0), complex)


def _cross_check(pairs) -> None:
    # pairs: (name_a, got, name_b, want, axis description)
    for name_a, got, name_b, want, what in pairs:
        if got != want:
            raise DimensionMismatch(
                f"{name_a} has {got} {what} but {name_b} requires {want}")


# ---------------------------------------------------------------------------
# load / save
# ---------------------------------------------------------------------------

def load_model_file(path) -> ModelFile:
    """Parse and validate a model file without realizing the plant."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ParseError(f"cannot read model file {path}: {exc}")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(
            f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}")

    doc = _expect_mapping(doc, "model file")
    _reject_unknown(doc, "model file",
                    ("schema_version", "statespace", "hamiltonian",
                     "weights", "horizon"))
    version = _require(doc, "model file", "schema_version")
    if version != SCHEMA_VERSION:
        raise ParseError(
            f"unsupported schema_version {version!r}, expected {SCHEMA_VERSION!r}")

    has_ss = "statespace" in doc
    has_h = "hamiltonian" in doc
    if has_ss == has_h:
        raise ParseError(
            "model file needs exactly one of 'statespace' or 'hamiltonian'")

    wobj = _expect_mapping(_require(doc, "model file", "weights"), "weights")
    _reject_unknown(wobj, "weights", ("R", "G"))
    weights = CostWeights(R=_matrix(wobj, "weights", "R"),
                          G=_matrix(wobj, "weights", "G"))

    hobj = _expect_mapping(_require(doc, "model file", "horizon"), "horizon")
    _reject_unknown(hobj, "horizon", ("t_f",))
    t_f = _scalar(hobj, "horizon", "t_f")
    if t_f <= 0.0:
        raise ParseError("key 't_f' in horizon must be positive")

    if has_ss:
        stanza = _load_statespace(_expect_mapping(doc["statespace"],
                                                  "statespace"))
        kind = "statespace"
    else:
        stanza = _load_hamiltonian(_expect_mapping(doc["hamiltonian"],
                                                   "hamiltonian"))
        kind = "hamiltonian"
    return ModelFile(schema_version=version, kind=kind, stanza=stanza,
                     weights=weights, t_f=t_f)


def _load_statespace(obj: dict) -> dict:
    _reject_unknown(obj, "statespace", _STATESPACE_KEYS)
    s = {k: _matrix(obj, "statespace", k)
         for k in _STATESPACE_KEYS if k != "x0_mean"}
    s["x0_mean"] = _vector(obj, "statespace", "x0_mean")

    n = s["A"].shape[0]
    if s["A"].shape != (n, n):
        raise DimensionMismatch(f"A must be square, got {s['A'].shape}")
    n_v, n_u, n_y, p = (s["B0"].shape[1], s["B1"].shape[1],
                        s["C2"].shape[0], s["C0"].shape[0])
    _cross_check([
        ("B0", s["B0"].shape[0], "A", n, "rows"),
        ("B1", s["B1"].shape[0], "A", n, "rows"),
        ("C0", s["C0"].shape[1], "A", n, "columns"),
        ("C1", s["C1"].shape[1] if s["C1"].size else n, "A", n, "columns"),
        ("C2", s["C2"].shape[1], "A", n, "columns"),
        ("D0", s["D0"].shape[0], "C0", p, "rows"),
        ("D0", s["D0"].shape[1], "B1", n_u, "columns"),
        ("D12", s["D12"].shape[0], "C1", s["C1"].shape[0], "rows"),
        ("D12", s["D12"].shape[1], "B1", n_u, "columns"),
        ("D20", s["D20"].shape[0], "C2", n_y, "rows"),
        ("D20", s["D20"].shape[1], "B0", n_v, "columns"),
        ("D22", s["D22"].shape[0], "C2", n_y, "rows"),
        ("D22", s["D22"].shape[1], "B1", n_u, "columns"),
        ("x0_mean", s["x0_mean"].shape[0], "A", n, "entries"),
        ("Y0", s["Y0"].shape[0], "A", n, "rows"),
        ("Y0", s["Y0"].shape[1], "A", n, "columns"),
        ("ito_imag", s["ito_imag"].shape[0], "B0", n_v, "rows"),
        ("ito_imag", s["ito_imag"].shape[1], "B0", n_v, "columns"),
    ])
    if s["C1"].size == 0:
        s["C1"] = np.zeros((0, n))
    return s


def _load_hamiltonian(obj: dict) -> dict:
    _reject_unknown(obj, "hamiltonian", _HAMILTONIAN_KEYS)
    s = {
        "R0": _matrix(obj, "hamiltonian", "R0"),
        "Lambda": _complex_matrix(obj, "hamiltonian", "Lambda"),
        "Theta": _matrix(obj, "hamiltonian", "Theta"),
        "n_w": _count(obj, "hamiltonian", "n_w"),
        "n_y": _count(obj, "hamiltonian", "n_y"),
        "n_u": _count(obj, "hamiltonian", "n_u"),
        "C0": _matrix(obj, "hamiltonian", "C0"),
    }
    n = s["R0"].shape[0]
    _cross_check([
        ("R0", s["R0"].shape[1], "R0", n, "columns"),
        ("Lambda", s["Lambda"].shape[1] if s["Lambda"].size else n,
         "R0", n, "columns"),
        ("Lambda", s["Lambda"].shape[0] if s["Lambda"].size else s["n_w"] // 2,
         "n_w", s["n_w"] // 2, "rows"),
        ("Theta", s["Theta"].shape[0], "R0", n, "rows"),
        ("Theta", s["Theta"].shape[1], "R0", n, "columns"),
        ("C0", s["C0"].shape[0], "R0", n, "rows"),
        ("C0", s["C0"].shape[1], "R0", n, "columns"),
    ])
    return s


def realize_model(mf: ModelFile):
    """Turn a parsed model file into (UncertainSystem, CostWeights, t_f)."""
    if mf.kind == "statespace":
        s = mf.stanza
        sys = UncertainSystem(
            A=s["A"], B0=s["B0"], B1=s["B1"], C0=s["C0"], C1=s["C1"],
            C2=s["C2"], D0=s["D0"], D12=s["D12"], D20=s["D20"],
            D22=s["D22"], x0_mean=s["x0_mean"], x0_cov=s["Y0"],
            ito_imag=s["ito_imag"])
        return sys, mf.weights, mf.t_f

    s = mf.stanza
    hm = HamiltonianModel(R0=s["R0"], Lambda=s["Lambda"], Theta=s["Theta"],
                          n_w=s["n_w"], n_y=s["n_y"], n_u=s["n_u"])
    hu = HamiltonianUncertainty.from_model(hm, s["C0"])
    bare = realize_uncertain(hm, hu)
    n, n_u = bare.n, bare.n_u
    if mf.weights.R.shape[0] != n:
        raise DimensionMismatch(
            f"R has {mf.weights.R.shape[0]} rows but the realized plant "
            f"has {n} states")
    if mf.weights.G.shape[0] != n_u:
        raise DimensionMismatch(
            f"G has {mf.weights.G.shape[0]} rows but the realized plant "
            f"has {n_u} control inputs")
    # cost output in the standard factorized form the synthesis assumes
    sys = UncertainSystem(
        A=bare.A, B0=bare.B0, B1=bare.B1, C0=bare.C0,
        C1=np.vstack([_sqrt_psd(mf.weights.R), np.zeros((n_u, n))]),
        C2=bare.C2, D0=bare.D0,
        D12=np.vstack([np.zeros((n, n_u)), _sqrt_psd(mf.weights.G)]),
        D20=bare.D20, D22=bare.D22, x0_mean=bare.x0_mean,
        x0_cov=bare.x0_cov, ito_imag=bare.ito_imag)
    return sys, mf.weights, mf.t_f


def load_model(path):
    """Load, validate, and realize a model file in one step."""
    return realize_model(load_model_file(path))


def _sqrt_psd(m: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(0.5 * (m + m.T))
    return vecs @ np.diag(np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T


def _encode(v):
    if isinstance(v, np.ndarray):
        if np.iscomplexobj(v):
            return [[[float(e.real), float(e.imag)] for e in row]
                    for row in v]
        return v.tolist()
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    return v


def save_model(mf: ModelFile, path) -> None:
    """Write a model file; load_model_file inverts this exactly."""
    keys = _STATESPACE_KEYS if mf.kind == "statespace" else _HAMILTONIAN_KEYS
    doc = {
        "schema_version": mf.schema_version,
        mf.kind: {k: _encode(mf.stanza[k]) for k in keys},
        "weights": {"R": mf.weights.R.tolist(), "G": mf.weights.G.tolist()},
        "horizon": {"t_f": mf.t_f},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


# ---------------------------------------------------------------------------
# cavity generator
# ---------------------------------------------------------------------------

_UNCERTAINTY_TYPES = ("kappa2-perturbation", "detuning")


@dataclass(frozen=True)
class CavitySpec:
    """One optical mode with three coupling channels.

    Channel 1 is measured, channel 2 carries the uncertainty, channel 3
    is the control.  delta0 bounds a loss perturbation on channel 2;
    epsilon0 bounds a detuning perturbation; uncertainty picks which of
    the two structures the emitted C0 encodes.
    """

    kappa1: float
    kappa2: float
    kappa3: float
    delta0: float = 0.0
    Omega0: float = 0.0
    epsilon0: float = 1.0
    uncertainty: str = "kappa2-perturbation"

    def __post_init__(self):
        for name in ("kappa1", "kappa2", "kappa3"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise InvalidSpec(f"{name} must be a positive number, got {v!r}")
        for name in ("delta0", "epsilon0"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v >= 0):
                raise InvalidSpec(f"{name} must be nonnegative, got {v!r}")
        if not (isinstance(self.Omega0, (int, float))
                and math.isfinite(self.Omega0)):
            raise InvalidSpec("Omega0 must be a finite number")
        if self.delta0 > 2.0 * math.sqrt(1.0 + self.kappa2):
            raise InvalidSpec(
                f"delta0 = {self.delta0} exceeds the admissible-perturbation "
                f"limit 2*sqrt(1+kappa2) = {2.0 * math.sqrt(1.0 + self.kappa2):.6g}")
        if self.uncertainty not in _UNCERTAINTY_TYPES:
            raise InvalidSpec(
                f"uncertainty must be one of {_UNCERTAINTY_TYPES}, "
                f"got {self.uncertainty!r}")

    @property
    def gamma(self) -> float:
        return self.kappa1 + self.kappa2 + self.kappa3


def make_cavity(spec: CavitySpec, t_f: float = 100.0) -> ModelFile:
    """Model file for the uncertain cavity, with identity cost weights.

    The emitted noise matrix uses the inflated channel-2 rate
    kappa2 + delta0, which majorizes every admissible loss perturbation;
    the uncertainty structure C0 then carries the drift part.
    """
    k1, k2 = spec.kappa1, spec.kappa2
    eye2 = np.eye(2)
    a = -(spec.gamma / 2.0) * eye2
    if spec.Omega0:
        a = a + np.array([[0.0, -spec.Omega0], [spec.Omega0, 0.0]])

    if spec.uncertainty == "kappa2-perturbation":
        c0 = eye2.copy()
    else:
        c0 = (spec.epsilon0 / math.sqrt(k2)) * eye2

    stanza = {
        "A": a,
        "B0": -np.hstack([math.sqrt(k1) * eye2,
                          math.sqrt(k2 + spec.delta0) * eye2]),
        "B1": -math.sqrt(spec.kappa3) * eye2,
        "C0": c0,
        "C1": np.vstack([eye2, np.zeros((2, 2))]),
        "C2": np.array([[math.sqrt(k1), 0.0]]),
        "D0": np.zeros((2, 2)),
        "D12": np.vstack([np.zeros((2, 2)), eye2]),
        "D20": np.array([[1.0, 0.0, 0.0, 0.0]]),
        "D22": np.zeros((1, 2)),
        "x0_mean": np.zeros(2),
        "Y0": eye2.copy(),
        "ito_imag": np.kron(np.eye(2), np.array([[0.0, 1.0], [-1.0, 0.0]])),
    }
    weights = CostWeights(R=eye2.copy(), G=eye2.copy())
    return ModelFile(schema_version=SCHEMA_VERSION, kind="statespace",
                     stanza=stanza, weights=weights, t_f=float(t_f))


def cavity_uncertainty(spec: CavitySpec, value: float) -> Uncertainty:
    """Physical perturbation as a structured Delta for the cavity model.

    kappa2-perturbation: value is the loss shift delta, drift moves by
    -(delta/2) I.  detuning: value is the frequency shift Omega_e, drift
    gains the rotation block [[0, Omega_e], [-Omega_e, 0]].  Either way
    Delta acts only on channel 2's quadrature pair.
    """
    if spec.uncertainty == "kappa2-perturbation":
        block = (value / 2.0) / math.sqrt(spec.kappa2 + spec.delta0) * np.eye(2)
    else:
        if spec.epsilon0 <= 0.0:
            raise InvalidSpec("detuning uncertainty needs epsilon0 > 0")
        block = np.array([[0.0, -value], [value, 0.0]]) / spec.epsilon0
    return Uncertainty(np.vstack([np.zeros((2, 2)), block]))
