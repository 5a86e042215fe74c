"""Model container and structural diagnostics for linear-Gaussian filtering.

The continuous-time signal/observation pair is

    dX_t = A X_t dt + R1^{1/2} dW_t,      X_0 ~ N(M0, P0),
    dY_t = C X_t dt + R2^{1/2} dV_t,      Y_0 = 0,

with R1^{1/2}, R2^{1/2} symmetric and R2^{1/2} invertible.  :func:`validate_model`
checks the structural requirements once and returns a frozen
:class:`LinearGaussianModel` carrying the derived products every recursion
needs (R1, R2, R2^{-1}, the observation weight S = C^T R2^{-1} C, the gain
factor C^T R2^{-1}, and P0^{1/2}), so step kernels never refactor matrices.

Assumption diagnostics (logarithmic norm of A, controllability and
observability ranks) live in :func:`stability_report`; they are reported, not
enforced, because the recursions run fine on models that break them -- only
the advertised convergence rates are at stake.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import (
    BadConfig,
    DimensionMismatch,
    NotPSD,
    NotSymmetric,
    Singular,
)

__all__ = [
    "LinearGaussianModel",
    "StabilityReport",
    "validate_model",
    "stability_report",
    "random_model",
    "sym_psd_sqrt",
    "model_to_json",
    "model_from_json",
    "SYMMETRY_TOL",
    "SINGULARITY_TOL",
    "PSD_TOL",
]

# Contract tolerances, shared by every check in the package.
SYMMETRY_TOL = 1e-12      # elementwise |M - M^T|
SINGULARITY_TOL = 1e-10   # smallest singular value of an invertible factor
PSD_TOL = 1e-10           # eigenvalues below -PSD_TOL reject; in [-PSD_TOL, 0) clamp
RANK_TOL = 1e-10          # relative SVD threshold for rank decisions


def _asym(M: np.ndarray) -> float:
    return float(np.abs(M - M.T).max()) if M.size else 0.0


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.flags.writeable = False
    return a


def sym_psd_sqrt(M: np.ndarray, name: str = "matrix") -> np.ndarray:
    """Symmetric PSD square root via eigendecomposition.

    Eigenvalues in [-PSD_TOL, 0) are clamped to zero; anything below -PSD_TOL
    raises :class:`NotPSD`.  The result Q is symmetric with Q @ Q == M up to
    roundoff.
    """
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {M.shape}")
    a = _asym(M)
    if a > SYMMETRY_TOL:
        raise NotSymmetric(name, a)
    w, V = np.linalg.eigh(M)
    if w[0] < -PSD_TOL:
        raise NotPSD(name, float(w[0]))
    w = np.maximum(w, 0.0)
    Q = (V * np.sqrt(w)) @ V.T
    return 0.5 * (Q + Q.T)


@dataclass(frozen=True, eq=False)
class LinearGaussianModel:
    """Validated model plus cached derived matrices.

    Construct through :func:`validate_model` (or :func:`random_model` /
    :func:`model_from_json`); the arrays are read-only.
    """

    A: np.ndarray         # (d_x, d_x) signal drift
    C: np.ndarray         # (d_y, d_x) observation matrix
    R1_sqrt: np.ndarray   # (d_x, d_x) symmetric invertible signal noise root
    R2_sqrt: np.ndarray   # (d_y, d_y) symmetric invertible observation noise root
    M0: np.ndarray        # (d_x,) initial mean
    P0: np.ndarray        # (d_x, d_x) initial covariance, symmetric PSD
    d_x: int
    d_y: int
    # derived, cached at validation time
    R1: np.ndarray        # R1_sqrt @ R1_sqrt
    R2: np.ndarray
    R2_inv: np.ndarray
    S: np.ndarray         # C^T R2^{-1} C
    CtR2inv: np.ndarray   # C^T R2^{-1} (gain factor: U = P @ CtR2inv)
    P0_sqrt: np.ndarray


def validate_model(A, C, R1_sqrt, R2_sqrt, M0, P0) -> LinearGaussianModel:
    """Check shapes, symmetry, invertibility and PSD-ness; cache derived products.

    Raises
    ------
    DimensionMismatch
        if any shape is inconsistent with d_x = A.shape[0], d_y = C.shape[0].
    NotSymmetric
        if R1_sqrt, R2_sqrt or P0 fail elementwise symmetry at 1e-12.
    Singular
        if R2_sqrt has a singular value at or below 1e-10 (R1_sqrt may be
        singular: the signal is then partly or fully noise-free).
    NotPSD
        if P0 has an eigenvalue below -1e-10 (smaller dips are clamped to 0).
    """
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"A must be square, got shape {A.shape}")
    d_x = A.shape[0]
    C = np.asarray(C, dtype=np.float64)
    if C.ndim != 2 or C.shape[1] != d_x:
        raise DimensionMismatch(f"C must have {d_x} columns, got shape {C.shape}")
    d_y = C.shape[0]
    R1_sqrt = np.asarray(R1_sqrt, dtype=np.float64)
    if R1_sqrt.shape != (d_x, d_x):
        raise DimensionMismatch(
            f"R1_sqrt must have shape {(d_x, d_x)}, got {R1_sqrt.shape}")
    R2_sqrt = np.asarray(R2_sqrt, dtype=np.float64)
    if R2_sqrt.shape != (d_y, d_y):
        raise DimensionMismatch(
            f"R2_sqrt must have shape {(d_y, d_y)}, got {R2_sqrt.shape}")
    M0 = np.asarray(M0, dtype=np.float64).reshape(-1)
    if M0.shape != (d_x,):
        raise DimensionMismatch(f"M0 must have length {d_x}, got {M0.shape}")
    P0 = np.asarray(P0, dtype=np.float64)
    if P0.shape != (d_x, d_x):
        raise DimensionMismatch(f"P0 must have shape {(d_x, d_x)}, got {P0.shape}")

    for name, M in (("R1_sqrt", R1_sqrt), ("R2_sqrt", R2_sqrt), ("P0", P0)):
        a = _asym(M)
        if a > SYMMETRY_TOL:
            raise NotSymmetric(name, a)

    # Only R2 is ever inverted; a singular (even zero) R1_sqrt is legitimate
    # and describes a noise-free signal.
    sv = np.linalg.svd(R2_sqrt, compute_uv=False)
    if sv.size and sv[-1] <= SINGULARITY_TOL:
        raise Singular("R2_sqrt", float(sv[-1]))

    w0, V0 = np.linalg.eigh(P0)
    if w0[0] < -PSD_TOL:
        raise NotPSD("P0", float(w0[0]))
    if w0[0] < 0.0:
        # clamp sub-tolerance negative eigenvalues and rebuild
        w0 = np.maximum(w0, 0.0)
        P0 = (V0 * w0) @ V0.T
        P0 = 0.5 * (P0 + P0.T)

    R1 = R1_sqrt @ R1_sqrt
    R1 = 0.5 * (R1 + R1.T)
    R2 = R2_sqrt @ R2_sqrt
    R2 = 0.5 * (R2 + R2.T)
    R2_inv = np.linalg.inv(R2)
    R2_inv = 0.5 * (R2_inv + R2_inv.T)
    CtR2inv = C.T @ R2_inv
    S = CtR2inv @ C
    S = 0.5 * (S + S.T)
    P0_sqrt = sym_psd_sqrt(P0, "P0")

    return LinearGaussianModel(
        A=_readonly(A), C=_readonly(C),
        R1_sqrt=_readonly(R1_sqrt), R2_sqrt=_readonly(R2_sqrt),
        M0=_readonly(M0), P0=_readonly(P0), d_x=d_x, d_y=d_y,
        R1=_readonly(R1), R2=_readonly(R2), R2_inv=_readonly(R2_inv),
        S=_readonly(S), CtR2inv=_readonly(CtR2inv), P0_sqrt=_readonly(P0_sqrt),
    )


@dataclass(frozen=True)
class StabilityReport:
    """Diagnostics for the assumptions behind the convergence rates."""

    mu_A: float                 # largest eigenvalue of (A + A^T)/2
    controllability_rank: int   # rank [R1^{1/2}, A R1^{1/2}, ..., A^{d_x-1} R1^{1/2}]
    observability_rank: int     # rank [C; CA; ...; C A^{d_x-1}]
    satisfies_assumptions: bool

    def to_json(self) -> str:
        return json.dumps({
            "mu_A": self.mu_A,
            "controllability_rank": self.controllability_rank,
            "observability_rank": self.observability_rank,
            "satisfies_assumptions": self.satisfies_assumptions,
        })


def _rank(M: np.ndarray) -> int:
    sv = np.linalg.svd(M, compute_uv=False)
    if sv.size == 0 or sv[0] == 0.0:
        return 0
    return int(np.count_nonzero(sv > RANK_TOL * sv[0]))


def stability_report(model: LinearGaussianModel) -> StabilityReport:
    """Logarithmic norm of A plus controllability/observability ranks.

    ``satisfies_assumptions`` is True iff mu(A) < 0 and both structure
    matrices have full rank d_x.  Nothing downstream refuses to run on a
    failing report.
    """
    mu = float(np.linalg.eigvalsh(0.5 * (model.A + model.A.T)).max())
    blocks, B = [], model.R1_sqrt
    for _ in range(model.d_x):
        blocks.append(B)
        B = model.A @ B
    ctrb_rank = _rank(np.hstack(blocks))
    blocks, O = [], model.C
    for _ in range(model.d_x):
        blocks.append(O)
        O = O @ model.A
    obs_rank = _rank(np.vstack(blocks))
    ok = (mu < 0.0) and ctrb_rank == model.d_x and obs_rank == model.d_x
    return StabilityReport(mu, ctrb_rank, obs_rank, ok)


def random_model(d_x: int, d_y: int, seed: int) -> LinearGaussianModel:
    """Randomly generated test model with normally distributed entries.

    A and C are raw standard-normal matrices; the noise roots are built as
    sym_psd_sqrt(B B^T / d + 0.1 I) from standard-normal factors B so they are
    symmetric and safely invertible.  Whenever mu(A) >= -0.5 the drift is
    shifted, A <- A - (mu(A) + 0.5) I, so the generated signal is always
    stable with margin 0.5.  M0 = 6 * ones, P0 = I.
    """
    if d_x < 1 or d_y < 1:
        raise DimensionMismatch(f"dimensions must be >= 1, got ({d_x}, {d_y})")
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((d_x, d_x))
    C = rng.standard_normal((d_y, d_x))
    B1 = rng.standard_normal((d_x, d_x))
    B2 = rng.standard_normal((d_y, d_y))
    R1_sqrt = sym_psd_sqrt(B1 @ B1.T / d_x + 0.1 * np.eye(d_x), "R1")
    R2_sqrt = sym_psd_sqrt(B2 @ B2.T / d_y + 0.1 * np.eye(d_y), "R2")
    mu = float(np.linalg.eigvalsh(0.5 * (A + A.T)).max())
    if mu >= -0.5:
        A = A - (mu + 0.5) * np.eye(d_x)
    return validate_model(A, C, R1_sqrt, R2_sqrt, np.full(d_x, 6.0), np.eye(d_x))


_JSON_KEYS = ("A", "C", "R1_sqrt", "R2_sqrt", "M0", "P0", "d_x", "d_y")


def model_to_json(model: LinearGaussianModel) -> str:
    """Serialize a model to a JSON object with keys A, C, R1_sqrt, R2_sqrt, M0, P0, d_x, d_y."""
    return json.dumps({
        "A": model.A.tolist(), "C": model.C.tolist(),
        "R1_sqrt": model.R1_sqrt.tolist(), "R2_sqrt": model.R2_sqrt.tolist(),
        "M0": model.M0.tolist(), "P0": model.P0.tolist(),
        "d_x": model.d_x, "d_y": model.d_y,
    })


def model_from_json(data) -> LinearGaussianModel:
    """Parse and fully re-validate a model from JSON text or a decoded dict."""
    if isinstance(data, (str, bytes)):
        try:
            data = json.loads(data)
        except json.JSONDecodeError as e:
            raise BadConfig(f"model JSON does not parse: {e}") from e
    if not isinstance(data, dict):
        raise BadConfig("model JSON must be an object")
    missing = [k for k in _JSON_KEYS if k not in data]
    if missing:
        raise BadConfig(f"model JSON missing keys: {', '.join(missing)}")
    model = validate_model(data["A"], data["C"], data["R1_sqrt"],
                           data["R2_sqrt"], data["M0"], data["P0"])
    if model.d_x != int(data["d_x"]) or model.d_y != int(data["d_y"]):
        raise DimensionMismatch(
            f"declared (d_x, d_y) = ({data['d_x']}, {data['d_y']}) "
            f"but matrices give ({model.d_x}, {model.d_y})")
    return model
