"""Discretized Kalman-Bucy reference filter.

For the linear-Gaussian model the exact filter is Gaussian with mean m_t and
covariance P_t solving

    dm_t = A m_t dt + P_t C^T R2^{-1} (dY_t - C m_t dt)
    dP_t/dt = Ricc(P_t),   Ricc(Q) = A Q + Q A^T - Q S Q + R1.

On the level-l grid (dt = 2^-l) we advance the mean to first order and the
covariance to second order,

    m' = m + A m dt + U (dY - C m dt),            U = P C^T R2^{-1},
    P' = P + Ricc(P) dt + SRicc(P) dt^2,          SRicc(P) = (A - P S) P (A - P S)^T,

both gains/drifts evaluated at the step's left endpoint.  Run at a level much
finer than any ensemble under study, this recursion is the ground truth the
benchmark measures errors against; the same covariance recursion also supplies
the deterministic gains of the i.i.d. auxiliary ensemble.

A covariance iterate drifting non-PSD (min eigenvalue < -1e-8) triggers an
:class:`AssumptionWarning`; the recursion itself keeps going.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from .errors import AssumptionWarning, DimensionMismatch, LevelMismatch
from .model import LinearGaussianModel
from .paths import PathBundle

__all__ = [
    "ReferenceState",
    "ReferenceTrajectory",
    "ricc_drift",
    "sricc_drift",
    "riccati_step",
    "kbf_mean_step",
    "run_reference",
    "riccati_covariances",
    "write_reference_csv",
]

PSD_WARN_TOL = -1e-8


@dataclass(frozen=True)
class ReferenceState:
    """Mean/covariance pair on the level-l grid at step k (time k * 2^-l)."""

    level: int
    step: int
    m: np.ndarray   # (d_x,)
    P: np.ndarray   # (d_x, d_x)

    @property
    def dt(self) -> float:
        return 2.0 ** -self.level


@dataclass(frozen=True)
class ReferenceTrajectory:
    """Reference filter sampled at the integer times 0..T."""

    level: int
    times: np.ndarray   # (T+1,) integers
    means: np.ndarray   # (T+1, d_x)
    covs: np.ndarray    # (T+1, d_x, d_x)


def ricc_drift(model: LinearGaussianModel, P: np.ndarray) -> np.ndarray:
    """Riccati drift A P + P A^T - P S P + R1."""
    AP = model.A @ P
    return AP + AP.T - P @ model.S @ P + model.R1


def sricc_drift(model: LinearGaussianModel, P: np.ndarray) -> np.ndarray:
    """Second-order Riccati correction (A - P S) P (A^T - S P)."""
    G = model.A - P @ model.S
    return G @ P @ G.T


def _psd_check(P: np.ndarray) -> None:
    """Warn if P has an eigenvalue below -1e-8 (cheap Gershgorin pre-filter)."""
    if P.shape[0] == 1:
        if P[0, 0] < PSD_WARN_TOL:
            warnings.warn(
                f"Riccati iterate lost positive semi-definiteness "
                f"(min eigenvalue {P[0, 0]:.3e})", AssumptionWarning, stacklevel=3)
        return
    ab = np.abs(P)
    bound = (2.0 * P.diagonal() - ab.sum(axis=1)).min()
    if bound < PSD_WARN_TOL:
        w0 = float(np.linalg.eigvalsh(P)[0])
        if w0 < PSD_WARN_TOL:
            warnings.warn(
                f"Riccati iterate lost positive semi-definiteness "
                f"(min eigenvalue {w0:.3e})", AssumptionWarning, stacklevel=3)


def riccati_step(model: LinearGaussianModel, state: ReferenceState) -> ReferenceState:
    """Advance the covariance one step (mean carried unchanged)."""
    dt = state.dt
    P1 = state.P + ricc_drift(model, state.P) * dt + sricc_drift(model, state.P) * dt * dt
    _psd_check(P1)
    return replace(state, step=state.step + 1, P=P1)


def kbf_mean_step(model: LinearGaussianModel, state: ReferenceState,
                  dY: np.ndarray) -> ReferenceState:
    """Advance the mean one step using the gain at the current covariance."""
    dY = np.asarray(dY, dtype=np.float64)
    if dY.shape != (model.d_y,):
        raise DimensionMismatch(f"dY must have shape ({model.d_y},), got {dY.shape}")
    dt = state.dt
    U = state.P @ model.CtR2inv
    m1 = state.m + (model.A @ state.m) * dt + U @ (dY - (model.C @ state.m) * dt)
    return replace(state, step=state.step + 1, m=m1)


def run_reference(model: LinearGaussianModel, path: PathBundle,
                  level: int) -> ReferenceTrajectory:
    """Iterate the discretized filter over a path, recording integer times.

    Both updates at step k use (m_k, P_k); the observation increments are the
    path's, aggregated onto the level-l grid.
    """
    if level > path.level_gen:
        raise LevelMismatch(
            f"reference level {level} finer than path level_gen {path.level_gen}")
    dY = path.obs_at(level)
    dt = 2.0 ** -level
    dt2 = dt * dt
    per_unit = 1 << level
    T = path.T
    A, S, R1, C, CtR2inv = model.A, model.S, model.R1, model.C, model.CtR2inv

    m = model.M0.copy()
    P = model.P0.copy()
    means = np.empty((T + 1, model.d_x))
    covs = np.empty((T + 1, model.d_x, model.d_x))
    means[0], covs[0] = m, P
    for k in range(T * per_unit):
        U = P @ CtR2inv
        m = m + (A @ m) * dt + U @ (dY[k] - (C @ m) * dt)
        AP = A @ P
        G = A - P @ S
        P = P + (AP + AP.T - P @ S @ P + R1) * dt + (G @ P @ G.T) * dt2
        _psd_check(P)
        if (k + 1) % per_unit == 0:
            t = (k + 1) >> level
            means[t], covs[t] = m, P
    return ReferenceTrajectory(level=level,
                               times=np.arange(T + 1),
                               means=means, covs=covs)


def riccati_covariances(model: LinearGaussianModel, level: int,
                        n_steps: int) -> np.ndarray:
    """Covariance iterates P_0..P_n on the level-l grid (data-independent).

    Used for the deterministic gains of the i.i.d. auxiliary ensemble; skips
    the per-step PSD diagnostic since run_reference covers the same iterates.
    """
    dt = 2.0 ** -level
    dt2 = dt * dt
    A, S, R1 = model.A, model.S, model.R1
    out = np.empty((n_steps + 1, model.d_x, model.d_x))
    P = model.P0.copy()
    out[0] = P
    for k in range(n_steps):
        AP = A @ P
        G = A - P @ S
        P = P + (AP + AP.T - P @ S @ P + R1) * dt + (G @ P @ G.T) * dt2
        out[k + 1] = P
    return out


def write_reference_csv(traj: ReferenceTrajectory, fh) -> None:
    """Dump a trajectory: ``t,m_0..,P_00,P_01..`` (upper triangle of P)."""
    d = traj.means.shape[1]
    cols = ["t"] + [f"m_{i}" for i in range(d)] \
        + [f"P_{i}{j}" for i in range(d) for j in range(i, d)]
    fh.write(",".join(cols) + "\n")
    for t in traj.times:
        row = [str(int(t))]
        row += [repr(float(v)) for v in traj.means[t]]
        row += [repr(float(traj.covs[t][i, j])) for i in range(d) for j in range(i, d)]
        fh.write(",".join(row) + "\n")
