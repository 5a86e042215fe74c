"""Ensemble Kalman-Bucy filter engines on the dyadic time grid.

All variants propagate N particles with Euler steps of size dt = 2^-l and
estimate the filter mean by the ensemble average.  Gains always use the
*pre-step* sample moments with the unbiased 1/(N-1) covariance.

Stochastic (perturbed-observation) step:

    xi' = xi + A xi dt + R1^{1/2} dW^i
             + U^N (dY - [C xi dt + R2^{1/2} dV^i]),   U^N = P^N C^T R2^{-1}.

Deterministic step (no observation perturbation):

    xi' = xi + A xi dt + R1^{1/2} dW^i
             + U^N (dY - (C xi + C m^N) dt / 2).

I.i.d. auxiliary step: same form as the stochastic step but with the
deterministic gain from the discretized Riccati recursion, consuming the same
noise coordinates -- so an interacting ensemble and its auxiliary copy are
coupled pathwise, which is what the propagation-of-chaos benchmark measures.

Collapsed step: the stochastic update is distributionally equal to the
one-noise form

    xi' = B^N xi + U^N dY + alpha^N omega^i,
    B^N = I + A dt - P^N S dt,
    alpha^N = (R1 + P^N S P^N)^{1/2} sqrt(dt),

whose sample mean and covariance then satisfy *exact* one-step recursions
(:func:`recursion_check`): the residuals below are pure floating-point noise,
independent of N and dt.

Noise bookkeeping: each run owns a :class:`~mlenkbf.paths.NoiseStream`; the
increment for particle i at step k is addressed by coordinates, never by draw
order, so batched and per-particle execution agree bitwise.  A kernel adds
its Brownian contributions to the state last and one block at a time, which
lets a coarse step replay the two fine blocks of a coupled pair in the same
association order (the multilevel coupling then telescopes exactly when drift
and gain vanish).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np

from ._rng import MASK64
from .errors import DimensionMismatch, LevelMismatch, TooFewParticles
from .model import LinearGaussianModel, sym_psd_sqrt
from .paths import NoiseRole, NoiseStream, PathBundle
from .records import RunRecord
from .reference import ReferenceState, riccati_covariances

__all__ = [
    "VARIANTS",
    "Ensemble",
    "SampleMoments",
    "StepCoefficients",
    "init_ensemble",
    "sample_moments",
    "step_coefficients",
    "enkbf_step",
    "denkbf_step",
    "iid_step",
    "collapsed_step",
    "recursion_check",
    "run_single_level",
]

VARIANTS = ("stochastic", "deterministic", "iid", "collapsed")


@dataclass(frozen=True)
class Ensemble:
    """Particle block (d_x, N) at step k of the level-l grid."""

    level: int
    step: int
    particles: np.ndarray
    variant: str
    stream: NoiseStream

    @property
    def n_particles(self) -> int:
        return self.particles.shape[1]

    @property
    def dt(self) -> float:
        return 2.0 ** -self.level


@dataclass(frozen=True)
class SampleMoments:
    m: np.ndarray   # (d_x,)
    P: np.ndarray   # (d_x, d_x), symmetrized unbiased covariance


@dataclass(frozen=True)
class StepCoefficients:
    """Collapsed-form coefficients at given sample moments and step size."""

    B: np.ndarray       # I + A dt - P S dt
    U: np.ndarray       # P C^T R2^{-1}
    alpha: np.ndarray   # (R1 + P S P)^{1/2} sqrt(dt)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


def _check_variant(ensemble: Ensemble, expected: str, op: str) -> None:
    if ensemble.variant != expected:
        raise LevelMismatch(
            f"{op} applies to variant '{expected}', ensemble is '{ensemble.variant}'")


def _check_dY(model: LinearGaussianModel, dY) -> np.ndarray:
    dY = np.asarray(dY, dtype=np.float64)
    if dY.shape != (model.d_y,):
        raise DimensionMismatch(f"dY must have shape ({model.d_y},), got {dY.shape}")
    return dY


def _moments(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = x.shape[1]
    m = x.mean(axis=1)
    xc = x - m[:, None]
    P = xc @ xc.T / (n - 1.0)
    P = 0.5 * (P + P.T)
    return m, P


def sample_moments(ensemble: Ensemble) -> SampleMoments:
    """Ensemble mean and unbiased, symmetrized sample covariance."""
    if ensemble.n_particles < 2:
        raise TooFewParticles(
            f"need at least 2 particles, got {ensemble.n_particles}")
    m, P = _moments(ensemble.particles)
    return SampleMoments(m=_frozen(m), P=_frozen(P))


def step_coefficients(model: LinearGaussianModel, moments: SampleMoments,
                      dt: float) -> StepCoefficients:
    """Collapsed coefficients B, U, alpha for one step at the given moments."""
    P = moments.P
    PS = P @ model.S
    B = np.eye(model.d_x) + model.A * dt - PS * dt
    U = P @ model.CtR2inv
    M = model.R1 + PS @ P
    M = 0.5 * (M + M.T)
    alpha = sym_psd_sqrt(M, "R1 + P S P") * np.sqrt(dt)
    return StepCoefficients(B=_frozen(B), U=_frozen(U), alpha=_frozen(alpha))


# ---------------------------------------------------------------------------
# step kernels (shared by the public steps, the runners and the coupled pairs)
# ---------------------------------------------------------------------------

def _stoch_kernel(model, x, U, dY, dV, dW_parts, dt):
    """Perturbed-observation update; Brownian blocks added last, in order."""
    innov = dY[:, None] - (model.C @ x) * dt - model.R2_sqrt @ dV
    out = x + (model.A @ x) * dt + U @ innov
    for w in dW_parts:
        out = out + model.R1_sqrt @ w
    return out


def _det_kernel(model, x, m, U, dY, dW_parts, dt):
    """Deterministic-variant update (no observation perturbation)."""
    innov = dY[:, None] - (model.C @ x + (model.C @ m)[:, None]) * (0.5 * dt)
    out = x + (model.A @ x) * dt + U @ innov
    for w in dW_parts:
        out = out + model.R1_sqrt @ w
    return out


def init_ensemble(model: LinearGaussianModel, n_particles: int, level: int,
                  variant: str, stream: NoiseStream) -> Ensemble:
    """Draw xi_0^i i.i.d. N(M0, P0) from per-particle init coordinates.

    The draw for particle i is independent of n_particles, so a larger
    ensemble with the same stream extends a smaller one.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    if n_particles < 2:
        raise TooFewParticles(f"need at least 2 particles, got {n_particles}")
    if level > stream.level_gen:
        raise LevelMismatch(
            f"ensemble level {level} finer than stream level_gen {stream.level_gen}")
    z = stream.unit_draws(NoiseRole.INIT, stream.level_gen, 0, n_particles, model.d_x)
    x0 = model.M0[:, None] + model.P0_sqrt @ z
    return Ensemble(level=level, step=0, particles=_frozen(x0),
                    variant=variant, stream=stream)


def enkbf_step(model: LinearGaussianModel, ensemble: Ensemble,
               dY) -> Ensemble:
    """One stochastic EnKBF step with gain from the pre-step sample moments."""
    _check_variant(ensemble, "stochastic", "enkbf_step")
    dY = _check_dY(model, dY)
    mo = sample_moments(ensemble)
    U = mo.P @ model.CtR2inv
    n, lv, k = ensemble.n_particles, ensemble.level, ensemble.step
    dW = ensemble.stream.increments(NoiseRole.SIGNAL, lv, k, n, model.d_x)
    dV = ensemble.stream.increments(NoiseRole.OBS, lv, k, n, model.d_y)
    x1 = _stoch_kernel(model, ensemble.particles, U, dY, dV, (dW,), ensemble.dt)
    return replace(ensemble, step=k + 1, particles=_frozen(x1))


def denkbf_step(model: LinearGaussianModel, ensemble: Ensemble,
                dY) -> Ensemble:
    """One deterministic EnKBF step; consumes no observation noise."""
    _check_variant(ensemble, "deterministic", "denkbf_step")
    dY = _check_dY(model, dY)
    mo = sample_moments(ensemble)
    U = mo.P @ model.CtR2inv
    n, lv, k = ensemble.n_particles, ensemble.level, ensemble.step
    dW = ensemble.stream.increments(NoiseRole.SIGNAL, lv, k, n, model.d_x)
    x1 = _det_kernel(model, ensemble.particles, mo.m, U, dY, (dW,), ensemble.dt)
    return replace(ensemble, step=k + 1, particles=_frozen(x1))


def iid_step(model: LinearGaussianModel, ensemble: Ensemble, dY,
             reference: ReferenceState) -> Ensemble:
    """One auxiliary-system step with the deterministic Riccati gain.

    Consumes exactly the noise coordinates of :func:`enkbf_step`, so feeding
    the sample covariance in as ``reference.P`` reproduces the interacting
    step bit for bit.
    """
    _check_variant(ensemble, "iid", "iid_step")
    dY = _check_dY(model, dY)
    if reference.level != ensemble.level:
        raise LevelMismatch(
            f"reference level {reference.level} != ensemble level {ensemble.level}")
    if reference.step != ensemble.step:
        raise LevelMismatch(
            f"reference step {reference.step} != ensemble step {ensemble.step}")
    U = reference.P @ model.CtR2inv
    n, lv, k = ensemble.n_particles, ensemble.level, ensemble.step
    dW = ensemble.stream.increments(NoiseRole.SIGNAL, lv, k, n, model.d_x)
    dV = ensemble.stream.increments(NoiseRole.OBS, lv, k, n, model.d_y)
    x1 = _stoch_kernel(model, ensemble.particles, U, dY, dV, (dW,), ensemble.dt)
    return replace(ensemble, step=k + 1, particles=_frozen(x1))


def collapsed_step(model: LinearGaussianModel, ensemble: Ensemble,
                   dY) -> Ensemble:
    """One step of the collapsed one-noise form xi' = B xi + U dY + alpha omega."""
    _check_variant(ensemble, "collapsed", "collapsed_step")
    dY = _check_dY(model, dY)
    mo = sample_moments(ensemble)
    co = step_coefficients(model, mo, ensemble.dt)
    n, lv, k = ensemble.n_particles, ensemble.level, ensemble.step
    omega = ensemble.stream.unit_draws(NoiseRole.OMEGA, lv, k, n, model.d_x)
    x1 = co.B @ ensemble.particles + (co.U @ dY)[:, None] + co.alpha @ omega
    return replace(ensemble, step=k + 1, particles=_frozen(x1))


def recursion_check(model: LinearGaussianModel, ensemble: Ensemble,
                    dY) -> tuple[float, float]:
    """Residuals of the exact one-step mean/covariance recursions.

    Advances the collapsed step internally (same draws as
    :func:`collapsed_step`) and evaluates

        m' - [m + (A - P S) m dt + U dY + alpha omega_bar]
        P' - [P + Ricc(P) dt + SRicc(P) dt^2
                + alpha (S_omega - I) alpha + 2 Sym(alpha C_omega_xi B^T)]

    with S_omega, C_omega_xi the centered sample moments of the collapsed
    noise.  Both identities hold exactly in exact arithmetic for every N and
    dt; the returned max-abs residuals measure only roundoff.
    """
    _check_variant(ensemble, "collapsed", "recursion_check")
    dY = _check_dY(model, dY)
    mo = sample_moments(ensemble)
    m, P = mo.m, mo.P
    dt = ensemble.dt
    co = step_coefficients(model, mo, dt)
    n, lv, k = ensemble.n_particles, ensemble.level, ensemble.step
    omega = ensemble.stream.unit_draws(NoiseRole.OMEGA, lv, k, n, model.d_x)

    x1 = co.B @ ensemble.particles + (co.U @ dY)[:, None] + co.alpha @ omega
    m1, P1 = _moments(x1)

    omega_bar = omega.mean(axis=1)
    G = model.A - P @ model.S
    mean_rhs = m + (G @ m) * dt + co.U @ dY + co.alpha @ omega_bar
    mean_res = float(np.abs(m1 - mean_rhs).max())

    oc = omega - omega_bar[:, None]
    xc = ensemble.particles - m[:, None]
    S_om = oc @ oc.T / (n - 1.0)
    C_ox = oc @ xc.T / (n - 1.0)
    AP = model.A @ P
    ricc = AP + AP.T - P @ model.S @ P + model.R1
    sricc = G @ P @ G.T
    M = co.alpha @ C_ox @ co.B.T
    cov_rhs = (P + ricc * dt + sricc * dt * dt
               + co.alpha @ (S_om - np.eye(model.d_x)) @ co.alpha
               + M + M.T)
    cov_res = float(np.abs(P1 - cov_rhs).max())
    return mean_res, cov_res


def run_single_level(model: LinearGaussianModel, path: PathBundle,
                     n_particles: int, level: int, variant: str,
                     seed: int) -> RunRecord:
    """Run one ensemble over a path, recording the mean at integer times.

    Cost is N / dt per unit time: N * 2^level * T.  Deterministic in
    (model, path, n_particles, level, variant, seed).
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    if n_particles < 2:
        raise TooFewParticles(f"need at least 2 particles, got {n_particles}")
    if level > path.level_gen:
        raise LevelMismatch(
            f"run level {level} finer than path level_gen {path.level_gen}")
    t0 = time.perf_counter()
    seed = int(seed) & MASK64
    stream = NoiseStream(seed, level)
    dY = path.obs_at(level)
    T = path.T
    n_steps = T << level
    per_unit = 1 << level
    dt = 2.0 ** -level
    d_x, d_y = model.d_x, model.d_y
    CtR2inv = model.CtR2inv

    ens = init_ensemble(model, n_particles, level, variant, stream)
    x = ens.particles
    est = np.empty((T + 1, d_x))
    est[0] = x.mean(axis=1)

    gains = None
    if variant == "iid":
        Ps = riccati_covariances(model, level, n_steps)
        gains = [Ps[k] @ CtR2inv for k in range(n_steps)]

    for k in range(n_steps):
        if variant == "stochastic":
            _, P = _moments(x)
            U = P @ CtR2inv
            dW = stream.increments(NoiseRole.SIGNAL, level, k, n_particles, d_x)
            dV = stream.increments(NoiseRole.OBS, level, k, n_particles, d_y)
            x = _stoch_kernel(model, x, U, dY[k], dV, (dW,), dt)
        elif variant == "deterministic":
            m, P = _moments(x)
            U = P @ CtR2inv
            dW = stream.increments(NoiseRole.SIGNAL, level, k, n_particles, d_x)
            x = _det_kernel(model, x, m, U, dY[k], (dW,), dt)
        elif variant == "iid":
            U = gains[k]
            dW = stream.increments(NoiseRole.SIGNAL, level, k, n_particles, d_x)
            dV = stream.increments(NoiseRole.OBS, level, k, n_particles, d_y)
            x = _stoch_kernel(model, x, U, dY[k], dV, (dW,), dt)
        else:  # collapsed
            m, P = _moments(x)
            co = step_coefficients(model, SampleMoments(m, P), dt)
            omega = stream.unit_draws(NoiseRole.OMEGA, level, k, n_particles, d_x)
            x = co.B @ x + (co.U @ dY[k])[:, None] + co.alpha @ omega
        if (k + 1) % per_unit == 0:
            est[(k + 1) >> level] = x.mean(axis=1)

    cost = float(n_particles) * per_unit * T
    wall = (time.perf_counter() - t0) * 1e3
    return RunRecord(variant=variant, level=level, n_particles=n_particles,
                     seed=seed, times=np.arange(T + 1), estimates=est,
                     cost_paper=cost, cost_actual=cost, wall_ms=wall)
