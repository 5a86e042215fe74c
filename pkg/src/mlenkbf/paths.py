"""Observation paths and coupled Brownian increments.

Two responsibilities live here:

* :class:`NoiseStream` -- the counter-based source of every Brownian increment
  consumed by the ensemble engines.  A draw is addressed by (role, level,
  particle, step); increments at coarser levels are *defined* as pairwise sums
  of their two children one level finer, so the fine/coarse coupling used by
  the multilevel estimator is exact by construction, not up to roundoff of a
  separately generated path.

* :class:`PathBundle` -- one realization of the signal and of the observation
  increments dY on the generation grid (level ``level_gen``), plus
  :func:`aggregate_increments` to consume the same data on any coarser grid.
  All filters at all levels see the same single observation record.

Particle indexing is prefix-stable: the draw for particle i never depends on
how many particles are requested, so enlarging an ensemble extends it instead
of reshuffling it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from ._rng import MASK64, KeyedPhilox
from .errors import BadLength, DimensionMismatch, LevelMismatch

__all__ = [
    "NoiseRole",
    "NoiseStream",
    "PathBundle",
    "generate_path",
    "aggregate_increments",
    "write_path_csv",
]


class NoiseRole(IntEnum):
    """Independent noise coordinates within one stream/seed."""

    SIGNAL = 1    # particle Brownian motion W^i
    OBS = 2       # perturbed-observation Brownian motion V^i
    OMEGA = 3     # collapsed-form unit noise omega^i
    INIT = 4      # initial-ensemble unit draws
    PATH_W = 5    # data signal Brownian motion (generate_path only)
    PATH_V = 6    # data observation Brownian motion (generate_path only)
    PATH_X0 = 7   # data initial condition


def _key1(role: int, level: int, step: int) -> int:
    # role: 8 bits, level: 8 bits, step: 48 bits
    return ((int(role) << 56) | (int(level) << 48) | int(step)) & MASK64


class NoiseStream:
    """Keyed Gaussian increments on the dyadic grid of a single run.

    ``level_gen`` is the finest level this stream will ever be asked for; the
    primitive draws live there, scaled by sqrt(2^-level_gen).  A query at a
    coarser level l < level_gen returns the pairwise-summed block of its
    2^(level_gen - l) children, which makes

        increments(role, l-1, k) == increments(role, l, 2k) + increments(role, l, 2k+1)

    hold bitwise.
    """

    __slots__ = ("seed", "level_gen", "_eng")

    def __init__(self, seed: int, level_gen: int):
        if not 0 <= level_gen <= 40:
            raise LevelMismatch(f"level_gen must be in [0, 40], got {level_gen}")
        self.seed = int(seed) & MASK64
        self.level_gen = int(level_gen)
        self._eng = KeyedPhilox()

    def _primitive(self, role: int, step: int, n: int, dim: int) -> np.ndarray:
        """Unit-variance block (dim, n) at the finest grid, particle-major."""
        z = self._eng.normals(self.seed, _key1(role, self.level_gen, step), (n, dim))
        return z.T

    def unit_draws(self, role: int, level: int, step: int, n: int, dim: int) -> np.ndarray:
        """(dim, n) standard normals at coordinates (role, level, step).

        Only defined on the generation grid: unit draws have no aggregation
        semantics across levels.
        """
        if level != self.level_gen:
            raise LevelMismatch(
                f"unit draws exist only at level_gen={self.level_gen}, got {level}")
        return self._primitive(role, step, n, dim)

    def increments(self, role: int, level: int, step: int, n: int, dim: int) -> np.ndarray:
        """(dim, n) Brownian increments over step k of the level-l grid.

        Distribution N(0, 2^-level I) per particle; coarse values are exact
        sums of their fine children.
        """
        fac = self.level_gen - level
        if fac < 0:
            raise LevelMismatch(
                f"level {level} finer than stream level_gen {self.level_gen}")
        scale = math.sqrt(2.0 ** -self.level_gen)
        base = step << fac
        kids = [scale * self._primitive(role, base + j, n, dim)
                for j in range(1 << fac)]
        while len(kids) > 1:
            kids = [kids[i] + kids[i + 1] for i in range(0, len(kids), 2)]
        return kids[0]

    def increment(self, role: int, level: int, particle: int, step: int, dim: int) -> np.ndarray:
        """Single-particle view: column ``particle`` of the batched block."""
        return self.increments(role, level, step, particle + 1, dim)[:, particle].copy()


@dataclass(frozen=True)
class PathBundle:
    """One data realization on the generation grid.

    ``truth[k]`` is the Euler signal at time k * 2^-level_gen and
    ``obs_increments[k]`` the observation increment over that step.
    """

    T: int
    level_gen: int
    seed: int
    truth: np.ndarray            # (n_steps + 1, d_x)
    obs_increments: np.ndarray   # (n_steps, d_y)

    @property
    def n_steps(self) -> int:
        return self.obs_increments.shape[0]

    def obs_at(self, level: int) -> np.ndarray:
        """Observation increments aggregated onto the level-l grid."""
        return aggregate_increments(self.obs_increments, self.level_gen, level)


def generate_path(model, T: int, level_gen: int, seed: int) -> PathBundle:
    """Euler signal plus observation increments at resolution 2^-level_gen.

        X_{k+1} = X_k + A X_k dt + R1^{1/2} dW_k
        dY_k    = C X_k dt + R2^{1/2} dV_k

    with X_0 ~ N(M0, P0).  Deterministic in (model, T, level_gen, seed).
    """
    if T < 1 or int(T) != T:
        raise DimensionMismatch(f"T must be a positive integer, got {T}")
    if not 0 <= level_gen <= 40:
        raise LevelMismatch(f"level_gen must be in [0, 40], got {level_gen}")
    T = int(T)
    n = T << level_gen
    dt = 2.0 ** -level_gen
    sq = math.sqrt(dt)
    d_x, d_y = model.d_x, model.d_y

    eng = KeyedPhilox()
    seed = int(seed) & MASK64
    z0 = eng.normals(seed, _key1(NoiseRole.PATH_X0, level_gen, 0), d_x)
    zw = eng.normals(seed, _key1(NoiseRole.PATH_W, level_gen, 0), (n, d_x))
    zv = eng.normals(seed, _key1(NoiseRole.PATH_V, level_gen, 0), (n, d_y))

    truth = np.empty((n + 1, d_x))
    truth[0] = model.M0 + model.P0_sqrt @ z0
    A, R1s = model.A, model.R1_sqrt
    x = truth[0]
    for k in range(n):
        x = x + (A @ x) * dt + R1s @ (sq * zw[k])
        truth[k + 1] = x
    obs = (truth[:-1] @ model.C.T) * dt + (sq * zv) @ model.R2_sqrt.T
    return PathBundle(T=T, level_gen=level_gen, seed=seed,
                      truth=truth, obs_increments=obs)


def aggregate_increments(x: np.ndarray, level_from: int, level_to: int) -> np.ndarray:
    """Sum increment blocks down from level_from to level_to.

    Output row j is the sum of input rows [j * 2^f, (j+1) * 2^f) with
    f = level_from - level_to, computed by repeated pairwise halving so that
    aggregating in stages is bit-identical to aggregating in one go.
    """
    if level_to > level_from:
        raise LevelMismatch(
            f"cannot aggregate upward: level_to {level_to} > level_from {level_from}")
    out = np.asarray(x, dtype=np.float64)
    for _ in range(level_from - level_to):
        if out.shape[0] % 2:
            raise BadLength(
                f"increment count {out.shape[0]} is odd; cannot halve to level {level_to}")
        out = out[0::2] + out[1::2]
    return out


def write_path_csv(path: PathBundle, fh) -> None:
    """Dump a path: ``step,t,truth_0..,dY_0..`` (truth at the step's left endpoint)."""
    d_x = path.truth.shape[1]
    d_y = path.obs_increments.shape[1]
    dt = 2.0 ** -path.level_gen
    cols = ["step", "t"] + [f"truth_{i}" for i in range(d_x)] \
        + [f"dY_{i}" for i in range(d_y)]
    fh.write(",".join(cols) + "\n")
    for k in range(path.n_steps):
        row = [str(k), repr(k * dt)]
        row += [repr(float(v)) for v in path.truth[k]]
        row += [repr(float(v)) for v in path.obs_increments[k]]
        fh.write(",".join(row) + "\n")
