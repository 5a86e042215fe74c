"""Benchmark harness: MSE estimation, rate fitting, cost-accuracy sweeps.

The quantity of interest is the filter mean at integer times; errors are
always measured against the discretized Kalman-Bucy reference run on the same
observation record at a level ``headroom`` finer than the estimator under
study.  Each repetition r of an experiment uses a fresh data realization
(path seed = base_seed XOR r) and an independently derived filter seed, so a
re-run with the same config reproduces every number exactly.

:func:`cost_mse_sweep` drives the headline comparison: for each target
accuracy eps, single-level variants run at level l = log2(1/eps) with
N = ceil(c_single * eps^-2) particles (the accuracy-balancing choice, cost
eps^-3), while multilevel variants run the plan from
:func:`~mlenkbf.multilevel.plan_allocation` (cost eps^-2 log(eps)^2).  The
log-cost against log-MSE slopes fitted per variant -- about -1.5 single-level
against about -1 multilevel -- are the package's reason to exist.

Both arms shift their whole level grid up by ``base_level`` (default 2).
Explicit ensemble updates go unstable when dt * ||A - PS|| is order one, so
the dt = 1 and dt = 1/2 grids are unusable for typical unit-scale models;
shifting every level by the same constant multiplies every cost by 2^base and
every variance term by 2^-base, which moves the fitted lines but not their
slopes or their ordering.

:func:`poc_sweep` measures the propagation-of-chaos discrepancy: an
interacting ensemble and the i.i.d. auxiliary ensemble driven by identical
noise drift apart at mean-square rate 1/N.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from ._rng import MASK64, mix64
from .ensemble import enkbf_step, iid_step, init_ensemble, run_single_level
from .errors import BadConfig, BadEpsilon, NonPositive, TooFewPoints
from .model import LinearGaussianModel
from .multilevel import LevelPlan, ml_estimate, plan_allocation
from .paths import NoiseStream, generate_path
from .reference import ReferenceState, riccati_covariances, run_reference

__all__ = [
    "PUBLIC_VARIANTS",
    "SweepConfig",
    "SweepRow",
    "PocConfig",
    "PocRow",
    "RateFit",
    "MseEstimate",
    "estimate_mse",
    "fit_rate",
    "cost_mse_sweep",
    "poc_sweep",
    "write_sweep_csv",
    "write_rates_csv",
    "write_poc_csv",
]

# public variant name -> (single-or-multilevel, engine variant)
PUBLIC_VARIANTS = {
    "EnKBF": ("single", "stochastic"),
    "DEnKBF": ("single", "deterministic"),
    "MLEnKBF": ("ml", "stochastic"),
    "MLDEnKBF": ("ml", "deterministic"),
}

_FILTER_BRANCH = 0xF117  # branch index separating filter seeds from path seeds


@dataclass(frozen=True)
class MseEstimate:
    mse: float
    stderr: float
    cost_paper: float
    cost_actual: float
    wall_ms: float
    n_total: int


@dataclass(frozen=True)
class RateFit:
    """OLS fit of ln y on ln x."""

    slope: float
    intercept: float
    r2: float
    n_points: int


@dataclass(frozen=True)
class SweepConfig:
    model: LinearGaussianModel
    T: int
    eps_grid: tuple[float, ...]
    variants: tuple[str, ...]
    reps: int
    base_seed: int
    c0: float = 1.0        # multilevel particle constant
    c_single: float = 1.0  # single-level particle constant
    headroom: int = 2      # reference runs this many levels finer
    n_min: int = 2
    base_level: int = 2    # uniform dyadic shift applied to every level grid


@dataclass(frozen=True)
class SweepRow:
    variant: str
    dx: int
    dy: int
    T: int
    eps: float
    level: int | None   # discretization level (finest level for ML rows)
    L: int | None       # number of coupled levels; None for single-level rows
    N_total: int
    cost_paper: float
    cost_actual: float
    mse: float
    stderr: float
    reps: int
    seed: int
    wall_ms: float


@dataclass(frozen=True)
class PocConfig:
    model: LinearGaussianModel
    T: int
    level: int
    n_grid: tuple[int, ...]
    reps: int
    base_seed: int


@dataclass(frozen=True)
class PocRow:
    n_particles: int
    discrepancy: float   # mean over reps/particles of |xi - zeta|^2 at t = T


def _path_and_ref(model, T, level_gen, pseed, cache):
    key = (T, level_gen, pseed)
    hit = cache.get(key) if cache is not None else None
    if hit is None:
        path = generate_path(model, T, level_gen, pseed)
        ref = run_reference(model, path, level_gen)
        hit = (path, ref)
        if cache is not None:
            cache[key] = hit
    return hit


def estimate_mse(model: LinearGaussianModel, *, T: int, reps: int,
                 base_seed: int, variant: str, level: int | None = None,
                 n_particles: int | None = None, plan: LevelPlan | None = None,
                 headroom: int = 2, base_level: int = 0,
                 _cache: dict | None = None) -> MseEstimate:
    """Mean squared error of the filter mean at t = T over fresh realizations.

    Pass (level, n_particles) for a single-level run or ``plan`` for a
    multilevel run; ``variant`` is the engine variant and ``base_level``
    shifts a plan's level grid.  The reference is the discretized Kalman-Bucy
    filter on the same path, ``headroom`` levels finer than the estimator.
    """
    if (plan is None) == (level is None and n_particles is None):
        raise BadConfig("pass either (level, n_particles) or plan, not both")
    if plan is None and (level is None or n_particles is None):
        raise BadConfig("single-level estimation needs both level and n_particles")
    if reps < 2:
        raise BadConfig(f"need at least 2 repetitions, got {reps}")
    if headroom < 2:
        raise BadConfig(f"headroom must be at least 2, got {headroom}")
    t0 = time.perf_counter()
    base_seed = int(base_seed) & MASK64
    level_gen = (level if plan is None else base_level + plan.L) + headroom

    sq = np.empty(reps)
    cost_paper = cost_actual = 0.0
    n_total = 0
    for r in range(reps):
        pseed = (base_seed ^ r) & MASK64
        path, ref = _path_and_ref(model, T, level_gen, pseed, _cache)
        fseed = mix64(pseed, _FILTER_BRANCH)
        if plan is None:
            rec = run_single_level(model, path, n_particles, level, variant, fseed)
        else:
            rec = ml_estimate(model, path, plan, variant, fseed,
                              base_level=base_level)
        e = rec.estimates[-1] - ref.means[-1]
        sq[r] = e @ e
        cost_paper, cost_actual, n_total = rec.cost_paper, rec.cost_actual, rec.n_particles
    mse = float(sq.mean())
    stderr = float(sq.std(ddof=1) / math.sqrt(reps))
    wall = (time.perf_counter() - t0) * 1e3
    return MseEstimate(mse=mse, stderr=stderr, cost_paper=cost_paper,
                       cost_actual=cost_actual, wall_ms=wall, n_total=n_total)


def fit_rate(points) -> RateFit:
    """Least-squares slope/intercept of ln y against ln x.

    Needs at least two points with strictly positive coordinates; a constant
    series fits slope 0 with r2 = 1 by convention (zero residual around zero
    spread).
    """
    pts = [(float(x), float(y)) for x, y in points]
    if len(pts) < 2:
        raise TooFewPoints(f"rate fit needs >= 2 points, got {len(pts)}")
    for x, y in pts:
        if x <= 0.0 or y <= 0.0:
            raise NonPositive(f"log-log fit needs positive points, got ({x}, {y})")
    lx = np.log([x for x, _ in pts])
    ly = np.log([y for _, y in pts])
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_res = float(resid @ resid)
    dy = ly - ly.mean()
    ss_tot = float(dy @ dy)
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return RateFit(slope=float(slope), intercept=float(intercept), r2=r2,
                   n_points=len(pts))


def _check_sweep_config(cfg: SweepConfig) -> None:
    if cfg.T < 1:
        raise BadConfig(f"T must be a positive integer, got {cfg.T}")
    if cfg.reps < 2:
        raise BadConfig(f"reps must be at least 2, got {cfg.reps}")
    if not cfg.eps_grid:
        raise BadConfig("eps_grid is empty")
    for eps in cfg.eps_grid:
        if not 0.0 < eps < 1.0:
            raise BadEpsilon(f"eps must lie strictly in (0, 1), got {eps}")
    if not cfg.variants:
        raise BadConfig("variants is empty")
    for v in cfg.variants:
        if v not in PUBLIC_VARIANTS:
            raise BadConfig(
                f"unknown variant {v!r}; expected one of {sorted(PUBLIC_VARIANTS)}")
    if cfg.headroom < 2:
        raise BadConfig(f"headroom must be at least 2, got {cfg.headroom}")
    if cfg.c_single <= 0.0 or cfg.c0 <= 0.0:
        raise NonPositive("c0 and c_single must be positive")
    if cfg.base_level < 0:
        raise BadConfig(f"base_level must be >= 0, got {cfg.base_level}")


def cost_mse_sweep(cfg: SweepConfig, out_fh=None):
    """Run the cost-accuracy grid; returns (rows, fits).

    Rows appear in config order (variants outer, eps inner) and are flushed
    to ``out_fh`` as they finish, so a crashed sweep keeps its partial
    results.  ``fits`` maps each variant to the ln-cost-vs-ln-MSE
    :class:`RateFit` over its rows.
    """
    _check_sweep_config(cfg)
    model = cfg.model
    cache: dict = {}
    rows: list[SweepRow] = []
    if out_fh is not None:
        _write_sweep_header(out_fh)
    for variant in cfg.variants:
        kind, engine = PUBLIC_VARIANTS[variant]
        for eps in cfg.eps_grid:
            if kind == "single":
                lvl = cfg.base_level + max(0, round(math.log2(1.0 / eps)))
                n = max(2, math.ceil(cfg.c_single * eps ** -2))
                r = estimate_mse(model, T=cfg.T, reps=cfg.reps,
                                 base_seed=cfg.base_seed, variant=engine,
                                 level=lvl, n_particles=n,
                                 headroom=cfg.headroom, _cache=cache)
                row = SweepRow(variant, model.d_x, model.d_y, cfg.T, eps,
                               lvl, None, r.n_total, r.cost_paper,
                               r.cost_actual, r.mse, r.stderr, cfg.reps,
                               cfg.base_seed, r.wall_ms)
            else:
                plan = plan_allocation(eps, cfg.c0, cfg.n_min)
                r = estimate_mse(model, T=cfg.T, reps=cfg.reps,
                                 base_seed=cfg.base_seed, variant=engine,
                                 plan=plan, headroom=cfg.headroom,
                                 base_level=cfg.base_level, _cache=cache)
                row = SweepRow(variant, model.d_x, model.d_y, cfg.T, eps,
                               cfg.base_level + plan.L, plan.L, r.n_total,
                               r.cost_paper, r.cost_actual, r.mse, r.stderr,
                               cfg.reps, cfg.base_seed, r.wall_ms)
            rows.append(row)
            if out_fh is not None:
                _write_sweep_row(out_fh, row)
                out_fh.flush()
    fits = {v: fit_rate([(row.mse, row.cost_paper) for row in rows
                         if row.variant == v])
            for v in cfg.variants}
    return rows, fits


def _poc_discrepancy(model, path, n_particles, level, seed) -> float:
    """Mean over particles of |xi_T - zeta_T|^2 for pathwise-coupled systems."""
    stream = NoiseStream(seed, level)
    ens = init_ensemble(model, n_particles, level, "stochastic", stream)
    aux = init_ensemble(model, n_particles, level, "iid", stream)
    n_steps = path.T << level
    dY = path.obs_at(level)
    Ps = riccati_covariances(model, level, n_steps)
    zero_m = np.zeros(model.d_x)
    for k in range(n_steps):
        ref = ReferenceState(level=level, step=k, m=zero_m, P=Ps[k])
        ens = enkbf_step(model, ens, dY[k])
        aux = iid_step(model, aux, dY[k], ref)
    d = ens.particles - aux.particles
    return float((d * d).sum(axis=0).mean())


def poc_sweep(cfg: PocConfig):
    """Discrepancy between interacting and auxiliary ensembles across N.

    Returns (rows, fit) with fit the ln-discrepancy-vs-ln-N slope (about -1).
    """
    if cfg.T < 1:
        raise BadConfig(f"T must be a positive integer, got {cfg.T}")
    if cfg.reps < 1:
        raise BadConfig(f"reps must be at least 1, got {cfg.reps}")
    if len(cfg.n_grid) < 2:
        raise TooFewPoints(f"n_grid needs >= 2 sizes, got {len(cfg.n_grid)}")
    base_seed = int(cfg.base_seed) & MASK64
    paths = [generate_path(cfg.model, cfg.T, cfg.level, (base_seed ^ r) & MASK64)
             for r in range(cfg.reps)]
    rows = []
    for n in cfg.n_grid:
        acc = 0.0
        for r in range(cfg.reps):
            fseed = mix64((base_seed ^ r) & MASK64, _FILTER_BRANCH)
            acc += _poc_discrepancy(cfg.model, paths[r], n, cfg.level, fseed)
        rows.append(PocRow(n_particles=n, discrepancy=acc / cfg.reps))
    fit = fit_rate([(row.n_particles, row.discrepancy) for row in rows])
    return rows, fit


# ---------------------------------------------------------------------------
# CSV output
# ---------------------------------------------------------------------------

_SWEEP_COLS = ("variant,dx,dy,T,eps,level,L,N_total,cost_paper,cost_actual,"
               "mse,stderr,reps,seed,wall_ms")


def _f(v) -> str:
    return repr(float(v))


def _write_sweep_header(fh) -> None:
    fh.write(_SWEEP_COLS + "\n")


def _write_sweep_row(fh, row: SweepRow) -> None:
    fh.write(",".join([
        row.variant, str(row.dx), str(row.dy), str(row.T), _f(row.eps),
        "" if row.level is None else str(row.level),
        "" if row.L is None else str(row.L),
        str(row.N_total), _f(row.cost_paper), _f(row.cost_actual),
        _f(row.mse), _f(row.stderr), str(row.reps), str(row.seed),
        _f(row.wall_ms),
    ]) + "\n")


def write_sweep_csv(rows, fh) -> None:
    _write_sweep_header(fh)
    for row in rows:
        _write_sweep_row(fh, row)


def write_rates_csv(fits: dict, fh) -> None:
    """``variant,slope,intercept,r2,n_points``, one row per fitted variant."""
    fh.write("variant,slope,intercept,r2,n_points\n")
    for variant, fit in fits.items():
        fh.write(",".join([variant, _f(fit.slope), _f(fit.intercept),
                           _f(fit.r2), str(fit.n_points)]) + "\n")


def write_poc_csv(rows, fh) -> None:
    fh.write("N,discrepancy\n")
    for row in rows:
        fh.write(f"{row.n_particles},{_f(row.discrepancy)}\n")
