"""Run records and their CSV form.

A :class:`RunRecord` is the unit every engine returns and every tool
persists: the estimator trajectory at integer times plus the cost and seed
needed to reproduce or account for it.  Single-level records leave ``eps`` and
``L`` unset; multilevel records fill them and distinguish the idealized cost
(sum of N_l / dt_l, the quantity the theory prices) from the actual cost
(which also pays for each coupled coarse leg).

Floats are written with repr (shortest round-trip form), so re-running with
the same seeds reproduces files byte for byte; wall_ms is the one column
expected to differ.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["RunRecord", "write_run_csv"]


@dataclass(frozen=True)
class RunRecord:
    """Estimator trajectory at integer times, with cost and provenance."""

    variant: str
    level: int            # discretization level (finest level L for multilevel runs)
    n_particles: int      # total particle count across levels
    seed: int
    times: np.ndarray     # (T+1,) integers 0..T
    estimates: np.ndarray  # (T+1, d_x)
    cost_paper: float     # N / dt (per level: sum N_l / dt_l), times T
    cost_actual: float    # includes coarse legs of coupled pairs
    wall_ms: float
    eps: float | None = None
    L: int | None = None


def _f(v) -> str:
    return repr(float(v))


def write_run_csv(rec: RunRecord, fh) -> None:
    """One row per integer time.

    Single-level: ``variant,l,N,seed,t,est_0..,cost,wall_ms`` with cost the
    (identical) paper/actual cost.  Multilevel runs append
    ``eps,L,cost_paper,cost_actual`` and keep ``cost`` = cost_paper.
    """
    d = rec.estimates.shape[1]
    cols = ["variant", "l", "N", "seed", "t"] + [f"est_{i}" for i in range(d)] \
        + ["cost", "wall_ms"]
    multilevel = rec.eps is not None
    if multilevel:
        cols += ["eps", "L", "cost_paper", "cost_actual"]
    fh.write(",".join(cols) + "\n")
    for t in rec.times:
        row = [rec.variant, str(rec.level), str(rec.n_particles), str(rec.seed),
               str(int(t))]
        row += [_f(v) for v in rec.estimates[int(t)]]
        row += [_f(rec.cost_paper), _f(rec.wall_ms)]
        if multilevel:
            row += [_f(rec.eps), str(rec.L), _f(rec.cost_paper), _f(rec.cost_actual)]
        fh.write(",".join(row) + "\n")
