import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mlenkbf import (
    BadLength,
    LevelMismatch,
    NoiseRole,
    NoiseStream,
    aggregate_increments,
    generate_path,
    validate_model,
    write_path_csv,
)

# --- NoiseStream ---------------------------------------------------------


def test_same_coordinates_same_bits():
    s = NoiseStream(seed=123, level_gen=5)
    a = s.increments(NoiseRole.SIGNAL, 5, 7, n=4, dim=3)
    b = s.increments(NoiseRole.SIGNAL, 5, 7, n=4, dim=3)
    np.testing.assert_array_equal(a, b)
    # a second stream object with the same seed agrees too
    c = NoiseStream(seed=123, level_gen=5).increments(NoiseRole.SIGNAL, 5, 7, 4, 3)
    np.testing.assert_array_equal(a, c)


def test_roles_and_steps_decorrelate():
    s = NoiseStream(seed=1, level_gen=3)
    w = s.increments(NoiseRole.SIGNAL, 3, 0, 8, 2)
    v = s.increments(NoiseRole.OBS, 3, 0, 8, 2)
    w1 = s.increments(NoiseRole.SIGNAL, 3, 1, 8, 2)
    assert np.abs(w - v).max() > 0.0
    assert np.abs(w - w1).max() > 0.0


def test_coarse_increment_is_exact_sum_of_children():
    s = NoiseStream(seed=9, level_gen=6)
    for level in range(6):
        for k in (0, 3):
            coarse = s.increments(NoiseRole.SIGNAL, level, k, 5, 2)
            fine0 = s.increments(NoiseRole.SIGNAL, level + 1, 2 * k, 5, 2)
            fine1 = s.increments(NoiseRole.SIGNAL, level + 1, 2 * k + 1, 5, 2)
            np.testing.assert_array_equal(coarse, fine0 + fine1)


def test_prefix_stability_in_particle_count():
    s = NoiseStream(seed=4, level_gen=4)
    small = s.increments(NoiseRole.SIGNAL, 4, 2, n=4, dim=3)
    big = s.increments(NoiseRole.SIGNAL, 4, 2, n=64, dim=3)
    np.testing.assert_array_equal(small, big[:, :4])


def test_single_particle_view_matches_batch():
    s = NoiseStream(seed=4, level_gen=4)
    batch = s.increments(NoiseRole.OBS, 3, 1, n=8, dim=2)
    for i in (0, 3, 7):
        np.testing.assert_array_equal(
            s.increment(NoiseRole.OBS, 3, particle=i, step=1, dim=2), batch[:, i])


def test_unit_draws_only_on_generation_grid():
    s = NoiseStream(seed=2, level_gen=5)
    with pytest.raises(LevelMismatch):
        s.unit_draws(NoiseRole.INIT, 4, 0, 2, 2)
    with pytest.raises(LevelMismatch):
        s.increments(NoiseRole.SIGNAL, 6, 0, 2, 2)


def test_increment_variance_matches_step_size():
    level = 3
    s = NoiseStream(seed=11, level_gen=level)
    n = 100_000
    block = s.increments(NoiseRole.SIGNAL, level, 0, n=n, dim=1)
    var = block.var()
    dt = 2.0 ** -level
    assert abs(var - dt) < 0.05 * dt


def test_increments_over_steps_uncorrelated():
    s = NoiseStream(seed=5, level_gen=2)
    n = 10_000
    x = np.array([s.increment(NoiseRole.SIGNAL, 2, 0, k, 1)[0] for k in range(n)])
    rho = np.corrcoef(x[:-1], x[1:])[0, 1]
    assert abs(rho) < 4.0 / math.sqrt(n)


# --- aggregate_increments ------------------------------------------------


def test_pairwise_and_total_aggregation():
    x = np.array([1.0, 2.0, 3.0, 4.0])
    np.testing.assert_array_equal(aggregate_increments(x, 2, 1), [3.0, 7.0])
    np.testing.assert_array_equal(aggregate_increments(x, 2, 0), [10.0])


def test_aggregation_rejects_odd_length_and_upward_moves():
    with pytest.raises(BadLength):
        aggregate_increments(np.ones(3), 2, 1)
    with pytest.raises(LevelMismatch):
        aggregate_increments(np.ones(4), 1, 2)


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=0, max_value=3), st.integers(min_value=0, max_value=2**32 - 1))
def test_staged_aggregation_is_bitwise_one_shot(drop, seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((8, 2))
    staged = x
    for lvl in range(3, 3 - drop, -1):
        staged = aggregate_increments(staged, lvl, lvl - 1)
    np.testing.assert_array_equal(staged, aggregate_increments(x, 3, 3 - drop))


# --- generate_path -------------------------------------------------------


def test_path_shapes_and_determinism(ou1):
    p = generate_path(ou1, T=2, level_gen=4, seed=7)
    assert p.n_steps == 2 << 4
    assert p.truth.shape == (p.n_steps + 1, 1)
    q = generate_path(ou1, T=2, level_gen=4, seed=7)
    np.testing.assert_array_equal(p.truth, q.truth)
    np.testing.assert_array_equal(p.obs_increments, q.obs_increments)
    r = generate_path(ou1, T=2, level_gen=4, seed=8)
    assert np.abs(p.obs_increments - r.obs_increments).max() > 0.0


def test_decoupled_observations_are_white(free2):
    # C = 0: dY is pure scaled observation noise; 2 * 6400 samples puts the
    # sd of the variance estimate at ~1.25%, so a 5% band is > 3 sigma wide
    p = generate_path(free2, T=100, level_gen=6, seed=3)
    dt = 2.0 ** -6
    var = p.obs_increments.var()
    assert abs(var - dt) < 0.05 * dt
    assert abs(p.obs_increments.mean()) < 4.0 * math.sqrt(dt / p.obs_increments.size)


def test_frozen_signal_path():
    # A = 0, R1_sqrt = 0, P0 = 0: the signal sits at M0 forever
    one = np.ones((1, 1))
    m = validate_model(np.zeros((1, 1)), 2.0 * one, np.zeros((1, 1)), one,
                       [1.5], np.zeros((1, 1)))
    p = generate_path(m, T=1, level_gen=3, seed=1)
    np.testing.assert_array_equal(p.truth, np.full((9, 1), 1.5))
    dt = 2.0 ** -3
    noise = p.obs_increments[:, 0] - 2.0 * 1.5 * dt
    assert abs(noise.mean()) < 4.0 * math.sqrt(dt / 8)


def test_observation_drift_tracks_truth_average(ou1):
    T, level = 100, 2
    p = generate_path(ou1, T=T, level_gen=level, seed=21)
    dt = 2.0 ** -level
    drift_est = p.obs_increments[:, 0].mean() / dt
    target = p.truth[:-1, 0].mean()
    # residual is the averaged observation noise, sd = 1/sqrt(T)
    assert abs(drift_est - target) <= 3.0 / math.sqrt(T)


def test_obs_at_coarser_levels_conserves_totals(ou1):
    p = generate_path(ou1, T=4, level_gen=6, seed=2)
    full = p.obs_at(6)
    np.testing.assert_array_equal(full, p.obs_increments)
    for level in (5, 3, 0):
        agg = p.obs_at(level)
        assert agg.shape == (4 << level, 1)
        np.testing.assert_array_equal(
            aggregate_increments(agg, level, 0), p.obs_at(0))


def test_path_csv_layout(ou1):
    p = generate_path(ou1, T=1, level_gen=1, seed=5)
    buf = io.StringIO()
    write_path_csv(p, buf)
    lines = buf.getvalue().strip().split("\n")
    assert lines[0] == "step,t,truth_0,dY_0"
    assert len(lines) == 1 + p.n_steps
    first = lines[1].split(",")
    assert first[0] == "0"
    assert float(first[2]) == p.truth[0, 0]
