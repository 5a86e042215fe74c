"""Ensemble step kernels against hand-rolled per-particle oracles.

The oracle in each step test recomputes the update with explicit scalar (or
per-particle) arithmetic from a twin noise stream, so a sign or ordering slip
in the vectorized kernel cannot cancel out.
"""

import numpy as np
import pytest

from mlenkbf import (
    Ensemble,
    LevelMismatch,
    NoiseRole,
    NoiseStream,
    ReferenceState,
    TooFewParticles,
    collapsed_step,
    denkbf_step,
    enkbf_step,
    generate_path,
    iid_step,
    init_ensemble,
    random_model,
    recursion_check,
    riccati_covariances,
    run_reference,
    run_single_level,
    sample_moments,
    step_coefficients,
)


def _raw_ensemble(particles, level=0, variant="stochastic", seed=0):
    particles = np.asarray(particles, dtype=np.float64)
    return Ensemble(level=level, step=0, particles=particles,
                    variant=variant, stream=NoiseStream(seed, level))


# ---------------------------------------------------------------------------
# sample moments and collapsed coefficients
# ---------------------------------------------------------------------------

def test_sample_moments_two_point_hand_values():
    mo = sample_moments(_raw_ensemble([[0.0, 2.0]]))
    assert mo.m[0] == 1.0
    assert mo.P[0, 0] == 2.0  # unbiased: ((0-1)^2 + (2-1)^2) / (2-1)


def test_sample_moments_matches_brute_force():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(3, 5))
    mo = sample_moments(_raw_ensemble(x))
    m = np.array([x[i].sum() / 5.0 for i in range(3)])
    P = np.zeros((3, 3))
    for i in range(5):
        d = x[:, i] - m
        P += np.outer(d, d)
    P /= 4.0
    np.testing.assert_allclose(mo.m, m, rtol=0, atol=1e-14)
    np.testing.assert_allclose(mo.P, P, rtol=0, atol=1e-14)
    np.testing.assert_array_equal(mo.P, mo.P.T)


def test_sample_moments_need_two_particles():
    with pytest.raises(TooFewParticles):
        sample_moments(_raw_ensemble([[1.0]]))


def test_step_coefficients_hand_values(ou1):
    # A = -1, S = 1, R1 = 1, so at P = 1, dt = 1/4:
    #   B = 1 - 1/4 - 1/4 = 1/2,  U = 1,  alpha = sqrt(2) / 2.
    mo = sample_moments(_raw_ensemble([[0.0, 2.0]]))
    assert mo.P[0, 0] == 2.0
    mo = sample_moments(_raw_ensemble([[0.5, 1.5]]))  # m = 1, P = 0.5
    co = step_coefficients(ou1, mo, 0.25)
    assert co.B[0, 0] == pytest.approx(1.0 - 0.25 - 0.5 * 0.25, abs=1e-15)
    assert co.U[0, 0] == pytest.approx(0.5, abs=1e-15)
    expected_alpha = np.sqrt(1.0 + 0.25) * 0.5
    assert co.alpha[0, 0] == pytest.approx(expected_alpha, abs=1e-14)


# ---------------------------------------------------------------------------
# one-step kernels vs per-particle arithmetic
# ---------------------------------------------------------------------------

def test_stochastic_step_matches_per_particle_formula(ou1):
    level, n, seed = 2, 3, 17
    ens = init_ensemble(ou1, n, level, "stochastic", NoiseStream(seed, level))
    dY = np.array([0.3])
    out = enkbf_step(ou1, ens, dY)

    twin = NoiseStream(seed, level)
    dW = twin.increments(NoiseRole.SIGNAL, level, 0, n, 1)
    dV = twin.increments(NoiseRole.OBS, level, 0, n, 1)
    x = ens.particles[0]
    m = x.mean()
    P = ((x - m) ** 2).sum() / (n - 1.0)
    dt = 2.0 ** -level
    for i in range(n):
        innov = dY[0] - x[i] * dt - dV[0, i]
        want = x[i] + (-x[i]) * dt + P * innov + dW[0, i]
        assert abs(out.particles[0, i] - want) <= 1e-14
    assert out.step == 1 and out.level == level


def test_deterministic_step_matches_per_particle_formula(ou1):
    level, n, seed = 2, 3, 18
    ens = init_ensemble(ou1, n, level, "deterministic", NoiseStream(seed, level))
    dY = np.array([-0.2])
    out = denkbf_step(ou1, ens, dY)

    twin = NoiseStream(seed, level)
    dW = twin.increments(NoiseRole.SIGNAL, level, 0, n, 1)
    x = ens.particles[0]
    m = x.mean()
    P = ((x - m) ** 2).sum() / (n - 1.0)
    dt = 2.0 ** -level
    for i in range(n):
        innov = dY[0] - (x[i] + m) * 0.5 * dt
        want = x[i] + (-x[i]) * dt + P * innov + dW[0, i]
        assert abs(out.particles[0, i] - want) <= 1e-14


def test_collapsed_step_matches_per_particle_formula(ou1):
    level, n, seed = 1, 4, 19
    ens = init_ensemble(ou1, n, level, "collapsed", NoiseStream(seed, level))
    dY = np.array([0.25])
    out = collapsed_step(ou1, ens, dY)

    mo = sample_moments(ens)
    co = step_coefficients(ou1, mo, ens.dt)
    twin = NoiseStream(seed, level)
    omega = twin.unit_draws(NoiseRole.OMEGA, level, 0, n, 1)
    for i in range(n):
        want = co.B[0, 0] * ens.particles[0, i] + co.U[0, 0] * dY[0] \
            + co.alpha[0, 0] * omega[0, i]
        assert abs(out.particles[0, i] - want) <= 1e-14


def test_zero_gain_model_makes_variants_agree(free2):
    """With C = 0 the gain vanishes exactly, so the stochastic and
    deterministic updates reduce to the same Brownian motion bit for bit."""
    level, n, seed = 2, 5, 7
    p = generate_path(free2, T=1, level_gen=level, seed=1)
    dY = p.obs_at(level)
    a = init_ensemble(free2, n, level, "stochastic", NoiseStream(seed, level))
    b = init_ensemble(free2, n, level, "deterministic", NoiseStream(seed, level))
    np.testing.assert_array_equal(a.particles, b.particles)
    for k in range(4):
        a = enkbf_step(free2, a, dY[k])
        b = denkbf_step(free2, b, dY[k])
        np.testing.assert_array_equal(a.particles, b.particles)


def test_iid_step_with_sample_covariance_reproduces_interacting_step(ou1):
    level, n, seed = 2, 4, 11
    dY = np.array([0.4])
    ens_s = init_ensemble(ou1, n, level, "stochastic", NoiseStream(seed, level))
    ens_i = init_ensemble(ou1, n, level, "iid", NoiseStream(seed, level))
    np.testing.assert_array_equal(ens_s.particles, ens_i.particles)
    mo = sample_moments(ens_s)
    ref = ReferenceState(level=level, step=0, m=mo.m, P=mo.P)
    out_s = enkbf_step(ou1, ens_s, dY)
    out_i = iid_step(ou1, ens_i, dY, ref)
    np.testing.assert_array_equal(out_s.particles, out_i.particles)


def test_iid_step_rejects_misaligned_reference(ou1):
    level = 2
    ens = init_ensemble(ou1, 3, level, "iid", NoiseStream(5, level))
    P = np.eye(1)
    with pytest.raises(LevelMismatch):
        iid_step(ou1, ens, np.zeros(1), ReferenceState(level=3, step=0, m=np.zeros(1), P=P))
    with pytest.raises(LevelMismatch):
        iid_step(ou1, ens, np.zeros(1), ReferenceState(level=level, step=1, m=np.zeros(1), P=P))


def test_steps_enforce_their_variant(ou1):
    ens = init_ensemble(ou1, 3, 1, "stochastic", NoiseStream(1, 1))
    with pytest.raises(LevelMismatch):
        denkbf_step(ou1, ens, np.zeros(1))
    with pytest.raises(LevelMismatch):
        collapsed_step(ou1, ens, np.zeros(1))
    with pytest.raises(LevelMismatch):
        recursion_check(ou1, ens, np.zeros(1))


# ---------------------------------------------------------------------------
# exact mean/covariance recursions of the collapsed form
# ---------------------------------------------------------------------------

def test_collapsed_recursions_hold_to_roundoff_scalar(ou1):
    ens = init_ensemble(ou1, 8, 3, "collapsed", NoiseStream(23, 3))
    mean_res, cov_res = recursion_check(ou1, ens, np.array([0.6]))
    assert mean_res <= 1e-12
    assert cov_res <= 1e-12


def test_collapsed_recursions_hold_across_steps():
    m = random_model(3, 2, seed=7)
    level, n = 5, 5
    p = generate_path(m, T=1, level_gen=level, seed=3)
    dY = p.obs_at(level)
    ens = init_ensemble(m, n, level, "collapsed", NoiseStream(41, level))
    for k in range(20):
        mean_res, cov_res = recursion_check(m, ens, dY[k % len(dY)])
        assert mean_res <= 1e-9
        assert cov_res <= 1e-9
        ens = collapsed_step(m, ens, dY[k % len(dY)])


def test_recursions_exact_with_noise_suppressed(ou1, monkeypatch):
    """With omega forced to zero both recursions collapse to the deterministic
    Riccati identity, which the step must satisfy to machine precision."""
    ens = init_ensemble(ou1, 6, 3, "collapsed", NoiseStream(11, 3))
    monkeypatch.setattr(
        NoiseStream, "unit_draws",
        lambda self, role, level, step, n, dim: np.zeros((dim, n)))
    mean_res, cov_res = recursion_check(ou1, ens, np.array([0.3]))
    assert mean_res <= 1e-12
    assert cov_res <= 1e-12


# ---------------------------------------------------------------------------
# particle addressing and the iid benchmark ensemble
# ---------------------------------------------------------------------------

def test_initial_draws_extend_with_ensemble_size(ou1):
    small = init_ensemble(ou1, 4, 2, "stochastic", NoiseStream(9, 2))
    large = init_ensemble(ou1, 8, 2, "stochastic", NoiseStream(9, 2))
    np.testing.assert_array_equal(large.particles[:, :4], small.particles)


def test_iid_particles_stay_prefix_stable_under_steps(ou1):
    """Non-interacting particles never look at ensemble size, so a wider iid
    ensemble carries the narrower one as its leading columns at every step."""
    level, steps = 2, 6
    p = generate_path(ou1, T=2, level_gen=level, seed=4)
    dY = p.obs_at(level)
    Ps = riccati_covariances(ou1, level, steps)
    a = init_ensemble(ou1, 4, level, "iid", NoiseStream(13, level))
    b = init_ensemble(ou1, 8, level, "iid", NoiseStream(13, level))
    for k in range(steps):
        ref = ReferenceState(level=level, step=k, m=np.zeros(1), P=Ps[k])
        a = iid_step(ou1, a, dY[k], ref)
        b = iid_step(ou1, b, dY[k], ref)
        np.testing.assert_array_equal(b.particles[:, :4], a.particles)


def test_iid_ensemble_mean_tracks_discretized_filter(ou1):
    """Each iid particle has conditional law N(m_k, P_k) of the discretized
    filter, so the average of N of them sits within ~sqrt(P_T / N) of m_T."""
    level, T, n = 3, 2, 10_000
    p = generate_path(ou1, T=T, level_gen=level, seed=21)
    rec = run_single_level(ou1, p, n, level, "iid", seed=0)
    traj = run_reference(ou1, p, level)
    band = 4.0 * np.sqrt(traj.covs[-1][0, 0] / n)
    assert abs(rec.estimates[-1][0] - traj.means[-1][0]) <= band


# ---------------------------------------------------------------------------
# single-level runner contract
# ---------------------------------------------------------------------------

def test_single_level_run_cost_and_shape(ou1):
    p = generate_path(ou1, T=1, level_gen=0, seed=2)
    rec = run_single_level(ou1, p, 2, 0, "stochastic", seed=5)
    assert rec.cost_paper == 2.0
    assert rec.cost_actual == 2.0
    assert rec.times.tolist() == [0, 1]
    assert rec.estimates.shape == (2, 1)
    assert rec.variant == "stochastic"
    assert rec.level == 0
    assert rec.n_particles == 2


@pytest.mark.parametrize("variant", ["stochastic", "deterministic", "iid", "collapsed"])
def test_single_level_run_is_deterministic(ou1, variant):
    p = generate_path(ou1, T=2, level_gen=3, seed=6)
    a = run_single_level(ou1, p, 8, 3, variant, seed=33)
    b = run_single_level(ou1, p, 8, 3, variant, seed=33)
    np.testing.assert_array_equal(a.estimates, b.estimates)
    c = run_single_level(ou1, p, 8, 3, variant, seed=34)
    assert np.abs(a.estimates - c.estimates).max() > 0.0


def test_single_level_run_validates_arguments(ou1):
    p = generate_path(ou1, T=1, level_gen=2, seed=1)
    with pytest.raises(LevelMismatch):
        run_single_level(ou1, p, 4, 3, "stochastic", seed=0)
    with pytest.raises(TooFewParticles):
        run_single_level(ou1, p, 1, 2, "stochastic", seed=0)
    with pytest.raises(ValueError):
        run_single_level(ou1, p, 4, 2, "spooky", seed=0)
