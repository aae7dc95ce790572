import numpy as np
import pytest

from epsense import _kernels
from epsense.dynamics import TimeGrid, integrate_master, no_jump_amplitudes
from epsense.model import E0, Density3, EpsenseError, PureState2, make_params
from epsense.trajectories import (
    JumpChannel,
    NoSurvivors,
    binomial_sigma,
    postselect_no_jump,
    run_ensemble,
    sample_trajectory,
)

W0 = 1.2325


def test_lossless_never_jumps():
    stats = run_ensemble(make_params(1.0, 0, 0), TimeGrid(), 5000, seed=3)
    assert np.all(stats.survivors == 5000)
    assert np.all(np.isinf(stats.jump_times))
    assert stats.channel_counts() == {"QubitDecay": 0, "PhotonLoss": 0}
    rec = sample_trajectory(make_params(1.0, 0, 0), TimeGrid(), seed=3)
    assert not rec.jumped and not rec.dark


def test_only_photon_loss_without_qubit_decay():
    stats = run_ensemble(make_params(W0, 0.0, 5.0), TimeGrid(), 20_000, seed=1)
    counts = stats.channel_counts()
    assert counts["QubitDecay"] == 0 and counts["PhotonLoss"] > 0


def test_only_qubit_decay_without_photon_loss():
    stats = run_ensemble(make_params(0.0, 2.0, 0.0), TimeGrid(), 5000, seed=1)
    counts = stats.channel_counts()
    assert counts["PhotonLoss"] == 0 and counts["QubitDecay"] > 0


def test_no_jump_fraction_matches_norm():
    p = make_params(W0, 0.07, 5)
    grid = TimeGrid()
    n = 100_000
    stats = run_ensemble(p, grid, n, seed=0)
    ce, cg = no_jump_amplitudes(p, grid.times)
    norm = np.abs(ce) ** 2 + np.abs(cg) ** 2
    sig = np.maximum(binomial_sigma(norm, n), 1.0 / n)
    assert np.all(np.abs(stats.survival_fraction - norm) <= 3 * sig + 1e-12)


def test_jump_times_and_channel_split():
    p = make_params(W0, 0.07, 5)
    stats = run_ensemble(p, TimeGrid(), 50_000, seed=11)
    jumped = np.isfinite(stats.jump_times)
    assert np.all(stats.jump_times[jumped] <= 2.0)
    assert np.all(stats.jump_channels[~jumped] == -1)
    # expected channel weights are the time integrals of kq|ce|^2 and kp|cg|^2
    t = np.linspace(0, 2, 4001)
    ce, cg = no_jump_amplitudes(p, t)
    wq = 0.07 * np.sum((np.abs(ce[1:]) ** 2 + np.abs(ce[:-1]) ** 2) / 2 * np.diff(t))
    wp = 5.0 * np.sum((np.abs(cg[1:]) ** 2 + np.abs(cg[:-1]) ** 2) / 2 * np.diff(t))
    frac = wq / (wq + wp)
    got = stats.channel_counts()["QubitDecay"] / jumped.sum()
    assert abs(got - frac) <= 5 * binomial_sigma(frac, jumped.sum())


def test_single_trajectory_stats():
    p = make_params(W0, 0.07, 5)
    stats = run_ensemble(p, TimeGrid(), 1, seed=2)
    assert stats.n_traj == 1 and stats.survivors[0] == 1
    assert set(np.unique(stats.survival_fraction)) <= {0.0, 1.0}


def test_sample_trajectory_reproduces_ensemble_member():
    p = make_params(W0, 0.07, 5)
    grid = TimeGrid()
    stats = run_ensemble(p, grid, 40, seed=9)
    seeds = _kernels.trajectory_seeds(9, 0, 40)
    for i in range(40):
        rec = sample_trajectory(p, grid, int(seeds[i]))
        if rec.jumped:
            assert rec.jump_time == stats.jump_times[i]
            assert rec.jump_channel == JumpChannel(int(stats.jump_channels[i]))
            assert rec.dark
        else:
            assert np.isinf(stats.jump_times[i])
            assert rec.final_state.norm2 == pytest.approx(1.0)


def test_sample_trajectory_is_deterministic():
    p = make_params(1.5, 0.07, 5)
    assert sample_trajectory(p, TimeGrid(), 123) == sample_trajectory(p, TimeGrid(), 123)


@pytest.mark.parametrize("workers", [2, 4])
def test_worker_count_does_not_change_results(workers):
    p = make_params(W0, 0.07, 5)
    a = run_ensemble(p, TimeGrid(), 70_000, seed=5, workers=1)
    b = run_ensemble(p, TimeGrid(), 70_000, seed=5, workers=workers)
    np.testing.assert_array_equal(a.survivors, b.survivors)
    np.testing.assert_array_equal(a.jump_times, b.jump_times)
    np.testing.assert_array_equal(a.jump_channels, b.jump_channels)
    np.testing.assert_array_equal(a.rho_mean, b.rho_mean)


def test_different_seeds_differ():
    p = make_params(W0, 0.07, 5)
    a = run_ensemble(p, TimeGrid(), 1000, seed=0)
    b = run_ensemble(p, TimeGrid(), 1000, seed=1)
    assert not np.array_equal(a.jump_times, b.jump_times)


def test_mean_density_agrees_with_master_equation():
    p = make_params(W0, 0.07, 5)
    grid = TimeGrid()
    n = 100_000
    stats = run_ensemble(p, grid, n, seed=4)
    ref = integrate_master(p, Density3.basis(E0), grid)
    for k in range(0, grid.n_points, 8):
        pops = stats.density(k).populations
        exact = ref[k].populations
        sig = np.maximum(binomial_sigma(exact, n), 1.0 / n)
        assert np.all(np.abs(pops - exact) <= 5 * sig)
        assert stats.density(k).is_valid()


def test_conditioned_populations_are_exact():
    p = make_params(1.6, 0.07, 5)
    grid = TimeGrid()
    stats = run_ensemble(p, grid, 2000, seed=0)
    ce, cg = no_jump_amplitudes(p, grid.times)
    pe = np.abs(ce) ** 2 / (np.abs(ce) ** 2 + np.abs(cg) ** 2)
    alive = stats.survivors > 0
    np.testing.assert_allclose(stats.conditioned_p_e[alive], pe[alive], rtol=1e-12)
    assert np.all(np.isnan(stats.conditioned_p_e[~alive]))


def test_postselect():
    p = make_params(W0, 0.07, 5)
    stats = run_ensemble(p, TimeGrid(), 10_000, seed=0)
    pe, pg, s = postselect_no_jump(stats, 1.0)
    assert pe == pytest.approx(0.7664108917076247, rel=1e-12)
    assert pe + pg == pytest.approx(1.0)
    assert 0 < s < 1


def test_postselect_without_survivors():
    p = make_params(0.0, 500.0, 0.0)
    stats = run_ensemble(p, TimeGrid(), 100, seed=0)
    with pytest.raises(NoSurvivors):
        postselect_no_jump(stats, 2.0)


@pytest.mark.parametrize("kw", [{"n_traj": 0}, {"workers": 0}])
def test_ensemble_argument_errors(kw):
    args = {"n_traj": 10, "workers": 1} | kw
    with pytest.raises(EpsenseError):
        run_ensemble(make_params(1, 0.1, 1), TimeGrid(), args["n_traj"], 0, workers=args["workers"])


def test_unnormalised_initial_state_rejected():
    with pytest.raises(EpsenseError):
        run_ensemble(make_params(1, 0.1, 1), TimeGrid(), 10, 0, psi0=PureState2(1.0, 1.0))
