"""Tests for the rollout containers and the stochastic path cost."""

import numpy as np
import pytest

from aspic import RolloutBatch, Trajectory, batch_mean_cost, stochastic_cost


def make_traj(state_costs, logp_policy, logp_base, state_dim=1):
    t = len(state_costs)
    return Trajectory(
        states=np.zeros((t + 1, state_dim)),
        actions=np.zeros((t, 1)),
        noises=np.zeros((t, 1)),
        state_costs=np.asarray(state_costs, dtype=float),
        logp_policy=np.asarray(logp_policy, dtype=float),
        logp_base=np.asarray(logp_base, dtype=float),
    )


class TestStochasticCost:
    def test_gamma_zero_is_pure_state_cost(self):
        traj = make_traj([1.0, 2.5, -4.0], [-0.3, -0.7, -0.1], [-1.0, -2.0, -3.0])
        assert stochastic_cost(traj, 0.0) == pytest.approx(-0.5)

    def test_equal_log_probs_cancel(self):
        lp = [-0.4, -1.2]
        traj = make_traj([3.0, 4.0], lp, lp)
        assert stochastic_cost(traj, 5.0) == pytest.approx(7.0)

    def test_two_step_hand_value(self):
        traj = make_traj([1.0, 2.0], [-0.5, -0.5], [-1.0, -1.0])
        # 3 + 2 * ((-0.5 - -1.0) + (-0.5 - -1.0)) = 3 + 2 = 5
        assert stochastic_cost(traj, 2.0) == 5.0

    def test_linear_in_gamma(self):
        rng = np.random.default_rng(3)
        traj = make_traj(rng.normal(size=5), rng.normal(size=5),
                         rng.normal(size=5))
        g1, g2 = 0.7, 2.3
        lhs = stochastic_cost(traj, g1) + stochastic_cost(traj, g2)
        rhs = stochastic_cost(traj, g1 + g2) + stochastic_cost(traj, 0.0)
        assert lhs == pytest.approx(rhs, rel=1e-12)

    def test_negative_gamma_rejected(self):
        traj = make_traj([1.0], [-0.5], [-1.0])
        with pytest.raises(ValueError):
            stochastic_cost(traj, -1.0)


class TestTrajectoryInvariants:
    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            Trajectory(states=np.zeros((3, 1)), actions=np.zeros((2, 1)),
                       noises=np.zeros((2, 1)), state_costs=np.zeros(2),
                       logp_policy=np.zeros(1), logp_base=np.zeros(2))

    def test_states_must_have_one_extra_entry(self):
        with pytest.raises(ValueError):
            Trajectory(states=np.zeros((2, 1)), actions=np.zeros((2, 1)),
                       noises=np.zeros((2, 1)), state_costs=np.zeros(2),
                       logp_policy=np.zeros(2), logp_base=np.zeros(2))

    def test_arrays_frozen(self):
        traj = make_traj([1.0, 2.0], [-0.5, -0.5], [-1.0, -1.0])
        with pytest.raises(ValueError):
            traj.state_costs[0] = 9.0


class TestRolloutBatch:
    def test_cached_costs_recomputable(self):
        rng = np.random.default_rng(11)
        trajs = [make_traj(rng.normal(size=4), rng.normal(size=4),
                           rng.normal(size=4)) for _ in range(6)]
        batch = RolloutBatch(trajectories=trajs, gamma=1.5)
        recomputed = [stochastic_cost(tr, 1.5) for tr in batch.trajectories]
        np.testing.assert_allclose(batch.stochastic_costs, recomputed,
                                   rtol=0, atol=0)

    def test_mean_cost(self):
        trajs = [make_traj([c], [0.0], [0.0]) for c in (1.0, 2.0, 3.0)]
        batch = RolloutBatch(trajectories=trajs, gamma=0.0)
        assert batch_mean_cost(batch) == pytest.approx(2.0)

    def test_constant_costs(self):
        trajs = [make_traj([7.0], [0.0], [0.0]) for _ in range(4)]
        batch = RolloutBatch(trajectories=trajs, gamma=0.0)
        assert batch_mean_cost(batch) == 7.0

    def test_batch_needs_two_trajectories(self):
        with pytest.raises(ValueError):
            RolloutBatch(trajectories=[make_traj([1.0], [0.0], [0.0])],
                         gamma=0.0)

    def test_explicit_costs_checked_for_length(self):
        trajs = [make_traj([1.0], [0.0], [0.0]) for _ in range(3)]
        with pytest.raises(ValueError):
            RolloutBatch(trajectories=trajs, gamma=0.0,
                         stochastic_costs=np.zeros(2))
