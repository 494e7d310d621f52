"""Swarm dynamics: initialization, increments, stepping, and episode contracts."""

import numpy as np
import pytest

from swarmtune.controller import (init_swarm, preferred_distance, reward_increment,
                                  run_episode, step, swarm_increment)
from swarmtune.env import MazeSpec, SpawnSpec, visibility_matrix
from swarmtune.params import ParamVector, SwarmConstants

MID = ParamVector(sigma=1.0, eta_s=1.0, eta_r=1.0, kappa=0.5,
                  omega_0=0.5, omega_I=0.5, tau_q=0.1, tau_r=0.1, tau_c=0.1)


def arena(rewards=((90.0, 90.0),), spawn=SpawnSpec(kind="rect", rect=(10, 10, 30, 30)),
          walls=()):
    w = np.array(walls, dtype=float).reshape(-1, 2, 2) if len(walls) else np.zeros((0, 2, 2))
    return MazeSpec(name="arena", bounds=(0, 0, 100, 100), walls=w,
                    rewards=np.array(rewards), spawn=spawn)


class TestPreferredDistance:
    def test_unit_weight_is_zero(self):
        assert preferred_distance(1.0, 3.7) == 0.0

    def test_exp_inverse(self):
        assert np.isclose(preferred_distance(np.exp(-1.0), 2.0), 2.0)

    def test_half_weight(self):
        assert np.isclose(preferred_distance(0.5, 1.0), np.log(2.0))

    def test_domain_error(self):
        with pytest.raises(ValueError):
            preferred_distance(0.0, 1.0)

    def test_vectorized(self):
        out = preferred_distance(np.array([1.0, 0.5]), 2.0)
        assert np.allclose(out, [0.0, 2.0 * np.log(2.0)])


class TestInitSwarm:
    def test_weights_encode_initial_distances(self):
        # spawn close enough that exp(-d/sigma) stays above the weight floor
        maze = arena(spawn=SpawnSpec(kind="rect", rect=(10, 10, 18, 18)))
        consts = SwarmConstants(n_agents=2)
        state = init_swarm(maze, MID, consts, seed=5)
        d = np.linalg.norm(state.pos[0] - state.pos[1])
        assert np.isclose(state.W[0, 1], np.exp(-d / MID.sigma))
        assert np.isclose(preferred_distance(state.W[0, 1], MID.sigma), d)

    def test_zero_initial_energy(self):
        maze = arena()
        consts = SwarmConstants(n_agents=20)
        state = init_swarm(maze, MID, consts, seed=0)
        ke = 0.5 * consts.mu_m * (state.vel ** 2).sum(axis=1)
        assert (ke == 0).all()
        assert (ke <= consts.e_max).all()

    def test_determinism(self):
        maze = arena()
        consts = SwarmConstants(n_agents=10)
        a = init_swarm(maze, MID, consts, seed=7)
        b = init_swarm(maze, MID, consts, seed=7)
        assert np.array_equal(a.pos, b.pos)
        assert np.array_equal(a.phase, b.phase)
        assert np.array_equal(a.W, b.W)

    def test_reward_weights(self):
        maze = arena(rewards=((50.0, 50.0), (90.0, 10.0)))
        consts = SwarmConstants(n_agents=4)
        state = init_swarm(maze, MID, consts, seed=1)
        d = np.linalg.norm(state.pos[:, None, :] - maze.rewards[None, :, :], axis=2)
        expected = np.clip(np.exp(-d / MID.kappa), consts.w_floor, 1.0)
        assert np.allclose(state.W_r, expected)


def hand_swarm_increment(pos, W, V, sigma):
    """Independent scalar evaluation of the pairwise half-gap sum."""
    n = len(pos)
    out = np.zeros((n, 2))
    for i in range(n):
        nvis = sum(V[i, j] for j in range(n))
        if nvis == 0:
            continue
        acc = np.zeros(2)
        for j in range(n):
            if not V[i, j]:
                continue
            d = float(np.hypot(*(pos[j] - pos[i])))
            d_pref = -sigma * np.log(W[i, j])
            acc += (d - d_pref) * (pos[j] - pos[i]) / d
        out[i] = acc / (2.0 * nvis)
    return out


class TestSwarmIncrement:
    def test_fixed_point_at_consistent_weights(self):
        # all pairwise distances below sigma*log(1/w_floor) so no weight
        # clamps and the initial state has preferred == actual everywhere
        maze = arena(spawn=SpawnSpec(kind="rect", rect=(10, 10, 18, 18)))
        consts = SwarmConstants(n_agents=12)
        state = init_swarm(maze, MID, consts, seed=3)
        V = visibility_matrix(maze, state.pos)
        inc = swarm_increment(state, V, MID, consts)
        assert np.abs(inc).max() < 1e-12

    def test_isolated_agent_zero(self):
        # a wall box around agent 0 removes all visibility
        maze = arena(walls=[[[35, 5], [35, 95]]],
                     spawn=SpawnSpec(kind="rect", rect=(5, 5, 30, 95)))
        consts = SwarmConstants(n_agents=3)
        state = init_swarm(maze, MID, consts, seed=2)
        state.pos = np.array([[50.0, 50.0], [10.0, 10.0], [10.0, 20.0]])
        V = visibility_matrix(maze, state.pos)
        assert not V[0].any()
        inc = swarm_increment(state, V, MID, consts)
        assert np.allclose(inc[0], 0.0)

    def test_three_agent_hand_evaluation(self):
        maze = arena()
        consts = SwarmConstants(n_agents=3)
        state = init_swarm(maze, MID, consts, seed=11)
        state.pos = np.array([[10.0, 10.0], [14.0, 10.0], [12.0, 16.0]])
        rng = np.random.default_rng(0)
        W = rng.uniform(0.2, 0.9, size=(3, 3))
        state.W = 0.5 * (W + W.T)
        V = visibility_matrix(maze, state.pos)
        inc = swarm_increment(state, V, MID, consts)
        expected = hand_swarm_increment(state.pos, state.W, V, MID.sigma)
        assert np.abs(inc - expected).max() < 1e-10


class TestRewardIncrement:
    def test_at_preferred_distance_zero(self):
        # reward close enough that exp(-d/kappa) stays above the weight
        # floor; init then gives preferred == actual distance
        maze = arena(rewards=((20.0, 20.0),),
                     spawn=SpawnSpec(kind="rect", rect=(16, 16, 24, 24)))
        consts = SwarmConstants(n_agents=1)
        state = init_swarm(maze, MID, consts, seed=4)
        inc = reward_increment(state, maze, MID, consts)
        assert np.abs(inc).max() < 1e-9

    def test_no_visible_rewards_zero(self):
        maze = arena(rewards=((90.0, 90.0),),
                     walls=[[[60, 5], [60, 95]], [[60, 95], [95, 95]],
                            [[95, 95], [95, 5]], [[95, 5], [60, 5]]])
        consts = SwarmConstants(n_agents=2)
        state = init_swarm(maze, MID, consts, seed=6)
        inc = reward_increment(state, maze, MID, consts)
        assert np.allclose(inc, 0.0)

    def test_single_reward_closed_form(self):
        maze = arena(rewards=((60.0, 20.0),))
        consts = SwarmConstants(n_agents=1)
        state = init_swarm(maze, MID, consts, seed=8)
        state.pos = np.array([[20.0, 20.0]])
        d = 40.0
        delta = 3.0
        state.W_r = np.array([[np.exp(-(d - delta) / MID.kappa)]])
        inc = reward_increment(state, maze, MID, consts)
        # preferred distance is d - delta: move delta/2 toward the reward
        assert np.allclose(inc[0], [delta / 2.0, 0.0], atol=1e-10)

    def test_captured_rewards_ignored(self):
        maze = arena(rewards=((60.0, 20.0), (20.0, 60.0)))
        consts = SwarmConstants(n_agents=1)
        state = init_swarm(maze, MID, consts, seed=9)
        state.captured[:] = True
        inc = reward_increment(state, maze, MID, consts)
        assert np.allclose(inc, 0.0)


class TestStep:
    def test_coherent_phases_grow_weights(self):
        maze = arena(rewards=((90.0, 90.0),))
        consts = SwarmConstants(n_agents=5)
        state = init_swarm(maze, MID, consts, seed=10)
        state.phase[:] = 1.3
        w_before = state.W[0, 1]
        step(state, maze, MID, consts)
        # target (1+cos0)/2 = 1 exceeds any weight, so visible pairs grow
        assert state.W[0, 1] > w_before
        assert np.isclose(state.q[0], consts.dt / max(MID.tau_q, consts.dt))

    def test_energy_cap_rescales_exactly(self):
        maze = arena(rewards=((90.0, 90.0),))
        consts = SwarmConstants(n_agents=4)
        state = init_swarm(maze, MID, consts, seed=12)
        state.vel[:] = [500.0, 0.0]     # way over the cap
        state.W_r[:] = 1.0              # keep reward pull mild
        step(state, maze, MID, consts)
        ke = 0.5 * consts.mu_m * (state.vel ** 2).sum(axis=1)
        assert (ke <= consts.e_max * (1 + 1e-12)).all()
        speed_cap = np.sqrt(2 * consts.e_max / consts.mu_m)
        assert np.isclose(np.linalg.norm(state.vel, axis=1).max(), speed_cap)
        assert np.isclose(speed_cap, 81.64965809, atol=1e-6)

    def test_capture_threshold(self):
        # N=4, K=2 -> threshold ceil(4/2) = 2 agents within d_rad
        maze = arena(rewards=((20.0, 20.0), (80.0, 80.0)),
                     spawn=SpawnSpec(kind="rect", rect=(15, 15, 25, 25)))
        consts = SwarmConstants(n_agents=4, d_rad=12.0)
        state = init_swarm(maze, MID, consts, seed=13)
        state.pos = np.array([[20.0, 21.0], [20.0, 19.0], [60.0, 60.0], [61.0, 60.0]])
        step(state, maze, MID, consts)
        assert state.captured[0]
        assert not state.captured[1]
        assert state.capture_step[0] == 1
        assert state.capture_count[0] >= 2

    def test_invariants_over_many_steps(self):
        maze = arena(rewards=((70.0, 70.0),))
        consts = SwarmConstants(n_agents=15)
        state = init_swarm(maze, MID, consts, seed=14)
        prev_cap = 0
        for _ in range(200):
            step(state, maze, MID, consts)
            assert np.array_equal(state.W, state.W.T)
            assert (state.W >= consts.w_floor).all() and (state.W <= 1.0).all()
            assert (state.W_r >= consts.w_floor).all() and (state.W_r <= 1.0).all()
            assert (state.phase >= 0).all() and (state.phase < 2 * np.pi).all()
            for arr in (state.q, state.r, state.c):
                assert (arr >= 0).all() and (arr <= 1.0 + 1e-12).all()
            ke = 0.5 * consts.mu_m * (state.vel ** 2).sum(axis=1)
            assert (ke <= consts.e_max * (1 + 1e-12)).all()
            cap = int(state.captured.sum())
            assert cap >= prev_cap
            prev_cap = cap


class TestRunEpisode:
    def test_trivial_task_completes(self):
        # rewards inside the spawn cluster, one agent per reward
        maze = arena(rewards=((20.0, 20.0), (22.0, 20.0)),
                     spawn=SpawnSpec(kind="rect", rect=(14, 14, 26, 26)))
        consts = SwarmConstants(n_agents=2, d_rad=12.0)
        res = run_episode(maze, MID, consts, seed=0, cutoff_s=5.0)
        assert res.n_captured == 2
        assert res.completion_step < res.n_t

    def test_unreachable_rewards_time_out(self):
        box = [[[60, 40], [60, 60]], [[60, 60], [80, 60]],
               [[80, 60], [80, 40]], [[80, 40], [60, 40]]]
        maze = arena(rewards=((70.0, 50.0),), walls=box,
                     spawn=SpawnSpec(kind="rect", rect=(5, 5, 25, 25)))
        consts = SwarmConstants(n_agents=6)
        res = run_episode(maze, MID, consts, seed=1, cutoff_s=3.0)
        assert res.n_captured == 0
        assert res.completion_step == res.n_t

    def test_bit_identical_replay(self):
        maze = arena(rewards=((60.0, 60.0),))
        consts = SwarmConstants(n_agents=10)
        a = run_episode(maze, MID, consts, seed=3, cutoff_s=3.0, store_trajectory=True)
        b = run_episode(maze, MID, consts, seed=3, cutoff_s=3.0, store_trajectory=True)
        assert a.capture_steps == b.capture_steps
        assert np.array_equal(a.n_cap_trace, b.n_cap_trace)
        assert np.array_equal(a.traj_pos, b.traj_pos)

    def test_ncap_trace_monotone(self):
        maze = arena(rewards=((25.0, 25.0), (60.0, 60.0)),
                     spawn=SpawnSpec(kind="rect", rect=(10, 10, 40, 40)))
        consts = SwarmConstants(n_agents=8)
        res = run_episode(maze, MID, consts, seed=4, cutoff_s=5.0)
        assert (np.diff(res.n_cap_trace) >= 0).all()

    def test_cutoff_validation(self):
        maze = arena()
        consts = SwarmConstants(n_agents=2, duration=10.0)
        with pytest.raises(ValueError):
            run_episode(maze, MID, consts, seed=0, cutoff_s=20.0)

    def test_trajectory_decimation(self):
        maze = arena()
        consts = SwarmConstants(n_agents=3)
        res = run_episode(maze, MID, consts, seed=5, cutoff_s=2.0,
                          store_trajectory=True, traj_decimation=10)
        assert res.traj_steps[0] == 0
        assert (np.diff(res.traj_steps) == 10).all()
