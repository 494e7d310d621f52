"""Episode scoring for time-optimal cooperative capture, and the two-maze average.

Losses live in [-1, 0]: 0 is instant capture of every reward, -1 is a
timeout with nothing captured. Faster completion and more captures both
move the loss strictly toward 0.
"""

from __future__ import annotations

from .controller import EpisodeResult, run_episode
from .env import MazeSpec
from .params import ParamVector, SwarmConstants
from .seeding import derive_seed


def episode_loss(result: EpisodeResult, n_t: int, n_r: int) -> float:
    """Loss -t_final / (n_t * (n_captured + 1)).

    On timeout t_final is the full horizon n_t. The denominator uses
    (n_captured + 1) so the value stays within [-1, 0] and every extra
    capture strictly shrinks the penalty.
    """
    if result.completion_step > n_t:
        raise ValueError(f"completion_step {result.completion_step} exceeds n_t {n_t}")
    t_final = result.completion_step
    return -t_final / (n_t * (result.n_captured + 1))


def combined_score(l_hairpin: float, l_tunnel: float) -> float:
    """Average the two per-maze losses into the overall performance value."""
    for name, v in (("l_hairpin", l_hairpin), ("l_tunnel", l_tunnel)):
        if not -1.0 <= v <= 0.0:
            raise ValueError(f"{name}={v} outside [-1, 0]")
    return 0.5 * (l_hairpin + l_tunnel)


def maze_losses(params: ParamVector, consts: SwarmConstants,
                mazes: tuple[MazeSpec, ...], seed, cutoff_s: float = 120.0) -> tuple[float, ...]:
    """Run one episode per maze with independent derived seeds."""
    losses = []
    for maze in mazes:
        ep_seed = derive_seed(seed, maze.name)
        res = run_episode(maze, params, consts, ep_seed, cutoff_s=cutoff_s)
        losses.append(episode_loss(res, res.n_t, maze.n_rewards))
    return tuple(losses)


def evaluate_params(params: ParamVector, consts: SwarmConstants,
                    mazes: tuple[MazeSpec, MazeSpec], seed,
                    cutoff_s: float = 120.0) -> float:
    """Combined objective for one parameter vector; deterministic given seed."""
    losses = maze_losses(params, consts, mazes, seed, cutoff_s=cutoff_s)
    return combined_score(*losses)
