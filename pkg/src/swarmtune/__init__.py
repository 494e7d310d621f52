"""Bayesian optimization of phase-coupled swarm controllers in 2D mazes."""

from .acquisition import AcqConfig, CandidateBatch, optimize_batch, qei_value, qnei_value
from .controller import (AgentState, EpisodeResult, SwarmState, init_swarm,
                         preferred_distance, reward_increment, run_episode, step,
                         swarm_increment)
from .convergence import batch_dissimilarity, dissimilarity, max_posterior_variance
from .env import (MazeSpec, Point, SpawnSpec, WallSegment, builtin_mazes, clip_move,
                  line_of_sight, load_maze, spawn_agents, visibility_matrix,
                  visibility_to_points)
from .gp import (Dataset, GPHyperparams, GPModel, PosteriorGaussian, QmcNormalSampler,
                 build_model, fit, kernel, load_model, mll, posterior, sample_posterior,
                 save_model)
from .objective import combined_score, episode_loss, evaluate_params, maze_losses
from .orchestrator import (RunConfig, RunRecord, anticipate, best_observed_trace,
                           export_viz, incumbent, model_from_record, replay, run_bo)
from .params import PARAM_BOUNDS, PARAM_NAMES, ParamVector, SwarmConstants

__version__ = "0.1.0"
