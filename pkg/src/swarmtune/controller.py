"""Phase-coupled Hebbian swarm controller and episode simulator.

Agents carry a phase oscillator and three low-pass-filtered input channels
(swarming, reward, sensory cue). Synaptic-style weights encode preferred
distances between agents and toward rewards; each simulation step moves
every agent to close half the gap between preferred and actual distance,
averaged over its visible partners, under a momentum blend and a hard
kinetic-energy cap. A reward is cooperatively captured when enough agents
sit inside the capture radius simultaneously.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .env import MazeSpec, clip_moves, spawn_agents, visibility_matrix, visibility_to_points
from .params import ParamVector, SwarmConstants

TWO_PI = 2.0 * np.pi
_TINY = 1e-12   # distance below which a direction vector is treated as undefined


@dataclass(frozen=True)
class AgentState:
    """Read-only view of one agent, mostly for inspection and tests."""

    pos: np.ndarray
    vel: np.ndarray
    phase: float
    q: float
    r: float
    c: float


@dataclass
class SwarmState:
    pos: np.ndarray           # (N,2)
    vel: np.ndarray           # (N,2)
    phase: np.ndarray         # (N,) wrapped to [0, 2pi)
    q: np.ndarray             # (N,) filtered swarming input, [0,1]
    r: np.ndarray             # (N,) filtered reward input, [0,1]
    c: np.ndarray             # (N,) filtered cue input, [0,1]
    W: np.ndarray             # (N,N) agent-agent weights, symmetric
    W_r: np.ndarray           # (N,K) agent-reward weights
    captured: np.ndarray      # (K,) bool
    capture_step: np.ndarray  # (K,) step index of capture, -1 if never
    capture_count: np.ndarray  # (K,) agents in radius when captured, 0 if never
    t: int = 0

    @property
    def n_agents(self) -> int:
        return len(self.pos)

    def agent(self, i: int) -> AgentState:
        return AgentState(
            pos=self.pos[i].copy(), vel=self.vel[i].copy(),
            phase=float(self.phase[i]), q=float(self.q[i]),
            r=float(self.r[i]), c=float(self.c[i]),
        )

    def copy(self) -> "SwarmState":
        return SwarmState(
            pos=self.pos.copy(), vel=self.vel.copy(), phase=self.phase.copy(),
            q=self.q.copy(), r=self.r.copy(), c=self.c.copy(),
            W=self.W.copy(), W_r=self.W_r.copy(), captured=self.captured.copy(),
            capture_step=self.capture_step.copy(),
            capture_count=self.capture_count.copy(), t=self.t,
        )


@dataclass(frozen=True)
class EpisodeResult:
    """Outcome of one simulated episode."""

    capture_steps: tuple      # per reward: step index or None
    capture_counts: tuple     # per reward: agents in radius at capture, 0 if never
    n_cap_trace: np.ndarray   # captured-reward count after each executed step
    completion_step: int      # first step with all rewards captured, else n_t
    n_t: int                  # episode horizon in steps
    dt: float
    traj_steps: np.ndarray    # (F,) logged step indices (empty if not stored)
    traj_pos: np.ndarray      # (F,N,2) logged positions

    @property
    def n_captured(self) -> int:
        return sum(s is not None for s in self.capture_steps)

    @property
    def capture_times_s(self) -> tuple:
        return tuple(None if s is None else s * self.dt for s in self.capture_steps)


def preferred_distance(w, scale):
    """Distance encoded by a weight: -scale*log(w), for w in (0, 1]."""
    w = np.asarray(w, dtype=float)
    if np.any(w <= 0):
        raise ValueError("weight must be positive")
    out = -scale * np.log(w)
    return float(out) if out.ndim == 0 else out


def _pairwise_distances(pos: np.ndarray) -> np.ndarray:
    diff = pos[:, None, :] - pos[None, :, :]
    return np.sqrt((diff * diff).sum(axis=2))


def init_swarm(maze: MazeSpec, params: ParamVector, consts: SwarmConstants, seed) -> SwarmState:
    """Spawn agents and initialize weights from the starting geometry.

    Weights start distance-consistent (W = exp(-D/scale)), so preferred
    distances equal actual distances and the swarm increment is zero until
    learning moves the weights.
    """
    rng = np.random.default_rng(seed)
    n = consts.n_agents
    pos = spawn_agents(maze, n, rng)
    phase = rng.uniform(0.0, TWO_PI, size=n)
    D = _pairwise_distances(pos)
    W = np.clip(np.exp(-D / params.sigma), consts.w_floor, 1.0)
    W = 0.5 * (W + W.T)
    np.fill_diagonal(W, 1.0)   # unused by the dynamics
    d_r = np.linalg.norm(pos[:, None, :] - maze.rewards[None, :, :], axis=2)
    W_r = np.clip(np.exp(-d_r / params.kappa), consts.w_floor, 1.0)
    k = maze.n_rewards
    return SwarmState(
        pos=pos, vel=np.zeros((n, 2)), phase=phase,
        q=np.zeros(n), r=np.zeros(n), c=np.zeros(n),
        W=W, W_r=W_r,
        captured=np.zeros(k, dtype=bool),
        capture_step=np.full(k, -1, dtype=int),
        capture_count=np.zeros(k, dtype=int),
    )


def swarm_increment(state: SwarmState, V: np.ndarray, params: ParamVector,
                    consts: SwarmConstants) -> np.ndarray:
    """Per-agent displacement from visible neighbors.

    Each visible pair closes half the gap between its actual distance and
    the weight-encoded preferred distance, averaged over the agent's
    visible neighbors. Agents with no visible neighbor do not move.
    """
    pos = state.pos
    diff = pos[None, :, :] - pos[:, None, :]          # diff[i,j] = x_j - x_i
    D = np.sqrt((diff * diff).sum(axis=2))
    D_pref = -params.sigma * np.log(state.W)
    Vf = V & (D > _TINY)                              # coincident pairs have no direction
    with np.errstate(divide="ignore", invalid="ignore"):
        unit = diff / D[:, :, None]
    gap = np.where(Vf, D - D_pref, 0.0)
    contrib = gap[:, :, None] * np.where(Vf[:, :, None], unit, 0.0)
    denom = V.sum(axis=1).astype(float)
    out = contrib.sum(axis=1)
    nz = denom > 0
    out[nz] /= (2.0 * denom[nz, None])
    out[~nz] = 0.0
    return out


def reward_increment(state: SwarmState, maze: MazeSpec, params: ParamVector,
                     consts: SwarmConstants) -> np.ndarray:
    """Per-agent displacement toward its selected visible reward.

    Each agent pursues the visible, uncaptured reward with its strongest
    weight (winner-take-all, matching the max-selection of the reward
    input channel) and closes half the gap between actual distance and
    the weight-encoded preferred distance. Captured rewards stop
    attracting; agents with nothing visible do not move.
    """
    active = ~state.captured
    out = np.zeros_like(state.pos)
    if not active.any():
        return out
    rewards = maze.rewards[active]
    W_r = state.W_r[:, active]
    V = visibility_to_points(maze, state.pos, rewards)
    diff = rewards[None, :, :] - state.pos[:, None, :]
    d = np.sqrt((diff * diff).sum(axis=2))
    Vf = V & (d > _TINY)
    any_vis = Vf.any(axis=1)
    if not any_vis.any():
        return out
    sel = np.where(Vf, W_r, -np.inf).argmax(axis=1)
    rows = np.flatnonzero(any_vis)
    k = sel[rows]
    d_sel = d[rows, k]
    pref = -params.kappa * np.log(W_r[rows, k])
    unit = diff[rows, k, :] / d_sel[:, None]
    out[rows] = 0.5 * (d_sel - pref)[:, None] * unit
    return out


def step(state: SwarmState, maze: MazeSpec, params: ParamVector,
         consts: SwarmConstants) -> SwarmState:
    """Advance the swarm one time step in place and return it."""
    dt = consts.dt
    pos = state.pos
    n = state.n_agents

    # (1) visibility
    V = visibility_matrix(maze, pos)
    V_r_all = visibility_to_points(maze, pos, maze.rewards)
    active = ~state.captured
    d_r_all = np.linalg.norm(pos[:, None, :] - maze.rewards[None, :, :], axis=2)

    # (2) first-order input filters; time constants below dt are clamped to dt
    phase_diff = state.phase[None, :] - state.phase[:, None]
    coherence = 0.5 * (1.0 + np.cos(phase_diff))
    n_vis = V.sum(axis=1)
    with np.errstate(invalid="ignore"):
        Q = np.where(n_vis > 0, (coherence * V).sum(axis=1) / np.maximum(n_vis, 1), 0.0)
    V_act = V_r_all & active[None, :]
    prox = np.where(V_act, np.exp(-d_r_all / params.kappa), 0.0)
    R = np.where(V_act.any(axis=1), prox.max(axis=1), 0.0)
    C = V_act.sum(axis=1) / maze.n_rewards
    state.q += dt / max(params.tau_q, dt) * (Q - state.q)
    state.r += dt / max(params.tau_r, dt) * (R - state.r)
    state.c += dt / max(params.tau_c, dt) * (C - state.c)

    # (3) phase advance driven by the gain-mixed inputs
    drive = consts.g_s * state.q + consts.g_r * state.r + consts.g_c * state.c
    state.phase = np.mod(state.phase + TWO_PI * dt * (params.omega_0 + params.omega_I * drive), TWO_PI)

    # (4) Hebbian updates gated by visibility; phase coherence drives W
    pd = state.phase[None, :] - state.phase[:, None]
    target = 0.5 * (1.0 + np.cos(pd))
    target = 0.5 * (target + target.T)   # enforce bit-exact symmetry
    dW = params.eta_s * dt * (target - state.W)
    state.W = np.clip(np.where(V, state.W + dW, state.W), consts.w_floor, 1.0)
    state.W = 0.5 * (state.W + state.W.T)
    np.fill_diagonal(state.W, 1.0)
    target_r = np.exp(-d_r_all / params.kappa)
    dWr = params.eta_r * dt * (target_r - state.W_r)
    state.W_r = np.clip(np.where(V_r_all, state.W_r + dWr, state.W_r), consts.w_floor, 1.0)

    # (5) displacement -> momentum blend -> kinetic-energy cap
    dx = swarm_increment(state, V, params, consts) + reward_increment(state, maze, params, consts)
    state.vel = consts.mu_m * state.vel + (1.0 - consts.mu_m) * dx / dt
    ke = 0.5 * consts.mu_m * (state.vel * state.vel).sum(axis=1)
    over = ke > consts.e_max
    if over.any():
        state.vel[over] *= np.sqrt(consts.e_max / ke[over])[:, None]

    # (6) wall-aware move
    state.pos = clip_moves(maze, pos, pos + state.vel * dt)

    # (7) cooperative capture: enough agents simultaneously inside d_rad
    threshold = int(np.ceil(n / maze.n_rewards))
    d_new = np.linalg.norm(state.pos[:, None, :] - maze.rewards[None, :, :], axis=2)
    counts = (d_new <= consts.d_rad).sum(axis=0)
    newly = (~state.captured) & (counts >= threshold)
    if newly.any():
        state.captured |= newly
        state.capture_step[newly] = state.t + 1
        state.capture_count[newly] = counts[newly]

    state.t += 1
    return state


def run_episode(maze: MazeSpec, params: ParamVector, consts: SwarmConstants, seed,
                cutoff_s: float, store_trajectory: bool = False,
                traj_decimation: int = 10, on_step=None) -> EpisodeResult:
    """Simulate until every reward is captured or the cutoff elapses.

    Deterministic given (maze, params, consts, seed). `on_step(state)` is
    invoked after each step for instrumentation; the callback must not
    mutate the state.
    """
    if cutoff_s > consts.duration:
        raise ValueError(f"cutoff_s={cutoff_s} exceeds duration={consts.duration}")
    n_t = consts.steps_for(cutoff_s)
    state = init_swarm(maze, params, consts, seed)
    traj_steps, traj_pos = [], []
    if store_trajectory:
        traj_steps.append(0)
        traj_pos.append(state.pos.copy())
    n_cap = np.zeros(n_t, dtype=int)
    steps_run = 0
    while state.t < n_t:
        step(state, maze, params, consts)
        steps_run = state.t
        n_cap[steps_run - 1] = int(state.captured.sum())
        if store_trajectory and state.t % traj_decimation == 0:
            traj_steps.append(state.t)
            traj_pos.append(state.pos.copy())
        if on_step is not None:
            on_step(state)
        if state.captured.all():
            break
    completion = int(state.t) if state.captured.all() else n_t
    return EpisodeResult(
        capture_steps=tuple(int(s) if s >= 0 else None for s in state.capture_step),
        capture_counts=tuple(int(c) for c in state.capture_count),
        n_cap_trace=n_cap[:steps_run].copy(),
        completion_step=completion,
        n_t=n_t,
        dt=consts.dt,
        traj_steps=np.array(traj_steps, dtype=int),
        traj_pos=np.array(traj_pos) if traj_pos else np.zeros((0, consts.n_agents, 2)),
    )
