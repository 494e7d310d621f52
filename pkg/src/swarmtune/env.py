"""Maze geometry: walls, line-of-sight visibility, spawning, and motion clipping.

A maze is an axis-aligned rectangle with zero-thickness wall segments,
an ordered list of reward locations, and a spawn region. All operations
are pure; a loaded MazeSpec is never mutated. Coordinates are in points.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

WALL_CLEARANCE = 1e-6   # spawn points rejected closer than this to a wall
CLIP_BACKOFF = 1e-3     # points; how far a clipped move stops short of a wall


class MazeError(ValueError):
    """Raised for unparseable or invariant-violating maze definitions."""


@dataclass(frozen=True)
class Point:
    x: float
    y: float

    def __post_init__(self):
        if not (np.isfinite(self.x) and np.isfinite(self.y)):
            raise MazeError(f"non-finite point ({self.x}, {self.y})")


@dataclass(frozen=True)
class WallSegment:
    a: Point
    b: Point

    def __post_init__(self):
        if self.a == self.b:
            raise MazeError(f"degenerate wall segment at ({self.a.x}, {self.a.y})")


@dataclass(frozen=True)
class SpawnSpec:
    kind: str                                   # "uniform" | "rect"
    rect: tuple[float, float, float, float] | None = None


@dataclass(frozen=True)
class MazeSpec:
    name: str
    bounds: tuple[float, float, float, float]   # xmin, ymin, xmax, ymax
    walls: np.ndarray                           # (M, 2, 2) segment endpoints
    rewards: np.ndarray                         # (K, 2)
    spawn: SpawnSpec
    notes: str = ""
    # clip segments = walls plus the four boundary edges, built once
    _clip_segments: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "walls", np.asarray(self.walls, dtype=float).reshape(-1, 2, 2))
        object.__setattr__(self, "rewards", np.asarray(self.rewards, dtype=float).reshape(-1, 2))
        xmin, ymin, xmax, ymax = self.bounds
        edges = np.array([
            [[xmin, ymin], [xmax, ymin]],
            [[xmax, ymin], [xmax, ymax]],
            [[xmax, ymax], [xmin, ymax]],
            [[xmin, ymax], [xmin, ymin]],
        ])
        clip = np.concatenate([self.walls, edges]) if len(self.walls) else edges
        object.__setattr__(self, "_clip_segments", clip)

    @property
    def n_rewards(self) -> int:
        return len(self.rewards)

    @property
    def spawn_rect(self) -> tuple[float, float, float, float]:
        if self.spawn.kind == "rect":
            return self.spawn.rect
        return self.bounds

    def contains(self, p) -> bool:
        x, y = _as_xy(p)
        xmin, ymin, xmax, ymax = self.bounds
        return xmin <= x <= xmax and ymin <= y <= ymax


def _as_xy(p):
    if isinstance(p, Point):
        return p.x, p.y
    q = np.asarray(p, dtype=float)
    return float(q[0]), float(q[1])


def _cross(ux, uy, vx, vy):
    return ux * vy - uy * vx


def _segments_cross(p, q, walls) -> np.ndarray:
    """Proper-crossing test of one segment p->q against (M,2,2) walls.

    Touching or collinear-grazing contact does not count as a crossing;
    only transversal intersections block.
    """
    if len(walls) == 0:
        return np.zeros(0, dtype=bool)
    a, b = walls[:, 0], walls[:, 1]
    ab = b - a
    d1 = _cross(ab[:, 0], ab[:, 1], p[0] - a[:, 0], p[1] - a[:, 1])
    d2 = _cross(ab[:, 0], ab[:, 1], q[0] - a[:, 0], q[1] - a[:, 1])
    pq = (q[0] - p[0], q[1] - p[1])
    d3 = _cross(pq[0], pq[1], a[:, 0] - p[0], a[:, 1] - p[1])
    d4 = _cross(pq[0], pq[1], b[:, 0] - p[0], b[:, 1] - p[1])
    return (d1 * d2 < 0) & (d3 * d4 < 0)


def line_of_sight(maze: MazeSpec, a, b) -> bool:
    """True iff the open segment a-b crosses no wall. Symmetric; a sees itself."""
    p = np.array(_as_xy(a))
    q = np.array(_as_xy(b))
    if np.array_equal(p, q):
        return True
    return not bool(_segments_cross(p, q, maze.walls).any())


def _pairwise_blocked(P: np.ndarray, Q: np.ndarray, walls: np.ndarray) -> np.ndarray:
    """(N,K) bool: segment P_i -> Q_k crosses some wall."""
    n, k = len(P), len(Q)
    if len(walls) == 0:
        return np.zeros((n, k), dtype=bool)
    a, b = walls[:, 0], walls[:, 1]          # (M,2)
    ab = b - a
    # d1[i,m] depends on P only; d2[k,m] on Q only
    d1 = _cross(ab[None, :, 0], ab[None, :, 1], P[:, None, 0] - a[None, :, 0], P[:, None, 1] - a[None, :, 1])
    d2 = _cross(ab[None, :, 0], ab[None, :, 1], Q[:, None, 0] - a[None, :, 0], Q[:, None, 1] - a[None, :, 1])
    # pq[i,k] = Q_k - P_i  -> d3,d4 are (N,K,M)
    pqx = Q[None, :, 0] - P[:, None, 0]
    pqy = Q[None, :, 1] - P[:, None, 1]
    rax = a[None, None, :, 0] - P[:, None, None, 0]
    ray = a[None, None, :, 1] - P[:, None, None, 1]
    rbx = b[None, None, :, 0] - P[:, None, None, 0]
    rby = b[None, None, :, 1] - P[:, None, None, 1]
    d3 = pqx[:, :, None] * ray - pqy[:, :, None] * rax
    d4 = pqx[:, :, None] * rby - pqy[:, :, None] * rbx
    crossing = (d1[:, None, :] * d2[None, :, :] < 0) & (d3 * d4 < 0)
    return crossing.any(axis=2)


def visibility_matrix(maze: MazeSpec, positions) -> np.ndarray:
    """Symmetric boolean visibility matrix with a false diagonal.

    The diagonal is false by convention: self-pairs carry no direction
    vector and are excluded from swarm interactions.
    """
    P = np.asarray(positions, dtype=float).reshape(-1, 2)
    vis = ~_pairwise_blocked(P, P, maze.walls)
    np.fill_diagonal(vis, False)
    return vis


def visibility_to_points(maze: MazeSpec, positions, targets) -> np.ndarray:
    """(N,K) boolean matrix: position i has line of sight to target k."""
    P = np.asarray(positions, dtype=float).reshape(-1, 2)
    Q = np.asarray(targets, dtype=float).reshape(-1, 2)
    return ~_pairwise_blocked(P, Q, maze.walls)


def _point_segment_distance(P: np.ndarray, walls: np.ndarray) -> np.ndarray:
    """(N,M) distances from points to wall segments."""
    if len(walls) == 0:
        return np.full((len(P), 0), np.inf)
    a, b = walls[:, 0], walls[:, 1]
    ab = b - a                                              # (M,2)
    ap = P[:, None, :] - a[None, :, :]                      # (N,M,2)
    denom = (ab * ab).sum(axis=1)                           # (M,)
    t = np.clip((ap * ab[None, :, :]).sum(axis=2) / denom, 0.0, 1.0)
    closest = a[None, :, :] + t[:, :, None] * ab[None, :, :]
    return np.linalg.norm(P[:, None, :] - closest, axis=2)


def spawn_agents(maze: MazeSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """Sample n points uniformly in the spawn region, clear of walls.

    Deterministic given the generator state. Rejection-samples any point
    within WALL_CLEARANCE of a wall segment.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    xmin, ymin, xmax, ymax = maze.spawn_rect
    if not (xmax > xmin and ymax > ymin):
        raise MazeError(f"spawn region degenerate: {maze.spawn_rect}")
    out = np.empty((n, 2))
    need = np.ones(n, dtype=bool)
    for _ in range(1000):
        k = int(need.sum())
        if k == 0:
            return out
        pts = rng.uniform((xmin, ymin), (xmax, ymax), size=(k, 2))
        ok = _point_segment_distance(pts, maze.walls).min(axis=1, initial=np.inf) > WALL_CLEARANCE
        idx = np.flatnonzero(need)[ok]
        out[idx] = pts[ok]
        need[idx] = False
    raise MazeError("spawn rejection sampling failed; spawn region may be wall-covered")


def _first_crossing_params(P: np.ndarray, D: np.ndarray, segments: np.ndarray) -> np.ndarray:
    """Earliest crossing parameter in (0,1] for rays P + t*D against segments.

    Returns inf where no crossing. P, D are (N,2); segments (M,2,2).
    """
    a, b = segments[:, 0], segments[:, 1]
    e = b - a                                               # (M,2)
    denom = D[:, None, 0] * e[None, :, 1] - D[:, None, 1] * e[None, :, 0]
    apx = a[None, :, 0] - P[:, None, 0]
    apy = a[None, :, 1] - P[:, None, 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (apx * e[None, :, 1] - apy * e[None, :, 0]) / denom
        u = (apx * D[:, None, 1] - apy * D[:, None, 0]) / denom
    valid = (np.abs(denom) > 0) & (t > 0) & (t <= 1) & (u >= 0) & (u <= 1)
    t = np.where(valid, t, np.inf)
    return t.min(axis=1, initial=np.inf)


def clip_moves(maze: MazeSpec, frm: np.ndarray, to: np.ndarray) -> np.ndarray:
    """Vectorized clip_move for (N,2) start/end arrays."""
    frm = np.asarray(frm, dtype=float).reshape(-1, 2)
    to = np.asarray(to, dtype=float).reshape(-1, 2)
    D = to - frm
    length = np.linalg.norm(D, axis=1)
    moving = length > 0
    t_hit = np.full(len(frm), np.inf)
    if moving.any():
        t_hit[moving] = _first_crossing_params(frm[moving], D[moving], maze._clip_segments)
    out = to.copy()
    hit = np.isfinite(t_hit) & moving
    if hit.any():
        # stop CLIP_BACKOFF points short of the wall, never behind the start
        t_stop = np.maximum(t_hit[hit] - CLIP_BACKOFF / length[hit], 0.0)
        out[hit] = frm[hit] + t_stop[:, None] * D[hit]
    return out


def clip_move(maze: MazeSpec, frm, to) -> np.ndarray:
    """Clip a single move so it never crosses a wall or leaves the bounds.

    Returns `to` for an unobstructed move, otherwise the point on the
    segment just before the first crossing, backed off CLIP_BACKOFF
    toward `frm`.
    """
    return clip_moves(maze, np.asarray(_as_xy(frm)), np.asarray(_as_xy(to)))[0]


def _validate(spec: MazeSpec) -> MazeSpec:
    xmin, ymin, xmax, ymax = spec.bounds
    if not (np.isfinite(spec.bounds).all() and xmax > xmin and ymax > ymin):
        raise MazeError(f"bounds: invalid rectangle {spec.bounds}")
    if spec.n_rewards < 1:
        raise MazeError("rewards: at least one reward required")
    for i, (x, y) in enumerate(spec.rewards):
        if not (xmin < x < xmax and ymin < y < ymax):
            raise MazeError(f"rewards[{i}]: ({x}, {y}) outside bounds {spec.bounds}")
    for i, ((ax, ay), (bx, by)) in enumerate(spec.walls):
        if ax == bx and ay == by:
            raise MazeError(f"walls[{i}]: degenerate segment")
        for x, y in ((ax, ay), (bx, by)):
            if not (xmin <= x <= xmax and ymin <= y <= ymax):
                raise MazeError(f"walls[{i}]: endpoint ({x}, {y}) outside bounds")
    if spec.spawn.kind == "rect":
        if spec.spawn.rect is None:
            raise MazeError("spawn.rect: missing rectangle for rect spawn")
        sx0, sy0, sx1, sy1 = spec.spawn.rect
        if not (xmin <= sx0 < sx1 <= xmax and ymin <= sy0 < sy1 <= ymax):
            raise MazeError(f"spawn.rect: {spec.spawn.rect} not inside bounds")
    elif spec.spawn.kind != "uniform":
        raise MazeError(f"spawn.type: unknown kind {spec.spawn.kind!r}")
    return spec


def _spec_from_dict(doc: dict) -> MazeSpec:
    try:
        name = str(doc["name"])
        bounds = tuple(float(v) for v in doc["bounds"])
        walls = [[(float(p[0]), float(p[1])) for p in w] for w in doc.get("walls", [])]
        rewards = [(float(p[0]), float(p[1])) for p in doc["rewards"]]
        sp = doc["spawn"]
        spawn = SpawnSpec(
            kind=str(sp["type"]),
            rect=tuple(float(v) for v in sp["rect"]) if "rect" in sp else None,
        )
    except (KeyError, TypeError, IndexError, ValueError) as exc:
        raise MazeError(f"maze schema error: {exc!r}") from exc
    if len(bounds) != 4:
        raise MazeError(f"bounds: expected 4 values, got {len(bounds)}")
    walls_arr = np.array(walls, dtype=float).reshape(-1, 2, 2) if walls else np.zeros((0, 2, 2))
    return _validate(MazeSpec(
        name=name, bounds=bounds, walls=walls_arr,
        rewards=np.array(rewards, dtype=float),
        spawn=spawn, notes=str(doc.get("notes", "")),
    ))


def load_maze(path) -> MazeSpec:
    """Load and validate a maze JSON file."""
    p = Path(path)
    try:
        doc = json.loads(p.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise MazeError(f"{p}: {exc}") from exc
    return _spec_from_dict(doc)


def builtin_mazes() -> tuple[MazeSpec, MazeSpec]:
    """The bundled hairpin and tunnel environments, in that order."""
    specs = []
    for name in ("hairpin", "tunnel"):
        text = resources.files("swarmtune").joinpath(f"mazes/{name}.json").read_text()
        specs.append(_spec_from_dict(json.loads(text)))
    return specs[0], specs[1]
