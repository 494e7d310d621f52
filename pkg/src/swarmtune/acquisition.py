"""Monte-Carlo batch acquisition functions and candidate-batch optimization.

Batch expected improvement (with and without the noiseless-incumbent
assumption) is estimated from joint posterior draws built on a fixed
stratified-Gaussian base-sample set, so every evaluation inside one
optimization run sees the same deterministic, continuous surface. Batches
are proposed by scoring a low-discrepancy raw set, greedily filling the
best seeds up to the batch size, and refining with bound-constrained
quasi-Newton ascent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular
from scipy.optimize import minimize
from scipy.stats import qmc

from .gp import (GPModel, kernel_matrix, normalize_inputs, posterior, psd_factor,
                 stratified_normal)
from .seeding import derive_seed

KINDS = ("qei", "qnei", "random")


@dataclass(frozen=True)
class AcqConfig:
    kind: str = "qei"
    n_mc: int = 512       # MC samples per acquisition estimate
    q: int = 3            # batch size
    n_raw: int = 256      # low-discrepancy raw candidates
    n_starts: int = 8     # batches refined by quasi-Newton ascent
    seed: int = 0
    greedy_pool: int = 64     # raw points considered during greedy fill
    refine_maxiter: int = 60

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        if self.n_mc < 1 or self.q < 1:
            raise ValueError("n_mc and q must be >= 1")


@dataclass(frozen=True)
class CandidateBatch:
    points: np.ndarray          # (q, d) raw units
    acq_value: float | None     # estimated utility; None for random batches


def _improvement_qei(draws: np.ndarray, best_y: float) -> float:
    """Eq-style batch improvement: mean over draws of max_j max(E_ij - Y*, 0)."""
    return float(np.maximum(draws - best_y, 0.0).max(axis=1).mean())


def _improvement_qnei(draws_q: np.ndarray, draws_obs: np.ndarray) -> float:
    """Noisy improvement: per draw, floor(max over batch - max over observed)."""
    return float(np.maximum(draws_q.max(axis=1) - draws_obs.max(axis=1), 0.0).mean())


def qei_value(model: GPModel, Xq, best_y: float, cfg: AcqConfig) -> float:
    """Batch expected improvement over the incumbent, by quasi-MC."""
    Xq = np.atleast_2d(np.asarray(Xq, dtype=float))
    post = posterior(model, Xq)
    z = stratified_normal(cfg.n_mc, len(Xq))
    draws = post.mean_raw[None, :] + z @ psd_factor(post.cov_raw).T
    return _improvement_qei(draws, best_y)


def qnei_value(model: GPModel, Xq, X_obs, cfg: AcqConfig) -> float:
    """Noisy batch expected improvement against the observed set.

    The joint posterior is drawn over the deduplicated union of batch and
    observed points, so a batch that coincides with observed points reads
    the same draw columns and scores exactly zero.
    """
    Xq = np.atleast_2d(np.asarray(Xq, dtype=float))
    X_obs = np.atleast_2d(np.asarray(X_obs, dtype=float))
    if len(X_obs) == 0:
        raise ValueError("X_obs must be nonempty")
    stacked = np.vstack([Xq, X_obs])
    uniq, inv = np.unique(stacked, axis=0, return_inverse=True)
    post = posterior(model, uniq)
    z = stratified_normal(cfg.n_mc, len(uniq))
    draws = post.mean_raw[None, :] + z @ psd_factor(post.cov_raw).T
    q = len(Xq)
    return _improvement_qnei(draws[:, inv[:q]], draws[:, inv[q:]])


class _QeiSurface:
    """Fixed-base-sample qEI estimator reused across one optimization run."""

    def __init__(self, model: GPModel, best_y: float, cfg: AcqConfig):
        self.model = model
        self.best_y = best_y
        self.n_mc = cfg.n_mc
        self.Z = stratified_normal(cfg.n_mc, cfg.q)

    def value(self, Xq: np.ndarray) -> float:
        post = posterior(self.model, Xq)
        factor = psd_factor(post.cov_raw)
        draws = post.mean_raw[None, :] + self.Z[:, :len(Xq)] @ factor.T
        return _improvement_qei(draws, self.best_y)

    def value_singles(self, P: np.ndarray) -> np.ndarray:
        post = posterior(self.model, P)
        std = np.sqrt(np.maximum(post.var_raw, 0.0))
        draws = post.mean_raw[None, :] + self.Z[:, :1] * std[None, :]
        return np.maximum(draws - self.best_y, 0.0).mean(axis=0)


class _QneiSurface:
    """Fixed-base-sample qNEI estimator with the observed block cached.

    The observed points' joint draw is factorized once; each batch
    evaluation only solves for the conditional block of the candidates.
    """

    def __init__(self, model: GPModel, X_obs: np.ndarray, cfg: AcqConfig):
        self.model = model
        self.hyper = model.hyper
        self.Xn_obs = normalize_inputs(X_obs, model.data.bounds)
        ks = kernel_matrix(model.Xn, self.Xn_obs, self.hyper)
        self.v_obs = solve_triangular(model.L, ks, lower=True)
        mean_obs = self.hyper.mean_const + ks.T @ model.alpha
        cov_oo = kernel_matrix(self.Xn_obs, self.Xn_obs, self.hyper) - self.v_obs.T @ self.v_obs
        self.L_oo = psd_factor(0.5 * (cov_oo + cov_oo.T))
        Z = stratified_normal(cfg.n_mc, len(X_obs) + cfg.q)
        self.Z_o = Z[:, :len(X_obs)]
        self.Z_q = Z[:, len(X_obs):]
        ys, ym = model.y_std, model.y_mean
        self.E_obs = ym + ys * (mean_obs[None, :] + self.Z_o @ self.L_oo.T)
        self.obs_max = self.E_obs.max(axis=1)

    def _cond_blocks(self, Xq: np.ndarray):
        m = self.model
        Xqn = normalize_inputs(Xq, m.data.bounds)
        ks = kernel_matrix(m.Xn, Xqn, self.hyper)
        v_q = solve_triangular(m.L, ks, lower=True)
        mean_q = self.hyper.mean_const + ks.T @ m.alpha
        cov_qq = kernel_matrix(Xqn, Xqn, self.hyper) - v_q.T @ v_q
        cov_oq = kernel_matrix(self.Xn_obs, Xqn, self.hyper) - self.v_obs.T @ v_q
        M = solve_triangular(self.L_oo, cov_oq, lower=True)
        return mean_q, cov_qq, M

    def value(self, Xq: np.ndarray) -> float:
        mean_q, cov_qq, M = self._cond_blocks(Xq)
        S = cov_qq - M.T @ M
        Ls = psd_factor(0.5 * (S + S.T))
        b = len(Xq)
        E_std = mean_q[None, :] + self.Z_o @ M + self.Z_q[:, :b] @ Ls.T
        E = self.model.y_mean + self.model.y_std * E_std
        return float(np.maximum(E.max(axis=1) - self.obs_max, 0.0).mean())

    def value_singles(self, P: np.ndarray) -> np.ndarray:
        mean_q, cov_qq, M = self._cond_blocks(P)
        cond_var = np.maximum(np.diag(cov_qq) - (M * M).sum(axis=0), 0.0)
        E_std = mean_q[None, :] + self.Z_o @ M + self.Z_q[:, :1] * np.sqrt(cond_var)[None, :]
        E = self.model.y_mean + self.model.y_std * E_std
        return np.maximum(E - self.obs_max[:, None], 0.0).mean(axis=0)


def _raw_pool(bounds: np.ndarray, n_raw: int, seed) -> np.ndarray:
    eng = qmc.Sobol(d=len(bounds), scramble=True, seed=derive_seed(seed, "raw"))
    import warnings
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        u = eng.random(n_raw)
    lo, hi = bounds[:, 0], bounds[:, 1]
    return lo + u * (hi - lo)


def optimize_batch(model: GPModel | None, data, bounds, cfg: AcqConfig) -> CandidateBatch:
    """Propose the next q-point batch inside the search box.

    random: q uniform in-bounds points. qei/qnei: greedy-filled seed
    batches from a scored Sobol pool, each refined by L-BFGS-B on the
    fixed-base-sample MC surface; the best refined batch wins.
    Deterministic given cfg.seed.
    """
    bounds = np.asarray(bounds, dtype=float).reshape(-1, 2)
    lo, hi = bounds[:, 0], bounds[:, 1]
    if cfg.kind == "random":
        rng = np.random.default_rng(derive_seed(cfg.seed, "random-batch"))
        return CandidateBatch(points=rng.uniform(lo, hi, size=(cfg.q, len(bounds))),
                              acq_value=None)

    if model is None:
        raise ValueError("qei/qnei need a fitted model")
    if cfg.kind == "qei":
        surface = _QeiSurface(model, best_y=float(np.max(data.Y)), cfg=cfg)
    else:
        surface = _QneiSurface(model, X_obs=data.X, cfg=cfg)

    pool = _raw_pool(bounds, cfg.n_raw, cfg.seed)
    scores = surface.value_singles(pool)
    order = np.argsort(scores)[::-1]
    seeds = order[:cfg.n_starts]
    fill_pool = order[:max(cfg.greedy_pool, cfg.n_starts)]

    batches = []
    for s in seeds:
        chosen = [int(s)]
        while len(chosen) < cfg.q:
            best_val, best_j = -np.inf, None
            base = pool[chosen]
            for j in fill_pool:
                j = int(j)
                if j in chosen:
                    continue
                val = surface.value(np.vstack([base, pool[j][None, :]]))
                if val > best_val:
                    best_val, best_j = val, j
            chosen.append(best_j)
        batches.append(pool[chosen])

    flat_bounds = list(np.tile(bounds, (cfg.q, 1)))
    best_pts, best_val = None, -np.inf
    for batch in batches:
        res = minimize(
            lambda flat: -surface.value(flat.reshape(cfg.q, -1)),
            batch.reshape(-1), method="L-BFGS-B", bounds=flat_bounds,
            options={"maxiter": cfg.refine_maxiter},
        )
        val = -res.fun
        if val > best_val:
            best_val, best_pts = val, res.x.reshape(cfg.q, -1)
    pts = np.clip(best_pts, lo, hi)
    return CandidateBatch(points=pts, acq_value=float(best_val))
