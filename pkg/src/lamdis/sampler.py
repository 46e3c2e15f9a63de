"""Trajectory simulation and sample-based value / discrepancy estimation.

These estimators are deliberately independent of the closed-form solver: they
only ever see sampled (observation, action, reward) sequences, so they can
act as a statistical oracle for it. Value estimation uses offline iterative
evaluation of lambda-returns (recompute returns against the previous estimate
until convergence) rather than eligibility traces, which keeps step-size
schedules out of the oracle.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np

from .model import Policy, Pomdp, require_valid, transitions_with_terminal_absorption


@dataclass(frozen=True)
class Trajectory:
    """One episode: aligned observation/action/reward arrays."""

    obs: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    terminated: bool
    seed: int

    def __post_init__(self):
        if not (len(self.obs) == len(self.actions) == len(self.rewards)):
            raise ValueError("misaligned trajectory arrays")
        if len(self.obs) == 0:
            raise ValueError("empty trajectory")

    def __len__(self):
        return len(self.obs)

    def steps(self):
        """Iterate (observation, action, reward) triples."""
        return zip(self.obs.tolist(), self.actions.tolist(), self.rewards.tolist())


def _sample_rows(cum_rows: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Vectorized categorical sampling given per-row cumulative sums."""
    return np.minimum(
        (u[:, None] >= cum_rows).sum(axis=1), cum_rows.shape[1] - 1
    )


def simulate(
    p: Pomdp, pi: Policy, n_episodes: int, horizon: int, seed: int
) -> list[Trajectory]:
    """Sample episodes in lockstep: s ~ p0, w ~ Phi(s), a ~ pi(w), s' ~ T.

    Episodes end on entering a terminal state (terminated=True) or at the
    horizon (terminated=False). Deterministic given the seed.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if n_episodes < 1:
        raise ValueError("n_episodes must be >= 1")
    require_valid(p, pi)
    if p.p0[p.terminal].sum() > 0:
        raise ValueError("initial distribution puts mass on terminal states")

    rng = np.random.default_rng(seed)
    cum_phi = np.cumsum(p.Phi, axis=1)
    cum_pi = np.cumsum(pi.probs, axis=1)
    cum_t = np.cumsum(p.T, axis=2)

    states = _sample_rows(np.cumsum(p.p0)[None, :], rng.random(n_episodes))
    # Lockstep columns; ragged data gathered per episode afterwards.
    ep_ids: list[np.ndarray] = []
    obs_cols: list[np.ndarray] = []
    act_cols: list[np.ndarray] = []
    rew_cols: list[np.ndarray] = []
    active = np.arange(n_episodes)
    terminated = np.zeros(n_episodes, dtype=bool)

    for _ in range(horizon):
        alive = ~p.terminal[states]
        terminated[active[~alive]] = True
        active = active[alive]
        states = states[alive]
        if active.size == 0:
            break
        obs = _sample_rows(cum_phi[states], rng.random(active.size))
        acts = _sample_rows(cum_pi[obs], rng.random(active.size))
        rews = p.R[states, acts]
        ep_ids.append(active.copy())
        obs_cols.append(obs)
        act_cols.append(acts)
        rew_cols.append(rews)
        states = _sample_rows(cum_t[states, acts], rng.random(active.size))
    else:
        # Horizon exhausted; episodes sitting on a terminal state still count
        # as terminated.
        terminated[active[p.terminal[states]]] = True

    flat_ep = np.concatenate(ep_ids)
    order = np.argsort(flat_ep, kind="stable")
    flat_ep = flat_ep[order]
    flat_obs = np.concatenate(obs_cols)[order]
    flat_act = np.concatenate(act_cols)[order]
    flat_rew = np.concatenate(rew_cols)[order]
    bounds = np.searchsorted(flat_ep, np.arange(n_episodes + 1))

    trajs = []
    for e in range(n_episodes):
        lo, hi = bounds[e], bounds[e + 1]
        trajs.append(
            Trajectory(
                obs=flat_obs[lo:hi],
                actions=flat_act[lo:hi],
                rewards=flat_rew[lo:hi],
                terminated=bool(terminated[e]),
                seed=seed,
            )
        )
    return trajs


@dataclass(frozen=True)
class QEstimate:
    """Sample-based Q estimate with visitation bookkeeping."""

    values: np.ndarray  # (n_obs, n_actions), NaN where never visited
    visited: np.ndarray  # boolean (n_obs, n_actions)
    lam: float
    visit_counts: np.ndarray
    discounted_visits: np.ndarray
    truncation_bias_bound: float
    n_truncated: int
    sweeps: int


def _pack_time_major(trajs: list[Trajectory], n_actions: int):
    """Pad episodes into (max_len, n_episodes) arrays plus masks."""
    n_ep = len(trajs)
    lens = np.array([len(t) for t in trajs])
    max_len = int(lens.max())
    obs = np.zeros((max_len, n_ep), dtype=np.int64)
    act = np.zeros((max_len, n_ep), dtype=np.int64)
    rew = np.zeros((max_len, n_ep))
    valid = np.arange(max_len)[:, None] < lens[None, :]
    for e, t in enumerate(trajs):
        obs[: lens[e], e] = t.obs
        act[: lens[e], e] = t.actions
        rew[: lens[e], e] = t.rewards
    pair = obs * n_actions + act
    terminated = np.array([t.terminated for t in trajs])
    return pair, rew, valid, lens, terminated


def _lambda_returns(pair, rew, valid, lens, gamma, lam, q_flat):
    """All lambda-returns against the bootstrap table q_flat, time-major."""
    max_len, n_ep = pair.shape
    # Bootstrap term uses the next step's realized (observation, action) pair;
    # the final step of an episode bootstraps to zero (terminal value, or the
    # documented truncation bias).
    has_next = np.arange(max_len)[:, None] < (lens - 1)[None, :]
    next_pair = np.vstack([pair[1:], pair[-1:]])
    boot = np.where(has_next, q_flat[next_pair], 0.0)
    z = rew + gamma * (1.0 - lam) * boot
    G = np.zeros((max_len, n_ep))
    carry = np.zeros(n_ep)
    for t in range(max_len - 1, -1, -1):
        is_last = lens == t + 1
        carry = np.where(is_last, 0.0, carry)
        carry = z[t] + gamma * lam * carry
        G[t] = carry
    return np.where(valid, G, 0.0)


def estimate_q_lambda(
    trajs: list[Trajectory],
    n_obs: int,
    n_actions: int,
    lam: float,
    gamma: float,
    tol: float = 1e-6,
    max_sweeps: int = 10_000,
    episode_weights: np.ndarray | None = None,
    weighting: str = "undiscounted",
) -> QEstimate:
    """Every-visit lambda-return evaluation iterated to convergence.

    Each sweep recomputes all lambda-returns against the previous estimate
    and replaces the estimate with per-pair visit averages, until the
    estimate changes by less than ``tol`` in sup norm. At lam = 1 this is a
    single Monte Carlo averaging pass. ``episode_weights`` supports bootstrap
    resampling.

    ``weighting`` selects how multiple visits to a pair are averaged:
    "undiscounted" weights every visit equally, "discounted" weights a visit
    at in-episode time t by gamma^t, which matches the discounted-occupancy
    state-blending of the closed-form fixed point and is the variant used in
    oracle comparisons.
    """
    if weighting not in ("undiscounted", "discounted"):
        raise ValueError(f"unknown weighting {weighting!r}")
    pair, rew, valid, lens, _ = _pack_time_major(trajs, n_actions)
    n_pairs = n_obs * n_actions
    w = np.ones(len(trajs)) if episode_weights is None else np.asarray(episode_weights, float)
    step_w = np.broadcast_to(w[None, :], pair.shape)[valid]
    flat_pair = pair[valid]

    # Discounted visitation (gamma^t summed per pair); doubles as the visit
    # weight under the discounted averaging variant.
    tgrid = np.broadcast_to(np.arange(pair.shape[0])[:, None].astype(float), pair.shape)
    disc_w = (gamma ** tgrid[valid]) * step_w
    disc = np.bincount(flat_pair, weights=disc_w, minlength=n_pairs)

    if weighting == "discounted":
        step_w = disc_w
    counts = np.bincount(flat_pair, weights=step_w, minlength=n_pairs)
    visited = counts > 0

    q = np.zeros(n_pairs)
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        G = _lambda_returns(pair, rew, valid, lens, gamma, lam, q)
        sums = np.bincount(flat_pair, weights=G[valid] * step_w, minlength=n_pairs)
        q_new = np.where(visited, sums / np.where(visited, counts, 1.0), 0.0)
        delta = np.abs(q_new - q).max()
        q = q_new
        if delta < tol or lam == 1.0:
            break

    n_truncated = int((~np.array([t.terminated for t in trajs])).sum())
    if gamma < 1.0:
        max_r = max(np.abs(t.rewards).max() for t in trajs)
        horizon = int(max(len(t) for t in trajs))
        bias = (gamma**horizon) * max_r / (1.0 - gamma) if n_truncated else 0.0
    else:
        bias = 0.0 if n_truncated == 0 else float("inf")

    values = np.where(visited, q, np.nan).reshape(n_obs, n_actions)
    return QEstimate(
        values=values,
        visited=visited.reshape(n_obs, n_actions),
        lam=lam,
        visit_counts=counts.reshape(n_obs, n_actions),
        discounted_visits=disc.reshape(n_obs, n_actions),
        truncation_bias_bound=float(bias),
        n_truncated=n_truncated,
        sweeps=sweeps,
    )


def estimate_ld(
    trajs: list[Trajectory],
    n_obs: int,
    n_actions: int,
    lambda1: float,
    lambda2: float,
    gamma: float,
    weighting: str = "undiscounted",
    tol: float = 1e-6,
) -> float:
    """Sample-based discrepancy: root of the visitation-weighted mean squared
    gap between the two lambda-return estimates over visited pairs.

    ``weighting`` picks undiscounted visit counts (default) or gamma-discounted
    visitation, the variant that matches the solver's occupancy-weighted norm.
    """
    if weighting not in ("undiscounted", "discounted"):
        raise ValueError(f"unknown weighting {weighting!r}")
    e1 = estimate_q_lambda(trajs, n_obs, n_actions, lambda1, gamma, tol=tol, weighting=weighting)
    e2 = estimate_q_lambda(trajs, n_obs, n_actions, lambda2, gamma, tol=tol, weighting=weighting)
    both = e1.visited & e2.visited
    if not both.any():
        raise ValueError("no observation-action pair was visited")
    w = e1.visit_counts if weighting == "undiscounted" else e1.discounted_visits
    w = np.where(both, w, 0.0)
    w = w / w.sum()
    delta = np.where(both, e1.values - e2.values, 0.0)
    return float(np.sqrt((w * delta**2).sum()))


def bootstrap_q_sigma(
    trajs: list[Trajectory],
    n_obs: int,
    n_actions: int,
    lam: float,
    gamma: float,
    n_boot: int = 200,
    seed: int = 0,
    weighting: str = "undiscounted",
) -> np.ndarray:
    """Episode-level bootstrap standard deviation of the Q estimate per pair.

    Resamples episodes with replacement and recomputes the estimator with
    multiplicity weights; entries never visited across enough resamples come
    back NaN.
    """
    rng = np.random.default_rng(seed)
    n_ep = len(trajs)
    samples = np.empty((n_boot, n_obs, n_actions))
    for b in range(n_boot):
        w = rng.multinomial(n_ep, np.full(n_ep, 1.0 / n_ep)).astype(float)
        est = estimate_q_lambda(
            trajs, n_obs, n_actions, lam, gamma, tol=1e-8,
            episode_weights=w, weighting=weighting,
        )
        samples[b] = est.values
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return np.nanstd(samples, axis=0, ddof=1)


def propagate_occupancy(p: Pomdp, pi: Policy, horizon: int):
    """Exact truncated discounted occupancy by distribution propagation.

    Returns (c, joint) with c[s] = sum_{t < horizon} gamma^t Pr(s_t = s) and
    joint[w, s] the matching discounted joint observation-state occupancy.
    An independent check of the solver's linear-system occupancy.
    """
    require_valid(p, pi)
    T = transitions_with_terminal_absorption(p)
    T_pi = np.einsum("sa,sat->st", p.Phi @ pi.probs, T)
    d = p.p0.copy()
    c = np.zeros_like(d)
    scale = 1.0
    for _ in range(horizon):
        c += scale * d
        d = T_pi.T @ d
        scale *= p.gamma
    return c, p.Phi.T * c[None, :]


def dump_trajectories(trajs: list[Trajectory], fp) -> None:
    """Write trajectories as JSON lines (episode index, steps, terminated)."""
    for i, t in enumerate(trajs):
        record = {
            "episode": i,
            "steps": [[int(w), int(a), float(r)] for w, a, r in t.steps()],
            "terminated": t.terminated,
            "seed": t.seed,
        }
        fp.write(json.dumps(record) + "\n")


def load_trajectories(fp) -> list[Trajectory]:
    trajs = []
    for line in fp:
        if not line.strip():
            continue
        rec = json.loads(line)
        steps = np.asarray(rec["steps"], dtype=float).reshape(-1, 3)
        trajs.append(
            Trajectory(
                obs=steps[:, 0].astype(int),
                actions=steps[:, 1].astype(int),
                rewards=steps[:, 2],
                terminated=bool(rec["terminated"]),
                seed=int(rec.get("seed", 0)),
            )
        )
    return trajs
