"""Closed-form TD(lambda) fixed points and the lambda-discrepancy.

The TD(lambda) action-value fixed point of a POMDP under an observation
policy has the closed form

    Q = W . (I - gamma * T K)^{-1} .. R

where ``..`` contracts the trailing (state, action) index pair, W holds the
discounted-occupancy posteriors Pr(s | w), and

    K = lambda * PiS + (1 - lambda) * Phi WPi

mixes the two ways an observation policy can be spread over hidden states:
``PiS`` keeps the chain on the true state (the Monte Carlo view) while
``Phi WPi`` reallocates it across all states sharing an observation (the
one-step bootstrapping view). At lambda = 1 the fixed point is the projected
hidden-state value function; at lambda = 0 it is the value function of the
effective observation-space MDP. The gap between fixed points at two distinct
lambdas is the lambda-discrepancy, a detector of non-Markovian observations.

All inverses are computed as linear solves; systems with condition estimates
above ``tolerances.CONDITION_WARN`` emit a ``SolverConditionWarning``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .model import (
    NonEpisodicError,
    Policy,
    Pomdp,
    require_valid,
    state_policy,
    transitions_with_terminal_absorption,
)
from .tolerances import ATOL_DERIVED, CONDITION_WARN, OCCUPANCY_FLOOR


class SolverConditionWarning(RuntimeWarning):
    """A fixed-point linear system is close to singular."""


class NormKind(str, Enum):
    """Weighting schemes for the discrepancy norm.

    policy_weighted_L2 weights the squared gap at (w, a) by pi(a | w);
    occupancy_weighted_L2 additionally weights by the normalized discounted
    observation occupancy; occupancy_weighted_max takes the largest absolute
    gap over pairs with positive occupancy-policy weight. Unreachable
    observations carry zero weight under every scheme.
    """

    policy_weighted_L2 = "policy_weighted_L2"
    occupancy_weighted_L2 = "occupancy_weighted_L2"
    occupancy_weighted_max = "occupancy_weighted_max"


@dataclass(frozen=True)
class DiscrepancySpec:
    """Configuration of a lambda-discrepancy measurement."""

    lambda1: float = 0.0
    lambda2: float = 1.0
    norm: NormKind = NormKind.policy_weighted_L2

    def __post_init__(self):
        for lam in (self.lambda1, self.lambda2):
            if not 0.0 <= lam <= 1.0:
                raise ValueError(f"lambda {lam} outside [0, 1]")


@dataclass(frozen=True)
class QTable:
    """Observation-action values at the TD(lambda) fixed point."""

    values: np.ndarray  # (n_obs, n_actions)
    lam: float


@dataclass(frozen=True)
class VTable:
    """Observation values at the TD(lambda) fixed point."""

    values: np.ndarray  # (n_obs,)
    lam: float


@dataclass(frozen=True)
class EffectiveMdp:
    """The observation-space MDP induced by state-blending weights W.

    Terminal-dominated observation rows of T_obs sum to zero (absorption);
    rows for reachable, non-terminal observations are stochastic.
    """

    T_obs: np.ndarray  # (n_obs, n_actions, n_obs)
    R_obs: np.ndarray  # (n_obs, n_actions)


def _solve_checked(A: np.ndarray, b: np.ndarray, what: str) -> np.ndarray:
    """Linear solve with singularity detection and a condition warning."""
    try:
        x = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise NonEpisodicError(
            f"singular {what} system; at gamma = 1 this means some policy "
            "mass never reaches a terminal state"
        ) from exc
    if not np.all(np.isfinite(x)):
        raise NonEpisodicError(f"non-finite solution of the {what} system")
    cond = np.linalg.cond(A, 1)
    if cond > CONDITION_WARN:
        warnings.warn(
            f"{what} system condition estimate {cond:.3g} exceeds {CONDITION_WARN:.0e}",
            SolverConditionWarning,
            stacklevel=3,
        )
    return x


def stationary_weights(p: Pomdp, pi: Policy):
    """Discounted occupancy and the state-blending weights Pr(s | w).

    Solves (I - gamma * (T_pi)^T) c = p0 for the discounted state occupancy
    c, where T_pi marginalizes the policy through each state's observation
    distribution and terminal rows are zeroed. Then

        W[w, s] = Phi[s, w] * c[s] / sum_s' Phi[s', w] * c[s']

    Returns:
        (W, c, obs_occupancy) with obs_occupancy[w] = sum_s Phi[s, w] * c[s].
        Rows of W for observations with zero occupancy are uniform
        placeholders (flagged via PolicyTensors.unreachable_obs).
    """
    require_valid(p, pi)
    T = transitions_with_terminal_absorption(p)
    pi_s = state_policy(p, pi)
    T_pi = np.einsum("sa,sat->st", pi_s, T)
    n = p.n_states
    c = _solve_checked(np.eye(n) - p.gamma * T_pi.T, p.p0, "occupancy")

    joint = p.Phi.T * c[None, :]  # (n_obs, n_states), joint occupancy of (w, s)
    occ = joint.sum(axis=1)
    reachable = occ > OCCUPANCY_FLOOR
    W = np.full((p.n_obs, n), 1.0 / n)
    W[reachable] = joint[reachable] / occ[reachable, None]
    return W, c, occ


def _mixed_kernel(p: Pomdp, pi: Policy, W: np.ndarray, lam: float) -> np.ndarray:
    """The (S*A) x (S*A) matrix I - gamma * T K, flattened action-fastest."""
    T = transitions_with_terminal_absorption(p)
    pi_s = state_policy(p, pi)
    S, A = p.n_states, p.n_actions
    # K[s, s', a'] = lam * 1[s = s'] pi_s[s, a'] + (1 - lam) * PhiWPi[s, s', a']
    phi_wpi = np.einsum("sw,wt,wa->sta", p.Phi, W, pi.probs)
    K = (1.0 - lam) * phi_wpi
    idx = np.arange(S)
    K[idx, idx, :] += lam * pi_s
    TK = np.einsum("sbu,uta->sbta", T, K)
    M = TK.reshape(S * A, S * A)
    return np.eye(S * A) - p.gamma * M


def q_lambda(p: Pomdp, pi: Policy, lam: float) -> QTable:
    """Solve for the TD(lambda) fixed point over observation-action pairs.

    The (S x A x S x A) operator is flattened to an (S*A) x (S*A) matrix with
    (s, a) enumerated action-fastest, solved against the reward matrix, and
    projected through W.
    """
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda {lam} outside [0, 1]")
    W, _, _ = stationary_weights(p, pi)
    A = _mixed_kernel(p, pi, W, lam)
    B = _solve_checked(A, p.R.reshape(-1), "fixed-point").reshape(p.R.shape)
    return QTable(values=W @ B, lam=lam)


def v_lambda(p: Pomdp, pi: Policy, lam: float, atol: float = ATOL_DERIVED) -> VTable:
    """Observation values: V[w] = sum_a pi[a | w] Q[w, a].

    Also evaluates the direct WPi double-contraction form and checks the two
    agree, as a guard on the tensor plumbing.
    """
    W, _, _ = stationary_weights(p, pi)
    A = _mixed_kernel(p, pi, W, lam)
    B = _solve_checked(A, p.R.reshape(-1), "fixed-point").reshape(p.R.shape)
    q = W @ B
    v = np.einsum("wa,wa->w", pi.probs, q)
    v_direct = np.einsum("ws,wa,sa->w", W, pi.probs, B)
    if not np.allclose(v, v_direct, atol=atol, rtol=0):
        raise AssertionError("policy-weighted Q and WPi contraction disagree")
    return VTable(values=v, lam=lam)


def effective_mdp(p: Pomdp, pi: Policy) -> EffectiveMdp:
    """Marginalize hidden states into an observation-space MDP.

    T_obs[w, a, w'] = sum_{s, s'} W[w, s] T[s, a, s'] Phi[s', w'] and
    R_obs[w, a] = sum_s W[w, s] R[s, a]. Solving this MDP with one-step TD
    evaluation reproduces the lambda = 0 fixed point of the POMDP.
    """
    W, _, _ = stationary_weights(p, pi)
    T = transitions_with_terminal_absorption(p)
    T_obs = np.einsum("ws,sat,tv->wav", W, T, p.Phi)
    R_obs = W @ p.R
    return EffectiveMdp(T_obs=T_obs, R_obs=R_obs)


def solve_mdp_td0(m: EffectiveMdp, pi: Policy, gamma: float) -> np.ndarray:
    """One-step TD evaluation of an effective MDP, returning Q over (w, a)."""
    n_obs, n_actions, _ = m.T_obs.shape
    P = np.einsum("wav,vb->wavb", m.T_obs, pi.probs).reshape(
        n_obs * n_actions, n_obs * n_actions
    )
    q = _solve_checked(
        np.eye(n_obs * n_actions) - gamma * P, m.R_obs.reshape(-1), "TD(0)"
    )
    return q.reshape(n_obs, n_actions)


def _norm_weights(p: Pomdp, pi: Policy, c: np.ndarray, norm: NormKind):
    """Per-(w, a) weights for each norm kind.

    Occupancy counts only non-terminal source states: no action is ever taken
    once a terminal state is entered, so terminal-dominated observations are
    not reachable observation-ACTION pairs and carry zero weight (as do
    observations with zero occupancy outright). This matches the on-policy
    pair distribution of the sample-based estimator exactly.
    """
    active = p.Phi.T @ np.where(p.terminal, 0.0, c)
    reachable = active > OCCUPANCY_FLOOR
    if norm is NormKind.policy_weighted_L2:
        w_obs = reachable.astype(float)
    else:
        total = active[reachable].sum()
        w_obs = np.where(reachable, active / total, 0.0)
    return w_obs[:, None] * pi.probs


def apply_norm(delta: np.ndarray, weights: np.ndarray, norm: NormKind) -> float:
    if norm is NormKind.occupancy_weighted_max:
        support = weights > 0
        if not support.any():
            return 0.0
        return float(np.abs(delta[support]).max())
    return float(np.sqrt((weights * delta**2).sum()))


def lambda_discrepancy(p: Pomdp, pi: Policy, spec: DiscrepancySpec) -> float:
    """Weighted norm of the gap between two TD(lambda) fixed points.

    Both fixed points share the same state-blending weights W, so the result
    is exactly zero when the kernels coincide (block MDPs), up to solve
    round-off.
    """
    W, c, _ = stationary_weights(p, pi)
    b1 = _solve_checked(_mixed_kernel(p, pi, W, spec.lambda1), p.R.reshape(-1), "fixed-point")
    b2 = _solve_checked(_mixed_kernel(p, pi, W, spec.lambda2), p.R.reshape(-1), "fixed-point")
    delta = W @ (b1 - b2).reshape(p.R.shape)
    weights = _norm_weights(p, pi, c, spec.norm)
    return apply_norm(delta, weights, spec.norm)


def q_lambda_pair(p: Pomdp, pi: Policy, lam1: float, lam2: float):
    """Both fixed points computed with shared stationary weights."""
    W, _, occ = stationary_weights(p, pi)
    out = []
    for lam in (lam1, lam2):
        b = _solve_checked(_mixed_kernel(p, pi, W, lam), p.R.reshape(-1), "fixed-point")
        out.append(QTable(values=W @ b.reshape(p.R.shape), lam=lam))
    return out[0], out[1], occ


def lambda_discrepancies_batch(
    p: Pomdp, probs_batch: np.ndarray, spec: DiscrepancySpec
) -> np.ndarray:
    """Discrepancies of many policies at once via stacked linear solves.

    Functionally identical to mapping lambda_discrepancy over the batch (the
    same tensors, assembled batch-first); used where per-policy dispatch
    overhead matters, e.g. random-policy searches.
    """
    require_valid(p)
    probs = np.asarray(probs_batch, dtype=float)
    n = probs.shape[0]
    S, A, O = p.n_states, p.n_actions, p.n_obs
    T = transitions_with_terminal_absorption(p)

    pi_s = np.einsum("sw,nwa->nsa", p.Phi, probs)
    T_pi = np.einsum("nsa,sat->nst", pi_s, T)
    lhs = np.eye(S)[None] - p.gamma * np.swapaxes(T_pi, 1, 2)
    try:
        c = np.linalg.solve(lhs, np.broadcast_to(p.p0[:, None], (n, S, 1)))[..., 0]
    except np.linalg.LinAlgError as exc:
        raise NonEpisodicError("singular occupancy system in batch solve") from exc

    joint = p.Phi.T[None] * c[:, None, :]
    occ = joint.sum(axis=2)
    reachable = occ > OCCUPANCY_FLOOR
    W = np.where(reachable[:, :, None], joint / np.where(reachable, occ, 1.0)[:, :, None],
                 1.0 / S)

    deltas = None
    eye_sa = np.eye(S * A)[None]
    idx = np.arange(S)
    for sign, lam in ((1.0, spec.lambda1), (-1.0, spec.lambda2)):
        K = (1.0 - lam) * np.einsum("sw,nwt,nwa->nsta", p.Phi, W, probs)
        K[:, idx, idx, :] += lam * pi_s
        TK = np.einsum("sbu,nuta->nsbta", T, K).reshape(n, S * A, S * A)
        B = np.linalg.solve(eye_sa - p.gamma * TK,
                            np.broadcast_to(p.R.reshape(-1, 1), (n, S * A, 1)))
        q = np.einsum("nws,nsa->nwa", W, B.reshape(n, S, A))
        deltas = sign * q if deltas is None else deltas + sign * q
    if not np.all(np.isfinite(deltas)):
        raise NonEpisodicError("non-finite fixed point in batch solve")

    active = np.einsum("sw,ns->nw", p.Phi, np.where(p.terminal[None, :], 0.0, c))
    live = active > OCCUPANCY_FLOOR
    if spec.norm is NormKind.policy_weighted_L2:
        weights = live[:, :, None] * probs
        return np.sqrt((weights * deltas**2).sum(axis=(1, 2)))
    if spec.norm is NormKind.occupancy_weighted_L2:
        totals = np.where(live, active, 0.0).sum(axis=1, keepdims=True)
        weights = np.where(live, active / totals, 0.0)[:, :, None] * probs
        return np.sqrt((weights * deltas**2).sum(axis=(1, 2)))
    support = live[:, :, None] * probs > 0
    return np.where(support, np.abs(deltas), 0.0).max(axis=(1, 2))
