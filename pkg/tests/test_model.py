import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lamdis.environments import random_block_mdp, tmaze
from lamdis.model import (
    InvalidPomdpError,
    Policy,
    Pomdp,
    policy_tensors,
    require_valid,
    row_softmax,
    validate,
    validate_policy,
)

from conftest import random_policy


def test_validate_passes_on_builtin(tmaze5):
    report = validate(tmaze5.pomdp)
    assert report.passed, str(report)


def test_validate_catches_bad_transition_row(tmaze5):
    p = tmaze5.pomdp
    T = p.T.copy()
    T[0, 0, :] *= 0.9
    bad = Pomdp(T=T, R=p.R, Phi=p.Phi, p0=p.p0, gamma=p.gamma, terminal=p.terminal)
    report = validate(bad)
    failed = {c.name: c for c in report.failures()}
    assert "T rows stochastic" in failed
    assert "T[0,0,:]" in failed["T rows stochastic"].detail


def test_validate_catches_negative_phi(tmaze5):
    p = tmaze5.pomdp
    Phi = p.Phi.copy()
    Phi[2, 0] -= 0.5
    Phi[2, 2] += 0.5
    bad = Pomdp(T=p.T, R=p.R, Phi=Phi, p0=p.p0, gamma=p.gamma, terminal=p.terminal)
    report = validate(bad)
    failed = {c.name: c for c in report.failures()}
    assert "Phi nonnegative" in failed
    assert "Phi[2,0]" in failed["Phi nonnegative"].detail


def test_validate_catches_terminal_reward(tmaze5):
    p = tmaze5.pomdp
    R = p.R.copy()
    R[-1, 0] = 1.0
    bad = Pomdp(T=p.T, R=R, Phi=p.Phi, p0=p.p0, gamma=p.gamma, terminal=p.terminal)
    assert not validate(bad).passed
    with pytest.raises(InvalidPomdpError):
        require_valid(bad)


def test_policy_softmax_consistency(rng):
    logits = rng.normal(0, 1, (4, 3))
    pol = Policy.from_logits(logits)
    assert np.allclose(pol.probs.sum(axis=1), 1.0, atol=1e-12)
    assert np.allclose(pol.probs, row_softmax(logits), atol=1e-12)


def test_validate_policy_shape_mismatch(tmaze5):
    pol = Policy.uniform(3, 4)
    assert not validate_policy(pol, tmaze5.pomdp).passed


def test_policy_tensors_block_mdp_gives_indicator_W(block6, rng):
    pol = random_policy(block6.pomdp, rng)
    pt = policy_tensors(block6.pomdp, pol)
    # Phi is a permutation, so each observation pins down its state exactly.
    assert np.allclose(pt.W, block6.pomdp.Phi.T, atol=1e-12)


def test_policy_tensors_tmaze_symmetric_split(tmaze5):
    # A color-independent policy cannot distinguish the two goal contexts, so
    # the corridor observation splits evenly between them at every position.
    p = tmaze5.pomdp
    pol = Policy.uniform(p.n_obs, p.n_actions)
    pt = policy_tensors(p, pol)
    W_corr = pt.W[2]
    for i in range(5):
        blue, red = 2 + i, 7 + i
        assert W_corr[blue] == pytest.approx(W_corr[red], abs=1e-12)


def test_policy_tensors_structure(tmaze5, rng):
    p = tmaze5.pomdp
    pol = random_policy(p, rng)
    pt = policy_tensors(p, pol)
    n_obs, n_states, n_actions = p.n_obs, p.n_states, p.n_actions
    # Diagonality of Pi and PiS off-diagonal slices.
    off = ~np.eye(n_obs, dtype=bool)
    assert np.all(pt.Pi[off] == 0)
    off_s = ~np.eye(n_states, dtype=bool)
    assert np.all(pt.PiS[off_s] == 0)
    # WPi = W * probs elementwise.
    assert np.allclose(pt.WPi, pt.W[:, :, None] * pol.probs[:, None, :], atol=1e-12)
    # Reachable rows of W are distributions.
    reach = ~pt.unreachable_obs
    assert np.allclose(pt.W[reach].sum(axis=1), 1.0, atol=1e-9)


def test_W_at_gamma_zero_is_start_posterior(tmaze5, rng):
    p = tmaze5.pomdp.with_gamma(0.0)
    pol = random_policy(p, rng)
    pt = policy_tensors(p, pol)
    joint = p.Phi.T * p.p0[None, :]
    occ = joint.sum(axis=1)
    for w in np.flatnonzero(occ > 0):
        assert np.allclose(pt.W[w], joint[w] / occ[w], atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6), n_states=st.integers(2, 6),
       n_actions=st.integers(1, 4), n_obs=st.integers(1, 5))
def test_policy_spreads_are_conditional_probabilities(seed, n_states, n_actions, n_obs):
    rng = np.random.default_rng(seed)
    T = rng.dirichlet(np.ones(n_states), size=(n_states, n_actions))
    Phi = rng.dirichlet(np.ones(n_obs), size=n_states)
    p = Pomdp(
        T=T,
        R=rng.normal(size=(n_states, n_actions)),
        Phi=Phi,
        p0=rng.dirichlet(np.ones(n_states)),
        gamma=0.9,
        terminal=np.zeros(n_states, dtype=bool),
    )
    pol = Policy.from_logits(rng.normal(0, 0.5, (n_obs, n_actions)))
    pt = policy_tensors(p, pol)
    # Both policy spreads map each state to a distribution over (s', a).
    assert np.all(pt.PiS >= 0)
    assert np.allclose(pt.PiS.sum(axis=(1, 2)), 1.0, atol=1e-9)
    phi_wpi = np.einsum("sw,wta->sta", p.Phi, pt.WPi)
    assert np.all(phi_wpi >= -1e-15)
    assert np.allclose(phi_wpi.sum(axis=(1, 2)), 1.0, atol=1e-9)


def test_immutability(tmaze5):
    p = tmaze5.pomdp
    with pytest.raises(ValueError):
        p.T[0, 0, 0] = 0.5
