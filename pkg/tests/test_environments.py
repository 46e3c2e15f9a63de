import numpy as np
import pytest

from lamdis.environments import (
    UP, DOWN, RIGHT, LEFT,
    builtin,
    mix_observation,
    parity_check,
    random_block_mdp,
    tk_equality,
    tk_equality_collapsed,
    tmaze,
    tmaze_aliased_phi,
    tmaze_go_right_then_up_policy,
    tmaze_perfect,
    tmaze_sweep_policy,
)
from lamdis.model import Policy, validate
from lamdis.solver import DiscrepancySpec, lambda_discrepancy, v_lambda

from conftest import random_policy


def test_tmaze_state_count_follows_grouping_convention():
    assert tmaze(5, 0.9).pomdp.n_states == 15
    assert tmaze(1, 0.9).pomdp.n_states == 7
    assert tmaze(5, 0.9).pomdp.n_obs == 5


def test_tmaze_rejects_zero_corridor():
    with pytest.raises(ValueError):
        tmaze(0, 0.9)


def test_tmaze_wall_bumps_stay_put():
    p = tmaze(3, 0.9).pomdp
    # Up against the corridor ceiling: stay, no reward.
    assert p.T[2, UP, 2] == 1.0
    assert p.T[2, DOWN, 2] == 1.0
    # Left from the start bumps.
    assert p.T[0, LEFT, 0] == 1.0
    assert p.R[2].max() == 0.0


def test_tmaze_undiscounted_return_along_optimal_path():
    src = tmaze(5, 1.0)
    pol = tmaze_go_right_then_up_policy()
    v = v_lambda(src.pomdp, pol, 1.0)
    # Blue start: going right then up collects the +4.
    assert v.values[0] == pytest.approx(4.0, abs=1e-9)
    # Red start under the same policy eats the -0.1.
    assert v.values[1] == pytest.approx(-0.1, abs=1e-9)


def test_parity_check_shape_and_start():
    src = parity_check()
    p = src.pomdp
    assert p.n_states == 13
    assert p.n_actions == 2
    assert p.n_obs == 6
    assert np.allclose(p.p0[:4], 0.25)


def test_parity_check_zero_values_everywhere(parity, rng):
    p = parity.pomdp
    for _ in range(5):
        pol = random_policy(p, rng)
        for lam in (0.0, 1.0):
            v = v_lambda(p, pol, lam)
            # Reachable observations all have zero expected return.
            assert np.abs(v.values[:5]).max() < 1e-12


def test_parity_perturbations_break_symmetry(rng):
    spec = DiscrepancySpec(0.0, 1.0)
    perturbed = parity_check(start_probs=(0.3, 0.2, 0.25, 0.25)).pomdp
    vals = [lambda_discrepancy(perturbed, random_policy(perturbed, rng), spec)
            for _ in range(20)]
    assert max(vals) > 1e-6

    stayed = parity_check(stay_prob=0.05).pomdp
    vals = [lambda_discrepancy(stayed, random_policy(stayed, rng), spec)
            for _ in range(20)]
    assert max(vals) > 1e-6


def test_tk_equality_shape(tk):
    assert tk.pomdp.n_states == 6
    assert tk.pomdp.n_actions == 2


def test_tk_equality_policy_spread_kernels_match(tk, rng):
    # The defining property: both policy-spread kernels agree after one
    # transition step, for any policy.
    p = tk.pomdp
    from lamdis.model import policy_tensors, transitions_with_terminal_absorption

    for _ in range(10):
        pol = random_policy(p, rng)
        pt = policy_tensors(p, pol)
        T = transitions_with_terminal_absorption(p)
        phi_wpi = np.einsum("sw,wta->sta", p.Phi, pt.WPi)
        t_mc = np.einsum("sbu,uta->sbta", T, pt.PiS)
        t_td = np.einsum("sbu,uta->sbta", T, phi_wpi)
        assert np.abs(t_mc - t_td).max() < 1e-12


def test_tk_equality_collapsed_mdp_equivalent(tk, rng):
    collapsed = tk_equality_collapsed()
    for _ in range(5):
        pol = random_policy(tk.pomdp, rng)
        for lam in (0.0, 0.5, 1.0):
            va = v_lambda(tk.pomdp, pol, lam).values
            vb = v_lambda(collapsed.pomdp, pol, lam).values
            assert np.abs(va - vb).max() < 1e-10


def test_mix_observation_endpoints(tmaze5):
    p = tmaze_perfect(5, 1.0).pomdp
    phi_al = tmaze_aliased_phi("both", 5)
    assert np.array_equal(mix_observation(p, phi_al, 0.0).Phi, p.Phi)
    assert np.array_equal(mix_observation(p, phi_al, 1.0).Phi, phi_al)
    mixed = mix_observation(p, phi_al, 0.5)
    assert np.allclose(mixed.Phi.sum(axis=1), 1.0, atol=1e-12)


def test_mix_observation_rejects_bad_inputs(tmaze5):
    p = tmaze5.pomdp
    with pytest.raises(ValueError):
        mix_observation(p, np.eye(4), 0.5)
    phi = np.zeros_like(p.Phi)
    with pytest.raises(ValueError):
        mix_observation(p, phi, 0.5)


def test_aliased_phi_patterns():
    for pattern in ("corridor", "junction", "both"):
        phi = tmaze_aliased_phi(pattern, 5)
        assert np.allclose(phi.sum(axis=1), 1.0)
    with pytest.raises(ValueError):
        tmaze_aliased_phi("everything", 5)


def test_sweep_policy_goes_right_until_junction():
    pol = tmaze_sweep_policy()
    assert pol.probs[0, RIGHT] == 1.0
    assert pol.probs[2, RIGHT] == 1.0
    assert pol.probs[3, UP] == pytest.approx(2 / 3)
    assert pol.probs[3, DOWN] == pytest.approx(1 / 3)


def test_random_block_mdp_is_block(rng):
    src = random_block_mdp(5, 2, seed=9)
    p = src.pomdp
    assert validate(p).passed
    # Each observation column touches exactly one state.
    assert np.all((p.Phi > 0).sum(axis=0) == 1)


def test_builtin_lookup():
    assert builtin("tmaze").pomdp.n_states == 15
    assert builtin("parity").name == "parity-check"
    with pytest.raises(KeyError):
        builtin("battleship")


@pytest.mark.parametrize("make", [lambda: tmaze(5, 0.9), parity_check, tk_equality,
                                  lambda: tmaze_perfect(5, 1.0)])
def test_builtins_validate(make):
    assert validate(make().pomdp).passed
