import numpy as np
import pytest

from lamdis.environments import random_block_mdp, tmaze, tmaze_perfect
from lamdis.memory import augment, lift_policy, random_memory
from lamdis.model import Policy
from lamdis.solver import DiscrepancySpec, NormKind, lambda_discrepancy
from lamdis.optimizer import (
    OptimConfig,
    improve_memory,
    ld_objective_and_gradient,
    memoryless_policy_gradient,
    optimize_with_value_improvement,
    policy_gradient_improve,
    policy_search,
    start_value,
)

import oracles
from conftest import random_policy


def lifted_random_policy(p, n_mem, rng):
    return Policy.from_logits(rng.normal(0.0, 0.5, (p.n_obs * n_mem, p.n_actions)))


def test_trivial_memory_has_zero_gradient(parity, rng):
    p = parity.pomdp
    mu = random_memory(1, p.n_obs, p.n_actions, seed=0)
    rep = ld_objective_and_gradient(p, mu.logits, random_policy(p, rng))
    assert np.all(rep.grad == 0.0)


def test_gradient_matches_finite_differences_on_parity(parity, rng):
    p = parity.pomdp
    mu = random_memory(2, p.n_obs, p.n_actions, seed=3)
    pol = lifted_random_policy(p, 2, rng)
    rep = ld_objective_and_gradient(p, mu.logits, pol, check=True)
    assert rep.objective > 0
    assert rep.fd_max_rel_err is not None and rep.fd_max_rel_err <= 1e-4


def test_gradient_matches_finite_differences_on_tiger(tiger, rng):
    p = tiger.pomdp
    mu = random_memory(2, p.n_obs, p.n_actions, seed=4)
    pol = lifted_random_policy(p, 2, rng)
    rep = ld_objective_and_gradient(p, mu.logits, pol, check=True)
    assert rep.fd_max_rel_err <= 1e-4


def test_objective_agrees_with_solver_discrepancy(tmaze5, rng):
    p = tmaze5.pomdp
    mu = random_memory(2, p.n_obs, p.n_actions, seed=5)
    pol = lifted_random_policy(p, 2, rng)
    for norm in NormKind:
        spec = DiscrepancySpec(0.0, 1.0, norm)
        rep = ld_objective_and_gradient(p, mu.logits, pol, spec)
        direct = lambda_discrepancy(augment(p, mu), pol, spec)
        assert np.sqrt(rep.objective) == pytest.approx(direct, abs=1e-9)


def test_improve_memory_descends_on_tmaze(tmaze5):
    p = tmaze5.pomdp
    cfg = OptimConfig(mem_steps=500, step_size=0.01, seed=0)
    base_pi, _ = policy_search(p, 20, cfg.discrepancy, seed=0)
    pi_mu = lift_policy(base_pi, 2)
    mu0 = random_memory(2, p.n_obs, p.n_actions, seed=1)
    result = improve_memory(p, mu0, pi_mu, cfg)
    assert not result.failed
    assert len(result.trace) == cfg.mem_steps + 1
    assert result.trace[-1] < result.trace[0]


def test_improve_memory_stays_put_at_zero_objective(rng):
    # On a block MDP the discrepancy vanishes identically, its gradient is
    # exactly zero, and Adam leaves the logits alone.
    p = random_block_mdp(4, 2, seed=0).pomdp
    cfg = OptimConfig(mem_steps=10, step_size=0.1, seed=0)
    mu0 = random_memory(2, p.n_obs, p.n_actions, seed=2)
    pol = lifted_random_policy(p, 2, rng)
    result = improve_memory(p, mu0, pol, cfg)
    assert np.array_equal(result.memory.logits, mu0.logits)
    assert np.all(result.trace < 1e-20)


def test_improve_memory_descends_for_thirty_seeds(tmaze5):
    # No per-step monotonicity claimed, but the final objective beats the
    # initial one for every seed.
    p = tmaze5.pomdp
    for seed in range(30):
        cfg = OptimConfig(mem_steps=300, step_size=0.01, seed=seed)
        pi_mu = lift_policy(policy_search(p, 20, seed=seed)[0], 2)
        mu0 = random_memory(2, p.n_obs, p.n_actions, seed=[seed, 1])
        result = improve_memory(p, mu0, pi_mu, cfg)
        assert result.trace[-1] < result.trace[0], f"seed {seed}"


def test_improve_memory_deterministic(tmaze5):
    p = tmaze5.pomdp
    cfg = OptimConfig(mem_steps=200, step_size=0.01, seed=0)
    pi_mu = lift_policy(policy_search(p, 10, seed=3)[0], 2)
    mu0 = random_memory(2, p.n_obs, p.n_actions, seed=3)
    r1 = improve_memory(p, mu0, pi_mu, cfg)
    r2 = improve_memory(p, mu0, pi_mu, cfg)
    assert np.array_equal(r1.trace, r2.trace)
    assert np.array_equal(r1.memory.logits, r2.memory.logits)


def test_policy_search_block_mdp_all_tiny(rng):
    p = random_block_mdp(5, 3, seed=1).pomdp
    _, values = policy_search(p, 100, seed=0)
    assert np.all(values <= 1e-8)


def test_policy_search_tmaze_positive(tmaze5):
    pol, values = policy_search(tmaze5.pomdp, 100, seed=0)
    assert values.max() > 1e-6
    assert lambda_discrepancy(tmaze5.pomdp, pol, DiscrepancySpec()) == pytest.approx(
        values.max()
    )


def test_policy_search_single_draw(tmaze5):
    pol, values = policy_search(tmaze5.pomdp, 1, seed=9)
    assert values.shape == (1,)
    rng = np.random.default_rng(9)
    expected = rng.normal(0.0, 0.5, size=(1, 5, 4))[0]
    assert np.array_equal(pol.logits, expected)


def test_policy_gradient_reaches_mdp_optimum():
    src = tmaze_perfect(5, gamma=0.9)
    p = src.pomdp
    rng = np.random.default_rng(0)
    result = policy_gradient_improve(p, rng.normal(0, 0.5, (p.n_obs, p.n_actions)),
                                     OptimConfig(policy_steps=8000, step_size=0.05))
    v_star = oracles.value_iteration(p)
    j_star = p.p0 @ v_star
    assert result.trace[-1] >= 0.99 * j_star


def test_policy_gradient_zero_step_size_is_noop(tmaze5):
    p = tmaze5.pomdp
    logits = np.zeros((p.n_obs, p.n_actions))
    result = policy_gradient_improve(p, logits, OptimConfig(policy_steps=1, step_size=0.0))
    assert np.array_equal(result.policy.logits, logits)


def test_memoryless_policy_gradient_cannot_beat_uniform_on_parity(parity):
    p = parity.pomdp
    cfg = OptimConfig(n_random_policies=20, mem_steps=50, policy_steps=200,
                      step_size=0.05, seed=0)
    result = memoryless_policy_gradient(p, cfg)
    uniform_j = start_value(p, Policy.uniform(p.n_obs, p.n_actions))
    assert uniform_j == pytest.approx(0.0, abs=1e-12)
    assert result.report.final_start_value <= uniform_j + 1e-6


def test_start_value_matches_state_evaluation(tiger, rng):
    p = tiger.pomdp
    pol = random_policy(p, rng)
    v = oracles.mc_state_values(p, pol)
    assert start_value(p, pol) == pytest.approx(p.p0 @ v, abs=1e-9)


def test_pipeline_single_memory_state_degenerates_to_memoryless(tmaze5):
    p = tmaze5.pomdp
    cfg = OptimConfig(n_random_policies=10, mem_steps=20, policy_steps=50,
                      step_size=0.01, seed=4)
    full = optimize_with_value_improvement(p, 1, cfg)
    base = memoryless_policy_gradient(p, cfg)
    assert np.array_equal(full.report.policy_trace, base.report.policy_trace)
    assert np.array_equal(full.report.search_discrepancies,
                          base.report.search_discrepancies)


def test_pipeline_report_serializes(parity):
    p = parity.pomdp
    cfg = OptimConfig(n_random_policies=5, mem_steps=20, policy_steps=20,
                      step_size=0.01, seed=0)
    result = optimize_with_value_improvement(p, 2, cfg, pre_augment=True,
                                             env_name="parity")
    import json

    payload = json.loads(result.report.to_json())
    assert payload["schema"] == "lamdis.optimize.v1"
    assert payload["n_mem"] == 2
    assert payload["pre_augment"] is True
    assert len(payload["mem_trace"]) == cfg.mem_steps + 1


def test_gradient_stationarity_after_convergence(tmaze5):
    # First-order stationarity at whatever minimum the descent found.
    p = tmaze5.pomdp
    cfg = OptimConfig(mem_steps=3000, step_size=0.05, seed=0)
    pi_mu = lift_policy(policy_search(p, 50, seed=0)[0], 2)
    mu0 = random_memory(2, p.n_obs, p.n_actions, seed=1)
    result = improve_memory(p, mu0, pi_mu, cfg)
    rep = ld_objective_and_gradient(p, result.memory.logits, pi_mu)
    assert np.linalg.norm(rep.grad) < 1e-3
