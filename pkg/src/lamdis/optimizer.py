"""Gradient-based memory synthesis and analytical policy improvement.

The training objective for memory is the squared weighted norm of the gap
between two TD(lambda) fixed points of the memory-augmented POMDP (the outer
square root is omitted during optimization; reported discrepancies always
include it). Gradients are produced by automatic differentiation through the
occupancy and fixed-point linear solves, but the contract is defined against
central finite differences: ``ld_objective_and_gradient`` ships a first-class
finite-difference check mode, and the test suite holds every gradient to it.

Policy improvement ascends the start value J = p0 . V, with V the hidden-state
evaluation of the observation policy, using the same Adam machinery.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

import jax

jax.config.update("jax_enable_x64", True)

import jax.numpy as jnp
from jax import lax

from .memory import MemoryFn, augment, lift_policy, random_memory
from .model import Policy, Pomdp, require_valid, row_softmax
from .solver import (
    DiscrepancySpec,
    NormKind,
    lambda_discrepancies_batch,
    lambda_discrepancy,
)
from .tolerances import OCCUPANCY_FLOOR


@dataclass(frozen=True)
class OptimConfig:
    """Hyperparameters shared by the optimization entry points."""

    n_random_policies: int = 100
    mem_steps: int = 20_000
    policy_steps: int = 10_000
    step_size: float = 0.01
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    discrepancy: DiscrepancySpec = field(default_factory=DiscrepancySpec)

    def __post_init__(self):
        if self.n_random_policies < 1 or self.mem_steps < 1 or self.policy_steps < 1:
            raise ValueError("counts must be >= 1")
        if self.step_size < 0:
            raise ValueError("step_size must be >= 0")


@dataclass(frozen=True)
class GradientReport:
    """Objective value, its gradient, and the finite-difference error bound."""

    objective: float
    grad: np.ndarray
    fd_max_rel_err: float | None = None


@dataclass(frozen=True)
class TraceResult:
    """Outcome of an Adam run: final parameters plus the objective trace.

    ``trace`` has one entry per step evaluated at the pre-update parameters,
    plus a final entry for the returned parameters. On numerical failure the
    best parameters seen so far are returned with the failing step index.
    """

    params: np.ndarray
    trace: np.ndarray
    failed: bool = False
    failure_step: int | None = None


def _pomdp_arrays(p: Pomdp):
    return (
        jnp.asarray(p.T),
        jnp.asarray(p.R),
        jnp.asarray(p.Phi),
        jnp.asarray(p.p0),
        jnp.asarray(p.terminal),
    )


def _augment_arrays(T, R, Phi, p0, terminal, mu_logits):
    """Differentiable memory-Cartesian product (see memory.augment)."""
    S, A, _ = T.shape
    M = mu_logits.shape[-1]
    mu_probs = jax.nn.softmax(mu_logits, axis=-1)
    mu_s = jnp.einsum("sw,wamn->samn", Phi, mu_probs)
    T_aug = jnp.einsum("sat,samn->smatn", T, mu_s).reshape(S * M, A, S * M)
    R_aug = jnp.repeat(R, M, axis=0)
    Phi_aug = jnp.kron(Phi, jnp.eye(M))
    p0_aug = jnp.zeros(S * M).at[::M].set(p0)
    terminal_aug = jnp.repeat(terminal, M)
    return T_aug, R_aug, Phi_aug, p0_aug, terminal_aug


def _weights_and_occupancy(T, Phi, p0, terminal, pi_probs, gamma):
    """State-blending weights and observation occupancy, safely masked.

    ``active`` is the occupancy restricted to non-terminal source states (the
    mass that produces observation-action pairs); norms weight by it.
    """
    S = T.shape[0]
    T_eff = jnp.where(terminal[:, None, None], 0.0, T)
    pi_s = Phi @ pi_probs
    T_pi = jnp.einsum("sa,sat->st", pi_s, T_eff)
    c = jnp.linalg.solve(jnp.eye(S) - gamma * T_pi.T, p0)
    joint = Phi.T * c[None, :]
    occ = joint.sum(axis=1)
    reachable = occ > OCCUPANCY_FLOOR
    safe = jnp.where(reachable, occ, 1.0)
    W = jnp.where(reachable[:, None], joint / safe[:, None], 1.0 / S)
    active = Phi.T @ jnp.where(terminal, 0.0, c)
    return W, active, T_eff, pi_s


def _q_values(T_eff, R, Phi, pi_probs, W, gamma, lam):
    """TD(lambda) fixed point given precomputed blending weights.

    Exploits the kernel's low-rank action structure: the (S*A)-dimensional
    fixed point B = R + gamma T K .. B only enters its own recursion through
    the policy contraction v[u] = sum_a pi_s[u,a] B[u,a] and the blended
    contraction z[w] = sum_{t,a} W[w,t] pi[w,a] B[t,a], so their mixture
    y = lam*v + (1-lam)*Phi z closes an S x S linear system. Equivalent to
    solving the flattened (S*A) x (S*A) system (which the solver module and
    the extended-precision checker still do), just much smaller.
    """
    S = T_eff.shape[0]
    pi_s = Phi @ pi_probs
    r_pi = jnp.einsum("ua,ua->u", pi_s, R)
    T_pi = jnp.einsum("ua,uat->ut", pi_s, T_eff)
    m_r = jnp.einsum("wt,wa,ta->w", W, pi_probs, R)
    G = jnp.einsum("wt,wa,tau->wu", W, pi_probs, T_eff)
    M = lam * T_pi + (1.0 - lam) * (Phi @ G)
    rhs = lam * r_pi + (1.0 - lam) * (Phi @ m_r)
    y = jnp.linalg.solve(jnp.eye(S) - gamma * M, rhs)
    B = R + gamma * jnp.einsum("sbu,u->sb", T_eff, y)
    return W @ B


def _squared_norm(delta, pi_probs, active, norm: NormKind):
    reachable = active > OCCUPANCY_FLOOR
    if norm is NormKind.policy_weighted_L2:
        weights = reachable[:, None] * pi_probs
        return jnp.sum(weights * delta**2)
    if norm is NormKind.occupancy_weighted_L2:
        total = jnp.sum(jnp.where(reachable, active, 0.0))
        weights = jnp.where(reachable, active / total, 0.0)[:, None] * pi_probs
        return jnp.sum(weights * delta**2)
    support = reachable[:, None] * pi_probs > 0
    return jnp.max(jnp.where(support, jnp.abs(delta), 0.0)) ** 2


def _ld_sq_of_memory(mu_logits, pi_probs, base_arrays, gamma, spec: DiscrepancySpec):
    """Squared weighted discrepancy of the memory-augmented POMDP."""
    T, R, Phi, p0, terminal = _augment_arrays(*base_arrays, mu_logits)
    W, active, T_eff, _ = _weights_and_occupancy(T, Phi, p0, terminal, pi_probs, gamma)
    q1 = _q_values(T_eff, R, Phi, pi_probs, W, gamma, spec.lambda1)
    q2 = _q_values(T_eff, R, Phi, pi_probs, W, gamma, spec.lambda2)
    return _squared_norm(q1 - q2, pi_probs, active, spec.norm)


def _start_value(pi_logits, T, R, Phi, p0, terminal, gamma):
    """J = p0 . V for the hidden-state evaluation of the observation policy."""
    S = T.shape[0]
    pi_probs = jax.nn.softmax(pi_logits, axis=-1)
    T_eff = jnp.where(terminal[:, None, None], 0.0, T)
    pi_s = Phi @ pi_probs
    T_pi = jnp.einsum("sa,sat->st", pi_s, T_eff)
    r_pi = jnp.einsum("sa,sa->s", pi_s, R)
    v = jnp.linalg.solve(jnp.eye(S) - gamma * T_pi, r_pi)
    return p0 @ v


def start_value(p: Pomdp, pi: Policy) -> float:
    """Expected discounted return from the start distribution under pi."""
    require_valid(p, pi)
    logits = pi.logits if pi.logits is not None else np.log(np.maximum(pi.probs, 1e-300))
    return float(_start_value(jnp.asarray(logits), *_pomdp_arrays(p), p.gamma))


def _adam_run(objective, params0: np.ndarray, steps: int, cfg: OptimConfig) -> TraceResult:
    """Minimize ``objective`` with Adam for a fixed number of steps.

    Deterministic given the inputs. The carried best-so-far parameters are
    returned if the trace turns non-finite.
    """
    b1, b2, eps, lr = cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps, cfg.step_size
    val_grad = jax.value_and_grad(objective)

    def step(carry, _):
        params, m, v, t, best_p, best_o = carry
        obj, g = val_grad(params)
        better = obj < best_o
        best_p = jnp.where(better, params, best_p)
        best_o = jnp.where(better, obj, best_o)
        t = t + 1
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        m_hat = m / (1.0 - b1**t)
        v_hat = v / (1.0 - b2**t)
        params = params - lr * m_hat / (jnp.sqrt(v_hat) + eps)
        return (params, m, v, t, best_p, best_o), obj

    @jax.jit
    def run(params0):
        init = (
            params0,
            jnp.zeros_like(params0),
            jnp.zeros_like(params0),
            jnp.zeros(()),
            params0,
            jnp.inf,
        )
        (params, _, _, _, best_p, _), objs = lax.scan(step, init, None, length=steps)
        return params, best_p, objs, objective(params)

    params0 = jnp.asarray(params0, dtype=jnp.float64)
    params, best_params, objs, final_obj = run(params0)
    trace = np.append(np.asarray(objs), float(final_obj))
    bad = np.flatnonzero(~np.isfinite(trace))
    if bad.size:
        return TraceResult(
            params=np.asarray(best_params),
            trace=trace,
            failed=True,
            failure_step=int(bad[0]),
        )
    return TraceResult(params=np.asarray(params), trace=trace)


def _solve_extended(A, b):
    """Partial-pivot Gaussian elimination; keeps whatever dtype it is given."""
    A = A.copy()
    b = b.copy()
    n = len(b)
    for k in range(n):
        piv = int(np.argmax(np.abs(A[k:, k]))) + k
        if A[piv, k] == 0:
            raise np.linalg.LinAlgError("singular matrix in extended solve")
        if piv != k:
            A[[k, piv]] = A[[piv, k]]
            b[[k, piv]] = b[[piv, k]]
        factors = A[k + 1:, k] / A[k, k]
        A[k + 1:, k:] -= factors[:, None] * A[k, k:][None, :]
        b[k + 1:] -= factors * b[k]
    x = np.zeros_like(b)
    for k in range(n - 1, -1, -1):
        x[k] = (b[k] - A[k, k + 1:] @ x[k + 1:]) / A[k, k]
    return x


def _ld_sq_objective_extended(mu_logits, pi_probs, p: Pomdp, spec: DiscrepancySpec,
                              dtype=np.longdouble):
    """Independent extended-precision evaluation of the memory objective.

    Used only by the finite-difference checker: a central difference at
    h = 1e-5 cancels ~11 digits, so float64 round-off alone shows up as a
    few-times-1e-4 relative error on near-threshold gradient entries. This
    re-implementation (plain numpy, own elimination solver, 80-bit floats on
    x86) pushes the oracle's noise floor well below the contract tolerance
    and doubles as a cross-check of the jax objective itself.
    """
    T = p.T.astype(dtype)
    R = p.R.astype(dtype)
    Phi = p.Phi.astype(dtype)
    p0 = p.p0.astype(dtype)
    lg = np.asarray(mu_logits, dtype=dtype)
    S, A = p.n_states, p.n_actions
    M = lg.shape[-1]

    z = lg - lg.max(axis=-1, keepdims=True)
    mu_probs = np.exp(z)
    mu_probs /= mu_probs.sum(axis=-1, keepdims=True)
    if M > 1:
        mu_s = np.einsum("sw,wamn->samn", Phi, mu_probs)
        T = np.einsum("sat,samn->smatn", T, mu_s).reshape(S * M, A, S * M)
        R = np.repeat(R, M, axis=0)
        Phi = np.kron(Phi, np.eye(M, dtype=dtype))
        new_p0 = np.zeros(S * M, dtype=dtype)
        new_p0[::M] = p0
        p0 = new_p0
        terminal = np.repeat(p.terminal, M)
        S = S * M
    else:
        terminal = p.terminal

    pi = np.asarray(pi_probs, dtype=dtype)
    T_eff = np.where(terminal[:, None, None], dtype(0.0), T)
    pi_s = Phi @ pi
    T_pi = np.einsum("sa,sat->st", pi_s, T_eff)
    c = _solve_extended(np.eye(S, dtype=dtype) - p.gamma * T_pi.T, p0)
    joint = Phi.T * c[None, :]
    occ = joint.sum(axis=1)
    reachable = occ > OCCUPANCY_FLOOR
    safe = np.where(reachable, occ, 1.0)
    W = np.where(reachable[:, None], joint / safe[:, None], 1.0 / S)

    qs = []
    eye_s = np.eye(S, dtype=dtype)
    for lam in (spec.lambda1, spec.lambda2):
        phi_wpi = np.einsum("sw,wt,wa->sta", Phi, W, pi)
        K = (1.0 - lam) * phi_wpi
        K += lam * eye_s[:, :, None] * pi_s[None, :, :]
        TK = np.einsum("sbu,uta->sbta", T_eff, K).reshape(S * A, S * A)
        B = _solve_extended(np.eye(S * A, dtype=dtype) - p.gamma * TK, R.reshape(-1))
        qs.append(W @ B.reshape(S, A))
    delta = qs[0] - qs[1]

    # Return in the extended dtype: the caller differences two evaluations,
    # and the cancellation must happen before any rounding to float64.
    active = Phi.T @ np.where(terminal, dtype(0.0), c)
    live = active > OCCUPANCY_FLOOR
    if spec.norm is NormKind.policy_weighted_L2:
        weights = live[:, None] * pi
        return (weights * delta**2).sum()
    if spec.norm is NormKind.occupancy_weighted_L2:
        total = np.where(live, active, dtype(0.0)).sum()
        weights = np.where(live, active / total, dtype(0.0))[:, None] * pi
        return (weights * delta**2).sum()
    support = live[:, None] * pi > 0
    return np.where(support, np.abs(delta), dtype(0.0)).max() ** 2


def ld_objective_and_gradient(
    p: Pomdp,
    mu_logits: np.ndarray,
    pi_mu: Policy,
    spec: DiscrepancySpec | None = None,
    check: bool = False,
    fd_step: float = 1e-5,
) -> GradientReport:
    """Squared-discrepancy objective and its gradient w.r.t. memory logits.

    In check mode the gradient is compared element-wise against central
    finite differences at ``fd_step``; ``fd_max_rel_err`` is the worst
    relative error over entries where |grad| > 1e-8. The differencing runs a
    fast float64 pass first and re-evaluates any suspicious entries with an
    independent extended-precision objective, so the reported error reflects
    the gradient rather than the oracle's own round-off.
    """
    spec = spec or DiscrepancySpec()
    base = _pomdp_arrays(p)
    pi_probs = jnp.asarray(pi_mu.probs)

    def objective(logits):
        return _ld_sq_of_memory(logits, pi_probs, base, p.gamma, spec)

    obj_fn = jax.jit(objective)
    grad_fn = jax.jit(jax.grad(objective))
    logits = jnp.asarray(mu_logits, dtype=jnp.float64)
    obj = float(obj_fn(logits))
    grad = np.asarray(grad_fn(logits))
    if not np.all(np.isfinite(grad)):
        bad = np.argwhere(~np.isfinite(grad))[0]
        raise FloatingPointError(f"non-finite gradient at logit index {tuple(bad)}")

    fd_max_rel_err = None
    if check:
        def rel_err(g, f):
            return abs(g - f) / max(abs(g), abs(f))

        flat = np.asarray(logits, dtype=float).copy()
        fd = np.zeros_like(flat)
        it = np.nditer(flat, flags=["multi_index"])
        while not it.finished:
            idx = it.multi_index
            orig = flat[idx]
            flat[idx] = orig + fd_step
            hi = float(obj_fn(jnp.asarray(flat)))
            flat[idx] = orig - fd_step
            lo = float(obj_fn(jnp.asarray(flat)))
            flat[idx] = orig
            fd[idx] = (hi - lo) / (2.0 * fd_step)
            it.iternext()

        fd_max_rel_err = 0.0
        it = np.nditer(flat, flags=["multi_index"])
        while not it.finished:
            idx = it.multi_index
            g = grad[idx]
            if abs(g) > 1e-8:
                err = rel_err(g, fd[idx])
                if err > 3e-5:
                    orig = flat[idx]
                    flat[idx] = orig + fd_step
                    hi = _ld_sq_objective_extended(flat, pi_mu.probs, p, spec)
                    flat[idx] = orig - fd_step
                    lo = _ld_sq_objective_extended(flat, pi_mu.probs, p, spec)
                    flat[idx] = orig
                    err = rel_err(g, float((hi - lo) / np.longdouble(2.0 * fd_step)))
                fd_max_rel_err = max(fd_max_rel_err, err)
            it.iternext()
    return GradientReport(objective=obj, grad=grad, fd_max_rel_err=fd_max_rel_err)


@dataclass(frozen=True)
class MemoryOptResult:
    memory: MemoryFn
    trace: np.ndarray
    failed: bool = False
    failure_step: int | None = None


def improve_memory(
    p: Pomdp, mu0: MemoryFn, pi_mu: Policy, cfg: OptimConfig
) -> MemoryOptResult:
    """Run Adam on memory logits to minimize the squared discrepancy.

    The policy over the augmented observation space stays fixed throughout.
    A single-state memory has an exactly flat objective (its softmax is
    constant), so that case returns immediately with a constant trace.
    """
    require_valid(p)
    base = _pomdp_arrays(p)
    pi_probs = jnp.asarray(pi_mu.probs)
    spec = cfg.discrepancy

    def objective(logits):
        return _ld_sq_of_memory(logits, pi_probs, base, p.gamma, spec)

    if mu0.n_mem == 1:
        obj0 = float(jax.jit(objective)(jnp.asarray(mu0.logits)))
        return MemoryOptResult(
            memory=mu0, trace=np.full(cfg.mem_steps + 1, obj0)
        )

    result = _adam_run(objective, mu0.logits, cfg.mem_steps, cfg)
    return MemoryOptResult(
        memory=MemoryFn.from_logits(result.params),
        trace=result.trace,
        failed=result.failed,
        failure_step=result.failure_step,
    )


@dataclass(frozen=True)
class PolicyOptResult:
    policy: Policy
    trace: np.ndarray  # start value J per step, plus the final value
    failed: bool = False
    failure_step: int | None = None


def policy_gradient_improve(
    p: Pomdp, pi0_logits: np.ndarray, cfg: OptimConfig
) -> PolicyOptResult:
    """Ascend the start value J with Adam on policy logits."""
    require_valid(p)
    T, R, Phi, p0, terminal = _pomdp_arrays(p)

    def objective(logits):
        return -_start_value(logits, T, R, Phi, p0, terminal, p.gamma)

    result = _adam_run(objective, np.asarray(pi0_logits, dtype=float), cfg.policy_steps, cfg)
    return PolicyOptResult(
        policy=Policy.from_logits(result.params),
        trace=-result.trace,
        failed=result.failed,
        failure_step=result.failure_step,
    )


def policy_search(
    p: Pomdp, n: int, spec: DiscrepancySpec | None = None, seed: int = 0
):
    """Draw n Gaussian-logit policies and keep the one with the largest
    discrepancy.

    Returns (best policy, array of all n discrepancies).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    spec = spec or DiscrepancySpec()
    require_valid(p)
    rng = np.random.default_rng(seed)
    logits = rng.normal(0.0, 0.5, size=(n, p.n_obs, p.n_actions))
    values = lambda_discrepancies_batch(p, row_softmax(logits), spec)
    best = int(values.argmax())
    return Policy.from_logits(logits[best]), values


@dataclass(frozen=True)
class OptimizationReport:
    """Everything a reproduction run records, JSON-serializable."""

    env_name: str
    n_mem: int
    pre_augment: bool
    config: OptimConfig
    search_discrepancies: np.ndarray
    initial_ld: float
    final_ld: float
    initial_start_value: float
    final_start_value: float
    mem_trace: np.ndarray
    policy_trace: np.ndarray
    final_memory_logits: np.ndarray | None = None
    final_policy_logits: np.ndarray | None = None
    failed_stage: str | None = None

    def to_json(self) -> str:
        cfg = self.config
        payload = {
            "schema": "lamdis.optimize.v1",
            "env": self.env_name,
            "n_mem": self.n_mem,
            "pre_augment": self.pre_augment,
            "config": {
                "n_random_policies": cfg.n_random_policies,
                "mem_steps": cfg.mem_steps,
                "policy_steps": cfg.policy_steps,
                "step_size": cfg.step_size,
                "adam_beta1": cfg.adam_beta1,
                "adam_beta2": cfg.adam_beta2,
                "adam_eps": cfg.adam_eps,
                "seed": cfg.seed,
                "lambda1": cfg.discrepancy.lambda1,
                "lambda2": cfg.discrepancy.lambda2,
                "norm": cfg.discrepancy.norm.value,
            },
            "search_discrepancies": self.search_discrepancies.tolist(),
            "initial_ld": self.initial_ld,
            "final_ld": self.final_ld,
            "initial_start_value": self.initial_start_value,
            "final_start_value": self.final_start_value,
            "mem_trace": self.mem_trace.tolist(),
            "policy_trace": self.policy_trace.tolist(),
            "final_memory_logits": (
                None if self.final_memory_logits is None
                else self.final_memory_logits.tolist()
            ),
            "final_policy_logits": (
                None if self.final_policy_logits is None
                else self.final_policy_logits.tolist()
            ),
            "failed_stage": self.failed_stage,
        }
        return json.dumps(payload)


@dataclass(frozen=True)
class OptimizationResult:
    policy: Policy
    memory: MemoryFn
    report: OptimizationReport


def _memory_seed(seed: int) -> list[int]:
    # Distinct stream from the policy-search draws under the same seed.
    return [seed, 1]


def optimize_with_value_improvement(
    p: Pomdp,
    n_mem: int,
    cfg: OptimConfig,
    pre_augment: bool = False,
    env_name: str = "",
) -> OptimizationResult:
    """Full pipeline: pick the max-discrepancy random policy, minimize the
    discrepancy over memory logits with that policy fixed, then ascend the
    start value of the memory-augmented POMDP.

    With ``pre_augment`` the initial policies are drawn over the
    memory-augmented observation space of the freshly initialized random
    memory (needed when every memoryless policy has zero discrepancy).
    """
    if n_mem < 1:
        raise ValueError("n_mem must be >= 1")
    require_valid(p)
    mu0 = random_memory(n_mem, p.n_obs, p.n_actions, _memory_seed(cfg.seed))

    failed_stage = None
    if pre_augment:
        p_mu0 = augment(p, mu0)
        pi_mu, search_lds = policy_search(
            p_mu0, cfg.n_random_policies, cfg.discrepancy, cfg.seed
        )
    else:
        base_pi, search_lds = policy_search(
            p, cfg.n_random_policies, cfg.discrepancy, cfg.seed
        )
        pi_mu = lift_policy(base_pi, n_mem)

    mem_result = improve_memory(p, mu0, pi_mu, cfg)
    if mem_result.failed:
        failed_stage = "improve_memory"
    mu = mem_result.memory

    p_mu = augment(p, mu)
    initial_ld = lambda_discrepancy(augment(p, mu0), pi_mu, cfg.discrepancy)
    final_ld = lambda_discrepancy(p_mu, pi_mu, cfg.discrepancy)
    initial_j = start_value(p_mu, pi_mu)

    pg_logits = pi_mu.logits if pi_mu.logits is not None else np.log(pi_mu.probs)
    pg_result = policy_gradient_improve(p_mu, pg_logits, cfg)
    if pg_result.failed and failed_stage is None:
        failed_stage = "policy_gradient_improve"

    report = OptimizationReport(
        env_name=env_name,
        n_mem=n_mem,
        pre_augment=pre_augment,
        config=cfg,
        search_discrepancies=search_lds,
        initial_ld=float(initial_ld),
        final_ld=float(final_ld),
        initial_start_value=float(initial_j),
        final_start_value=float(pg_result.trace[-1]),
        mem_trace=mem_result.trace,
        policy_trace=pg_result.trace,
        final_memory_logits=mu.logits,
        final_policy_logits=pg_result.policy.logits,
        failed_stage=failed_stage,
    )
    return OptimizationResult(policy=pg_result.policy, memory=mu, report=report)


def memoryless_policy_gradient(
    p: Pomdp, cfg: OptimConfig, env_name: str = ""
) -> OptimizationResult:
    """Baseline: the same pipeline without memory (n_mem = 1)."""
    return optimize_with_value_improvement(p, 1, cfg, env_name=env_name)
