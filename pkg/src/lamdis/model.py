"""Dense-tensor data types for POMDPs and observation policies.

Conventions used throughout the package:

* ``T[s, a, s']`` is the probability of moving to state ``s'`` when taking
  action ``a`` in state ``s``.
* ``Phi[s, w]`` is the probability of emitting observation ``w`` in state ``s``
  (observations depend on the state only, never on the action).
* ``R[s, a]`` is the expected immediate reward for taking ``a`` in ``s``.
* Terminal states are absorbing with zero reward; solvers zero their outgoing
  transition rows so that episodic problems stay solvable at ``gamma = 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .tolerances import ATOL_CONSTRUCT, ATOL_DERIVED, OCCUPANCY_FLOOR


class InvalidPomdpError(ValueError):
    """Raised when an operation receives a POMDP that fails validation."""


class NonEpisodicError(RuntimeError):
    """Raised when gamma = 1 but some policy mass never reaches a terminal state."""


def row_softmax(logits: np.ndarray) -> np.ndarray:
    """Softmax along the last axis, numerically stabilized."""
    z = np.asarray(logits, dtype=float)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


@dataclass(frozen=True)
class Pomdp:
    """A finite POMDP as dense tensors.

    Attributes:
        T: transition tensor, shape (n_states, n_actions, n_states).
        R: reward matrix, shape (n_states, n_actions).
        Phi: observation matrix, shape (n_states, n_obs), rows stochastic.
        p0: initial state distribution, shape (n_states,).
        gamma: discount in [0, 1]; gamma = 1 requires episodic dynamics at
            solve time.
        terminal: boolean flags, shape (n_states,); terminal states must carry
            zero reward.
    """

    T: np.ndarray
    R: np.ndarray
    Phi: np.ndarray
    p0: np.ndarray
    gamma: float
    terminal: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "T", np.ascontiguousarray(self.T, dtype=float))
        object.__setattr__(self, "R", np.ascontiguousarray(self.R, dtype=float))
        object.__setattr__(self, "Phi", np.ascontiguousarray(self.Phi, dtype=float))
        object.__setattr__(self, "p0", np.ascontiguousarray(self.p0, dtype=float))
        object.__setattr__(self, "terminal", np.ascontiguousarray(self.terminal, dtype=bool))
        for name in ("T", "R", "Phi", "p0", "terminal"):
            getattr(self, name).setflags(write=False)

    @property
    def n_states(self) -> int:
        return self.T.shape[0]

    @property
    def n_actions(self) -> int:
        return self.T.shape[1]

    @property
    def n_obs(self) -> int:
        return self.Phi.shape[1]

    def with_phi(self, phi: np.ndarray) -> "Pomdp":
        return replace(self, Phi=np.asarray(phi, dtype=float))

    def with_gamma(self, gamma: float) -> "Pomdp":
        return replace(self, gamma=float(gamma))


@dataclass(frozen=True)
class Policy:
    """A stochastic observation policy, optionally backed by logits.

    ``probs`` has shape (n_obs, n_actions) with stochastic rows. When the
    policy is a point on an optimization path, ``logits`` holds the
    pre-softmax parameters and ``probs`` is their row softmax.
    """

    probs: np.ndarray
    logits: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "probs", np.ascontiguousarray(self.probs, dtype=float))
        self.probs.setflags(write=False)
        if self.logits is not None:
            object.__setattr__(self, "logits", np.ascontiguousarray(self.logits, dtype=float))
            self.logits.setflags(write=False)

    @classmethod
    def from_logits(cls, logits: np.ndarray) -> "Policy":
        return cls(probs=row_softmax(logits), logits=logits)

    @classmethod
    def uniform(cls, n_obs: int, n_actions: int) -> "Policy":
        return cls(probs=np.full((n_obs, n_actions), 1.0 / n_actions))

    @classmethod
    def deterministic(cls, actions, n_actions: int) -> "Policy":
        """One-hot policy taking ``actions[w]`` at observation ``w``."""
        actions = np.asarray(actions, dtype=int)
        probs = np.zeros((len(actions), n_actions))
        probs[np.arange(len(actions)), actions] = 1.0
        return cls(probs=probs)

    @property
    def n_obs(self) -> int:
        return self.probs.shape[0]

    @property
    def n_actions(self) -> int:
        return self.probs.shape[1]


@dataclass(frozen=True)
class PomdpSource:
    """A POMDP together with its provenance and human-readable names."""

    name: str
    origin: str  # "file" or "builtin"
    pomdp: Pomdp
    state_names: list[str] = field(default_factory=list)
    action_names: list[str] = field(default_factory=list)
    obs_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        p = self.pomdp
        if self.state_names and len(self.state_names) != p.n_states:
            raise ValueError("state_names length does not match n_states")
        if self.action_names and len(self.action_names) != p.n_actions:
            raise ValueError("action_names length does not match n_actions")
        if self.obs_names and len(self.obs_names) != p.n_obs:
            raise ValueError("obs_names length does not match n_obs")


@dataclass(frozen=True)
class PolicyTensors:
    """Derived policy tensors used by the closed-form fixed-point solver.

    Attributes:
        Pi: (n_obs, n_obs, n_actions), observation-diagonal policy.
        PiS: (n_states, n_states, n_actions), state-diagonal expected policy
            under each state's observation distribution.
        W: (n_obs, n_states), state-blending weights Pr(s | w) from discounted
            occupancy.
        WPi: (n_obs, n_states, n_actions), joint Pr(s, a | w) = W * probs.
        obs_occupancy: (n_obs,), unnormalized discounted observation occupancy.
        unreachable_obs: observations with zero discounted occupancy; their W
            rows are uniform placeholders and carry no weight in any norm.
    """

    Pi: np.ndarray
    PiS: np.ndarray
    W: np.ndarray
    WPi: np.ndarray
    obs_occupancy: np.ndarray
    unreachable_obs: np.ndarray


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    checks: list[CheckResult]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[CheckResult]:
        return [c for c in self.checks if not c.passed]

    def __str__(self) -> str:
        lines = []
        for c in self.checks:
            status = "ok" if c.passed else "FAIL"
            suffix = f": {c.detail}" if c.detail else ""
            lines.append(f"[{status}] {c.name}{suffix}")
        return "\n".join(lines)


def _idx(index) -> str:
    return ",".join(str(int(i)) for i in np.atleast_1d(index))


def _first_bad_row(mat: np.ndarray, atol: float):
    """Index of the first row not summing to 1 within atol, or None."""
    sums = mat.sum(axis=-1)
    bad = np.argwhere(np.abs(sums - 1.0) > atol)
    if bad.size == 0:
        return None
    idx = tuple(int(i) for i in bad[0])
    return idx, float(sums[idx])


def validate(p: Pomdp, atol: float = ATOL_CONSTRUCT) -> ValidationReport:
    """Check every construction invariant of a POMDP.

    Returns a report rather than raising; each failed check names the first
    offending index. A passing report is a precondition of every solver
    operation.
    """
    checks: list[CheckResult] = []

    def add(name, passed, detail=""):
        checks.append(CheckResult(name, bool(passed), detail))

    S, A = p.R.shape if p.R.ndim == 2 else (0, 0)
    shapes_ok = (
        p.T.ndim == 3
        and p.R.ndim == 2
        and p.Phi.ndim == 2
        and p.T.shape == (S, A, S)
        and p.Phi.shape[0] == S
        and p.p0.shape == (S,)
        and p.terminal.shape == (S,)
    )
    add("shapes", shapes_ok, "" if shapes_ok else f"T{p.T.shape} R{p.R.shape} Phi{p.Phi.shape}")
    if not shapes_ok:
        return ValidationReport(checks)

    neg = np.argwhere(p.T < 0)
    add("T nonnegative", neg.size == 0, "" if neg.size == 0 else f"T[{_idx(neg[0])}] < 0")
    bad = _first_bad_row(p.T, atol)
    add(
        "T rows stochastic",
        bad is None,
        "" if bad is None else f"T[{_idx(bad[0])},:] sums to {bad[1]:.15g}",
    )

    neg = np.argwhere(p.Phi < 0)
    add("Phi nonnegative", neg.size == 0, "" if neg.size == 0 else f"Phi[{_idx(neg[0])}] < 0")
    bad = _first_bad_row(p.Phi, atol)
    add(
        "Phi rows stochastic",
        bad is None,
        "" if bad is None else f"Phi[{_idx(bad[0])},:] sums to {bad[1]:.15g}",
    )

    neg = np.argwhere(p.p0 < 0)
    add("p0 nonnegative", neg.size == 0, "" if neg.size == 0 else f"p0[{_idx(neg[0])}] < 0")
    add(
        "p0 normalized",
        abs(p.p0.sum() - 1.0) <= atol,
        "" if abs(p.p0.sum() - 1.0) <= atol else f"p0 sums to {p.p0.sum():.15g}",
    )

    add("gamma in [0, 1]", 0.0 <= p.gamma <= 1.0, f"gamma = {p.gamma}")

    bad_term = np.argwhere(p.terminal[:, None] & (p.R != 0.0))
    add(
        "terminal rewards zero",
        bad_term.size == 0,
        "" if bad_term.size == 0 else f"R[{_idx(bad_term[0])}] != 0 at terminal state",
    )

    return ValidationReport(checks)


def validate_policy(pi: Policy, p: Pomdp, atol: float = ATOL_CONSTRUCT) -> ValidationReport:
    """Check policy invariants against a POMDP's dimensions."""
    checks: list[CheckResult] = []

    def add(name, passed, detail=""):
        checks.append(CheckResult(name, bool(passed), detail))

    add("policy rows match n_obs", pi.probs.shape == (p.n_obs, p.n_actions),
        f"probs shape {pi.probs.shape}")
    neg = np.argwhere(pi.probs < 0)
    add("probs nonnegative", neg.size == 0, "" if neg.size == 0 else f"probs[{_idx(neg[0])}] < 0")
    bad = _first_bad_row(pi.probs, atol)
    add("probs rows stochastic", bad is None,
        "" if bad is None else f"probs[{_idx(bad[0])},:] sums to {bad[1]:.15g}")
    if pi.logits is not None:
        consistent = np.allclose(pi.probs, row_softmax(pi.logits), atol=atol)
        add("probs equals softmax(logits)", consistent)
    return ValidationReport(checks)


def require_valid(p: Pomdp, pi: Policy | None = None):
    """Raise InvalidPomdpError unless the inputs pass validation."""
    report = validate(p)
    if not report.passed:
        raise InvalidPomdpError("invalid POMDP:\n" + "\n".join(str(c) for c in report.failures()))
    if pi is not None:
        preport = validate_policy(pi, p)
        if not preport.passed:
            raise InvalidPomdpError(
                "invalid policy:\n" + "\n".join(str(c) for c in preport.failures())
            )


def transitions_with_terminal_absorption(p: Pomdp) -> np.ndarray:
    """Copy of T with the outgoing rows of terminal states zeroed.

    Zero rows make the continuation value of terminal states exactly zero, so
    the fixed-point linear systems stay nonsingular even at gamma = 1 for
    episodic problems.
    """
    T = p.T.copy()
    T[p.terminal] = 0.0
    return T


def state_policy(p: Pomdp, pi: Policy) -> np.ndarray:
    """Expected action probabilities per hidden state: (Phi @ probs)[s, a]."""
    return p.Phi @ pi.probs


def policy_tensors(p: Pomdp, pi: Policy, atol: float = ATOL_DERIVED) -> PolicyTensors:
    """Build the derived policy tensors for the closed-form solver.

    The state-blending weights W come from the discounted occupancy linear
    system (see solver.stationary_weights). Observations that are never
    reached under the policy get a uniform W row and are flagged; every norm
    downstream assigns them zero weight.
    """
    from .solver import stationary_weights  # local import, solver depends on model

    require_valid(p, pi)
    W, _, occ = stationary_weights(p, pi)

    n_obs, n_actions = pi.probs.shape
    Pi = np.zeros((n_obs, n_obs, n_actions))
    idx = np.arange(n_obs)
    Pi[idx, idx, :] = pi.probs

    pi_s = state_policy(p, pi)
    n_states = p.n_states
    PiS = np.zeros((n_states, n_states, n_actions))
    sidx = np.arange(n_states)
    PiS[sidx, sidx, :] = pi_s

    WPi = W[:, :, None] * pi.probs[:, None, :]
    unreachable = occ <= OCCUPANCY_FLOOR
    return PolicyTensors(Pi=Pi, PiS=PiS, W=W, WPi=WPi, obs_occupancy=occ,
                         unreachable_obs=unreachable)
