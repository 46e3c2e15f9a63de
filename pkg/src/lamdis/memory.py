"""Finite memory functions and the memory-Cartesian-product augmentation.

A memory function is a stochastic map (observation, action, memory state) ->
next memory state, parameterized by softmax logits. Folding it into a POMDP's
transition dynamics yields an augmented POMDP over state-memory pairs whose
observations reveal the memory state exactly; solving the augmented POMDP
with a memory-conditioned policy evaluates the (policy, memory) pair.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .model import Policy, Pomdp, row_softmax


@dataclass(frozen=True)
class MemoryFn:
    """Softmax-parameterized stochastic memory update.

    ``logits`` and ``probs`` have shape (n_obs, n_actions, n_mem, n_mem); the
    last axis is the next-memory distribution.
    """

    logits: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "logits", np.ascontiguousarray(self.logits, dtype=float))
        object.__setattr__(self, "probs", np.ascontiguousarray(self.probs, dtype=float))
        self.logits.setflags(write=False)
        self.probs.setflags(write=False)
        if self.logits.shape != self.probs.shape or self.logits.ndim != 4:
            raise ValueError(f"bad memory shapes {self.logits.shape} vs {self.probs.shape}")
        if self.logits.shape[2] != self.logits.shape[3]:
            raise ValueError("memory transition matrices must be square")

    @classmethod
    def from_logits(cls, logits: np.ndarray) -> "MemoryFn":
        logits = np.asarray(logits, dtype=float)
        return cls(logits=logits, probs=row_softmax(logits))

    @property
    def n_mem(self) -> int:
        return self.logits.shape[2]

    @property
    def n_obs(self) -> int:
        return self.logits.shape[0]

    @property
    def n_actions(self) -> int:
        return self.logits.shape[1]

    def hard_updates(self) -> np.ndarray:
        """Argmax extraction: integer next-memory table (n_obs, n_actions, n_mem).

        The deterministic zero-temperature limit, for inspecting what a
        learned memory computes.
        """
        return self.probs.argmax(axis=-1)

    def to_json(self, seed=None) -> str:
        payload = {
            "schema": "lamdis.memory.v1",
            "n_obs": self.n_obs,
            "n_actions": self.n_actions,
            "n_mem": self.n_mem,
            "logits": self.logits.tolist(),
            "seed": seed,
        }
        return json.dumps(payload)

    @classmethod
    def from_json(cls, text: str) -> "MemoryFn":
        payload = json.loads(text)
        logits = np.asarray(payload["logits"], dtype=float)
        expected = (payload["n_obs"], payload["n_actions"], payload["n_mem"], payload["n_mem"])
        if logits.shape != expected:
            raise ValueError(f"logits shape {logits.shape} does not match header {expected}")
        return cls.from_logits(logits)


def identity_memory(n_obs: int, n_actions: int, n_mem: int, sharpness: float = 20.0) -> MemoryFn:
    """Memory that (softly) holds its state: probs[w, a, m, m] ~ 1."""
    logits = np.zeros((n_obs, n_actions, n_mem, n_mem))
    idx = np.arange(n_mem)
    logits[:, :, idx, idx] = sharpness
    return MemoryFn.from_logits(logits)


def random_memory(n_mem: int, n_obs: int, n_actions: int, seed: int) -> MemoryFn:
    """Seeded Gaussian-logit memory function (mean 0, standard deviation 0.5)."""
    rng = np.random.default_rng(seed)
    logits = rng.normal(0.0, 0.5, size=(n_obs, n_actions, n_mem, n_mem))
    return MemoryFn.from_logits(logits)


def state_memory_kernel(p: Pomdp, mu: MemoryFn) -> np.ndarray:
    """Effective memory update per hidden state: (n_states, n_actions, M, M)."""
    return np.einsum("sw,wamn->samn", p.Phi, mu.probs)


def augment(p: Pomdp, mu: MemoryFn) -> Pomdp:
    """Fold a memory function into a POMDP's dynamics.

    The augmented state space is S x M enumerated memory-fastest; memory
    transitions are driven by the current state's observation and the chosen
    action, rewards are unchanged per (state, action), observations reveal
    the memory state exactly, and all initial mass sits at memory state 0.
    A single-state memory is an exact isomorphism, so it returns the input
    unchanged.
    """
    if mu.n_obs != p.n_obs or mu.n_actions != p.n_actions:
        raise ValueError(
            f"memory dims ({mu.n_obs}, {mu.n_actions}) do not match POMDP "
            f"({p.n_obs}, {p.n_actions})"
        )
    M = mu.n_mem
    if M == 1:
        return p
    S, A = p.n_states, p.n_actions
    mu_s = state_memory_kernel(p, mu)
    # T_aug[(s, m), a, (s', m')] = T[s, a, s'] * mu_s[s, a, m, m']
    T_aug = np.einsum("sat,samn->smatn", p.T, mu_s).reshape(S * M, A, S * M)
    R_aug = np.repeat(p.R, M, axis=0)
    Phi_aug = np.kron(p.Phi, np.eye(M))
    p0_aug = np.zeros(S * M)
    p0_aug[::M] = p.p0
    terminal_aug = np.repeat(p.terminal, M)
    return Pomdp(T=T_aug, R=R_aug, Phi=Phi_aug, p0=p0_aug, gamma=p.gamma,
                 terminal=terminal_aug)


def lift_policy(pi: Policy, n_mem: int) -> Policy:
    """Repeat a policy over memory states (rows enumerated memory-fastest)."""
    if n_mem == 1:
        return pi
    if pi.logits is not None:
        return Policy.from_logits(np.repeat(pi.logits, n_mem, axis=0))
    return Policy(probs=np.repeat(pi.probs, n_mem, axis=0))
