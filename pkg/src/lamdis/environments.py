"""Built-in benchmark environments and observation-mixing utilities.

All environments are authored directly in the state-dependent observation
convention (Phi maps states to observation distributions) and expose their
terminal states through explicit flags.
"""

from __future__ import annotations

import importlib.resources

import numpy as np

from .model import Policy, Pomdp, PomdpSource

# T-maze action indices.
UP, DOWN, RIGHT, LEFT = 0, 1, 2, 3
TMAZE_ACTIONS = ["up", "down", "right", "left"]


def tmaze(corridor_len: int = 5, gamma: float = 0.9) -> PomdpSource:
    """T-maze with a colored start cue and an aliased corridor.

    The agent starts on a blue or red square (equally likely), walks down a
    corridor whose squares all look alike, and at the junction must go up or
    down. The rewarding direction is up when the start was blue and down when
    it was red: +4 for the good direction, -0.1 for the bad one. Bumping a
    wall leaves the agent in place with zero reward. The four terminal
    outcomes are grouped into a single terminal state, giving
    2 + 2 * corridor_len + 2 + 1 states and 5 observations.
    """
    if corridor_len < 1:
        raise ValueError("corridor_len must be >= 1")
    L = corridor_len
    n_states = 2 * L + 5
    start = [0, 1]
    corridor = [[2 + c * L + i for i in range(L)] for c in (0, 1)]
    junction = [2 + 2 * L, 2 + 2 * L + 1]
    term = 2 * L + 4

    n_actions = 4
    T = np.zeros((n_states, n_actions, n_states))
    R = np.zeros((n_states, n_actions))

    for c in (0, 1):
        # Walls everywhere by default: stay in place.
        for s in [start[c]] + corridor[c] + [junction[c]]:
            for a in range(n_actions):
                T[s, a, s] = 1.0
        path = [start[c]] + corridor[c] + [junction[c]]
        for i in range(len(path) - 1):
            T[path[i], RIGHT, path[i]] = 0.0
            T[path[i], RIGHT, path[i + 1]] = 1.0
            T[path[i + 1], LEFT, path[i + 1]] = 0.0
            T[path[i + 1], LEFT, path[i]] = 1.0
        good, bad = (UP, DOWN) if c == 0 else (DOWN, UP)
        for a in (UP, DOWN):
            T[junction[c], a, junction[c]] = 0.0
            T[junction[c], a, term] = 1.0
        R[junction[c], good] = 4.0
        R[junction[c], bad] = -0.1
    T[term, :, term] = 1.0

    # Observations: blue start, red start, corridor, junction, terminal.
    Phi = np.zeros((n_states, 5))
    Phi[start[0], 0] = 1.0
    Phi[start[1], 1] = 1.0
    for c in (0, 1):
        Phi[corridor[c], 2] = 1.0
        Phi[junction[c], 3] = 1.0
    Phi[term, 4] = 1.0

    p0 = np.zeros(n_states)
    p0[start] = 0.5
    terminal = np.zeros(n_states, dtype=bool)
    terminal[term] = True

    state_names = (
        ["start-blue", "start-red"]
        + [f"corridor-blue-{i}" for i in range(L)]
        + [f"corridor-red-{i}" for i in range(L)]
        + ["junction-blue", "junction-red", "done"]
    )
    return PomdpSource(
        name=f"tmaze-{L}",
        origin="builtin",
        pomdp=Pomdp(T=T, R=R, Phi=Phi, p0=p0, gamma=float(gamma), terminal=terminal),
        state_names=state_names,
        action_names=list(TMAZE_ACTIONS),
        obs_names=["blue", "red", "corridor", "junction", "done"],
    )


def tmaze_go_right_then_up_policy() -> Policy:
    """Deterministic policy: walk right, go up at the junction (5 obs)."""
    return Policy.deterministic([RIGHT, RIGHT, RIGHT, UP, RIGHT], n_actions=4)


def tmaze_sweep_policy(n_obs: int = 5, junction_obs=(3,)) -> Policy:
    """Go right everywhere, up with probability 2/3 at the junction.

    Works for both the 5-observation T-maze and the per-state observation
    spaces used in partial-observability sweeps, where ``junction_obs`` lists
    the observation columns belonging to junction states.
    """
    probs = np.zeros((n_obs, 4))
    probs[:, RIGHT] = 1.0
    for w in junction_obs:
        probs[w] = 0.0
        probs[w, UP] = 2.0 / 3.0
        probs[w, DOWN] = 1.0 / 3.0
    return Policy(probs=probs)


def tmaze_perfect(corridor_len: int = 5, gamma: float = 1.0) -> PomdpSource:
    """T-maze with one observation per state (a block MDP over 15 states)."""
    src = tmaze(corridor_len, gamma)
    n = src.pomdp.n_states
    p = src.pomdp.with_phi(np.eye(n))
    return PomdpSource(
        name=f"tmaze-{corridor_len}-perfect",
        origin="builtin",
        pomdp=p,
        state_names=src.state_names,
        action_names=src.action_names,
        obs_names=list(src.state_names),
    )


def tmaze_aliased_phi(pattern: str, corridor_len: int = 5) -> np.ndarray:
    """Fully aliased observation matrix over the per-state observation space.

    Patterns map groups of states onto a single canonical column: corridor
    states onto the first corridor column, junction states onto the first
    junction column, or both. Rows outside the pattern stay identity.
    """
    L = corridor_len
    n = 2 * L + 5
    phi = np.eye(n)
    corridor_states = list(range(2, 2 + 2 * L))
    junction_states = [2 + 2 * L, 2 + 2 * L + 1]
    if pattern in ("corridor", "both"):
        for s in corridor_states:
            phi[s] = 0.0
            phi[s, corridor_states[0]] = 1.0
    if pattern in ("junction", "both"):
        for s in junction_states:
            phi[s] = 0.0
            phi[s, junction_states[0]] = 1.0
    if pattern not in ("corridor", "junction", "both"):
        raise ValueError(f"unknown aliasing pattern {pattern!r}")
    return phi


def mix_observation(p: Pomdp, phi_aliased: np.ndarray, mix: float) -> Pomdp:
    """Convex mixture of an observation matrix with an aliased one."""
    phi_aliased = np.asarray(phi_aliased, dtype=float)
    if phi_aliased.shape != p.Phi.shape:
        raise ValueError(
            f"aliased Phi shape {phi_aliased.shape} does not match {p.Phi.shape}"
        )
    if not 0.0 <= mix <= 1.0:
        raise ValueError("mix must lie in [0, 1]")
    if np.any(phi_aliased < 0) or not np.allclose(phi_aliased.sum(axis=1), 1.0, atol=1e-12):
        raise ValueError("phi_aliased rows must be stochastic")
    return p.with_phi((1.0 - mix) * p.Phi + mix * phi_aliased)


# Parity-check branches: (first color, second color); up pays off when the
# color families match (red->pink, blue->cyan).
_PARITY_BRANCHES = [("red", "pink"), ("red", "cyan"), ("blue", "pink"), ("blue", "cyan")]
_PARITY_MATCH = [True, False, False, True]


def parity_check(
    start_probs=None, stay_prob: float = 0.0, gamma: float = 0.99
) -> PomdpSource:
    """Four-branch color environment whose observation values all vanish.

    Each of four equally likely branches shows a two-color prefix, then a
    shared junction observation where the agent picks up or down; up is
    rewarded (+1) exactly when the branch's colors belong to the same family,
    and the loser direction costs -1. The reward symmetry makes every
    observation's expected return zero under every memoryless policy, for
    every lambda.

    ``start_probs`` and ``stay_prob`` perturb the environment: the former
    replaces the uniform branch distribution, the latter makes the up action
    in the first branch's first state stay in place with that probability.
    Any nonzero perturbation breaks the symmetry.
    """
    n_states = 13
    n_actions = 2  # up, down
    first = list(range(4))
    second = [4 + b for b in range(4)]
    junction = [8 + b for b in range(4)]
    term = 12

    T = np.zeros((n_states, n_actions, n_states))
    R = np.zeros((n_states, n_actions))
    for b in range(4):
        T[first[b], :, second[b]] = 1.0
        T[second[b], :, junction[b]] = 1.0
        T[junction[b], :, term] = 1.0
        up_reward = 1.0 if _PARITY_MATCH[b] else -1.0
        R[junction[b], 0] = up_reward
        R[junction[b], 1] = -up_reward
    T[term, :, term] = 1.0

    if stay_prob:
        if not 0.0 <= stay_prob < 1.0:
            raise ValueError("stay_prob must lie in [0, 1)")
        T[first[0], 0, second[0]] = 1.0 - stay_prob
        T[first[0], 0, first[0]] = stay_prob

    obs_names = ["red", "blue", "pink", "cyan", "junction", "done"]
    Phi = np.zeros((n_states, 6))
    for b in range(4):
        c1, c2 = _PARITY_BRANCHES[b]
        Phi[first[b], obs_names.index(c1)] = 1.0
        Phi[second[b], obs_names.index(c2)] = 1.0
        Phi[junction[b], 4] = 1.0
    Phi[term, 5] = 1.0

    p0 = np.zeros(n_states)
    if start_probs is None:
        p0[first] = 0.25
    else:
        start_probs = np.asarray(start_probs, dtype=float)
        if start_probs.shape != (4,):
            raise ValueError("start_probs must have 4 entries")
        p0[first] = start_probs
    terminal = np.zeros(n_states, dtype=bool)
    terminal[term] = True

    state_names = (
        [f"first-{c1}-{c2}" for c1, c2 in _PARITY_BRANCHES]
        + [f"second-{c1}-{c2}" for c1, c2 in _PARITY_BRANCHES]
        + [f"junction-{c1}-{c2}" for c1, c2 in _PARITY_BRANCHES]
        + ["done"]
    )
    return PomdpSource(
        name="parity-check",
        origin="builtin",
        pomdp=Pomdp(T=T, R=R, Phi=Phi, p0=p0, gamma=float(gamma), terminal=terminal),
        state_names=state_names,
        action_names=["up", "down"],
        obs_names=obs_names,
    )


# Branching probabilities and rewards of the mixture-state environment. The
# middle state stands in for an equal blend of its two neighbors, and every
# transition into the trio arrives in these fixed proportions, which is what
# collapses the two policy-spread kernels onto each other for every policy.
_TK_BRANCH = (0.25, 0.5, 0.25)
_TK_REWARDS = {
    0: (0.0, 0.5),  # entry state
    1: (1.0, -0.5),  # left branch state
    2: (0.5, 1.0),  # mixture state
    3: (-1.0, 2.0),  # right branch state
    4: (0.25, -0.25),  # shared post state
}


def tk_equality(gamma: float = 0.9) -> PomdpSource:
    """Six-state, two-action POMDP indistinguishable from a five-state MDP.

    The mixture state emits the observations of its two neighbor states with
    equal probability, and all transitions into the trio occur in fixed
    proportions, so the TD and MC views of any policy coincide and the
    discrepancy between fixed points is exactly zero despite the aliasing.
    """
    n_states, n_actions = 6, 2
    T = np.zeros((n_states, n_actions, n_states))
    R = np.zeros((n_states, n_actions))
    for a in range(n_actions):
        T[0, a, [1, 2, 3]] = _TK_BRANCH
        for s in (1, 2, 3):
            T[s, a, 4] = 1.0
        T[4, a, 5] = 1.0
        T[5, a, 5] = 1.0
    for s, rewards in _TK_REWARDS.items():
        R[s] = rewards

    Phi = np.zeros((n_states, 5))
    Phi[0, 0] = 1.0
    Phi[1, 1] = 1.0
    Phi[2, 1] = 0.5
    Phi[2, 2] = 0.5
    Phi[3, 2] = 1.0
    Phi[4, 3] = 1.0
    Phi[5, 4] = 1.0

    p0 = np.zeros(n_states)
    p0[0] = 1.0
    terminal = np.zeros(n_states, dtype=bool)
    terminal[5] = True
    return PomdpSource(
        name="tk-equality",
        origin="builtin",
        pomdp=Pomdp(T=T, R=R, Phi=Phi, p0=p0, gamma=float(gamma), terminal=terminal),
        state_names=["entry", "left", "mixture", "right", "post", "done"],
        action_names=["a0", "a1"],
        obs_names=["entry", "left-ish", "right-ish", "post", "done"],
    )


def tk_equality_collapsed(gamma: float = 0.9) -> PomdpSource:
    """The five-state MDP that the mixture-state POMDP is equivalent to.

    The mixture state is split across its two neighbors; rewards blend with
    the same equal weights the observation posterior would produce.
    """
    n_states, n_actions = 5, 2
    p1, px, p2 = _TK_BRANCH
    T = np.zeros((n_states, n_actions, n_states))
    R = np.zeros((n_states, n_actions))
    for a in range(n_actions):
        T[0, a, 1] = p1 + px / 2.0
        T[0, a, 2] = p2 + px / 2.0
        T[1, a, 3] = 1.0
        T[2, a, 3] = 1.0
        T[3, a, 4] = 1.0
        T[4, a, 4] = 1.0
    r = {k: np.asarray(v) for k, v in _TK_REWARDS.items()}
    R[0] = r[0]
    R[1] = 0.5 * r[1] + 0.5 * r[2]
    R[2] = 0.5 * r[3] + 0.5 * r[2]
    R[3] = r[4]

    p0 = np.zeros(n_states)
    p0[0] = 1.0
    terminal = np.zeros(n_states, dtype=bool)
    terminal[4] = True
    return PomdpSource(
        name="tk-equality-collapsed",
        origin="builtin",
        pomdp=Pomdp(T=T, R=R, Phi=np.eye(5), p0=p0, gamma=float(gamma), terminal=terminal),
        state_names=["entry", "left-ish", "right-ish", "post", "done"],
        action_names=["a0", "a1"],
        obs_names=["entry", "left-ish", "right-ish", "post", "done"],
    )


def random_block_mdp(
    n_states: int, n_actions: int, seed: int, gamma: float = 0.95
) -> PomdpSource:
    """Random MDP dressed as a POMDP with a bijective block observation map."""
    rng = np.random.default_rng(seed)
    T = rng.dirichlet(np.ones(n_states), size=(n_states, n_actions))
    R = rng.normal(0.0, 1.0, size=(n_states, n_actions))
    perm = rng.permutation(n_states)
    Phi = np.eye(n_states)[perm]
    p0 = rng.dirichlet(np.ones(n_states))
    terminal = np.zeros(n_states, dtype=bool)
    return PomdpSource(
        name=f"block-mdp-{seed}",
        origin="builtin",
        pomdp=Pomdp(T=T, R=R, Phi=Phi, p0=p0, gamma=float(gamma), terminal=terminal),
        state_names=[f"s{i}" for i in range(n_states)],
        action_names=[f"a{i}" for i in range(n_actions)],
        obs_names=[f"w{i}" for i in range(n_states)],
    )


_BUILTIN_FACTORIES = {
    "tmaze": tmaze,
    "parity": parity_check,
    "tk-equality": tk_equality,
}


def builtin(name: str) -> PomdpSource:
    """Look up a built-in environment by CLI name."""
    if name not in _BUILTIN_FACTORIES:
        raise KeyError(
            f"unknown builtin {name!r}; expected one of {sorted(_BUILTIN_FACTORIES)}"
        )
    return _BUILTIN_FACTORIES[name]()


def fixture_path(name: str):
    """Path to a bundled Cassandra-format fixture file."""
    if not name.endswith(".POMDP"):
        name = name + ".POMDP"
    return importlib.resources.files("lamdis") / "fixtures" / name


def load_fixture(name: str) -> PomdpSource:
    """Parse a bundled fixture file into a PomdpSource."""
    from .cassandra import parse_pomdp

    text = fixture_path(name).read_text(encoding="utf-8")
    src = parse_pomdp(text)
    stem = name[: -len(".POMDP")] if name.endswith(".POMDP") else name
    return PomdpSource(
        name=stem,
        origin="file",
        pomdp=src.pomdp,
        state_names=src.state_names,
        action_names=src.action_names,
        obs_names=src.obs_names,
    )
