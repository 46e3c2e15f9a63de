"""Parser and serializer for the Cassandra ``.POMDP`` text format (a subset).

Supported directives: ``discount:``, ``values: reward``, ``states:`` /
``actions:`` / ``observations:`` (count or name list), ``start:`` (vector,
``uniform``, or a named state), ``T:`` entries in triple, row, and full-matrix
form (with ``uniform`` and ``identity`` keywords), ``O:`` entries in the same
forms keyed by action and next state, and ``R: a : s : s' : o value`` entries.
``*`` wildcards expand before assignment and later entries overwrite earlier
ones; unspecified probabilities and rewards default to zero. ``#`` starts a
comment anywhere on a line.

The format's observation function may depend on the action; this package's
formalism requires observations to be a function of the landing state only,
so parsing verifies action-independence and rejects files that violate it.
Rewards of the form R(a, s, s', o) are reduced to R(s, a) by marginalizing
over the transition and observation probabilities. Absorbing states whose
rewards are all zero are flagged terminal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Pomdp, PomdpSource


class ParseError(ValueError):
    """Syntax or semantic error in a .POMDP file, with a line number."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class UnsupportedPomdpError(ParseError):
    """The file is well-formed but outside the supported subset."""


_ACTION_DEP_TOL = 1e-9


@dataclass
class _Statement:
    line: int
    keyword: str
    header: str  # text after "keyword:" on the same line
    extra: list[tuple[int, str]]  # continuation lines (line number, text)


_KEYWORDS = {"discount", "values", "states", "actions", "observations", "start", "T", "O", "R"}


def _tokenize(text: str) -> list[_Statement]:
    statements: list[_Statement] = []
    current: _Statement | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, sep, rest = line.partition(":")
        if sep and head.strip() in _KEYWORDS:
            current = _Statement(lineno, head.strip(), rest.strip(), [])
            statements.append(current)
        else:
            if current is None:
                raise ParseError(lineno, f"unexpected content before any directive: {line!r}")
            current.extra.append((lineno, line))
    return statements


def _parse_floats(text: str, line: int) -> list[float]:
    out = []
    for tok in text.split():
        try:
            out.append(float(tok))
        except ValueError:
            raise ParseError(line, f"expected a number, got {tok!r}") from None
    return out


class _NameSpace:
    """Resolves state/action/observation identifiers, including wildcards."""

    def __init__(self, names: list[str], kind: str):
        self.names = names
        self.kind = kind
        self.index = {name: i for i, name in enumerate(names)}

    def __len__(self):
        return len(self.names)

    def resolve(self, token: str, line: int) -> list[int]:
        if token == "*":
            return list(range(len(self.names)))
        if token in self.index:
            return [self.index[token]]
        if token.lstrip("-").isdigit():
            i = int(token)
            if 0 <= i < len(self.names):
                return [i]
            raise ParseError(line, f"{self.kind} index {i} out of range [0, {len(self.names)})")
        raise ParseError(line, f"unknown {self.kind} {token!r}")


def _split_header(header: str) -> list[str]:
    """Split 'a : s : s' tail' on colons, keeping the trailing value text."""
    return [part.strip() for part in header.split(":")]


def _parse_space_decl(stmt: _Statement, prefix: str) -> list[str]:
    toks = stmt.header.split()
    if not toks:
        raise ParseError(stmt.line, f"{stmt.keyword}: needs a count or name list")
    if len(toks) == 1 and toks[0].isdigit():
        return [f"{prefix}{i}" for i in range(int(toks[0]))]
    if len(set(toks)) != len(toks):
        raise ParseError(stmt.line, f"duplicate {stmt.keyword} name")
    return toks


def _matrix_rows(stmt: _Statement, after: str, n_rows: int, n_cols: int) -> np.ndarray:
    """Read an n_rows x n_cols matrix from the statement body.

    ``after`` is the header remainder once identifiers are consumed; it may
    hold the keywords uniform/identity or inline numbers.
    """
    first = after.strip()
    if first in ("uniform", "identity") or (
        not first and stmt.extra and stmt.extra[0][1].strip() in ("uniform", "identity")
    ):
        keyword = first or stmt.extra[0][1].strip()
        if keyword == "uniform":
            return np.full((n_rows, n_cols), 1.0 / n_cols)
        if n_rows != n_cols:
            raise ParseError(stmt.line, f"identity requires a square matrix, got {n_rows}x{n_cols}")
        return np.eye(n_rows)
    numbers: list[float] = _parse_floats(first, stmt.line) if first else []
    for lineno, text in stmt.extra:
        numbers.extend(_parse_floats(text, lineno))
    if len(numbers) != n_rows * n_cols:
        raise ParseError(
            stmt.line,
            f"expected {n_rows * n_cols} numbers for a {n_rows}x{n_cols} matrix, got {len(numbers)}",
        )
    return np.asarray(numbers).reshape(n_rows, n_cols)


def _scalar_value(stmt: _Statement, tail: str) -> float:
    numbers = _parse_floats(tail, stmt.line) if tail.strip() else []
    for lineno, text in stmt.extra:
        numbers.extend(_parse_floats(text, lineno))
    if len(numbers) != 1:
        raise ParseError(stmt.line, f"expected a single value, got {len(numbers)}")
    return numbers[0]


def parse_pomdp(text: str) -> PomdpSource:
    """Parse Cassandra-format text into a validated POMDP."""
    statements = _tokenize(text)

    discount = None
    states = actions = observations = None
    start_stmt = None
    tor_statements = []
    for stmt in statements:
        if stmt.keyword == "discount":
            discount = _scalar_value(stmt, stmt.header)
            if not 0.0 <= discount <= 1.0:
                raise ParseError(stmt.line, f"discount {discount} outside [0, 1]")
        elif stmt.keyword == "values":
            if stmt.header.strip() == "cost":
                raise UnsupportedPomdpError(stmt.line, "values: cost is not supported")
            if stmt.header.strip() != "reward":
                raise ParseError(stmt.line, f"values must be reward, got {stmt.header!r}")
        elif stmt.keyword == "states":
            states = _NameSpace(_parse_space_decl(stmt, "s"), "state")
        elif stmt.keyword == "actions":
            actions = _NameSpace(_parse_space_decl(stmt, "a"), "action")
        elif stmt.keyword == "observations":
            observations = _NameSpace(_parse_space_decl(stmt, "o"), "observation")
        elif stmt.keyword == "start":
            start_stmt = stmt
        else:
            tor_statements.append(stmt)

    if discount is None:
        raise ParseError(1, "missing discount directive")
    for space, what in ((states, "states"), (actions, "actions"), (observations, "observations")):
        if space is None:
            raise ParseError(1, f"missing {what} directive")

    S, A, O = len(states), len(actions), len(observations)
    T = np.zeros((S, A, S))
    Obs = np.zeros((A, S, O))  # observation given (action, landing state)
    Rfull = np.zeros((A, S, S, O))

    for stmt in tor_statements:
        parts = _split_header(stmt.header)
        if stmt.keyword == "T":
            if len(parts) == 1:
                for a in actions.resolve(parts[0].split()[0] if parts[0] else "*", stmt.line):
                    after = parts[0].split(None, 1)[1] if len(parts[0].split(None, 1)) > 1 else ""
                    T[:, a, :] = _matrix_rows(stmt, after, S, S)
            elif len(parts) == 2:
                head, tail = parts
                toks = tail.split(None, 1)
                s_tok, after = toks[0], (toks[1] if len(toks) > 1 else "")
                row = _matrix_rows(stmt, after, 1, S)[0]
                for a in actions.resolve(head, stmt.line):
                    for s in states.resolve(s_tok, stmt.line):
                        T[s, a, :] = row
            elif len(parts) == 3:
                a_tok, s_tok, tail = parts
                toks = tail.split(None, 1)
                sp_tok, after = toks[0], (toks[1] if len(toks) > 1 else "")
                value = _scalar_value(stmt, after)
                for a in actions.resolve(a_tok, stmt.line):
                    for s in states.resolve(s_tok, stmt.line):
                        for sp in states.resolve(sp_tok, stmt.line):
                            T[s, a, sp] = value
            else:
                raise ParseError(stmt.line, "malformed T entry")
        elif stmt.keyword == "O":
            if len(parts) == 1:
                for a in actions.resolve(parts[0].split()[0] if parts[0] else "*", stmt.line):
                    after = parts[0].split(None, 1)[1] if len(parts[0].split(None, 1)) > 1 else ""
                    Obs[a] = _matrix_rows(stmt, after, S, O)
            elif len(parts) == 2:
                head, tail = parts
                toks = tail.split(None, 1)
                s_tok, after = toks[0], (toks[1] if len(toks) > 1 else "")
                row = _matrix_rows(stmt, after, 1, O)[0]
                for a in actions.resolve(head, stmt.line):
                    for sp in states.resolve(s_tok, stmt.line):
                        Obs[a, sp, :] = row
            elif len(parts) == 3:
                a_tok, sp_tok, tail = parts
                toks = tail.split(None, 1)
                o_tok, after = toks[0], (toks[1] if len(toks) > 1 else "")
                value = _scalar_value(stmt, after)
                for a in actions.resolve(a_tok, stmt.line):
                    for sp in states.resolve(sp_tok, stmt.line):
                        for o in observations.resolve(o_tok, stmt.line):
                            Obs[a, sp, o] = value
            else:
                raise ParseError(stmt.line, "malformed O entry")
        else:  # R
            if len(parts) != 4:
                raise ParseError(
                    stmt.line, "R entries must have the form R: a : s : s' : o value"
                )
            a_tok, s_tok, sp_tok, tail = parts
            toks = tail.split(None, 1)
            if not toks:
                raise ParseError(stmt.line, "missing observation in R entry")
            o_tok, after = toks[0], (toks[1] if len(toks) > 1 else "")
            value = _scalar_value(stmt, after)
            for a in actions.resolve(a_tok, stmt.line):
                for s in states.resolve(s_tok, stmt.line):
                    for sp in states.resolve(sp_tok, stmt.line):
                        for o in observations.resolve(o_tok, stmt.line):
                            Rfull[a, s, sp, o] = value

    # Observations must not depend on the action taken to reach the state.
    spread = np.abs(Obs - Obs[0]).max()
    if spread > _ACTION_DEP_TOL:
        a_bad, s_bad, o_bad = np.unravel_index(np.abs(Obs - Obs[0]).argmax(), Obs.shape)
        raise UnsupportedPomdpError(
            1,
            "action-dependent observations are not supported: "
            f"O[{actions.names[a_bad]}][{states.names[s_bad]}][{observations.names[o_bad]}] "
            f"differs from O[{actions.names[0]}] by {spread:.3g}",
        )
    Phi = Obs[0]

    # Reduce R(a, s, s', o) to R(s, a) under the dynamics and emissions.
    R = np.einsum("sap,apo,aspo->sa", T, Obs, Rfull)

    if start_stmt is None:
        p0 = np.full(S, 1.0 / S)
    else:
        header = start_stmt.header.strip()
        if header == "uniform":
            p0 = np.full(S, 1.0 / S)
        elif header and header in states.index:
            p0 = np.zeros(S)
            p0[states.index[header]] = 1.0
        else:
            numbers = _parse_floats(header, start_stmt.line) if header else []
            for lineno, text_line in start_stmt.extra:
                numbers.extend(_parse_floats(text_line, lineno))
            if len(numbers) != S:
                raise ParseError(
                    start_stmt.line, f"start vector needs {S} entries, got {len(numbers)}"
                )
            p0 = np.asarray(numbers)

    # Absorbing states with zero reward everywhere are terminal.
    self_loop = np.array([np.all(T[s, :, s] == 1.0) for s in range(S)])
    terminal = self_loop & np.all(R == 0.0, axis=1)

    pomdp = Pomdp(T=T, R=R, Phi=Phi, p0=p0, gamma=discount, terminal=terminal)
    return PomdpSource(
        name="",
        origin="file",
        pomdp=pomdp,
        state_names=list(states.names),
        action_names=list(actions.names),
        obs_names=list(observations.names),
    )


def serialize_pomdp(src: PomdpSource) -> str:
    """Write a PomdpSource back to the supported file subset.

    Probabilities and rewards use repr-level precision, so parsing the output
    reproduces the tensors exactly (the R reduction only multiplies each
    reward by row sums that are 1 up to round-off).
    """
    p = src.pomdp
    state_names = src.state_names or [f"s{i}" for i in range(p.n_states)]
    action_names = src.action_names or [f"a{i}" for i in range(p.n_actions)]
    obs_names = src.obs_names or [f"o{i}" for i in range(p.n_obs)]

    lines = [
        f"# {src.name or 'pomdp'} (generated)",
        f"discount: {float(p.gamma)!r}",
        "values: reward",
        "states: " + " ".join(state_names),
        "actions: " + " ".join(action_names),
        "observations: " + " ".join(obs_names),
        "start: " + " ".join(repr(float(x)) for x in p.p0),
        "",
    ]
    for a, aname in enumerate(action_names):
        for s in range(p.n_states):
            for sp in np.flatnonzero(p.T[s, a]):
                lines.append(f"T: {aname} : {state_names[s]} : {state_names[sp]} {float(p.T[s, a, sp])!r}")
    lines.append("")
    for s in range(p.n_states):
        for o in np.flatnonzero(p.Phi[s]):
            lines.append(f"O: * : {state_names[s]} : {obs_names[o]} {float(p.Phi[s, o])!r}")
    lines.append("")
    for s in range(p.n_states):
        for a in np.flatnonzero(p.R[s]):
            lines.append(f"R: {action_names[a]} : {state_names[s]} : * : * {float(p.R[s, a])!r}")
    lines.append("")
    return "\n".join(lines)
