"""Six-state token-based leader election.

Given a nonempty candidate set, each candidate starts with a black token.
Interacting nodes swap tokens; when the swap leaves both holding black,
the responder's token turns white (the tie-break is arbitrary, any
deterministic choice works); a candidate holding a white token becomes a
follower and removes that token from the system.

The state space is {candidate, follower} x {no token, black, white} with
candidate+white transient, six states reachable. Writing c, b, w for the
counts of candidates, black and white tokens, every transition preserves
c - b - w (swap moves tokens, whitening trades a black for a white,
elimination removes a candidate and a white together), and b only drops
when two blacks meet, leaving one, so b >= 1 always. Hence c = b + w and
b >= 1 in every reachable configuration, and c = 1 forces b = 1, w = 0:
no white token exists to eliminate the last candidate and a single black
can never be whitened, so no reachable transition changes any output.
That is why ``token_stable`` (c == 1) is a sound stability predicate.
"""

from __future__ import annotations

from typing import Iterable, NamedTuple, Sequence

import numpy as np

from ..engine import Configuration, ProtocolSpec, TrialResult
from ..graph import Graph

__all__ = [
    "TokenState",
    "CANDIDATE",
    "FOLLOWER",
    "NO_TOKEN",
    "BLACK",
    "WHITE",
    "token_init",
    "token_transition",
    "token_counts",
    "token_stable",
    "token_protocol",
    "TokenTracker",
    "check_conservation",
]

FOLLOWER = 0
CANDIDATE = 1
NO_TOKEN = 0
BLACK = 1
WHITE = 2

_ROLE_NAMES = {FOLLOWER: "follower", CANDIDATE: "candidate"}
_TOKEN_NAMES = {NO_TOKEN: "none", BLACK: "black", WHITE: "white"}


class TokenState(NamedTuple):
    role: int
    token: int

    def __repr__(self) -> str:  # pragma: no cover - cosmetic
        return f"({_ROLE_NAMES[self.role]},{_TOKEN_NAMES[self.token]})"


def token_init(is_candidate: bool) -> TokenState:
    """Candidates create a black token; everyone else starts empty-handed."""
    if is_candidate:
        return TokenState(CANDIDATE, BLACK)
    return TokenState(FOLLOWER, NO_TOKEN)


def token_transition(a: TokenState, b: TokenState) -> tuple[TokenState, TokenState]:
    """Swap tokens, whiten the responder's on a black/black meeting, then
    eliminate any candidate left holding white."""
    ta, tb = b.token, a.token
    if ta == BLACK and tb == BLACK:
        tb = WHITE
    ra, rb = a.role, b.role
    if ra == CANDIDATE and ta == WHITE:
        ra, ta = FOLLOWER, NO_TOKEN
    if rb == CANDIDATE and tb == WHITE:
        rb, tb = FOLLOWER, NO_TOKEN
    return TokenState(ra, ta), TokenState(rb, tb)


def _iter_states(config_or_states) -> Iterable[TokenState]:
    if isinstance(config_or_states, Configuration):
        return config_or_states.states
    return config_or_states


def token_counts(config_or_states) -> tuple[int, int, int]:
    """(candidates, black tokens, white tokens)."""
    c = b = w = 0
    for s in _iter_states(config_or_states):
        if s.role == CANDIDATE:
            c += 1
        if s.token == BLACK:
            b += 1
        elif s.token == WHITE:
            w += 1
    return c, b, w


def token_stable(config_or_states) -> bool:
    """Stable exactly when one candidate remains (then b = 1, w = 0)."""
    c, _, _ = token_counts(config_or_states)
    return c == 1


def _valid_state(s) -> bool:
    return (
        isinstance(s, TokenState)
        and s.role in (FOLLOWER, CANDIDATE)
        and s.token in (NO_TOKEN, BLACK, WHITE)
    )


class TokenTracker:
    """Incremental candidate/black/white counts with conservation checks."""

    __slots__ = ("c", "b", "w", "violations")

    def __init__(self):
        self.c = self.b = self.w = 0
        self.violations = 0

    def start(self, states: Sequence[TokenState]) -> None:
        self.c, self.b, self.w = token_counts(states)
        self.violations = 0

    def _add(self, s: TokenState, sign: int) -> None:
        if s.role == CANDIDATE:
            self.c += sign
        if s.token == BLACK:
            self.b += sign
        elif s.token == WHITE:
            self.w += sign

    def update(self, a_old, b_old, a_new, b_new) -> None:
        self._add(a_old, -1)
        self._add(b_old, -1)
        self._add(a_new, +1)
        self._add(b_new, +1)
        if self.c != self.b + self.w or self.b < 1:
            self.violations += 1

    def is_stable(self) -> bool:
        return self.c == 1

    @property
    def counters(self) -> dict:
        return {"candidates": self.c, "black": self.b, "white": self.w}


def _kernel_runner(g: Graph, labels, state_pair, max_steps: int, tail_steps: int) -> TrialResult:
    from .. import _kernels as K

    cand = np.array([1 if bool(x) else 0 for x in labels], dtype=np.uint8)
    eu, ev = K.edge_arrays(g)
    stab, leader, violations, flips, c, b, w = K.run_token(
        eu, ev, g.n, cand, state_pair[0], state_pair[1],
        np.int64(max_steps), np.int64(tail_steps),
    )
    stab_step = None if stab < 0 else int(stab)
    leader_node = None if leader < 0 else int(leader)
    return TrialResult(
        stabilization_step=stab_step,
        leader_node=leader_node,
        leader_degree=None if leader_node is None else g.degree(leader_node),
        invariant_violations=int(violations),
        counters={"candidates": int(c), "black": int(b), "white": int(w),
                  "tail_output_flips": int(flips)},
    )


def token_protocol() -> ProtocolSpec:
    """ProtocolSpec with a candidate bit per node as the input label."""
    from .. import _kernels as K

    return ProtocolSpec(
        name="token",
        init=lambda label: token_init(bool(label)),
        transition=token_transition,
        output=lambda s: "leader" if s.role == CANDIDATE else "follower",
        stable_predicate=token_stable,
        tracker_factory=TokenTracker,
        validate_state=_valid_state,
        kernel_runner=_kernel_runner if K.HAVE_NUMBA else None,
        default_input=True,
    )


def check_conservation(g: Graph, candidates, steps: int, rng, transition=token_transition) -> int:
    """Count steps violating c = b + w or b >= 1 under a given transition.

    The transition is injectable so the invariant suite can demonstrate the
    check has teeth (a rule with the whitening step removed fails it).
    """
    states = [token_init(bool(x)) for x in candidates]
    violations = 0
    two_m = 2 * g.m
    for _ in range(steps):
        r = rng.next_below(two_m)
        eidx, orient = r >> 1, r & 1
        u, v = int(g.edges[eidx, 0]), int(g.edges[eidx, 1])
        if orient:
            u, v = v, u
        states[u], states[v] = transition(states[u], states[v])
        c, b, w = token_counts(states)
        if c != b + w or b < 1:
            violations += 1
    return violations
