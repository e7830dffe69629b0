"""Max-ID leader election: random identifier growth plus labeled token instances.

Every node starts with id 1 and grows it by appending its interaction role
as a bit (initiator 0, responder 1) until the id reaches 2**k; the node
then starts a token-protocol instance as a candidate. Nodes meeting a
strictly larger finished id adopt it and join that instance as followers;
the token transition then runs on the sub-states. With k around 4*log2(n)
two nodes finish with the same maximal id with probability at most
n^2 / 2**k, and the backup token instance resolves those rare ties.

Rule order inside one interaction: each node first applies its own bit
append (a function of its snapshot and role only), then compares against
the partner's post-append id, then the token transition runs on the
resulting sub-states. Comparing against the partner's post-append rather
than pre-append id is a convention; both satisfy the same analysis, and
the choice here is fixed so transitions stay pure functions of the
snapshot pair.
"""

from __future__ import annotations

import math
from typing import NamedTuple, Sequence

import numpy as np

from ..engine import Configuration, ProtocolSpec, TrialResult
from ..graph import Graph
from .token import (
    BLACK,
    CANDIDATE,
    FOLLOWER,
    NO_TOKEN,
    WHITE,
    TokenState,
    token_init,
    token_transition,
)

__all__ = [
    "MaxIdState",
    "maxid_params",
    "maxid_transition",
    "maxid_stable",
    "maxid_protocol",
    "MaxIdTracker",
]


class MaxIdState(NamedTuple):
    id: int
    sub: TokenState


def maxid_params(n: int, regular: bool = False) -> int:
    """Identifier-space exponent: ceil(4*log2 n), or ceil(3*log2 n) on
    regular graphs (the only difference the regular case makes)."""
    if n < 2:
        raise ValueError("need n >= 2")
    factor = 3 if regular else 4
    return math.ceil(factor * math.log2(n))


def maxid_transition(a: MaxIdState, b: MaxIdState, k: int) -> tuple[MaxIdState, MaxIdState]:
    """Apply bit-append, adoption, and the token step, in that order."""
    two_k = 1 << k
    ida, suba = a.id, a.sub
    if ida < two_k:
        ida = 2 * ida  # initiator appends 0
        if ida >= two_k:
            suba = token_init(True)
    idb, subb = b.id, b.sub
    if idb < two_k:
        idb = 2 * idb + 1  # responder appends 1
        if idb >= two_k:
            subb = token_init(True)
    post_a, post_b = ida, idb
    if ida < post_b and post_b >= two_k:
        ida, suba = post_b, token_init(False)
    if idb < post_a and post_a >= two_k:
        idb, subb = post_a, token_init(False)
    suba, subb = token_transition(suba, subb)
    return MaxIdState(ida, suba), MaxIdState(idb, subb)


def maxid_stable(config_or_states, k: int) -> bool:
    """All ids equal and finished, and one candidate in the token layer."""
    states = config_or_states.states if isinstance(config_or_states, Configuration) else config_or_states
    two_k = 1 << k
    first = states[0].id
    if first < two_k:
        return False
    c = 0
    for s in states:
        if s.id != first:
            return False
        if s.sub.role == CANDIDATE:
            c += 1
    return c == 1


def _valid_state_for(k: int):
    two_k1 = 1 << (k + 1)

    def valid(s) -> bool:
        if not isinstance(s, MaxIdState):
            return False
        if not (1 <= s.id < two_k1):
            return False
        if s.sub.role not in (FOLLOWER, CANDIDATE) or s.sub.token not in (NO_TOKEN, BLACK, WHITE):
            return False
        if s.id < (1 << k) and s.sub != TokenState(FOLLOWER, NO_TOKEN):
            return False
        return True

    return valid


class MaxIdTracker:
    """O(1) stability bookkeeping: max id, count at max, candidate count.

    Ids never decrease and only the two interacting nodes change, so a new
    global maximum can only sit on those two nodes. Also records instance
    starts (a node's own bits crossing 2**k) to measure duplicate-maximum
    frequency.
    """

    __slots__ = ("k", "two_k", "n", "max_id", "count_at_max", "candidates",
                 "started_max", "started_max_count", "violations")

    def __init__(self, k: int):
        self.k = k
        self.two_k = 1 << k
        self.n = 0
        self.max_id = 0
        self.count_at_max = 0
        self.candidates = 0
        self.started_max = 0
        self.started_max_count = 0
        self.violations = 0

    def start(self, states: Sequence[MaxIdState]) -> None:
        self.n = len(states)
        self.max_id = max(s.id for s in states)
        self.count_at_max = sum(1 for s in states if s.id == self.max_id)
        self.candidates = sum(1 for s in states if s.sub.role == CANDIDATE)
        self.started_max = 0
        self.started_max_count = 0
        self.violations = 0

    def _note_start(self, old_id: int, appended: int) -> None:
        if old_id < self.two_k:
            j = 2 * old_id + appended
            if j >= self.two_k:
                if j > self.started_max:
                    self.started_max = j
                    self.started_max_count = 1
                elif j == self.started_max:
                    self.started_max_count += 1

    def update(self, a_old, b_old, a_new, b_new) -> None:
        self._note_start(a_old.id, 0)
        self._note_start(b_old.id, 1)
        new_max = max(self.max_id, a_new.id, b_new.id)
        if new_max > self.max_id:
            self.max_id = new_max
            self.count_at_max = (a_new.id == new_max) + (b_new.id == new_max)
        else:
            self.count_at_max += (a_new.id == self.max_id) - (a_old.id == self.max_id)
            self.count_at_max += (b_new.id == self.max_id) - (b_old.id == self.max_id)
        self.candidates += (a_new.sub.role == CANDIDATE) - (a_old.sub.role == CANDIDATE)
        self.candidates += (b_new.sub.role == CANDIDATE) - (b_old.sub.role == CANDIDATE)

    def is_stable(self) -> bool:
        return (
            self.count_at_max == self.n
            and self.max_id >= self.two_k
            and self.candidates == 1
        )

    @property
    def counters(self) -> dict:
        return {
            "max_id": self.max_id,
            "started_max_id": self.started_max,
            "started_max_count": self.started_max_count,
            "duplicate_max_start": int(self.started_max_count >= 2),
        }


def _kernel_runner_for(k: int):
    def runner(g: Graph, labels, state_pair, max_steps: int, tail_steps: int) -> TrialResult:
        from .. import _kernels as K

        eu, ev = K.edge_arrays(g)
        (stab, leader, violations, flips, max_id,
         started_max_count) = K.run_maxid(
            eu, ev, g.n, np.int64(k), state_pair[0], state_pair[1],
            np.int64(max_steps), np.int64(tail_steps),
        )
        stab_step = None if stab < 0 else int(stab)
        leader_node = None if leader < 0 else int(leader)
        return TrialResult(
            stabilization_step=stab_step,
            leader_node=leader_node,
            leader_degree=None if leader_node is None else g.degree(leader_node),
            invariant_violations=int(violations),
            counters={
                "max_id": int(max_id),
                "started_max_count": int(started_max_count),
                "duplicate_max_start": int(started_max_count >= 2),
                "tail_output_flips": int(flips),
            },
        )

    return runner


def maxid_protocol(k: int) -> ProtocolSpec:
    """ProtocolSpec for identifier exponent k; input labels are ignored
    (all nodes start identically with id 1 as followers)."""
    if k < 1:
        raise ValueError("need k >= 1")
    from .. import _kernels as K

    return ProtocolSpec(
        name="maxid",
        init=lambda _label: MaxIdState(1, TokenState(FOLLOWER, NO_TOKEN)),
        transition=lambda a, b: maxid_transition(a, b, k),
        output=lambda s: "leader" if s.sub.role == CANDIDATE else "follower",
        stable_predicate=lambda cfg: maxid_stable(cfg, k),
        tracker_factory=lambda: MaxIdTracker(k),
        validate_state=_valid_state_for(k),
        kernel_runner=_kernel_runner_for(k) if K.HAVE_NUMBA else None,
        default_input=None,
    )
