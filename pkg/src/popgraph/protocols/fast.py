"""Space-efficient leader election driven by streak-counter clocks.

Every node starts as a leader at level 0 and runs the streak counter with
parameter h chosen so that one streak completion costs on the order of the
graph's broadcast time. On each interaction a node applies, in order:

  1. if it completed a streak and is a leader, increment its level
     (capped at level_cap = alpha * L);
  2. if its level is below the partner's snapshot level and that level is
     at least L, become a follower;
  3. if either snapshot level is at least L, copy the maximum level.

Demotion precedes the lift, so a leader overtaken at or above L turns into
a follower carrying the higher level. Partner reads use the pre-interaction
snapshot, keeping the transition a pure function of the state pair. On
reaching level_cap a node switches to the token backup protocol seeded
with its current status, which guarantees finite expected stabilization in
the rare executions where the level race does not thin the field to one.

Why the stability predicate (exactly one output-leader, sitting at the
global maximum level) is sound: follower status is absorbing below
level_cap, levels never decrease, and rule 3 copies but never exceeds the
maximum, so no follower can out-level the top leader; a leader at the
global maximum can never satisfy rule 2. In the backup layer, outputs come
from token states, where followers never become candidates and the lone
candidate (there is exactly one entrant with leader status) can never
receive a white token once c = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

from ..engine import Configuration, ProtocolSpec, TrialResult
from ..graph import Graph
from ..clock import H_MAX
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
    "FastParams",
    "FastState",
    "LEADER",
    "fast_params",
    "fast_transition",
    "fast_stable",
    "fast_protocol",
    "fast_state_space_bound",
    "FastTracker",
]

LEADER = 1
# FOLLOWER = 0 shared with the token module


@dataclass(frozen=True)
class FastParams:
    """Derived protocol constants.

    h = 8 + ceil(log2(b_est * max_degree / m)), L = ceil(2 tau log2 n),
    level_cap = alpha * L. All logs base 2; the base only shifts h and L
    by constant factors that tau and alpha absorb.
    """

    h: int
    L: int
    level_cap: int
    tau: float
    alpha: int


def fast_params(b_est: float, max_degree: int, m: int, n: int,
                tau: float = 1.0, alpha: int = 8) -> FastParams:
    if b_est <= 0 or max_degree <= 0 or m <= 0:
        raise ValueError("b_est, max_degree and m must be positive")
    if n < 2:
        raise ValueError("need n >= 2")
    if tau < 1:
        raise ValueError("need tau >= 1")
    if alpha < 2:
        raise ValueError("need alpha >= 2")
    h = 8 + math.ceil(math.log2(b_est * max_degree / m))
    h = max(1, min(h, H_MAX))
    L = math.ceil(2 * tau * math.log2(n))
    return FastParams(h=h, L=L, level_cap=alpha * L, tau=tau, alpha=alpha)


class FastState(NamedTuple):
    streak: int
    status: int
    level: int
    backup: Optional[TokenState]


def _advance(own: FastState, partner_level: int, is_initiator: bool,
             p: FastParams) -> tuple[int, int, int, Optional[TokenState], bool]:
    """One node's rule sequence against the partner's snapshot level.

    Returns (streak, status, level, backup, entered_backup)."""
    if is_initiator:
        streak = own.streak + 1
        completed = streak == p.h
        if completed:
            streak = 0
    else:
        streak = 0
        completed = False
    status = own.status
    level = own.level
    if completed and status == LEADER:
        level = min(level + 1, p.level_cap)
    if level < partner_level and partner_level >= p.L:
        status = FOLLOWER
    if max(level, partner_level) >= p.L:
        level = max(level, partner_level)
    backup = own.backup
    entered = False
    if level == p.level_cap and backup is None:
        backup = token_init(status == LEADER)
        entered = True
    return streak, status, level, backup, entered


def fast_transition(a: FastState, b: FastState, p: FastParams) -> tuple[FastState, FastState]:
    la, lb = a.level, b.level
    sa, ra, va, ba, _ = _advance(a, lb, True, p)
    sb, rb, vb, bb, _ = _advance(b, la, False, p)
    if ba is not None and bb is not None:
        ba, bb = token_transition(ba, bb)
    return FastState(sa, ra, va, ba), FastState(sb, rb, vb, bb)


def fast_output(s: FastState) -> str:
    if s.backup is not None:
        return "leader" if s.backup.role == CANDIDATE else "follower"
    return "leader" if s.status == LEADER else "follower"


def fast_stable(config_or_states) -> bool:
    """Exactly one output-leader, and it holds the global maximum level."""
    states = config_or_states.states if isinstance(config_or_states, Configuration) else config_or_states
    max_level = max(s.level for s in states)
    leaders = [s for s in states if fast_output(s) == "leader"]
    return len(leaders) == 1 and leaders[0].level == max_level


def fast_state_space_bound(p: FastParams) -> int:
    """Counting bound on |state space|: streak x status x level x backup."""
    return p.h * 2 * (p.level_cap + 1) * (1 + 6)


def _valid_state_for(p: FastParams):
    def valid(s) -> bool:
        if not isinstance(s, FastState):
            return False
        if not (0 <= s.streak < p.h and 0 <= s.level <= p.level_cap):
            return False
        if s.status not in (FOLLOWER, LEADER):
            return False
        if (s.backup is not None) != (s.level == p.level_cap):
            return False
        return True

    return valid


class FastTracker:
    """Incremental leader/level bookkeeping plus invariant counters.

    Tracks the number of output-leaders, the global maximum level, and how
    many leaders sit at that maximum. Levels never decrease and rule 3
    never exceeds the maximum, so a new global maximum can only appear on
    an interacting node; that keeps every update O(1). Violations count
    steps where no maximum-level node outputs leader, or where the backup
    token layer breaks its conservation law.
    """

    __slots__ = ("p", "leader_count", "max_level", "count_at_max", "leaders_at_max",
                 "backup_candidates", "backup_black", "backup_white", "backup_active",
                 "violations")

    def __init__(self, p: FastParams):
        self.p = p
        self.leader_count = 0
        self.max_level = 0
        self.count_at_max = 0
        self.leaders_at_max = 0
        self.backup_candidates = 0
        self.backup_black = 0
        self.backup_white = 0
        self.backup_active = 0
        self.violations = 0

    def start(self, states: Sequence[FastState]) -> None:
        self.max_level = max(s.level for s in states)
        self.leader_count = sum(1 for s in states if fast_output(s) == "leader")
        self.count_at_max = sum(1 for s in states if s.level == self.max_level)
        self.leaders_at_max = sum(
            1 for s in states if s.level == self.max_level and fast_output(s) == "leader"
        )
        self.backup_candidates = self.backup_black = self.backup_white = 0
        self.backup_active = 0
        for s in states:
            self._backup_add(s, +1)
        self.violations = 0

    def _backup_add(self, s: FastState, sign: int) -> None:
        if s.backup is None:
            return
        self.backup_active += sign
        if s.backup.role == CANDIDATE:
            self.backup_candidates += sign
        if s.backup.token == BLACK:
            self.backup_black += sign
        elif s.backup.token == WHITE:
            self.backup_white += sign

    def update(self, a_old, b_old, a_new, b_new) -> None:
        out_a_old = fast_output(a_old) == "leader"
        out_b_old = fast_output(b_old) == "leader"
        out_a_new = fast_output(a_new) == "leader"
        out_b_new = fast_output(b_new) == "leader"
        self.leader_count += (out_a_new - out_a_old) + (out_b_new - out_b_old)

        new_max = max(self.max_level, a_new.level, b_new.level)
        if new_max > self.max_level:
            self.max_level = new_max
            self.count_at_max = (a_new.level == new_max) + (b_new.level == new_max)
            self.leaders_at_max = (
                (a_new.level == new_max and out_a_new)
                + (b_new.level == new_max and out_b_new)
            )
        else:
            self.count_at_max += (a_new.level == self.max_level) - (a_old.level == self.max_level)
            self.count_at_max += (b_new.level == self.max_level) - (b_old.level == self.max_level)
            self.leaders_at_max += (
                (a_new.level == self.max_level and out_a_new)
                - (a_old.level == self.max_level and out_a_old)
                + (b_new.level == self.max_level and out_b_new)
                - (b_old.level == self.max_level and out_b_old)
            )

        self._backup_add(a_old, -1)
        self._backup_add(b_old, -1)
        self._backup_add(a_new, +1)
        self._backup_add(b_new, +1)

        if self.leaders_at_max < 1:
            self.violations += 1
        if self.backup_active > 0:
            if (
                self.backup_candidates != self.backup_black + self.backup_white
                or self.backup_black < 1
            ):
                self.violations += 1

    def is_stable(self) -> bool:
        return self.leader_count == 1 and self.leaders_at_max == 1

    @property
    def counters(self) -> dict:
        return {
            "max_level": self.max_level,
            "leaders": self.leader_count,
            "backup_active": self.backup_active,
        }


def _kernel_runner_for(p: FastParams):
    def runner(g: Graph, labels, state_pair, max_steps: int, tail_steps: int) -> TrialResult:
        from .. import _kernels as K

        eu, ev = K.edge_arrays(g)
        (stab, leader, violations, flips, max_level, backup_active) = K.run_fast(
            eu, ev, g.n, np.int64(p.h), np.int64(p.L), np.int64(p.level_cap),
            state_pair[0], state_pair[1], np.int64(max_steps), np.int64(tail_steps),
        )
        stab_step = None if stab < 0 else int(stab)
        leader_node = None if leader < 0 else int(leader)
        return TrialResult(
            stabilization_step=stab_step,
            leader_node=leader_node,
            leader_degree=None if leader_node is None else g.degree(leader_node),
            invariant_violations=int(violations),
            counters={
                "max_level": int(max_level),
                "backup_active": int(backup_active),
                "tail_output_flips": int(flips),
            },
        )

    return runner


def fast_protocol(p: FastParams) -> ProtocolSpec:
    """ProtocolSpec with every node initialized as a leader at level 0."""
    from .. import _kernels as K

    return ProtocolSpec(
        name="fast",
        init=lambda _label: FastState(0, LEADER, 0, None),
        transition=lambda a, b: fast_transition(a, b, p),
        output=fast_output,
        stable_predicate=fast_stable,
        tracker_factory=lambda: FastTracker(p),
        validate_state=_valid_state_for(p),
        kernel_runner=_kernel_runner_for(p) if K.HAVE_NUMBA else None,
        default_input=None,
    )
