"""Leader-election protocols packaged as engine ProtocolSpecs."""

from .token import (
    TokenState,
    CANDIDATE,
    FOLLOWER,
    NO_TOKEN,
    BLACK,
    WHITE,
    token_init,
    token_transition,
    token_counts,
    token_stable,
    token_protocol,
)
from .maxid import MaxIdState, maxid_params, maxid_transition, maxid_stable, maxid_protocol
from .fast import (
    FastParams,
    FastState,
    fast_params,
    fast_transition,
    fast_stable,
    fast_protocol,
    fast_state_space_bound,
)

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
    "MaxIdState",
    "maxid_params",
    "maxid_transition",
    "maxid_stable",
    "maxid_protocol",
    "FastParams",
    "FastState",
    "fast_params",
    "fast_transition",
    "fast_stable",
    "fast_protocol",
    "fast_state_space_bound",
]
