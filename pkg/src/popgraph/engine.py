"""Stochastic scheduler and protocol execution runtime.

The scheduler samples one ordered pair of adjacent nodes per step, uniformly
among the 2m directed edges of the interaction graph. Everything downstream
(protocol runs, epidemic measurements, random-walk experiments) consumes
interactions from this single source, so reproducibility reduces to the
determinism of :class:`Rng`.

The random stream is a splitmix64-style counter generator implemented in
plain integer arithmetic. We deliberately avoid a library bit generator
here: the same algorithm is re-implemented inside the numba kernels
(``popgraph._kernels``), which lets accelerated trial runners reproduce the
exact interaction sequence of the pure-Python engine, draw for draw.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Protocol, Sequence

import numpy as np

from .graph import Graph

__all__ = [
    "Rng",
    "Interaction",
    "ProtocolSpec",
    "Configuration",
    "TrialResult",
    "TrialStats",
    "ProtocolError",
    "sample_interaction",
    "step",
    "run_until_stable",
    "run_trials",
]

_MASK = 0xFFFFFFFFFFFFFFFF
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_GAMMA_SALT = 0xD1B54A32D192ED03


def _mix64(z: int) -> int:
    """Bijective 64-bit finalizer (splitmix64 output function)."""
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK
    return z ^ (z >> 31)


def _force_gamma(raw: int) -> int:
    # Odd increment with enough bit transitions; weak gammas (long runs of
    # equal bits) degrade splitmix output quality.
    gamma = raw | 1
    if bin(gamma ^ (gamma >> 1)).count("1") < 24:
        gamma ^= 0xAAAAAAAAAAAAAAAA
    return gamma


class Rng:
    """Seedable 64-bit stream with injective per-trial derivation.

    The stream is ``out_i = mix64(state_0 + i * gamma)`` with an odd
    ``gamma``, so identical seeds give identical output on any platform.
    ``derive(i)`` maps the master seed through a bijection of the trial
    index, so distinct trial indices always get distinct child streams.
    """

    __slots__ = ("master_seed", "_state", "_gamma")

    def __init__(self, seed: int, _state: int | None = None, _gamma: int | None = None):
        if seed < 0:
            raise ValueError("seed must be a nonnegative integer")
        self.master_seed = seed & _MASK
        self._state = self.master_seed if _state is None else _state & _MASK
        self._gamma = _GOLDEN if _gamma is None else _gamma

    def derive(self, index: int) -> "Rng":
        """Child stream for trial `index`; injective in the index."""
        if index < 0:
            raise ValueError("trial index must be nonnegative")
        child_state = _mix64((self.master_seed + (index + 1) * _GOLDEN) & _MASK)
        child_gamma = _force_gamma(_mix64((child_state + _GAMMA_SALT) & _MASK))
        rng = Rng(self.master_seed, _state=child_state, _gamma=child_gamma)
        return rng

    def next_u64(self) -> int:
        self._state = (self._state + self._gamma) & _MASK
        return _mix64(self._state)

    def next_below(self, bound: int) -> int:
        """Exactly uniform draw in [0, bound) via rejection."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        threshold = (_MASK + 1 - bound) % bound  # 2^64 mod bound
        while True:
            z = self.next_u64()
            if z >= threshold:
                return z % bound

    def random(self) -> float:
        """Float in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * 2.0**-53

    def state_pair(self) -> tuple[np.uint64, np.uint64]:
        """Current (state, gamma) for handing the stream to a kernel."""
        return np.uint64(self._state), np.uint64(self._gamma)


@dataclass(frozen=True)
class Interaction:
    """One scheduler event: ordered pair at 1-based step index."""

    initiator: int
    responder: int
    step: int


class Tracker(Protocol):
    """Incremental stability/invariant bookkeeping for one protocol.

    The engine feeds every state change through ``update`` so that
    stability can be answered in O(1) per step instead of rescanning the
    configuration.
    """

    violations: int

    def start(self, states: Sequence[Any]) -> None: ...

    def update(self, a_old: Any, b_old: Any, a_new: Any, b_new: Any) -> None: ...

    def is_stable(self) -> bool: ...


# Signature of an accelerated single-trial runner. Receives the graph,
# per-node input labels, the (state, gamma) pair of a derived stream, the
# step budget and tail length; returns a TrialResult identical to what the
# generic engine would produce for the same stream.
KernelRunner = Callable[[Graph, Sequence[Any], tuple[np.uint64, np.uint64], int, int], "TrialResult"]


@dataclass(frozen=True)
class ProtocolSpec:
    """A protocol: state alphabet, initializer, pairwise transition, output.

    ``transition`` must be a pure function of the two pre-interaction
    states (snapshot semantics). ``stable_predicate`` decides stability
    from a full configuration; ``tracker_factory`` provides the O(1)
    incremental equivalent used by the run loop. ``kernel_runner``, when
    set, is a drop-in accelerated trial executor.
    """

    name: str
    init: Callable[[Any], Any]
    transition: Callable[[Any, Any], tuple[Any, Any]]
    output: Callable[[Any], str]
    stable_predicate: Callable[["Configuration"], bool]
    tracker_factory: Callable[[], Tracker] | None = None
    validate_state: Callable[[Any], bool] | None = None
    kernel_runner: KernelRunner | None = None
    default_input: Any = None


@dataclass
class Configuration:
    """Mutable per-node state vector plus the step counter."""

    graph: Graph
    states: list
    step: int = 0

    @classmethod
    def initial(cls, graph: Graph, spec: ProtocolSpec, inputs: Any = None) -> "Configuration":
        labels = resolve_inputs(graph.n, spec, inputs)
        return cls(graph=graph, states=[spec.init(lab) for lab in labels], step=0)

    def outputs(self, spec: ProtocolSpec) -> list[str]:
        return [spec.output(s) for s in self.states]


def resolve_inputs(n: int, spec: ProtocolSpec, inputs: Any = None) -> list:
    """Expand an input assignment to one label per node."""
    if inputs is None:
        return [spec.default_input] * n
    if isinstance(inputs, (list, tuple, np.ndarray)):
        if len(inputs) != n:
            raise ValueError(f"inputs has length {len(inputs)}, expected {n}")
        return list(inputs)
    return [inputs] * n


@dataclass(frozen=True)
class TrialResult:
    """Outcome of one seeded run."""

    stabilization_step: int | None
    leader_node: int | None
    leader_degree: int | None
    invariant_violations: int
    counters: dict = field(default_factory=dict)

    @property
    def stabilized(self) -> bool:
        return self.stabilization_step is not None


class ProtocolError(RuntimeError):
    """A transition produced a state outside the protocol's alphabet."""


def sample_interaction(g: Graph, rng: Rng) -> Interaction:
    """Ordered pair uniform over the 2m directed edges; one stream draw.

    A single draw in [0, 2m) encodes edge index (high bits) and
    orientation (low bit), so each directed edge has probability exactly
    1/(2m).
    """
    r = rng.next_below(2 * g.m)
    eidx, orient = r >> 1, r & 1
    u, v = int(g.edges[eidx, 0]), int(g.edges[eidx, 1])
    if orient:
        u, v = v, u
    return Interaction(initiator=u, responder=v, step=0)


def step(config: Configuration, spec: ProtocolSpec, rng: Rng,
         tracker: Tracker | None = None) -> Interaction:
    """Advance one interaction: sample a pair, apply the transition.

    Only the two sampled nodes' states change; the transition reads the
    pre-interaction snapshot of both.
    """
    g = config.graph
    r = rng.next_below(2 * g.m)
    eidx, orient = r >> 1, r & 1
    u, v = int(g.edges[eidx, 0]), int(g.edges[eidx, 1])
    if orient:
        u, v = v, u
    a_old, b_old = config.states[u], config.states[v]
    a_new, b_new = spec.transition(a_old, b_old)
    if spec.validate_state is not None:
        if not (spec.validate_state(a_new) and spec.validate_state(b_new)):
            raise ProtocolError(
                f"protocol {spec.name!r} produced an out-of-alphabet state: "
                f"{a_new!r} / {b_new!r} from {a_old!r} / {b_old!r}"
            )
    config.states[u] = a_new
    config.states[v] = b_new
    config.step += 1
    if tracker is not None:
        tracker.update(a_old, b_old, a_new, b_new)
    return Interaction(initiator=u, responder=v, step=config.step)


def _finish_result(config: Configuration, spec: ProtocolSpec, stab_step: int | None,
                   violations: int, counters: dict) -> TrialResult:
    leader = None
    degree = None
    if stab_step is not None:
        leaders = [v for v, s in enumerate(config.states) if spec.output(s) == "leader"]
        if len(leaders) == 1:
            leader = leaders[0]
            degree = int(config.graph.degree(leader))
        else:
            # The predicate claimed stability without a unique leader.
            violations += 1
    return TrialResult(
        stabilization_step=stab_step,
        leader_node=leader,
        leader_degree=degree,
        invariant_violations=violations,
        counters=counters,
    )


def run_until_stable(g: Graph, spec: ProtocolSpec, rng: Rng, max_steps: int,
                     inputs: Any = None, tail_steps: int | None = None) -> TrialResult:
    """Run until the protocol's stability predicate first holds.

    Records the first step index at which the predicate is true (0 if the
    initial configuration is already stable), then keeps running for a
    verification tail (default 10n steps) asserting that no node's output
    changes; a flip is counted as an invariant violation. Failing to
    stabilize within ``max_steps`` is a data outcome, not an error.
    """
    if max_steps < 1:
        raise ValueError("max_steps must be >= 1")
    if tail_steps is None:
        tail_steps = 10 * g.n
    config = Configuration.initial(g, spec, inputs)
    tracker = spec.tracker_factory() if spec.tracker_factory is not None else None
    if tracker is not None:
        tracker.start(config.states)
        stable = tracker.is_stable()
    else:
        stable = spec.stable_predicate(config)

    stab_step: int | None = 0 if stable else None
    while stab_step is None and config.step < max_steps:
        step(config, spec, rng, tracker)
        if tracker is not None:
            stable = tracker.is_stable()
        else:
            stable = spec.stable_predicate(config)
        if stable:
            stab_step = config.step

    tail_flips = 0
    if stab_step is not None and tail_steps > 0:
        frozen = config.outputs(spec)
        for _ in range(tail_steps):
            it = step(config, spec, rng, tracker)
            for node in (it.initiator, it.responder):
                out = spec.output(config.states[node])
                if out != frozen[node]:
                    tail_flips += 1
                    frozen[node] = out
    violations = (tracker.violations if tracker is not None else 0) + tail_flips
    counters = dict(tracker.counters) if tracker is not None and hasattr(tracker, "counters") else {}
    counters["tail_output_flips"] = tail_flips
    return _finish_result(config, spec, stab_step, violations, counters)


@dataclass(frozen=True)
class TrialStats:
    """Order-independent aggregate over seeded trials."""

    results: tuple[TrialResult, ...]

    @property
    def n_trials(self) -> int:
        return len(self.results)

    @property
    def failures(self) -> int:
        return sum(1 for r in self.results if not r.stabilized)

    @property
    def violation_total(self) -> int:
        return sum(r.invariant_violations for r in self.results)

    @property
    def steps(self) -> np.ndarray:
        return np.array([r.stabilization_step for r in self.results if r.stabilized], dtype=float)

    @property
    def mean_steps(self) -> float:
        s = self.steps
        return float(s.mean()) if s.size else float("nan")

    @property
    def median_steps(self) -> float:
        s = self.steps
        return float(np.median(s)) if s.size else float("nan")

    def quantile(self, q: float) -> float:
        s = self.steps
        return float(np.quantile(s, q)) if s.size else float("nan")

    def summary(self) -> dict:
        return {
            "n_trials": self.n_trials,
            "failures": self.failures,
            "invariant_violations": self.violation_total,
            "mean_steps": self.mean_steps,
            "median_steps": self.median_steps,
            "p10_steps": self.quantile(0.10),
            "p90_steps": self.quantile(0.90),
            "max_steps_observed": self.quantile(1.0),
        }


def run_trials(g: Graph, spec: ProtocolSpec, n_trials: int, master_seed: int,
               max_steps: int, inputs: Any = None, tail_steps: int | None = None,
               use_kernel: bool = True, threads: int = 1) -> TrialStats:
    """Independent seeded trials; aggregation is merged by trial index.

    Trial ``i`` uses the sub-stream ``Rng(master_seed).derive(i)``, so the
    aggregate is byte-identical regardless of execution order or thread
    count.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    master = Rng(master_seed)
    if tail_steps is None:
        tail_steps = 10 * g.n
    labels = resolve_inputs(g.n, spec, inputs)

    def one(i: int) -> TrialResult:
        child = master.derive(i)
        if use_kernel and spec.kernel_runner is not None:
            return spec.kernel_runner(g, labels, child.state_pair(), max_steps, tail_steps)
        return run_until_stable(g, spec, child, max_steps, inputs=labels, tail_steps=tail_steps)

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(one, range(n_trials)))
    else:
        results = [one(i) for i in range(n_trials)]
    return TrialStats(results=tuple(results))
