"""Event-driven Monte Carlo of repeater links and chains.

Links attempt heralded entanglement once per attempt period.  In the memory
protocols a link stops after its first success and holds the pair until the
whole chain is ready, then the intermediate nodes swap and the protocol
resets.  Waiting times between per-attempt Bernoulli successes are sampled
directly as geometric variates, which is exact for independent attempts and
lets the engine jump from event to event.

Swap outcomes are kept as a Pauli frame: stored states are conjugated by the
frame Pauli (a bookkeeping step, noise free) so every pair is expressed in
the link's nominal Bell frame.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from . import states as st
from .optics import DetectorModel, FiberChannel, link_success_probability, propagation_delay
from .states import BellKind, DensityOperator


@dataclass(frozen=True)
class NodeSpec:
    memory_t2: float = math.inf
    memory_t1: float | None = None  # recorded only; not part of the dynamics
    local_op_time: float = 0.0
    swap_depolarizing: float = 0.0

    def __post_init__(self):
        if self.memory_t2 <= 0:
            raise ValueError("memory_t2 must be positive")
        if self.memory_t1 is not None and 2 * self.memory_t1 < self.memory_t2:
            raise ValueError("memory_t1 must satisfy 2*T1 >= T2")
        if self.local_op_time < 0:
            raise ValueError("local_op_time must be nonnegative")
        if not 0.0 <= self.swap_depolarizing <= 1.0:
            raise ValueError("swap_depolarizing outside [0, 1]")


@dataclass(frozen=True)
class LinkSpec:
    """One elementary link with its heralding station at the fiber midpoint.

    Give exactly one of ``source_rate`` (Hz) or ``attempt_period`` (s).
    ``p_success`` overrides the value derived from the channel and detectors.
    """

    channel: FiberChannel = field(default_factory=lambda: FiberChannel(0.0))
    source_rate: float | None = None
    attempt_period: float | None = None
    detectors: DetectorModel = field(default_factory=DetectorModel)
    p_success: float | None = None
    pair_state: DensityOperator | None = None
    pair_kind: BellKind = BellKind.PSI_MINUS

    def __post_init__(self):
        if (self.source_rate is None) == (self.attempt_period is None):
            raise ValueError("give exactly one of source_rate / attempt_period")
        if self.source_rate is not None and self.source_rate <= 0:
            raise ValueError("source_rate must be positive")
        if self.attempt_period is not None and self.attempt_period <= 0:
            raise ValueError("attempt_period must be positive")
        p = self.success_probability
        if not 0.0 < p <= 1.0:
            raise ValueError(f"link success probability {p} outside (0, 1]")

    @property
    def period(self) -> float:
        return self.attempt_period if self.attempt_period is not None else 1.0 / self.source_rate

    @property
    def success_probability(self) -> float:
        if self.p_success is not None:
            return self.p_success
        return link_success_probability(self.channel.length_km, self.channel.alpha_db_per_km, self.detectors)

    @property
    def signal_delay(self) -> float:
        """Photon to the midpoint plus herald back to the node."""
        return propagation_delay(self.channel.length_km, self.channel.n_core)

    @property
    def notify_delay(self) -> float:
        """One-way classical message across the whole link."""
        return propagation_delay(self.channel.length_km, self.channel.n_core)

    def initial_pair(self) -> DensityOperator:
        if self.pair_state is not None:
            return self.pair_state
        return st.bell_state(self.pair_kind).density()


class ChainProtocol(enum.Enum):
    STOP_ON_SUCCESS = "stop-on-success"
    RESET_ON_FULL_CHAIN = "reset-on-full-chain"


@dataclass(frozen=True)
class ChainConfig:
    nodes: tuple[NodeSpec, ...]
    links: tuple[LinkSpec, ...]
    heralded: bool = True
    protocol: ChainProtocol = ChainProtocol.STOP_ON_SUCCESS

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "links", tuple(self.links))
        object.__setattr__(self, "protocol", ChainProtocol(self.protocol))
        if len(self.nodes) < 2:
            raise ValueError("a chain needs at least two nodes")
        if len(self.links) != len(self.nodes) - 1:
            raise ValueError("need exactly len(nodes) - 1 links")

    @classmethod
    def uniform(cls, n_nodes: int, link: LinkSpec, node: NodeSpec | None = None, **kwargs) -> "ChainConfig":
        node = node or NodeSpec()
        return cls((node,) * n_nodes, (link,) * (n_nodes - 1), **kwargs)

    @property
    def holds_pairs(self) -> bool:
        return self.heralded and self.protocol is ChainProtocol.STOP_ON_SUCCESS


@dataclass(frozen=True)
class UnheraldedMixture:
    """Output of an unheralded attempt: target with weight ``q`` plus residual components."""

    q: float
    target: st.PureState
    residual_weights: tuple[float, ...]
    components: tuple[DensityOperator, ...]

    def __post_init__(self):
        if not 0.0 <= self.q <= 1.0:
            raise ValueError("q must lie in [0, 1]")
        if any(w < 0 for w in self.residual_weights):
            raise ValueError("residual weights must be nonnegative")
        if abs(self.q + sum(self.residual_weights) - 1.0) > 1e-9:
            raise ValueError("weights must sum to 1")
        if len(self.residual_weights) != len(self.components):
            raise ValueError("one weight per residual component")

    def state(self) -> DensityOperator:
        parts = [(self.target.density(), self.q)] + list(zip(self.components, self.residual_weights))
        return st.mix(parts)

    def fidelity(self) -> float:
        return st.fidelity_pure_target(self.state(), self.target)


def unheralded_output(q: float, kind: BellKind = BellKind.PSI_MINUS) -> UnheraldedMixture:
    """Failed links leave uncorrelated memories, which swap into white noise."""
    return UnheraldedMixture(q, st.bell_state(kind), (1.0 - q,), (DensityOperator.maximally_mixed(2),))


# ---------------------------------------------------------------------------
# memory, swap, purification


def decay_memory(rho, qubit: int, elapsed: float, t2: float) -> DensityOperator:
    if elapsed < 0:
        raise ValueError("elapsed time must be nonnegative")
    strength = 0.0 if math.isinf(t2) else -math.expm1(-elapsed / t2)
    return st.apply_dephasing(rho, qubit, strength)


@dataclass(frozen=True)
class SwapResult:
    outcome: BellKind
    probability: float
    raw_state: DensityOperator  # A on qubit 0, C on qubit 1, before frame correction
    frame: BellKind  # Bell state the A-C pair is in for ideal inputs

    def aligned(self, target: BellKind = BellKind.PHI_PLUS) -> DensityOperator:
        return st.align_frame(self.raw_state, self.frame, target)


def _swap_branches(rho_ab, rho_bc) -> list[tuple[BellKind, float, DensityOperator | None]]:
    # qubits: 0 A, 1 B (first pair), 2 B (second pair), 3 C
    joint = st.tensor_product(rho_ab, rho_bc)
    out = []
    for kind in BellKind:
        p, rho = st.project_pure(joint, [1, 2], st.bell_state(kind))
        out.append((kind, p, rho))
    return out


@lru_cache(maxsize=None)
def swap_frame(kind_ab: BellKind, kind_bc: BellKind, outcome: BellKind) -> BellKind:
    """Bell state left on A-C when ideal pairs are swapped with the given outcome."""
    for kind, p, rho in _swap_branches(st.bell_state(kind_ab), st.bell_state(kind_bc)):
        if kind is outcome:
            return st.closest_bell(rho)[0]
    raise AssertionError("unreachable")


def swap_outcomes(rho_ab, rho_bc, kinds=(BellKind.PHI_PLUS, BellKind.PHI_PLUS)) -> list[SwapResult]:
    """All Bell-measurement branches with their Born probabilities."""
    k1, k2 = (BellKind(k) for k in kinds)
    return [
        SwapResult(kind, p, rho, swap_frame(k1, k2, kind))
        for kind, p, rho in _swap_branches(rho_ab, rho_bc)
        if rho is not None
    ]


def entanglement_swap(rho_ab, rho_bc, rng: np.random.Generator, kinds=(BellKind.PHI_PLUS, BellKind.PHI_PLUS)) -> SwapResult:
    """Bell measurement on the two middle qubits with a Born-rule sampled outcome.

    ``kinds`` names the nominal Bell frames of the inputs; they determine the
    Pauli frame recorded for the output.
    """
    branches = swap_outcomes(rho_ab, rho_bc, kinds)
    probs = np.array([b.probability for b in branches])
    i = rng.choice(len(branches), p=probs / probs.sum())
    return branches[i]


def swap_average(rho_ab, rho_bc, kinds=(BellKind.PHI_PLUS, BellKind.PHI_PLUS), target: BellKind = BellKind.PHI_PLUS) -> DensityOperator:
    """Frame-corrected A-C state averaged over measurement outcomes."""
    branches = swap_outcomes(rho_ab, rho_bc, kinds)
    return st.mix((b.aligned(target), b.probability) for b in branches)


def _cnot(control: int, target: int, n: int) -> np.ndarray:
    d = 2**n
    idx = np.arange(d)
    flipped = np.where((idx >> control) & 1, idx ^ (1 << target), idx)
    u = np.zeros((d, d))
    u[flipped, idx] = 1.0
    return u


_BILATERAL_CNOT = _cnot(0, 2, 4) @ _cnot(1, 3, 4)


def bbpssw_round(rho1, rho2, target: BellKind = BellKind.PHI_PLUS) -> tuple[float, DensityOperator | None]:
    """Exact single purification round; returns (success probability, kept pair).

    Each pair is rotated into the Phi+ frame, a bilateral CNOT is applied
    from pair 1 (source) onto pair 2 (target), pair 2 is measured in Z on
    both sides and the source pair is kept when the outcomes agree.
    """
    target = BellKind(target)
    r1 = st.align_frame(rho1, target, BellKind.PHI_PLUS)
    r2 = st.align_frame(rho2, target, BellKind.PHI_PLUS)
    # qubits: 0 A1, 1 B1, 2 A2, 3 B2
    joint = st.apply_unitary(st.tensor_product(r1, r2), _BILATERAL_CNOT)
    kept = sum(
        st._contract(joint.matrix, 4, [2, 3], np.array(v, dtype=complex))
        for v in ((1, 0, 0, 0), (0, 0, 0, 1))
    )
    p = float(np.trace(kept).real)
    if p <= 1e-14:
        return 0.0, None
    out = DensityOperator(kept / p)
    return p, st.align_frame(out, BellKind.PHI_PLUS, target)


def purify_pair(rho1, rho2, rng: np.random.Generator, target: BellKind = BellKind.PHI_PLUS) -> DensityOperator | None:
    """Sampled purification round; ``None`` on failure."""
    p, out = bbpssw_round(rho1, rho2, target)
    if out is None or rng.random() >= p:
        return None
    return out


def twirl(rho, target: BellKind = BellKind.PHI_PLUS) -> st.DensityOperator:
    """Isotropic twirl: keep the overlap with ``target``, spread the rest evenly."""
    proj = st.bell_state(target).density().matrix
    f = st.fidelity_pure_target(rho, st.bell_state(target))
    return st.DensityOperator(f * proj + (1 - f) / 3 * (np.eye(4) - proj))


def purify_recursive(
    rho, rounds: int, target: BellKind = BellKind.PHI_PLUS, twirl_between: bool = True
) -> list[tuple[float, float]]:
    """Deterministic recurrence on identical copies: ``[(fidelity, yield factor), ...]``.

    With ``twirl_between`` each round's output is twirled back to Werner form
    before the next round, which is what keeps the recurrence climbing.
    """
    out = []
    f = st.fidelity_pure_target(rho, st.bell_state(target))
    out.append((f, 1.0))
    for _ in range(rounds):
        if twirl_between:
            rho = twirl(rho, target)
        p, rho = bbpssw_round(rho, rho, target)
        if rho is None:
            break
        f = st.fidelity_pure_target(rho, st.bell_state(target))
        out.append((f, p / 2.0))
    return out


# ---------------------------------------------------------------------------
# event log


class EventLog:
    def __init__(self):
        self.events: list[dict] = []

    def add(self, t: float, kind: str, **data):
        self.events.append({"t": t, "kind": kind, **data})

    def extend_sorted(self, batch: list[dict]):
        self.events.extend(sorted(batch, key=lambda e: e["t"]))

    def to_jsonl(self) -> str:
        return "".join(json.dumps(e, sort_keys=True) + "\n" for e in self.events)


def audit_event_log(events: Sequence[dict], tol: float = 1e-15) -> None:
    """Raise ``AssertionError`` on out-of-order events or decay gaps.

    Each ``decay`` must span exactly from the memory's last ``store`` or
    ``decay`` to the event time.
    """
    last_t = -math.inf
    touched: dict[str, float] = {}
    for e in events:
        t = e["t"]
        assert t >= last_t - tol, f"event at {t} precedes {last_t}"
        last_t = t
        if e["kind"] == "store":
            touched[e["memory"]] = t
        elif e["kind"] == "decay":
            m = e["memory"]
            assert m in touched, f"decay of untouched memory {m}"
            assert abs(e["start"] - touched[m]) <= tol * max(1.0, abs(t)) + tol, f"decay of {m} skips time"
            assert abs(e["end"] - t) <= tol * max(1.0, abs(t)) + tol, f"decay of {m} ends off-event"
            touched[m] = t
        elif e["kind"] == "release":
            touched.pop(e["memory"], None)


# ---------------------------------------------------------------------------
# simulations


@dataclass
class SimulationStats:
    deliveries: int
    elapsed: float
    rate: float
    period: float
    mean_fidelity: float = math.nan
    std_fidelity: float = math.nan
    mean_latency: float = math.nan
    std_latency: float = math.nan
    completion_rounds: dict = field(default_factory=dict)
    unresolved: bool = False
    notes: list = field(default_factory=list)
    events: list | None = None

    @property
    def rounds(self) -> float:
        return self.elapsed / self.period

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("events")
        d["rounds"] = self.rounds
        return d


def _child_rng(rng: np.random.Generator) -> np.random.Generator:
    return np.random.default_rng(int(rng.integers(2**63)))


def _round_stats(durations_rounds: np.ndarray) -> dict:
    if durations_rounds.size == 0:
        return {}
    q = np.percentile(durations_rounds, [5, 25, 50, 75, 95])
    return {
        "mean": float(durations_rounds.mean()),
        "std": float(durations_rounds.std()),
        "p05": float(q[0]), "p25": float(q[1]), "median": float(q[2]), "p75": float(q[3]), "p95": float(q[4]),
    }


def _held_chain_cycles(links: Sequence[LinkSpec], nodes: Sequence[NodeSpec], rng, max_time: float, batch: int = 1 << 16):
    """Cycle schedule for stop-on-success links.

    Returns per-delivered-cycle arrays: start time, emission offsets of each
    link's successful attempt, and the delivery time.
    """
    periods = np.array([l.period for l in links])
    delays = np.array([l.signal_delay for l in links])
    probs = np.array([l.success_probability for l in links])
    op = max(n.local_op_time for n in nodes[1:-1]) if len(nodes) > 2 else 0.0
    notify = max(l.notify_delay for l in links)
    starts, emits, dones = [], [], []
    t0 = 0.0
    while True:
        g = rng.geometric(probs, size=(batch, len(links)))
        emit_off = (g - 1) * periods
        ready = (emit_off + delays).max(axis=1)
        done_off = ready + op
        # the slot of the last successful attempt is used up even with zero delays
        cycle = np.maximum(done_off + notify, (g * periods).max(axis=1))
        start = t0 + np.concatenate(([0.0], np.cumsum(cycle)[:-1]))
        done = start + done_off
        ok = done <= max_time
        n_ok = int(np.argmin(ok)) if not ok.all() else batch
        starts.append(start[:n_ok])
        emits.append(emit_off[:n_ok])
        dones.append(done[:n_ok])
        if n_ok < batch:
            break
        t0 = start[-1] + cycle[-1]
    return np.concatenate(starts), np.concatenate(emits), np.concatenate(dones)


def _deliver_chain(pairs, links, nodes, emit_times, t_done, swap_rng, log: EventLog | None, labels):
    """Decay held pairs up to ``t_done`` and swap them into one end-to-end pair."""
    batch_events = []
    decayed = []
    for i, (rho, link) in enumerate(zip(pairs, links)):
        age = t_done - emit_times[i]
        rho = decay_memory(rho, 0, age, nodes[i].memory_t2)
        rho = decay_memory(rho, 1, age, nodes[i + 1].memory_t2)
        decayed.append(rho)
        if log is not None:
            for m in (labels[i][0], labels[i][1]):
                batch_events.append({"t": emit_times[i], "kind": "store", "memory": m})
                batch_events.append({"t": t_done, "kind": "decay", "memory": m, "start": emit_times[i], "end": t_done})
    kind = links[0].pair_kind
    rho = decayed[0]
    for j in range(1, len(decayed)):
        res = entanglement_swap(rho, decayed[j], swap_rng, (kind, links[j].pair_kind))
        rho = res.aligned(kind)
        dep = nodes[j].swap_depolarizing
        if dep:
            rho = st.apply_depolarizing(rho, dep)
        if log is not None:
            batch_events.append({"t": t_done, "kind": "swap", "node": j, "outcome": res.outcome.value})
    if log is not None:
        for lab in labels:
            for m in lab:
                batch_events.append({"t": t_done, "kind": "release", "memory": m})
        batch_events.append({"t": t_done, "kind": "deliver"})
        log.extend_sorted(batch_events)
    return st.fidelity_pure_target(rho, st.bell_state(kind))


def _memory_labels(n_links: int) -> list[tuple[str, str]]:
    return [(f"n{i}.r", f"n{i + 1}.l") for i in range(n_links)]


def _simulate_held(links, nodes, rng, max_time, track_fidelity, record_events) -> SimulationStats:
    swap_rng = _child_rng(rng)
    starts, emit_off, dones = _held_chain_cycles(links, nodes, rng, max_time)
    period = links[0].period
    n = dones.size
    latency = dones - starts
    stats = SimulationStats(
        deliveries=n,
        elapsed=max_time,
        rate=n / max_time,
        period=period,
        mean_latency=float(latency.mean()) if n else math.nan,
        std_latency=float(latency.std()) if n else math.nan,
        completion_rounds=_round_stats(latency / period),
    )
    if n == 0:
        stats.unresolved = True
        stats.notes.append("no deliveries within max_time")
        return stats
    log = EventLog() if record_events else None
    if track_fidelity or record_events:
        base = [l.initial_pair() for l in links]
        labels = _memory_labels(len(links))
        fids = np.empty(n)
        for k in range(n):
            emits = starts[k] + emit_off[k]
            if log is not None:
                log.add(starts[k], "cycle_start")
            fids[k] = _deliver_chain(base, links, nodes, emits, dones[k], swap_rng, log, labels)
        stats.mean_fidelity = float(fids.mean())
        stats.std_fidelity = float(fids.std())
    if log is not None:
        stats.events = log.events
    return stats


def _simulate_reset(links, nodes, rng, max_time, track_fidelity, chunk: int = 1 << 22) -> SimulationStats:
    """Links attempt in lockstep; a delivery needs every link to succeed in the same round."""
    periods = {l.period for l in links}
    if len(periods) != 1:
        raise ValueError("lockstep protocols need equal attempt periods on every link")
    period = periods.pop()
    probs = np.array([l.success_probability for l in links])
    n_rounds = int(math.floor(max_time / period + 1e-9))
    hits = []
    done = 0
    while done < n_rounds:
        m = min(chunk, n_rounds - done)
        all_ok = np.ones(m, dtype=bool)
        for p in probs:
            all_ok &= rng.random(m) < p
        hits.append(np.flatnonzero(all_ok) + done)
        done += m
    hit_rounds = np.concatenate(hits) if hits else np.array([], dtype=np.int64)
    q = float(np.prod(probs))
    stats = SimulationStats(
        deliveries=int(hit_rounds.size),
        elapsed=n_rounds * period,
        rate=hit_rounds.size / (n_rounds * period) if n_rounds else 0.0,
        period=period,
    )
    if hit_rounds.size:
        gaps = np.diff(np.concatenate(([-1], hit_rounds)))
        stats.completion_rounds = _round_stats(gaps.astype(float))
    if n_rounds == 0 or q < 1.0 / max(n_rounds, 1):
        stats.unresolved = True
        stats.notes.append(f"per-round success {q:.3g} below 1/rounds; statistically unresolved")
    if hit_rounds.size == 0 and not stats.unresolved:
        stats.unresolved = True
        stats.notes.append("no deliveries within max_time")
    if track_fidelity and hit_rounds.size:
        # every success swaps fresh pairs; average exactly over swap outcomes
        op = max(n.local_op_time for n in nodes[1:-1]) if len(nodes) > 2 else 0.0
        # all pairs are emitted together and live until the last herald plus the swap
        age = max(l.signal_delay for l in links) + op
        pairs = []
        for i, l in enumerate(links):
            rho = decay_memory(l.initial_pair(), 0, age, nodes[i].memory_t2)
            pairs.append(decay_memory(rho, 1, age, nodes[i + 1].memory_t2))
        kind = links[0].pair_kind
        rho = pairs[0]
        for j in range(1, len(pairs)):
            rho = swap_average(rho, pairs[j], (kind, links[j].pair_kind), kind)
            if nodes[j].swap_depolarizing:
                rho = st.apply_depolarizing(rho, nodes[j].swap_depolarizing)
        stats.mean_fidelity = st.fidelity_pure_target(rho, st.bell_state(kind))
        stats.std_fidelity = 0.0
    return stats


def simulate_two_link_protocol(
    links: Sequence[LinkSpec],
    nodes: Sequence[NodeSpec],
    rng: np.random.Generator,
    max_time: float,
    memoryless: bool = False,
    track_fidelity: bool = True,
    record_events: bool = False,
) -> SimulationStats:
    """Alice - repeater - Bob.

    With memory each link stops on success and the repeater swaps once both
    pairs are heralded (either link may finish first).  Classical herald
    delays age the stored pairs and the swap result is announced to the end
    nodes before the links restart.  ``memoryless`` requires both links to
    succeed in the same attempt round.
    """
    if len(links) != 2 or len(nodes) != 3:
        raise ValueError("two links and three nodes required")
    if memoryless:
        return _simulate_reset(links, nodes, rng, max_time, track_fidelity)
    return _simulate_held(links, nodes, rng, max_time, track_fidelity, record_events)


def simulate_chain(cfg: ChainConfig, rng: np.random.Generator, max_rounds: int, track_fidelity: bool = True, record_events: bool = False) -> SimulationStats:
    """Chain of ``N`` nodes; time budget is ``max_rounds`` attempt periods of the first link.

    Unheralded chains cannot stop on success, so they run the lockstep
    protocol regardless of ``cfg.protocol`` and additionally report the
    unconditioned output fidelity of a round.
    """
    max_time = max_rounds * cfg.links[0].period
    if cfg.holds_pairs:
        return _simulate_held(cfg.links, cfg.nodes, rng, max_time, track_fidelity, record_events)
    stats = _simulate_reset(cfg.links, cfg.nodes, rng, max_time, track_fidelity)
    if not cfg.heralded:
        q = float(np.prod([l.success_probability for l in cfg.links]))
        stats.notes.append(f"unheralded output fidelity per round: {unheralded_output(q, cfg.links[0].pair_kind).fidelity():.6g}")
    return stats


def expected_max_geometric(p: float, m: int) -> float:
    """``E[max of m iid Geometric(p)]`` on {1, 2, ...}, by inclusion-exclusion."""
    q = 1.0 - p
    return float(sum((-1) ** (j + 1) * math.comb(m, j) / (1.0 - q**j) for j in range(1, m + 1)))


# ---------------------------------------------------------------------------
# coherence budget


@dataclass(frozen=True)
class CoherenceBudget:
    length_km: float
    n_core: float
    t2: float
    attempt_period: float
    p_success: float
    propagation_time: float
    max_length_m: float
    required_t2: float

    @property
    def propagation_ok(self) -> bool:
        return self.t2 > self.propagation_time

    @property
    def propagation_margin(self) -> float:
        return self.t2 - self.propagation_time

    @property
    def rate_ok(self) -> bool:
        return self.t2 >= self.required_t2

    @property
    def rate_margin(self) -> float:
        return self.t2 / self.required_t2

    def to_dict(self) -> dict:
        d = asdict(self)
        d.update(propagation_ok=self.propagation_ok, propagation_margin=self.propagation_margin,
                 rate_ok=self.rate_ok, rate_margin=self.rate_margin)
        return d


def check_coherence_budget(length_km: float, n_core: float, t2: float, attempt_period: float, p_success: float) -> CoherenceBudget:
    """Both memory-lifetime constraints on a link of total length ``length_km``.

    Propagation: photons travel to the midpoint station and the herald
    returns, ``L n / c`` in total.  Rate: the memory must outlast the mean
    wait ``T_rep / p`` for a heralded success.  ``max_length_m`` is the
    longest fiber between two cryostats for a round trip within ``T2``,
    ``T2 c / (2 n)``.
    """
    if min(n_core, t2, attempt_period, p_success) <= 0 or length_km < 0:
        raise ValueError("inputs must be positive")
    from .optics import SPEED_OF_LIGHT

    return CoherenceBudget(
        length_km=length_km,
        n_core=n_core,
        t2=t2,
        attempt_period=attempt_period,
        p_success=p_success,
        propagation_time=propagation_delay(length_km, n_core),
        max_length_m=t2 * SPEED_OF_LIGHT / (2.0 * n_core),
        required_t2=attempt_period / p_success,
    )
