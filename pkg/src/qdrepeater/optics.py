"""Fiber transport and the midpoint beamsplitter Bell-state measurement."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import states as st
from .sources import SourceImperfections, QDSourceModel, source_state
from .states import BellKind, DensityOperator

SPEED_OF_LIGHT = 299_792_458.0  # m/s

# wavelength (nm) -> attenuation (dB/km)
FIBER_PRESETS = {1550: 0.17, 850: 3.5}


@dataclass(frozen=True)
class FiberChannel:
    length_km: float
    alpha_db_per_km: float = 0.17
    n_core: float = 1.468

    def __post_init__(self):
        if self.length_km < 0:
            raise ValueError("fiber length must be nonnegative")
        if self.alpha_db_per_km < 0:
            raise ValueError("attenuation must be nonnegative")
        if self.n_core < 1:
            raise ValueError("core refractive index must be >= 1")

    @classmethod
    def preset(cls, wavelength_nm: int, length_km: float, n_core: float = 1.468) -> "FiberChannel":
        return cls(length_km, FIBER_PRESETS[wavelength_nm], n_core)

    @property
    def transmission(self) -> float:
        return transmission_probability(self.length_km, self.alpha_db_per_km)

    @property
    def delay(self) -> float:
        return propagation_delay(self.length_km, self.n_core)


@dataclass(frozen=True)
class DetectorModel:
    efficiency: float = 1.0
    dark_count_prob: float = 0.0
    number_resolving: bool = False

    def __post_init__(self):
        for name in ("efficiency", "dark_count_prob"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")


@dataclass(frozen=True)
class HeraldOutcome:
    heralded: bool
    false_herald: bool = False
    memory_state: DensityOperator | None = None
    latency: float = 0.0
    bell_kind: BellKind | None = None

    def __post_init__(self):
        if self.heralded != (self.memory_state is not None):
            raise ValueError("memory_state must be present exactly when heralded")
        if self.false_herald and not self.heralded:
            raise ValueError("false_herald requires heralded")


def transmission_probability(length_km: float, alpha_db_per_km: float) -> float:
    if length_km < 0 or alpha_db_per_km < 0:
        raise ValueError("length and attenuation must be nonnegative")
    return 10.0 ** (-length_km * alpha_db_per_km / 10.0)


def propagation_delay(length_km: float, n_core: float = 1.468) -> float:
    if length_km < 0:
        raise ValueError("length must be nonnegative")
    return length_km * 1e3 * n_core / SPEED_OF_LIGHT


def link_success_probability(total_length_km: float, alpha_db_per_km: float, det: DetectorModel | None = None) -> float:
    """Double-click probability ``(eta * p_arm)^2`` with the station at the midpoint."""
    eta = 1.0 if det is None else det.efficiency
    p_arm = transmission_probability(total_length_km / 2.0, alpha_db_per_km)
    return (eta * p_arm) ** 2


def link_entanglement_rate(r0: float, total_length_km: float, alpha_db_per_km: float, det: DetectorModel | None = None) -> float:
    return r0 * link_success_probability(total_length_km, alpha_db_per_km, det)


# ---------------------------------------------------------------------------
# two-photon Bell-state measurement


@dataclass(frozen=True)
class BSMResult:
    success_prob: float
    memory_state: DensityOperator | None
    bell_kind: BellKind = BellKind.PSI_MINUS


def _memory_photon_register(source_a, source_b) -> DensityOperator:
    # qubits: 0 memory A, 1 photon A, 2 memory B, 3 photon B
    return st.tensor_product(source_a, source_b)


def two_photon_bsm(source_a, source_b, kind: BellKind = BellKind.PSI_MINUS, overlap: float = 1.0) -> BSMResult:
    """Project the two photons onto a Bell state and return the memory pair.

    Each source is a (memory, photon) two-qubit state.  The memory state
    has memory A on qubit 0 and memory B on qubit 1.  ``overlap`` < 1 mixes
    in the coherence-erased outcome to model partially distinguishable
    photons.
    """
    if not 0.0 <= overlap <= 1.0:
        raise ValueError("overlap must lie in [0, 1]")
    joint = _memory_photon_register(source_a, source_b)
    p, mem = st.project_pure(joint, [1, 3], st.bell_state(kind))
    if mem is None:
        return BSMResult(0.0, None, kind)
    if overlap < 1.0:
        classical = st.apply_dephasing(mem, 0, 1.0)
        mem = st.mix([(mem, overlap), (classical, 1.0 - overlap)])
    return BSMResult(p, mem, kind)


# ---------------------------------------------------------------------------
# Monte Carlo herald trials


@dataclass(frozen=True)
class HeraldSample:
    """Vectorized outcome of ``n`` herald attempts."""

    heralded: np.ndarray
    genuine: np.ndarray
    kind_index: np.ndarray  # 0 -> PSI_MINUS, 1 -> PSI_PLUS (number-resolving only)

    @property
    def n(self) -> int:
        return self.heralded.size

    @property
    def false_herald(self) -> np.ndarray:
        return self.heralded & ~self.genuine


# columns of the per-attempt uniform draws
_U_ARRIVE_A, _U_ARRIVE_B, _U_EXTRA_A, _U_EXTRA_B, _U_COINC = 0, 1, 2, 3, 4
_U_BUNCH_SIDE, _U_LONE_SIDE, _U_EXTRA_A_SIDE, _U_EXTRA_B_SIDE, _U_DARK_0, _U_DARK_1 = 5, 6, 7, 8, 9, 10
N_UNIFORMS = 11


def _herald_params(p_a, p_b, det, g2_a, g2_b, coincidence_probs):
    eta = det.efficiency
    p_minus, p_plus = coincidence_probs
    if not det.number_resolving:
        p_plus = 0.0
    return (p_a * eta, p_b * eta, g2_a * p_a * eta, g2_b * p_b * eta, p_minus, p_plus,
            det.dark_count_prob, det.number_resolving)


def heralds_from_uniforms(u: np.ndarray, params) -> HeraldSample:
    """Vectorized herald decision from an ``(n, N_UNIFORMS)`` array of uniforms."""
    qa, qb, xa, xb, p_minus, p_plus, dark, resolving = params
    arrive_a = u[:, _U_ARRIVE_A] < qa
    arrive_b = u[:, _U_ARRIVE_B] < qb
    extra_a = u[:, _U_EXTRA_A] < xa
    extra_b = u[:, _U_EXTRA_B] < xb
    both = arrive_a & arrive_b
    uc = u[:, _U_COINC]
    coinc = both & (uc < p_minus + p_plus)
    kind_index = np.where(coinc & (uc >= p_minus), 1, 0)

    n0 = coinc.astype(np.int64)
    n1 = coinc.astype(np.int64)
    # bunched pairs, lone photons and extra photons each go to a random port
    bunched = both & ~coinc
    side = u[:, _U_BUNCH_SIDE] < 0.5
    n0 += 2 * (bunched & side)
    n1 += 2 * (bunched & ~side)
    lone = arrive_a ^ arrive_b
    side = u[:, _U_LONE_SIDE] < 0.5
    n0 += lone & side
    n1 += lone & ~side
    for extra, col in ((extra_a, _U_EXTRA_A_SIDE), (extra_b, _U_EXTRA_B_SIDE)):
        side = u[:, col] < 0.5
        n0 += extra & side
        n1 += extra & ~side
    n0 += u[:, _U_DARK_0] < dark
    n1 += u[:, _U_DARK_1] < dark

    if resolving:
        heralded = (n0 == 1) & (n1 == 1)
    else:
        heralded = (n0 >= 1) & (n1 >= 1)
    genuine = heralded & coinc & ~extra_a & ~extra_b
    return HeraldSample(heralded, genuine, kind_index)


def herald_from_uniforms_scalar(u, params) -> tuple[bool, bool, int]:
    """Single-attempt twin of :func:`heralds_from_uniforms` in plain Python."""
    qa, qb, xa, xb, p_minus, p_plus, dark, resolving = params
    arrive_a = u[_U_ARRIVE_A] < qa
    arrive_b = u[_U_ARRIVE_B] < qb
    extra_a = u[_U_EXTRA_A] < xa
    extra_b = u[_U_EXTRA_B] < xb
    both = arrive_a and arrive_b
    coinc = both and u[_U_COINC] < p_minus + p_plus
    kind_index = 1 if coinc and u[_U_COINC] >= p_minus else 0
    n0 = n1 = int(coinc)
    if both and not coinc:
        if u[_U_BUNCH_SIDE] < 0.5:
            n0 += 2
        else:
            n1 += 2
    if arrive_a != arrive_b:
        if u[_U_LONE_SIDE] < 0.5:
            n0 += 1
        else:
            n1 += 1
    for extra, col in ((extra_a, _U_EXTRA_A_SIDE), (extra_b, _U_EXTRA_B_SIDE)):
        if extra:
            if u[col] < 0.5:
                n0 += 1
            else:
                n1 += 1
    n0 += u[_U_DARK_0] < dark
    n1 += u[_U_DARK_1] < dark
    heralded = (n0 == 1 and n1 == 1) if resolving else (n0 >= 1 and n1 >= 1)
    genuine = heralded and coinc and not extra_a and not extra_b
    return bool(heralded), bool(genuine), kind_index


def sample_heralds(
    rng: np.random.Generator,
    n: int,
    p_a: float,
    p_b: float,
    det: DetectorModel,
    g2_a: float = 0.0,
    g2_b: float = 0.0,
    coincidence_probs: tuple[float, float] = (0.25, 0.0),
) -> HeraldSample:
    """Sample ``n`` independent attempts at the two-detector station.

    ``coincidence_probs`` are the probabilities that two arriving source
    photons leave one in each output arm heralding (Psi-, Psi+); the second
    entry is used only by number-resolving stations.  Photons that do not
    produce a coincidence bunch into one random detector.  Extra (g2)
    photons are unpolarized and land in a random detector.  Dark counts fire
    independently per detector.
    """
    params = _herald_params(p_a, p_b, det, g2_a, g2_b, coincidence_probs)
    return heralds_from_uniforms(rng.random((n, N_UNIFORMS)), params)


def coincidence_probabilities(source_a, source_b, number_resolving: bool = False) -> tuple[float, float]:
    p_minus = two_photon_bsm(source_a, source_b, BellKind.PSI_MINUS).success_prob
    p_plus = two_photon_bsm(source_a, source_b, BellKind.PSI_PLUS).success_prob if number_resolving else 0.0
    return p_minus, p_plus


def analytic_herald_probability(p_a: float, p_b: float, det: DetectorModel, source_a=None, source_b=None) -> float:
    """Genuine herald probability without dark counts or multi-photon events."""
    sa = source_state() if source_a is None else source_a
    sb = source_state() if source_b is None else source_b
    p_minus, p_plus = coincidence_probabilities(sa, sb, det.number_resolving)
    return p_a * p_b * det.efficiency**2 * (p_minus + p_plus)


def false_herald_first_order(p_a: float, p_b: float, det: DetectorModel) -> float:
    """Leading-order probability of a dark-count-driven herald.

    A single arriving photon clicks one detector while the other detector
    fires a dark count.
    """
    return (p_a + p_b) * det.efficiency * det.dark_count_prob


def _uncorrelated_memories(source_a, source_b) -> DensityOperator:
    return st.tensor_product(st.partial_trace(source_a, [0]), st.partial_trace(source_b, [0]))


@lru_cache(maxsize=64)
def _herald_setup(imp_a, imp_b, model, number_resolving: bool, overlap: float):
    sa = source_state(imp_a, model)
    sb = source_state(imp_b, model)
    probs = coincidence_probabilities(sa, sb, number_resolving)
    kinds = (BellKind.PSI_MINUS, BellKind.PSI_PLUS)
    states = tuple(two_photon_bsm(sa, sb, k, overlap).memory_state for k in kinds)
    return probs, states, _uncorrelated_memories(sa, sb)


def herald_trial(
    rng: np.random.Generator,
    p_a: float,
    p_b: float,
    det: DetectorModel,
    imp_a: SourceImperfections | None = None,
    imp_b: SourceImperfections | None = None,
    model: QDSourceModel | None = None,
    latency: float = 0.0,
    overlap: float = 1.0,
) -> HeraldOutcome:
    """One heralding attempt between two spin-photon sources.

    A genuine herald returns the projected memory pair; a false herald
    (dark counts or extra photons) returns the uncorrelated product of the
    two memory marginals.
    """
    for p in (p_a, p_b):
        if not 0.0 <= p <= 1.0:
            raise ValueError("transmission probabilities must lie in [0, 1]")
    probs, states, false_state = _herald_setup(imp_a, imp_b, model, det.number_resolving, overlap)
    params = _herald_params(
        p_a, p_b, det,
        imp_a.g2_zero if imp_a else 0.0,
        imp_b.g2_zero if imp_b else 0.0,
        probs,
    )
    heralded, genuine, kind_index = herald_from_uniforms_scalar(rng.random(N_UNIFORMS).tolist(), params)
    if not heralded:
        return HeraldOutcome(False, latency=latency)
    if genuine:
        kind = BellKind.PSI_PLUS if kind_index == 1 else BellKind.PSI_MINUS
        return HeraldOutcome(True, False, states[kind_index], latency, kind)
    return HeraldOutcome(True, True, false_state, latency, BellKind.PSI_MINUS)


def herald_statistics(
    rng: np.random.Generator,
    n: int,
    p_a: float,
    p_b: float,
    det: DetectorModel,
    imp_a: SourceImperfections | None = None,
    imp_b: SourceImperfections | None = None,
    model: QDSourceModel | None = None,
    chunk: int = 1_000_000,
) -> dict:
    """Aggregate ``n`` herald trials; same sampling law as :func:`herald_trial`."""
    sa = source_state(imp_a, model)
    sb = source_state(imp_b, model)
    probs = coincidence_probabilities(sa, sb, det.number_resolving)
    heralded = genuine = 0
    done = 0
    while done < n:
        m = min(chunk, n - done)
        s = sample_heralds(
            rng, m, p_a, p_b, det,
            g2_a=imp_a.g2_zero if imp_a else 0.0,
            g2_b=imp_b.g2_zero if imp_b else 0.0,
            coincidence_probs=probs,
        )
        heralded += int(s.heralded.sum())
        genuine += int(s.genuine.sum())
        done += m
    return {
        "trials": n,
        "heralded": heralded,
        "genuine": genuine,
        "false": heralded - genuine,
        "herald_frequency": heralded / n,
        "false_fraction": (heralded - genuine) / heralded if heralded else float("nan"),
    }
