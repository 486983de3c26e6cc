"""Spin-photon pair source of a charged quantum dot in a Voigt-geometry field.

The trion decays with equal amplitude to either spin ground state; the two
branches emit orthogonally polarized photons and the ``|up>`` branch
carries a 90 degree phase.  With the photon energy label erased this gives
the two-qubit state ``(i|up, H> + |down, V>)/sqrt(2)`` with the spin on
qubit 0 and the photon polarization on qubit 1.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .states import (
    PAULI,
    SQRT1_2,
    DensityOperator,
    PureState,
    apply_depolarizing,
    apply_dephasing,
    apply_unitary_1q,
    as_density,
    basis_unitary,
    mix,
)

SPIN = 0
PHOTON = 1

# Named single-qubit bases used by the spin-photon experiments.
SPIN_BASES = {
    "updown": "Z",  # {|up>, |down>}
    "rightleft": "X",  # {|->>, |<->}
}
PHOTON_BASES = {
    "HV": "Z",
    "diagonal": "X",
    "circular": "Y",  # {sigma+, sigma-}, sigma+- = (H +- iV)/sqrt(2)
}


@dataclass(frozen=True)
class QDSourceModel:
    """Charged quantum dot parameters.

    ``zeeman_splitting`` is an angular frequency (rad/s); the Larmor period
    is ``2*pi / zeeman_splitting``.  ``transition_energy_ev`` is carried for
    bookkeeping only.
    """

    zeeman_splitting: float
    trion_lifetime: float = 0.6e-9
    repetition_rate: float = 1e6
    transition_energy_ev: float = 1.362

    def __post_init__(self):
        if self.zeeman_splitting <= 0:
            raise ValueError("zeeman_splitting must be positive")
        if self.trion_lifetime <= 0:
            raise ValueError("trion_lifetime must be positive")
        if self.repetition_rate <= 0:
            raise ValueError("repetition_rate must be positive")
        if self.repetition_rate > 1.0 / self.trion_lifetime:
            warnings.warn(
                f"repetition rate {self.repetition_rate:.3g} Hz exceeds the inverse trion lifetime "
                f"{1.0 / self.trion_lifetime:.3g} Hz",
                stacklevel=2,
            )

    @classmethod
    def from_larmor_period(cls, period: float, **kwargs) -> "QDSourceModel":
        return cls(zeeman_splitting=2 * math.pi / period, **kwargs)

    @property
    def larmor_period(self) -> float:
        return 2 * math.pi / self.zeeman_splitting


@dataclass(frozen=True)
class SourceImperfections:
    g2_zero: float = 0.0
    detection_window: float = 0.0
    depolarizing_prob: float = 0.0
    init_fidelity: float = 1.0

    def __post_init__(self):
        if self.g2_zero < 0:
            raise ValueError("g2_zero must be nonnegative")
        if self.detection_window < 0:
            raise ValueError("detection_window must be nonnegative")
        for name in ("depolarizing_prob", "init_fidelity"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")


def ideal_spin_photon_pure() -> PureState:
    s = SQRT1_2
    return PureState(np.array([1j * s, 0, 0, s]))


def ideal_spin_photon_state() -> DensityOperator:
    return ideal_spin_photon_pure().density()


def change_local_basis(rho, qubit: int, basis) -> DensityOperator:
    """Re-express ``qubit`` in ``basis``: afterwards ``|j>`` means the j-th basis vector."""
    return apply_unitary_1q(rho, qubit, basis_unitary(basis))


def timing_visibility(window: float, zeeman_splitting: float) -> float:
    """Coherence retained when Larmor phases are averaged over a uniform window.

    ``|sinc(delta * T_w / 2)|``; 1 at zero window.
    """
    if window < 0:
        raise ValueError("detection window must be nonnegative")
    x = 0.5 * zeeman_splitting * window
    if x == 0.0:
        return 1.0
    return abs(math.sin(x) / x)


def apply_source_imperfections(rho, imp: SourceImperfections, model: QDSourceModel) -> DensityOperator:
    """Degrade a spin-photon state.

    Applied in order: wrong-branch initialization mixture (spin flipped with
    probability ``1 - init_fidelity``), timing-window dephasing of the
    spin-photon coherence, then two-qubit depolarization.
    """
    rho = as_density(rho)
    if imp.init_fidelity < 1.0:
        flipped = apply_unitary_1q(rho, SPIN, PAULI["X"])
        rho = mix([(rho, imp.init_fidelity), (flipped, 1.0 - imp.init_fidelity)])
    v = timing_visibility(imp.detection_window, model.zeeman_splitting)
    if v < 1.0:
        rho = apply_dephasing(rho, PHOTON, 1.0 - v)
    if imp.depolarizing_prob > 0.0:
        rho = apply_depolarizing(rho, imp.depolarizing_prob)
    return rho


def source_state(imp: SourceImperfections | None = None, model: QDSourceModel | None = None) -> DensityOperator:
    rho = ideal_spin_photon_state()
    if imp is None:
        return rho
    if model is None:
        model = DEFAULT_SOURCE
    return apply_source_imperfections(rho, imp, model)


def sample_emission_time(lifetime: float, rng: np.random.Generator, size=None):
    if lifetime <= 0:
        raise ValueError("lifetime must be positive")
    return rng.exponential(lifetime, size=size)


# 57 ps Larmor period and 0.6 ns trion lifetime of the InAs dot experiments.
DEFAULT_SOURCE = QDSourceModel.from_larmor_period(57e-12, trion_lifetime=0.6e-9, repetition_rate=1e6)
