"""Closed-form polarisation dephasing models.

Time is measured as effective path difference in units of the reference
wavelength (780 nm), so ``delta_n * t`` is a phase per unit angular frequency.

* :class:`SinglePhotonModel` -- one polarisation qubit coupled to its own
  frequency spectrum, given as a normalised Gaussian mixture.
* :class:`TwoPhotonModel` -- a photon pair with a bivariate Gaussian joint
  spectrum (correlation ``K``) passing two birefringent plates one after the
  other; plate 1 is active for ``t <= switchover`` and plate 2 afterwards.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .procrep import ProcessRep, get_basis

DEFAULT_SWITCHOVER = 199.0


@dataclass(frozen=True)
class SpectrumPeak:
    weight: float
    center: float
    width: float

    def __post_init__(self):
        if not 0.0 < self.weight <= 1.0:
            raise ValueError(f"peak weight must lie in (0, 1], got {self.weight}")
        if not self.width > 0.0:
            raise ValueError(f"peak width must be positive, got {self.width}")


@dataclass(frozen=True)
class SinglePhotonModel:
    peaks: tuple[SpectrumPeak, ...]
    delta_n: float
    name: str = "custom"

    def __post_init__(self):
        object.__setattr__(self, "peaks", tuple(self.peaks))
        if not self.peaks:
            raise ValueError("a spectrum needs at least one peak")
        total = sum(p.weight for p in self.peaks)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"peak weights must sum to 1, got {total:.15g}")
        if self.delta_n == 0:
            raise ValueError("delta_n must be nonzero")


@dataclass(frozen=True)
class TwoPhotonModel:
    K: float
    omega0: float
    delta_fwhm: float
    C: float
    delta_n: float
    switchover: float = DEFAULT_SWITCHOVER
    name: str = "custom"

    def __post_init__(self):
        if not -1.0 <= self.K <= 1.0:
            raise ValueError(f"correlation K must lie in [-1, 1], got {self.K}")
        if not self.C > 0:
            raise ValueError(f"frequency variance C must be positive, got {self.C}")
        if not self.delta_fwhm > 0:
            raise ValueError(f"pump FWHM must be positive, got {self.delta_fwhm}")
        if self.delta_n == 0:
            raise ValueError("delta_n must be nonzero")
        if not self.switchover > 0:
            raise ValueError(f"switchover must be positive, got {self.switchover}")

    @property
    def y_tilde(self) -> float:
        """Decay rate of the one-plate trace distance, ``delta_n**2 * C / 2``."""
        return self.delta_n**2 * self.C / 2.0

    def schedule(self, t: float) -> tuple[float, float]:
        return Schedule(self.switchover)(t)


@dataclass(frozen=True)
class Schedule:
    """Sequential plates: ``t -> (min(t, T1), max(0, t - T1))``."""

    switchover: float = DEFAULT_SWITCHOVER

    def __call__(self, t: float) -> tuple[float, float]:
        if t < 0:
            raise ValueError(f"time must be nonnegative, got {t}")
        return min(t, self.switchover), max(0.0, t - self.switchover)


# Fitted pump-spectrum/trace-distance parameters of the four correlation conditions.
PRESETS: dict[str, TwoPhotonModel] = {
    "cond_I": TwoPhotonModel(-0.9174, 389.7235, 0.1799, 0.0233, 0.0444, name="cond_I"),
    "cond_II": TwoPhotonModel(-0.6655, 389.7692, 0.5181, 0.1950, 0.0156, name="cond_II"),
    "cond_III": TwoPhotonModel(-0.5564, 389.7436, 0.7305, 0.3844, 0.0115, name="cond_III"),
    "cond_IV": TwoPhotonModel(-0.1645, 390.0128, 1.8885, 2.5760, 0.0045, name="cond_IV"),
}

SINGLE_PRESETS: dict[str, SinglePhotonModel] = {
    "single_gaussian": SinglePhotonModel((SpectrumPeak(1.0, 0.0, 0.2),), 0.05, name="single_gaussian"),
    "two_peak": SinglePhotonModel(
        (SpectrumPeak(0.5, -1.0, 0.2), SpectrumPeak(0.5, 1.0, 0.2)), 0.05, name="two_peak"
    ),
}


def preset(name: str):
    if name in PRESETS:
        return PRESETS[name]
    if name in SINGLE_PRESETS:
        return SINGLE_PRESETS[name]
    known = ", ".join([*PRESETS, *SINGLE_PRESETS])
    raise KeyError(f"unknown preset {name!r}; known presets: {known}")


# -- single photon -------------------------------------------------------------


def kappa_single(m: SinglePhotonModel, t: float) -> complex:
    """Characteristic function of the Gaussian-mixture spectrum at ``delta_n * t``."""
    if t < 0:
        raise ValueError(f"time must be nonnegative, got {t}")
    x = m.delta_n * t
    return complex(
        sum(p.weight * np.exp(1j * p.center * x - 0.5 * (p.width * x) ** 2) for p in m.peaks)
    )


def chi_single(kappa: complex) -> ProcessRep:
    """Dephasing process matrix in the ``(I, X, -iY, Z)`` basis."""
    k = complex(kappa)
    if abs(k) > 1.0 + 1e-12:
        raise ValueError(f"|kappa| = {abs(k):.15g} exceeds 1")
    kc = k.conjugate()
    chi = np.zeros((4, 4), dtype=complex)
    chi[0, 0] = (2 + k + kc) / 4
    chi[0, 3] = (k - kc) / 4
    chi[3, 0] = (kc - k) / 4
    chi[3, 3] = (2 - k - kc) / 4
    return ProcessRep.from_chi(chi, "SingleQubitM")


def single_dynamics(m: SinglePhotonModel) -> Callable[[float], ProcessRep]:
    return lambda t: chi_single(kappa_single(m, t))


# -- two photons ---------------------------------------------------------------


def g_joint(m: TwoPhotonModel, tau1: float, tau2: float) -> complex:
    dn = m.delta_n
    phase = m.omega0 * dn * (tau1 + tau2)
    decay = m.C * dn * dn * (tau1 * tau1 + tau2 * tau2 + 2.0 * m.K * tau1 * tau2)
    return complex(np.exp(0.5 * (1j * phase - decay)))


def multipliers(m: TwoPhotonModel, tau1: float, tau2: float) -> np.ndarray:
    """Elementwise factors on ``rho`` in the ``HH, HV, VH, VV`` basis."""
    k1 = g_joint(m, tau1, 0.0)
    k2 = g_joint(m, 0.0, tau2)
    k12 = g_joint(m, tau1, tau2)
    l12 = g_joint(m, tau1, -tau2)
    c = np.conj
    return np.array(
        [
            [1, k2, k1, k12],
            [c(k2), 1, l12, k1],
            [c(k1), c(l12), 1, k2],
            [c(k12), c(k1), c(k2), 1],
        ],
        dtype=complex,
    )


_DIAG_UNITS = (0, 5, 10, 15)  # |HH><HH|, |HV><HV|, |VH><VH|, |VV><VV| among the matrix units


def chi_two(m: TwoPhotonModel, tau1: float, tau2: float) -> ProcessRep:
    """16x16 process matrix of the correlated two-photon dephasing channel."""
    if tau1 < 0 or tau2 < 0:
        raise ValueError(f"plate times must be nonnegative, got ({tau1}, {tau2})")
    chi = np.zeros((16, 16), dtype=complex)
    chi[np.ix_(_DIAG_UNITS, _DIAG_UNITS)] = multipliers(m, tau1, tau2) / 4.0
    return ProcessRep.from_chi(chi, "TwoQubitE")


def chi_local(m: TwoPhotonModel, tau1: float) -> ProcessRep:
    """Single-photon marginal of plate 1, returned in the ``(I, X, -iY, Z)`` basis."""
    if tau1 < 0:
        raise ValueError(f"plate time must be nonnegative, got {tau1}")
    k1 = g_joint(m, tau1, 0.0)
    chi = np.zeros((4, 4), dtype=complex)
    chi[0, 0] = chi[3, 3] = 0.5
    chi[0, 3] = 0.5 * k1
    chi[3, 0] = 0.5 * np.conj(k1)
    return ProcessRep.from_chi(chi, "SingleQubitE").in_basis(get_basis("SingleQubitM"))


def global_dynamics(m: TwoPhotonModel) -> Callable[[float], ProcessRep]:
    return lambda t: chi_two(m, *m.schedule(t))


def local_dynamics(m: TwoPhotonModel) -> Callable[[float], ProcessRep]:
    return lambda t: chi_local(m, m.schedule(t)[0])


def with_omega0(m: TwoPhotonModel, omega0: float) -> TwoPhotonModel:
    return replace(m, omega0=omega0)


def derive_c(delta_fwhm: float) -> float:
    """Single-photon frequency variance assuming twice the pump FWHM."""
    return (2.0 * delta_fwhm / math.sqrt(8.0 * math.log(2.0))) ** 2
