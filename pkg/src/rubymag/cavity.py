"""Spin-loaded cavity reflection, interaction term, coupling and cooperativity.

The reflection coefficient is

    Gamma = -1 + kappa_c1 / (kappa_c/2 + i(omega_d - omega_c) + Pi)

with the spin interaction term

    Pi = gs^2 N / (kappa_s/2 + i(omega_d - omega_s)
         + [gs^2 n_cav kappa_s / (2 kappa_th)] / (kappa_s/2 - i(omega_d - omega_s)))

All rates and frequencies are angular (rad/s); power is watts.  The frequency
arguments of the functional helpers broadcast over numpy arrays so that 2D
(omega_s, omega_d) grids evaluate in one shot.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .constants import CONST
from .errors import ZeroCoupling, ZeroKappaTh, ZeroLinewidth, ZeroSpinLinewidth

_TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class CavityParams:
    omega_c: float = _TWO_PI * 11.4e9     # rad/s
    kappa_c0: float = _TWO_PI * 330e3     # intrinsic, rad/s
    kappa_c1: float = _TWO_PI * 330e3     # input coupling, rad/s

    def __post_init__(self):
        if min(self.omega_c, self.kappa_c0, self.kappa_c1) <= 0:
            raise ValueError("cavity frequency and rates must be positive")

    @property
    def kappa_c(self) -> float:
        return self.kappa_c0 + self.kappa_c1


@dataclass(frozen=True)
class EnsembleParams:
    g_s: float                             # single spin-photon coupling, rad/s
    N: float                               # polarized spin count
    kappa_s: float = _TWO_PI * 42e6        # 2/T2, rad/s
    kappa_th: float = _TWO_PI * 120e3      # 1/T1, rad/s
    omega_s: float = _TWO_PI * 11.4e9      # rad/s

    def __post_init__(self):
        if min(self.g_s, self.N, self.kappa_s, self.kappa_th, self.omega_s) < 0:
            raise ValueError("ensemble parameters must be non-negative")

    @property
    def g_eff(self) -> float:
        """Collective coupling g_s * sqrt(N); derived, never stored."""
        return self.g_s * math.sqrt(self.N)


@dataclass(frozen=True)
class DriveParams:
    omega_d: float = _TWO_PI * 11.4e9      # rad/s
    power: float = 1e-3                    # W

    def __post_init__(self):
        if self.power < 0:
            raise ValueError("drive power must be >= 0")


@dataclass(frozen=True)
class NonIdealityParams:
    """Auxiliary parameters wrapping Gamma into the measurable Gamma'.

    Gamma' = o_r + i o_i + exp(i(psi + (omega_d - omega_d_mean) tau))
             * (1 + A + b (omega_d - omega_d_mean))
             * Gamma(omega_s - omega_s_off, omega_d - omega_d_off)
    """

    o_r: float = 0.0
    o_i: float = 0.0
    A: float = 0.0
    b: float = 0.0             # s
    psi: float = 0.0           # rad
    tau: float = 0.0           # s
    omega_s_off: float = 0.0   # rad/s
    omega_d_off: float = 0.0   # rad/s
    omega_d_mean: float = 0.0  # rad/s reference for the b and tau terms

    def __post_init__(self):
        large = [name for name, val in (("o_r", self.o_r), ("o_i", self.o_i),
                                        ("A", self.A), ("psi", self.psi))
                 if abs(val) > 0.5]
        if large:
            warnings.warn(f"non-ideality parameters not small: {large}",
                          stacklevel=2)


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0) * 1e-3


def watts_to_dbm(watts: float) -> float:
    return 10.0 * math.log10(watts / 1e-3)


def db_to_voltage_gain(db: float) -> float:
    return 10.0 ** (db / 20.0)


def photon_number(drive: DriveParams, kappa_c: float) -> float:
    """Mean intracavity photon number n_cav = P / (hbar omega_d kappa_c)."""
    if kappa_c <= 0:
        raise ZeroLinewidth("kappa_c must be positive")
    if drive.omega_d <= 0:
        raise ZeroLinewidth("omega_d must be positive")
    return drive.power / (CONST.hbar * drive.omega_d * kappa_c)


def interaction_term(g_s: float, N: float, kappa_s: float, kappa_th: float,
                     omega_s, omega_d, n_cav: float):
    """Spin interaction term Pi (rad/s); broadcasts over frequency arrays."""
    if kappa_s <= 0:
        raise ZeroSpinLinewidth("kappa_s must be positive")
    if kappa_th <= 0 and n_cav > 0:
        raise ZeroKappaTh("kappa_th must be positive when the drive populates the cavity")
    delta = np.asarray(omega_d, dtype=float) - np.asarray(omega_s, dtype=float)
    saturation = 0.0
    if n_cav > 0:
        saturation = (g_s ** 2 * n_cav * kappa_s / (2.0 * kappa_th)) \
            / (kappa_s / 2.0 - 1j * delta)
    return g_s ** 2 * N / (kappa_s / 2.0 + 1j * delta + saturation)


def spin_interaction(ens: EnsembleParams, drive: DriveParams, n_cav: float):
    """Pi evaluated from parameter bundles."""
    return interaction_term(ens.g_s, ens.N, ens.kappa_s, ens.kappa_th,
                            ens.omega_s, drive.omega_d, n_cav)


def reflection_coefficient(kappa_c0: float, kappa_c1: float, omega_c: float,
                           omega_d, pi_term):
    """Gamma for a given interaction term; broadcasts over arrays."""
    kappa_c = kappa_c0 + kappa_c1
    return -1.0 + kappa_c1 / (kappa_c / 2.0
                              + 1j * (np.asarray(omega_d, dtype=float) - omega_c)
                              + pi_term)


def reflection(cav: CavityParams, ens: EnsembleParams, drive: DriveParams):
    """Spin-loaded complex reflection coefficient at the drive frequency."""
    n_cav = photon_number(drive, cav.kappa_c)
    pi_term = spin_interaction(ens, drive, n_cav)
    return reflection_coefficient(cav.kappa_c0, cav.kappa_c1, cav.omega_c,
                                  drive.omega_d, pi_term)


def reflection_with_nonidealities(cav: CavityParams, ens: EnsembleParams,
                                  drive: DriveParams, ni: NonIdealityParams):
    """Gamma' including offsets, amplitude correction, phase and delay terms."""
    omega_d = drive.omega_d - ni.omega_d_off
    shifted_drive = DriveParams(omega_d=omega_d, power=drive.power)
    shifted_ens = EnsembleParams(g_s=ens.g_s, N=ens.N, kappa_s=ens.kappa_s,
                                 kappa_th=ens.kappa_th,
                                 omega_s=ens.omega_s - ni.omega_s_off)
    gamma = reflection(cav, shifted_ens, shifted_drive)
    d = drive.omega_d - ni.omega_d_mean
    envelope = np.exp(1j * (ni.psi + d * ni.tau)) * (1.0 + ni.A + ni.b * d)
    return ni.o_r + 1j * ni.o_i + envelope * gamma


def pi_saturated_approx(ens: EnsembleParams, drive: DriveParams, n_cav: float):
    """Small-detuning expansion of Pi; exact at n_cav = 0 on resonance.

    Pi ~ [1 / (kappa_s/2 + g_s^2 n_cav / kappa_th)]
         * g_s^2 N / (1 + 2i(omega_d - omega_s)/kappa_s)

    The approximation degrades at large detuning; callers compare against the
    full term rather than relying on it there.
    """
    if ens.kappa_s <= 0:
        raise ZeroSpinLinewidth("kappa_s must be positive")
    if ens.kappa_th <= 0:
        raise ZeroKappaTh("kappa_th must be positive")
    delta = drive.omega_d - ens.omega_s
    prefactor = 1.0 / (ens.kappa_s / 2.0 + ens.g_s ** 2 * n_cav / ens.kappa_th)
    return prefactor * ens.g_s ** 2 * ens.N / (1.0 + 2j * delta / ens.kappa_s)


def single_spin_coupling(V_cav: float, omega_c: float,
                         n_perp: float = 1.0) -> float:
    """g_s = (gamma_e n_perp / 2) sqrt(hbar omega_c mu_0 / V_cav)  [rad/s]."""
    if V_cav <= 0:
        raise ValueError("V_cav must be positive")
    if not 0.0 <= n_perp <= 1.0:
        raise ValueError("n_perp must lie in [0, 1]")
    return (CONST.gamma_e * n_perp / 2.0) \
        * math.sqrt(CONST.hbar * omega_c * CONST.mu_0 / V_cav)


def cooperativity(ens: EnsembleParams, cav: CavityParams) -> float:
    """Collective cooperativity xi = 4 g_eff^2 / (kappa_s kappa_c)."""
    if ens.kappa_s <= 0:
        raise ZeroSpinLinewidth("kappa_s must be positive")
    if cav.kappa_c <= 0:
        raise ZeroLinewidth("kappa_c must be positive")
    return 4.0 * ens.g_eff ** 2 / (ens.kappa_s * cav.kappa_c)


def kappa_th_threshold_power(T1: float, T2: float, g_s: float, omega_d: float,
                             kappa_c: float) -> float:
    """Drive power (W) at which saturation matches kappa_s/2.

    Solves kappa_s/2 = g_s^2 n_cav / kappa_th for the incident power, with
    kappa_s = 2/T2 and kappa_th = 1/T1; below this power the relaxation rate
    kappa_th becomes hard to estimate from reflection data.
    """
    if g_s <= 0:
        raise ZeroCoupling("g_s must be positive")
    if min(T1, T2, omega_d, kappa_c) <= 0:
        raise ValueError("T1, T2, omega_d and kappa_c must be positive")
    kappa_s = 2.0 / T2
    kappa_th = 1.0 / T1
    return (kappa_s * kappa_th / (2.0 * g_s ** 2)) \
        * CONST.hbar * omega_d * kappa_c
