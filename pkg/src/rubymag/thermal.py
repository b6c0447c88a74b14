"""Thermal-equilibrium spin populations and polarized-spin accounting.

Population indexing follows the convention p1, p2 = |+-3/2> and
p3, p4 = |+-1/2>.  With the Zeeman shift neglected the level energies are
E(+-3/2) = hbar*D and E(+-1/2) = -hbar*D; an optional field argument switches
to the exact eigensolver energies instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constants import CONST
from .errors import NonPositiveTemperature
from .spins import FieldVector, SpinSystem, build_hamiltonian, eigensolve


@dataclass(frozen=True)
class MaterialParams:
    """Crystal and resonator quantities entering the spin-count estimate.

    zeta (modal filling factor) is carried for documentation/reporting only;
    it does not enter any formula here.
    """

    V_cav: float = 52.2e-9       # m^3
    V_cell: float = 0.2548e-27   # m^3
    alpha_Cr: float = 0.0005     # weight fraction of Cr2O3
    m_Al2O3: float = 101.96      # g/mol
    m_Cr2O3: float = 151.99      # g/mol
    N_cell: int = 12             # Al atoms per unit cell
    zeta: float = 0.69

    def __post_init__(self):
        if min(self.V_cav, self.V_cell, self.m_Al2O3, self.m_Cr2O3) <= 0:
            raise ValueError("volumes and molar masses must be positive")
        if not 0.0 <= self.alpha_Cr <= 1.0:
            raise ValueError("alpha_Cr must lie in [0, 1]")
        if self.N_cell < 1 or self.N_cell != int(self.N_cell):
            raise ValueError("N_cell must be a positive integer")


@dataclass(frozen=True)
class ThermalState:
    T: float                 # K
    populations: tuple       # (p1, p2, p3, p4) = (+3/2, -3/2, +1/2, -1/2)

    @property
    def polarization(self) -> float:
        """Effective polarization |p1 - p3| between the addressed states."""
        p = self.populations
        return abs(p[0] - p[2])


def boltzmann_populations(sys: SpinSystem, T: float,
                          field: FieldVector | None = None) -> ThermalState:
    """Thermal populations of the four ground-state levels.

    By default the Zeeman shift is neglected: the two |+-3/2> levels sit at
    hbar*D and the two |+-1/2> levels at -hbar*D.  Passing a field computes
    the exact energies from the Hamiltonian instead.
    """
    if T <= 0:
        raise NonPositiveTemperature(f"temperature must be > 0, got {T}")
    if field is None:
        # energies in rad/s, basis order (+3/2, +1/2, -1/2, -3/2)
        energies = np.array([sys.D, -sys.D, -sys.D, sys.D])
    else:
        sol = eigensolve(build_hamiltonian(sys, field))
        # map ascending eigenstates back to basis order by dominant component
        order = [int(np.argmax(np.abs(sol.states[:, k]))) for k in range(4)]
        energies = np.empty(4)
        for k, basis_idx in enumerate(order):
            energies[basis_idx] = sol.energies[k]
    x = -CONST.hbar * energies / (CONST.k_B * T)
    x -= x.max()
    w = np.exp(x)
    p = w / w.sum()
    # basis order -> population convention (+3/2, -3/2, +1/2, -1/2)
    return ThermalState(T=T, populations=(p[0], p[3], p[1], p[2]))


def effective_polarization(state: ThermalState) -> float:
    """|p1 - p3|, the usable population difference of the probed transition."""
    return state.polarization


def total_interrogated_spins(mat: MaterialParams) -> float:
    """Number of Cr3+ spins inside the modal field volume.

    N_tot = (V_cav / V_cell) * alpha * (m_Al2O3 / m_Cr2O3) * N_cell,
    returned as a real number (never rounded).
    """
    return (mat.V_cav / mat.V_cell) * mat.alpha_Cr \
        * (mat.m_Al2O3 / mat.m_Cr2O3) * mat.N_cell


def polarized_spin_count(mat: MaterialParams, state: ThermalState) -> float:
    """Effective polarization times the interrogated spin count."""
    return effective_polarization(state) * total_interrogated_spins(mat)


def optical_power_equivalent(N: float, omega: float, kappa_th: float,
                             n_photons: float) -> float:
    """Optical power (W) that hypothetical optical pumping would need.

    P = N * hbar * omega * kappa_th * n_photons.
    """
    if min(N, omega, kappa_th, n_photons) < 0:
        raise ValueError("all arguments must be non-negative")
    return N * CONST.hbar * omega * kappa_th * n_photons


def polarization_small_splitting(sys: SpinSystem, T: float) -> float:
    """First-order expansion hbar*|D| / (2 k_B T), valid for 2|D| << k_B T / hbar."""
    if T <= 0:
        raise NonPositiveTemperature(f"temperature must be > 0, got {T}")
    return CONST.hbar * abs(sys.D) / (2.0 * CONST.k_B * T)
