"""Fixed physical constants (CODATA 2018).

These are deliberately not user-configurable: every module imports the same
values so that unit conversions stay consistent across the toolkit.

Convention: ``gamma_e`` is the electron gyromagnetic ratio in rad/s/T,
i.e. g_e * mu_B / hbar with the free-electron g-factor.  Angular frequencies
(rad/s) are used for all energies and rates internally; conversions to plain
Hz happen only at I/O boundaries.
"""

from dataclasses import dataclass


@dataclass(frozen=True)
class PhysicalConstants:
    hbar: float = 1.054571817e-34       # J s
    mu_B: float = 9.2740100783e-24      # J/T
    k_B: float = 1.380649e-23           # J/K
    mu_0: float = 1.25663706212e-6      # T m/A
    gamma_e: float = 1.76085963023e11   # rad/s/T (= g_e mu_B / hbar)


CONST = PhysicalConstants()
