"""Simulation and estimation toolkit for a cavity-coupled spin magnetometer.

Modules:
    spins         spin-3/2 Hamiltonian, eigensolver, level sweeps
    thermal       Boltzmann populations and polarized-spin accounting
    cavity        spin-loaded reflection coefficient and coupling constants
    fitting       avoided-crossing grids and the non-ideality fit
    iqnoise       IQ demodulation and noise propagation
    magnetometry  slopes, spectra, sensitivity budgets, simulation
    calibration   test-coil fields and linear calibrations
    config, cli   JSON configuration and command-line interface
"""

from .constants import CONST

__all__ = ["CONST"]
__version__ = "0.1.0"
