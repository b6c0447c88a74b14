"""Dispersive-slope response, spectra, sensitivity budgets and simulation.

Connects the cavity model to magnetometer figures of merit: the slope of the
dispersive voltage versus bias field, amplitude spectral densities of the
demodulated channels, the projected sensitivity eta = e_n / (V_m / B_test),
its thermal and phase-noise limits, and bias/power optimization sweeps.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.signal import welch

from .cavity import (CavityParams, DriveParams, EnsembleParams,
                     NonIdealityParams, db_to_voltage_gain, photon_number,
                     interaction_term, reflection_coefficient)
from .constants import CONST
from .errors import (EmptyTable, NegativeRadicand, TooFewPoints, TooFewSamples,
                     UndersampledTestTone, ZeroPower, ZeroSignal, ZeroSlope)
from .spins import FieldVector, SpinSystem, build_hamiltonian, eigensolve

_TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class SweepTrace:
    """Absorptive/dispersive voltages versus a swept axis (field or frequency)."""

    axis: np.ndarray
    absorptive: np.ndarray
    dispersive: np.ndarray

    def __post_init__(self):
        axis = np.asarray(self.axis, dtype=float)
        object.__setattr__(self, "axis", axis)
        object.__setattr__(self, "absorptive",
                           np.asarray(self.absorptive, dtype=float))
        object.__setattr__(self, "dispersive",
                           np.asarray(self.dispersive, dtype=float))
        d = np.diff(axis)
        if axis.size and not (np.all(d > 0) or np.all(d < 0)):
            raise ValueError("axis must be strictly monotone")
        if not (axis.size == self.absorptive.size == self.dispersive.size):
            raise ValueError("axis and channels must have equal length")


@dataclass(frozen=True)
class SensitivityConfig:
    G_db: float = 21.0          # chain gain, dB
    T: float = 293.0            # K
    R: float = 50.0             # Ohm
    F: float = math.sqrt(2.0)   # processing factor
    ell_db: float = -6.0        # phase-noise margin, dB

    def __post_init__(self):
        if self.R <= 0 or self.F <= 0:
            raise ValueError("R and F must be positive")


@dataclass(frozen=True)
class TestFieldSpec:
    amplitude_rms: float        # T
    frequency: float            # rad/s

    def __post_init__(self):
        if self.amplitude_rms < 0 or self.frequency < 0:
            raise ValueError("test field amplitude and frequency must be >= 0")


def dispersive_slope(trace: SweepTrace,
                     window: int = 5) -> tuple[np.ndarray, float]:
    """Per-point slope of the dispersive channel and its maximum magnitude.

    The slope comes from a local quadratic least-squares fit over a centered
    window (clamped at the edges); M_max = max |slope| in V/T when the axis
    is magnetic field.
    """
    n = trace.axis.size
    if n < 5:
        raise TooFewPoints("need at least five sweep points")
    half = window // 2
    slopes = np.empty(n)
    for i in range(n):
        lo = max(0, min(i - half, n - window))
        sel = slice(lo, lo + window)
        x = trace.axis[sel] - trace.axis[i]
        coeffs = np.polyfit(x, trace.dispersive[sel], 2)
        slopes[i] = coeffs[1]
    return slopes, float(np.max(np.abs(slopes)))


def amplitude_spectrum(samples, fs: float,
                       nperseg: int | None = None) -> tuple[np.ndarray,
                                                            np.ndarray]:
    """Single-sided RMS amplitude spectral density, Hann windowed and
    segment averaged.

    Returns (frequencies in Hz, density in V/sqrt(Hz)).  White noise of
    variance sigma^2 reports a flat density sigma*sqrt(2/fs); a tone's RMS
    amplitude is recovered by integrating the squared density across its peak
    bins (see tone_rms).  Segment averaging keeps the amplitude estimate
    unbiased; the default uses eight half-overlapping segments.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.size < 16:
        raise TooFewSamples("need at least 16 samples")
    if fs <= 0:
        raise ValueError("fs must be positive")
    if nperseg is None:
        nperseg = max(min(samples.size, 256), samples.size // 8)
    freqs, psd = welch(samples, fs=fs, window="hann", nperseg=nperseg,
                       scaling="density", detrend="constant")
    return freqs, np.sqrt(psd)


def tone_rms(freqs: np.ndarray, asd: np.ndarray, f0: float,
             half_bins: int = 3) -> float:
    """RMS amplitude of a tone at f0, integrating the density over its peak."""
    df = freqs[1] - freqs[0]
    k = int(np.argmin(np.abs(freqs - f0)))
    sel = slice(max(k - half_bins, 0), min(k + half_bins + 1, freqs.size))
    return float(math.sqrt(np.sum(asd[sel] ** 2) * df))


def noise_floor(freqs: np.ndarray, asd: np.ndarray, band: tuple[float, float],
                tone_freqs=(), exclude_bins: int = 2,
                trim_fraction: float = 0.1) -> float:
    """Trimmed-mean density over a band, excluding bins near declared tones."""
    mask = (freqs >= band[0]) & (freqs <= band[1])
    df = freqs[1] - freqs[0]
    for f0 in tone_freqs:
        mask &= np.abs(freqs - f0) > exclude_bins * df
    values = np.sort(asd[mask])
    if values.size == 0:
        raise ValueError("band contains no usable bins")
    cut = int(trim_fraction * values.size)
    trimmed = values[cut:values.size - cut] if values.size > 2 * cut else values
    return float(np.mean(trimmed))


def sensitivity(e_n: float, v_m: float, b_test: float) -> float:
    """eta = e_n / (V_m / B_test) in T/sqrt(Hz)."""
    if v_m <= 0 or b_test <= 0:
        raise ZeroSignal("V_m and B_test must be positive")
    return e_n * b_test / v_m


def thermal_limit(cfg: SensitivityConfig, m_max: float) -> float:
    """Thermal-noise-limited sensitivity G sqrt(k_B T R) / (F M_max)."""
    if m_max <= 0:
        raise ZeroSlope("M_max must be positive")
    gain = db_to_voltage_gain(cfg.G_db)
    return gain * math.sqrt(CONST.k_B * cfg.T * cfg.R) / (cfg.F * m_max)


class PhaseNoiseBudget(NamedTuple):
    e_p: float                  # V/sqrt(Hz)
    phi_required_dbc: float     # dBc/Hz; -inf when the budget is unbounded

    @property
    def unbounded(self) -> bool:
        return math.isinf(self.phi_required_dbc)


def phase_noise_budget(e_total: float, e_th: float, phi_measured_dbc: float,
                       cfg: SensitivityConfig) -> PhaseNoiseBudget:
    """Quadrature phase-noise estimate and the source requirement.

    e_p = sqrt(e_total^2 - e_th^2); the requirement is the measured phase
    noise scaled by (e_th/e_p) plus the margin, all in the dB domain.
    """
    if e_total < e_th or e_th < 0:
        raise NegativeRadicand("need e_total >= e_th >= 0")
    e_p = math.sqrt(e_total ** 2 - e_th ** 2)
    if e_p == 0.0:
        return PhaseNoiseBudget(e_p=0.0, phi_required_dbc=-math.inf)
    phi_required = phi_measured_dbc + 20.0 * math.log10(e_th / e_p) + cfg.ell_db
    return PhaseNoiseBudget(e_p=e_p, phi_required_dbc=phi_required)


def noise_normalized_slope(m: float, p: float, r: float) -> float:
    """M / sqrt(P R); proxy for SNR when the system is phase-noise limited."""
    if p <= 0 or r <= 0:
        raise ZeroPower("P and R must be positive")
    return m / math.sqrt(p * r)


def optimize_grid(eta: np.ndarray) -> tuple[np.ndarray, np.ndarray,
                                            np.ndarray, np.ndarray]:
    """Row/column minima of a sensitivity table indexed [bias, power].

    Returns (eta_mag, eta_mw, argmin_power_per_bias, argmin_bias_per_power);
    ties break toward the lower index.
    """
    eta = np.asarray(eta, dtype=float)
    if eta.size == 0 or eta.ndim != 2:
        raise EmptyTable("need a non-empty 2D table")
    return (eta.min(axis=1), eta.min(axis=0),
            eta.argmin(axis=1), eta.argmin(axis=0))


# ---------------------------------------------------------------------------
# forward simulation

def _transition_frequency_map(sys: SpinSystem, b_values: np.ndarray,
                              linearized: bool = False) -> np.ndarray:
    """omega_s(B) for the +3/2 <-> +1/2 transition, axial bias field."""
    slope = sys.g_par * CONST.mu_B / CONST.hbar
    if linearized:
        return 2.0 * abs(sys.D) - slope * b_values
    freqs = np.empty(b_values.size)
    for k, b in enumerate(b_values):
        sol = eigensolve(build_hamiltonian(sys, FieldVector(float(b), 0.0, 0.0)))
        by_basis = {int(np.argmax(np.abs(sol.states[:, i]))): i for i in range(4)}
        freqs[k] = abs(sol.energies[by_basis[0]] - sol.energies[by_basis[1]])
    return freqs


def spin_frequency_vs_field(sys: SpinSystem, b_values: np.ndarray,
                            linearized: bool = False,
                            grid_points: int = 64) -> np.ndarray:
    """omega_s(B); exact eigensolve on a grid plus interpolation when dense."""
    b_values = np.atleast_1d(np.asarray(b_values, dtype=float))
    if linearized or b_values.size <= grid_points:
        return _transition_frequency_map(sys, b_values, linearized)
    b_grid = np.linspace(b_values.min(), b_values.max(), grid_points)
    f_grid = _transition_frequency_map(sys, b_grid)
    return np.interp(b_values, b_grid, f_grid)


def _demodulated_voltages(cav: CavityParams, ens: EnsembleParams,
                          ni: NonIdealityParams, drive: DriveParams,
                          omega_s_values: np.ndarray, chain_gain_db: float,
                          r_ohm: float) -> np.ndarray:
    """Complex channel voltages for an array of spin frequencies."""
    omega_d = drive.omega_d - ni.omega_d_off
    n_cav = photon_number(DriveParams(omega_d=omega_d, power=drive.power),
                          cav.kappa_c)
    pi_term = interaction_term(ens.g_s, ens.N, ens.kappa_s, ens.kappa_th,
                               omega_s_values - ni.omega_s_off, omega_d, n_cav)
    gamma = reflection_coefficient(cav.kappa_c0, cav.kappa_c1, cav.omega_c,
                                   omega_d, pi_term)
    d = drive.omega_d - (ni.omega_d_mean or drive.omega_d)
    envelope = np.exp(1j * (ni.psi + d * ni.tau)) * (1.0 + ni.A + ni.b * d)
    gamma_prime = ni.o_r + 1j * ni.o_i + envelope * gamma
    scale = db_to_voltage_gain(chain_gain_db) * math.sqrt(drive.power * r_ohm)
    return scale * gamma_prime


def bias_sweep_trace(sys: SpinSystem, cav: CavityParams, ens: EnsembleParams,
                     ni: NonIdealityParams, drive: DriveParams,
                     b_values: np.ndarray, chain_gain_db: float = 21.0,
                     r_ohm: float = 50.0,
                     linearized: bool = False) -> SweepTrace:
    """Absorptive/dispersive voltages as the bias field sweeps the spin line."""
    b_values = np.asarray(b_values, dtype=float)
    omega_s = spin_frequency_vs_field(sys, b_values, linearized=linearized)
    v = _demodulated_voltages(cav, ens, ni, drive, omega_s,
                              chain_gain_db, r_ohm)
    return SweepTrace(axis=b_values, absorptive=v.real, dispersive=v.imag)


@dataclass(frozen=True)
class TimeSeries:
    times: np.ndarray           # s
    absorptive: np.ndarray      # V
    dispersive: np.ndarray      # V
    sample_rate: float          # Hz


def simulate_timeseries(sys: SpinSystem, cav: CavityParams,
                        ens: EnsembleParams, ni: NonIdealityParams,
                        drive: DriveParams, bias_b: float,
                        test: TestFieldSpec, chain_gain_db: float,
                        noise_floor_v: float, fs: float, duration: float,
                        seed: int = 0, r_ohm: float = 50.0,
                        linearized: bool = False) -> TimeSeries:
    """End-to-end magnetometer time series under an AC test field.

    The bias field is modulated by a sine of RMS amplitude test.amplitude_rms
    at test.frequency; white Gaussian noise of the stated density is added to
    both demodulated channels.  Deterministic per seed.
    """
    f_m = test.frequency / _TWO_PI
    if fs <= 2.0 * f_m:
        raise UndersampledTestTone(
            f"fs = {fs} Hz cannot sample a {f_m} Hz test tone")
    n = int(round(fs * duration))
    times = np.arange(n) / fs
    b = bias_b + math.sqrt(2.0) * test.amplitude_rms \
        * np.sin(test.frequency * times)
    omega_s = spin_frequency_vs_field(sys, b, linearized=linearized)
    v = _demodulated_voltages(cav, ens, ni, drive, omega_s,
                              chain_gain_db, r_ohm)
    absorptive = v.real.copy()
    dispersive = v.imag.copy()
    if noise_floor_v > 0:
        sigma = noise_floor_v * math.sqrt(fs / 2.0)
        rng = np.random.default_rng(seed)
        absorptive = absorptive + sigma * rng.standard_normal(n)
        dispersive = dispersive + sigma * rng.standard_normal(n)
    return TimeSeries(times=times, absorptive=absorptive,
                      dispersive=dispersive, sample_rate=fs)


# ---------------------------------------------------------------------------
# CSV outputs

def write_sweep_csv(path, trace: SweepTrace, axis_name: str = "b_tesla") -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([axis_name, "absorptive_v", "dispersive_v"])
        for a, ab, di in zip(trace.axis, trace.absorptive, trace.dispersive):
            writer.writerow([repr(float(a)), repr(float(ab)), repr(float(di))])


def write_asd_csv(path, freqs: np.ndarray, asd: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["freq_hz", "asd_v_per_rthz"])
        for f, a in zip(freqs, asd):
            writer.writerow([repr(float(f)), repr(float(a))])


def write_eta_table_csv(path, b_values: np.ndarray, p_values_dbm: np.ndarray,
                        eta: np.ndarray) -> None:
    """Long-format table: b_gauss, p_dbm, eta_t_per_rthz."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["b_gauss", "p_dbm", "eta_t_per_rthz"])
        for i, b in enumerate(b_values):
            for j, p in enumerate(p_values_dbm):
                writer.writerow([repr(float(b) * 1e4), repr(float(p)),
                                 repr(float(eta[i, j]))])
