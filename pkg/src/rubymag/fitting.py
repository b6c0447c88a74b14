"""Synthesis and fitting of 2D avoided-crossing reflection grids.

The forward model is the non-ideality-wrapped reflection coefficient
evaluated over an (omega_s, omega_d) grid.  Fitting minimizes the L1 norm of
the complex residuals with a bounded Nelder-Mead simplex: strictly-positive
rates are fit in log-space and every parameter is mapped through a logistic
transform onto its bounds, so the simplex itself runs unconstrained.

Only g_eff = g_s sqrt(N) is identifiable from the reflection data; g_s is
supplied (from the modal-volume coupling formula) and N is derived.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import minimize

from .cavity import CavityParams, DriveParams, EnsembleParams, NonIdealityParams
from .constants import CONST
from .errors import AllZeroBorder, InvalidBounds, ZeroRate

_TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class GridSpec:
    omega_s_values: np.ndarray    # rad/s, strictly increasing
    omega_d_values: np.ndarray    # rad/s, strictly increasing
    drive_power: float            # W

    def __post_init__(self):
        for name in ("omega_s_values", "omega_d_values"):
            vals = np.asarray(getattr(self, name), dtype=float)
            object.__setattr__(self, name, vals)
            if vals.size < 2 or np.any(np.diff(vals) <= 0):
                raise ValueError(f"{name} must be strictly increasing, length >= 2")

    @property
    def omega_d_mean(self) -> float:
        return float(np.mean(self.omega_d_values))


@dataclass(frozen=True)
class ComplexGrid2D:
    spec: GridSpec
    values: np.ndarray            # complex, shape (n_omega_s, n_omega_d)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        object.__setattr__(self, "values", vals)
        expected = (self.spec.omega_s_values.size, self.spec.omega_d_values.size)
        if vals.shape != expected:
            raise ValueError(f"grid shape {vals.shape} != spec shape {expected}")


@dataclass(frozen=True)
class FitResult:
    cavity: CavityParams
    ensemble: EnsembleParams
    nonideal: NonIdealityParams
    objective_value: float
    iterations: int
    converged: bool


@dataclass(frozen=True)
class FitOptions:
    max_evaluations: int = 150000
    objective_tol: float = 1e-10
    max_restarts: int = 12
    multi_starts: int = 3         # jittered starts including the guess
    jitter: float = 0.05          # relative jitter for extra starts
    seed: int = 0
    fixed: tuple = ()             # PARAM_NAMES entries pinned at the guess


def evaluate_model_grid(cav: CavityParams, ens: EnsembleParams,
                        ni: NonIdealityParams, spec: GridSpec) -> np.ndarray:
    """Vectorized Gamma' over the grid; rows index omega_s, columns omega_d."""
    ws = spec.omega_s_values[:, None] - ni.omega_s_off
    wd = spec.omega_d_values[None, :] - ni.omega_d_off
    kappa_c = cav.kappa_c
    n_cav = spec.drive_power / (CONST.hbar * wd * kappa_c)
    delta = wd - ws
    saturation = (ens.g_s ** 2 * n_cav * ens.kappa_s / (2.0 * ens.kappa_th)) \
        / (ens.kappa_s / 2.0 - 1j * delta)
    pi_term = ens.g_s ** 2 * ens.N / (ens.kappa_s / 2.0 + 1j * delta + saturation)
    gamma = -1.0 + cav.kappa_c1 / (kappa_c / 2.0 + 1j * (wd - cav.omega_c) + pi_term)
    d = spec.omega_d_values[None, :] - ni.omega_d_mean
    envelope = np.exp(1j * (ni.psi + d * ni.tau)) * (1.0 + ni.A + ni.b * d)
    return ni.o_r + 1j * ni.o_i + envelope * gamma


def simulate_crossing(cav: CavityParams, ens: EnsembleParams,
                      ni: NonIdealityParams, spec: GridSpec,
                      noise_sigma: float = 0.0, seed: int = 0) -> ComplexGrid2D:
    """Forward model plus complex Gaussian noise; deterministic per seed."""
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be >= 0")
    ni = replace(ni, omega_d_mean=spec.omega_d_mean)
    values = evaluate_model_grid(cav, ens, ni, spec)
    if noise_sigma > 0:
        rng = np.random.default_rng(seed)
        values = values + noise_sigma * (rng.standard_normal(values.shape)
                                         + 1j * rng.standard_normal(values.shape))
    return ComplexGrid2D(spec=spec, values=values)


def normalize_grid(grid: ComplexGrid2D) -> ComplexGrid2D:
    """Divide by the median |value| over the outermost border frame."""
    v = grid.values
    border = np.concatenate([v[0, :], v[-1, :], v[1:-1, 0], v[1:-1, -1]])
    scale = float(np.median(np.abs(border)))
    if scale == 0.0:
        raise AllZeroBorder("border frame has zero magnitude; cannot normalize")
    return ComplexGrid2D(spec=grid.spec, values=v / scale)


def dip_trajectory(grid: ComplexGrid2D) -> np.ndarray:
    """Drive frequency minimizing |Gamma| for each omega_s row (rad/s).

    The minimum bin is refined with a parabolic fit through its neighbors so
    the reported dip is not quantized to the grid step.
    """
    wd = grid.spec.omega_d_values
    mags = np.abs(grid.values)
    dips = np.empty(mags.shape[0])
    for r, row in enumerate(mags):
        k = int(np.argmin(row))
        if 0 < k < len(wd) - 1:
            y0, y1, y2 = row[k - 1], row[k], row[k + 1]
            denom = y0 - 2.0 * y1 + y2
            shift = 0.5 * (y0 - y2) / denom if denom != 0 else 0.0
            dips[r] = wd[k] + shift * (wd[min(k + 1, len(wd) - 1)] - wd[k])
        else:
            dips[r] = wd[k]
    return dips


# ---------------------------------------------------------------------------
# bounded Nelder-Mead fit

_PHYSICAL = ("kappa_c0", "kappa_c1", "kappa_s", "kappa_th", "g_eff")
_AUXILIARY = ("o_r", "o_i", "A", "b", "psi", "tau", "omega_s_off", "omega_d_off")
PARAM_NAMES = _PHYSICAL + _AUXILIARY

DEFAULT_AUX_BOUNDS = {
    "o_r": (-0.5, 0.5),
    "o_i": (-0.5, 0.5),
    "A": (-0.5, 0.5),
    "b": (-1e-7, 1e-7),
    "psi": (-1.5, 1.5),
    "tau": (-1e-6, 1e-6),
    "omega_s_off": (-_TWO_PI * 20e6, _TWO_PI * 20e6),
    "omega_d_off": (-_TWO_PI * 20e6, _TWO_PI * 20e6),
}


def default_bounds(initial: FitResult) -> dict:
    """Rates bounded a factor 10 around the guess; auxiliaries at fixed ranges."""
    phys = {
        "kappa_c0": initial.cavity.kappa_c0,
        "kappa_c1": initial.cavity.kappa_c1,
        "kappa_s": initial.ensemble.kappa_s,
        "kappa_th": initial.ensemble.kappa_th,
        "g_eff": initial.ensemble.g_eff,
    }
    bounds = {name: (val / 10.0, val * 10.0) for name, val in phys.items()}
    bounds.update(DEFAULT_AUX_BOUNDS)
    return bounds


class _BoundTransform:
    """Logistic mapping between bounded parameters and unconstrained space.

    Rates (the physical block) live in log-space before the logistic map, so
    the simplex moves in relative rather than absolute steps for them.
    """

    def __init__(self, bounds: dict):
        self.lo = np.empty(len(PARAM_NAMES))
        self.hi = np.empty(len(PARAM_NAMES))
        self.log = np.array([name in _PHYSICAL for name in PARAM_NAMES])
        for k, name in enumerate(PARAM_NAMES):
            lo, hi = bounds[name]
            if not hi > lo:
                raise InvalidBounds(f"bounds for {name} must satisfy lo < hi")
            if self.log[k]:
                if lo <= 0:
                    raise InvalidBounds(f"{name} requires positive bounds")
                lo, hi = math.log(lo), math.log(hi)
            self.lo[k], self.hi[k] = lo, hi

    def to_unconstrained(self, params: np.ndarray) -> np.ndarray:
        u = np.where(self.log, np.log(np.maximum(params, 1e-300)), params)
        frac = np.clip((u - self.lo) / (self.hi - self.lo), 1e-12, 1.0 - 1e-12)
        return np.log(frac / (1.0 - frac))

    def to_bounded(self, x: np.ndarray) -> np.ndarray:
        frac = 1.0 / (1.0 + np.exp(-np.clip(x, -500, 500)))
        u = self.lo + frac * (self.hi - self.lo)
        out = u.copy()
        out[self.log] = np.exp(u[self.log])
        return out


def _params_to_vector(result: FitResult) -> np.ndarray:
    ni = result.nonideal
    return np.array([
        result.cavity.kappa_c0, result.cavity.kappa_c1,
        result.ensemble.kappa_s, result.ensemble.kappa_th,
        result.ensemble.g_eff,
        ni.o_r, ni.o_i, ni.A, ni.b, ni.psi, ni.tau,
        ni.omega_s_off, ni.omega_d_off,
    ])


def _vector_to_params(vec: np.ndarray, template: FitResult,
                      omega_d_mean: float) -> tuple[CavityParams, EnsembleParams,
                                                    NonIdealityParams]:
    kappa_c0, kappa_c1, kappa_s, kappa_th, g_eff = vec[:5]
    cav = CavityParams(omega_c=template.cavity.omega_c,
                       kappa_c0=kappa_c0, kappa_c1=kappa_c1)
    g_s = template.ensemble.g_s
    ens = EnsembleParams(g_s=g_s, N=(g_eff / g_s) ** 2, kappa_s=kappa_s,
                         kappa_th=kappa_th, omega_s=template.ensemble.omega_s)
    with warnings.catch_warnings():
        # trial points may transiently exceed the "small auxiliary" heuristic
        warnings.simplefilter("ignore", UserWarning)
        ni = NonIdealityParams(o_r=vec[5], o_i=vec[6], A=vec[7], b=vec[8],
                               psi=vec[9], tau=vec[10], omega_s_off=vec[11],
                               omega_d_off=vec[12], omega_d_mean=omega_d_mean)
    return cav, ens, ni


def objective_l1(model: np.ndarray, data: np.ndarray) -> float:
    """Sum of |Re| + |Im| of the complex residuals."""
    resid = model - data
    return float(np.sum(np.abs(resid.real)) + np.sum(np.abs(resid.imag)))


def fit_crossing(data: ComplexGrid2D, initial: FitResult,
                 bounds: dict | None = None,
                 options: FitOptions | None = None) -> FitResult:
    """Fit the non-ideality model to a (normalized) reflection grid.

    Returns the best parameters found; converged=False flags a fit that hit
    the evaluation budget without the restart loop stalling.
    """
    options = options or FitOptions()
    bounds = bounds if bounds is not None else default_bounds(initial)
    transform = _BoundTransform(bounds)
    spec = data.spec
    omega_d_mean = spec.omega_d_mean

    unknown = set(options.fixed) - set(PARAM_NAMES)
    if unknown:
        raise InvalidBounds(f"unknown fixed parameter(s): {sorted(unknown)}")
    free = np.array([name not in options.fixed for name in PARAM_NAMES])
    if not free.any():
        raise InvalidBounds("at least one parameter must be free")

    full0 = transform.to_unconstrained(_params_to_vector(initial))
    x0 = full0[free]
    evals = 0

    def fun(x):
        nonlocal evals
        evals += 1
        full = full0.copy()
        full[free] = x
        cav, ens, ni = _vector_to_params(transform.to_bounded(full), initial,
                                         omega_d_mean)
        return objective_l1(evaluate_model_grid(cav, ens, ni, spec), data.values)

    rng = np.random.default_rng(options.seed)
    starts = [x0]
    for _ in range(max(options.multi_starts - 1, 0)):
        starts.append(x0 + options.jitter * rng.standard_normal(x0.shape))

    best_x, best_f = x0, fun(x0)
    iterations = 0
    converged = False
    for start in starts:
        x, f = start, fun(start)
        for _ in range(options.max_restarts):
            budget = options.max_evaluations - evals
            if budget <= 0:
                break
            res = minimize(fun, x, method="Nelder-Mead",
                           options={"maxfev": budget, "xatol": 1e-10,
                                    "fatol": options.objective_tol,
                                    "adaptive": True})
            iterations += res.nit
            improvement = f - res.fun
            x, f = res.x, res.fun
            if improvement < options.objective_tol * max(1.0, abs(f)):
                converged = True
                break
        if f < best_f:
            best_x, best_f = x, f

    best_full = full0.copy()
    best_full[free] = best_x
    cav, ens, ni = _vector_to_params(transform.to_bounded(best_full), initial,
                                     omega_d_mean)
    return FitResult(cavity=cav, ensemble=ens, nonideal=ni,
                     objective_value=best_f, iterations=iterations,
                     converged=converged)


def relaxation_times(ens: EnsembleParams) -> tuple[float, float]:
    """(T1, T2) in seconds from kappa_th = 1/T1 and kappa_s = 2/T2."""
    if ens.kappa_th <= 0 or ens.kappa_s <= 0:
        raise ZeroRate("relaxation rates must be positive")
    return 1.0 / ens.kappa_th, 2.0 / ens.kappa_s


# ---------------------------------------------------------------------------
# serialization

def write_grid_csv(path, grid: ComplexGrid2D) -> None:
    """Row-major in omega_s; columns omega_s_hz, omega_d_hz, re, im."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["omega_s_hz", "omega_d_hz", "re", "im"])
        for i, ws in enumerate(grid.spec.omega_s_values):
            for j, wd in enumerate(grid.spec.omega_d_values):
                v = grid.values[i, j]
                writer.writerow([repr(float(ws) / _TWO_PI), repr(float(wd) / _TWO_PI),
                                 repr(float(v.real)), repr(float(v.imag))])


def read_grid_csv(path, drive_power: float) -> ComplexGrid2D:
    """Inverse of write_grid_csv; drive power is not stored in the CSV."""
    ws_list, wd_list, re_list, im_list = [], [], [], []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            ws_list.append(float(row["omega_s_hz"]) * _TWO_PI)
            wd_list.append(float(row["omega_d_hz"]) * _TWO_PI)
            re_list.append(float(row["re"]))
            im_list.append(float(row["im"]))
    ws = np.unique(np.asarray(ws_list))
    wd = np.unique(np.asarray(wd_list))
    values = (np.asarray(re_list) + 1j * np.asarray(im_list)).reshape(
        ws.size, wd.size)
    spec = GridSpec(omega_s_values=ws, omega_d_values=wd,
                    drive_power=drive_power)
    return ComplexGrid2D(spec=spec, values=values)


def fit_result_to_dict(result: FitResult) -> dict:
    """JSON-ready dictionary with explicit units in the key names."""
    ni = result.nonideal
    return {
        "omega_c_rad_per_s": result.cavity.omega_c,
        "kappa_c_rad_per_s": result.cavity.kappa_c,
        "kappa_c0_rad_per_s": result.cavity.kappa_c0,
        "kappa_c1_rad_per_s": result.cavity.kappa_c1,
        "kappa_s_rad_per_s": result.ensemble.kappa_s,
        "kappa_th_rad_per_s": result.ensemble.kappa_th,
        "g_s_rad_per_s": result.ensemble.g_s,
        "g_eff_rad_per_s": result.ensemble.g_eff,
        "n_polarized_spins": result.ensemble.N,
        "o_r": ni.o_r,
        "o_i": ni.o_i,
        "amplitude_correction": ni.A,
        "asymmetry_slope_s": ni.b,
        "phase_offset_rad": ni.psi,
        "delay_s": ni.tau,
        "omega_s_off_rad_per_s": ni.omega_s_off,
        "omega_d_off_rad_per_s": ni.omega_d_off,
        "objective_value": result.objective_value,
        "iterations": result.iterations,
        "converged": result.converged,
    }


def write_fit_json(path, result: FitResult) -> None:
    with open(path, "w") as fh:
        json.dump(fit_result_to_dict(result), fh, indent=2, sort_keys=True)
        fh.write("\n")
