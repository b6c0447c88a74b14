"""Strict JSON run configuration with explicit unit suffixes.

Every physical key carries its unit in the name (d_ghz, power_dbm,
bias_b_gauss, ...) and is converted once, at parse time, to the internal
convention: angular frequencies and rates in rad/s, fields in tesla, powers
in watts.  Unknown keys are hard errors; a known quantity spelled with the
wrong unit suffix raises UnitMismatch naming the expected key.  Omitted keys
and blocks fall back to the built-in defaults.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .calibration import CoilGeometry
from .cavity import (CavityParams, DriveParams, EnsembleParams,
                     NonIdealityParams, dbm_to_watts, single_spin_coupling)
from .errors import ParseError, UnitMismatch, UnknownKey
from .magnetometry import TestFieldSpec
from .spins import SpinSystem
from .thermal import (MaterialParams, boltzmann_populations,
                      polarized_spin_count)

_TWO_PI = 2.0 * math.pi

# key -> (converter to internal units, default in key units)
_SCHEMA = {
    "spin": {
        "d_ghz": (lambda v: _TWO_PI * v * 1e9, -5.745),
        "g_par": (float, 2.0),
        "g_perp": (float, 2.0),
    },
    "material": {
        "v_cav_mm3": (lambda v: v * 1e-9, 52.2),
        "v_cell_nm3": (lambda v: v * 1e-27, 0.2548),
        "alpha_cr": (float, 0.0005),
        "m_al2o3_g_per_mol": (float, 101.96),
        "m_cr2o3_g_per_mol": (float, 151.99),
        "n_cell": (int, 12),
        "zeta": (float, 0.69),
        "temperature_k": (float, 293.0),
    },
    "cavity": {
        "omega_c_ghz": (lambda v: _TWO_PI * v * 1e9, 11.4),
        "kappa_c0_khz": (lambda v: _TWO_PI * v * 1e3, 330.0),
        "kappa_c1_khz": (lambda v: _TWO_PI * v * 1e3, 330.0),
    },
    "ensemble": {
        # null -> derive from cavity geometry / thermal polarization
        "g_s_hz": (lambda v: None if v is None else _TWO_PI * v, None),
        "n_spins": (lambda v: None if v is None else float(v), None),
        "kappa_s_mhz": (lambda v: _TWO_PI * v * 1e6, 42.0),
        "kappa_th_khz": (lambda v: _TWO_PI * v * 1e3, 120.0),
        "omega_s_ghz": (lambda v: _TWO_PI * v * 1e9, 11.4),
    },
    "drive": {
        "omega_d_ghz": (lambda v: _TWO_PI * v * 1e9, 11.4),
        "power_dbm": (dbm_to_watts, 11.0),
    },
    "nonideal": {
        "o_r": (float, 0.0),
        "o_i": (float, 0.0),
        "amplitude_a": (float, 0.0),
        "slope_b_per_hz": (lambda v: v / _TWO_PI, 0.0),
        "psi_rad": (float, 0.0),
        "tau_s": (float, 0.0),
        "omega_s_off_mhz": (lambda v: _TWO_PI * v * 1e6, 0.0),
        "omega_d_off_mhz": (lambda v: _TWO_PI * v * 1e6, 0.0),
    },
    "grid": {
        "omega_s_span_mhz": (lambda v: _TWO_PI * v * 1e6, 100.0),
        "omega_d_span_mhz": (lambda v: _TWO_PI * v * 1e6, 10.0),
        "n_omega_s": (int, 50),
        "n_omega_d": (int, 50),
        "noise_sigma": (float, 0.0),
    },
    "sweep": {
        "bias_b_gauss": (lambda v: v * 1e-4, 31.0),
        "b_span_gauss": (lambda v: v * 1e-4, 4.0),
        "n_points": (int, 201),
        "theta_deg": (float, 0.0),
        "b_max_gauss": (lambda v: v * 1e-4, 2000.0),
        "chain_gain_db": (float, 21.0),
        "test_amplitude_nt": (lambda v: v * 1e-9, 242.0),
        "test_frequency_hz": (lambda v: _TWO_PI * v, 10.0),
        "fs_hz": (float, 50e3),
        "duration_s": (float, 1.0),
        "noise_floor_nv_per_rthz": (lambda v: v * 1e-9, 26.0),
    },
    "noise": {
        "phase_noise_csv": (lambda v: v, None),
        "amplitude_noise_csv": (lambda v: v, None),
        "p0_v2_per_hz": (float, 0.0),
        "e_th_nv_per_rthz": (lambda v: v * 1e-9, 13.0),
        "phi_measured_dbc_per_hz": (float, -129.5),
        "ell_db": (float, -6.0),
    },
    "calibration": {
        "n_turns": (int, 8),
        "coil_radius_mm": (lambda v: v * 1e-3, 15.68),
        "coil_distance_mm": (lambda v: v * 1e-3, 30.0),
        "current_ma": (lambda v: v * 1e-3, 6.9),
    },
    "run": {
        "output_dir": (lambda v: v, "."),
        "master_seed": (int, 0),
    },
}

_UNIT_SUFFIXES = ("_ghz", "_mhz", "_khz", "_hz", "_gauss", "_tesla", "_nt",
                  "_dbm", "_db", "_rad", "_s", "_mm", "_ma", "_mm3", "_nm3",
                  "_g_per_mol", "_nv_per_rthz", "_v2_per_hz", "_dbc_per_hz",
                  "_per_hz", "_k", "_deg")


def _strip_unit(key: str) -> str:
    for suffix in sorted(_UNIT_SUFFIXES, key=len, reverse=True):
        if key.endswith(suffix):
            return key[: -len(suffix)]
    return key


@dataclass(frozen=True)
class RunConfig:
    """Fully-validated configuration in internal units (rad/s, T, W)."""

    values: dict = field(repr=False)

    def __getitem__(self, block: str) -> dict:
        return self.values[block]

    # ----- domain-object views ------------------------------------------
    def spin_system(self) -> SpinSystem:
        s = self["spin"]
        return SpinSystem(D=s["d_ghz"], g_par=s["g_par"], g_perp=s["g_perp"])

    def material(self) -> MaterialParams:
        m = self["material"]
        return MaterialParams(V_cav=m["v_cav_mm3"], V_cell=m["v_cell_nm3"],
                              alpha_Cr=m["alpha_cr"],
                              m_Al2O3=m["m_al2o3_g_per_mol"],
                              m_Cr2O3=m["m_cr2o3_g_per_mol"],
                              N_cell=m["n_cell"], zeta=m["zeta"])

    def temperature(self) -> float:
        return self["material"]["temperature_k"]

    def cavity(self) -> CavityParams:
        c = self["cavity"]
        return CavityParams(omega_c=c["omega_c_ghz"],
                            kappa_c0=c["kappa_c0_khz"],
                            kappa_c1=c["kappa_c1_khz"])

    def ensemble(self) -> EnsembleParams:
        e = self["ensemble"]
        g_s = e["g_s_hz"]
        if g_s is None:
            g_s = single_spin_coupling(self["material"]["v_cav_mm3"],
                                       self["cavity"]["omega_c_ghz"])
        n = e["n_spins"]
        if n is None:
            state = boltzmann_populations(self.spin_system(),
                                          self.temperature())
            n = polarized_spin_count(self.material(), state)
        return EnsembleParams(g_s=g_s, N=n, kappa_s=e["kappa_s_mhz"],
                              kappa_th=e["kappa_th_khz"],
                              omega_s=e["omega_s_ghz"])

    def drive(self) -> DriveParams:
        d = self["drive"]
        return DriveParams(omega_d=d["omega_d_ghz"], power=d["power_dbm"])

    def nonideal(self) -> NonIdealityParams:
        n = self["nonideal"]
        return NonIdealityParams(o_r=n["o_r"], o_i=n["o_i"],
                                 A=n["amplitude_a"], b=n["slope_b_per_hz"],
                                 psi=n["psi_rad"], tau=n["tau_s"],
                                 omega_s_off=n["omega_s_off_mhz"],
                                 omega_d_off=n["omega_d_off_mhz"],
                                 omega_d_mean=self["drive"]["omega_d_ghz"])

    def coil(self) -> CoilGeometry:
        c = self["calibration"]
        return CoilGeometry(n_turns=c["n_turns"], radius=c["coil_radius_mm"],
                            distance=c["coil_distance_mm"])

    def test_field(self) -> TestFieldSpec:
        s = self["sweep"]
        return TestFieldSpec(amplitude_rms=s["test_amplitude_nt"],
                             frequency=s["test_frequency_hz"])


def _convert_block(block_name: str, raw: dict) -> dict:
    schema = _SCHEMA[block_name]
    stems = {_strip_unit(key): key for key in schema}
    out = {}
    for key, value in raw.items():
        if key not in schema:
            stem = _strip_unit(key)
            if stem in stems:
                raise UnitMismatch(
                    f"{block_name}.{key}: expected key {stems[stem]!r}")
            raise UnknownKey(f"unknown key {block_name}.{key}")
        converter, _ = schema[key]
        try:
            out[key] = converter(value)
        except (TypeError, ValueError) as exc:
            raise UnitMismatch(f"{block_name}.{key}: {exc}") from exc
    for key, (converter, default) in schema.items():
        if key not in out:
            out[key] = converter(default) if default is not None else None
    return out


def parse_config(text: str) -> RunConfig:
    """Parse and validate a JSON configuration document."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"line {exc.lineno} column {exc.colno}: {exc.msg}") \
            from exc
    if not isinstance(raw, dict):
        raise ParseError("top-level JSON value must be an object")
    for block_name, block in raw.items():
        if block_name not in _SCHEMA:
            raise UnknownKey(f"unknown block {block_name!r}")
        if not isinstance(block, dict):
            raise ParseError(f"block {block_name!r} must be a JSON object")
    values = {name: _convert_block(name, raw.get(name, {}))
              for name in _SCHEMA}
    return RunConfig(values=values)


def default_config() -> RunConfig:
    return parse_config("{}")


# leaf keys are unique across blocks so CLI flags can map one-for-one
FLAT_KEYS: dict = {}
for _block, _keys in _SCHEMA.items():
    for _key in _keys:
        if _key in FLAT_KEYS:
            raise AssertionError(f"duplicate config key {_key}")
        FLAT_KEYS[_key] = _block


def flag_name(block: str, key: str) -> str:
    """CLI flag spelled from a config key: grid.n_omega_s -> --n-omega-s."""
    return "--" + key.replace("_", "-")


def apply_overrides(raw_config: dict, overrides: dict) -> dict:
    """Merge {(block, key): raw value} CLI overrides into a raw JSON dict."""
    merged = {name: dict(raw_config.get(name, {})) for name in
              set(raw_config) | {b for b, _ in overrides}}
    for (block, key), value in overrides.items():
        merged.setdefault(block, {})[key] = value
    return merged
