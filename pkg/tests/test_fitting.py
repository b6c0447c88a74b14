import json
import math
from dataclasses import replace

import numpy as np
import pytest

from rubymag.cavity import (CavityParams, EnsembleParams, NonIdealityParams,
                            dbm_to_watts, kappa_th_threshold_power,
                            single_spin_coupling, watts_to_dbm)
from rubymag.errors import AllZeroBorder, InvalidBounds, ZeroRate
from rubymag.fitting import (ComplexGrid2D, FitOptions, FitResult, GridSpec,
                             dip_trajectory, evaluate_model_grid, fit_crossing,
                             fit_result_to_dict, normalize_grid, objective_l1,
                             read_grid_csv, relaxation_times,
                             simulate_crossing, write_fit_json, write_grid_csv)

TWO_PI = 2.0 * math.pi
G_S = single_spin_coupling(52.2e-9, TWO_PI * 11.4e9)

# target parameter set: g_eff = 2 pi x 3.5 MHz, kappa_c = 2 pi x 660 kHz,
# kappa_s = 2 pi x 42 MHz, kappa_th = 2 pi x 120 kHz
CAV = CavityParams()
ENS = EnsembleParams(g_s=G_S, N=(TWO_PI * 3.5e6 / G_S) ** 2)
# fitted auxiliary values; tau and b nonzero so the overall-scale direction
# (kappa_c1 versus o_r, o_i, A) stays identifiable
NI = NonIdealityParams(o_r=-0.008, o_i=0.12, A=0.003, b=1e-9, psi=0.14,
                       tau=-1.2e-8, omega_s_off=-7.3e6, omega_d_off=-5.6e5)


def wide_spec(n_s=50, n_d=50, power_dbm=0.0):
    """omega_s swept +-50 MHz across the cavity, omega_d +-5 MHz."""
    return GridSpec(
        omega_s_values=np.linspace(TWO_PI * 11.35e9, TWO_PI * 11.45e9, n_s),
        omega_d_values=np.linspace(TWO_PI * 11.395e9, TWO_PI * 11.405e9, n_d),
        drive_power=dbm_to_watts(power_dbm))


def guess_from(cav, ens, ni, spec, rng=None, rel=0.2):
    """Initial FitResult with physical rates perturbed +-rel."""
    p = (lambda x: x) if rng is None else (lambda x: x * rng.uniform(1 - rel,
                                                                     1 + rel))
    return FitResult(
        cavity=CavityParams(omega_c=cav.omega_c, kappa_c0=p(cav.kappa_c0),
                            kappa_c1=p(cav.kappa_c1)),
        ensemble=EnsembleParams(g_s=ens.g_s, N=(p(ens.g_eff) / ens.g_s) ** 2,
                                kappa_s=p(ens.kappa_s),
                                kappa_th=p(ens.kappa_th), omega_s=ens.omega_s),
        nonideal=replace(ni, omega_d_mean=spec.omega_d_mean),
        objective_value=math.inf, iterations=0, converged=False)


def physical_errors(res, cav, ens):
    return {
        "kappa_c0": res.cavity.kappa_c0 / cav.kappa_c0 - 1,
        "kappa_c1": res.cavity.kappa_c1 / cav.kappa_c1 - 1,
        "kappa_s": res.ensemble.kappa_s / ens.kappa_s - 1,
        "kappa_th": res.ensemble.kappa_th / ens.kappa_th - 1,
        "g_eff": res.ensemble.g_eff / ens.g_eff - 1,
    }


# ---------------------------------------------------------------------------
# types


def test_grid_spec_validation():
    with pytest.raises(ValueError):
        GridSpec(omega_s_values=np.array([1.0]),
                 omega_d_values=np.array([1.0, 2.0]), drive_power=1e-3)
    with pytest.raises(ValueError):
        GridSpec(omega_s_values=np.array([2.0, 1.0]),
                 omega_d_values=np.array([1.0, 2.0]), drive_power=1e-3)
    with pytest.raises(ValueError):
        GridSpec(omega_s_values=np.array([1.0, 1.0]),
                 omega_d_values=np.array([1.0, 2.0]), drive_power=1e-3)


def test_grid_shape_must_match_spec():
    spec = wide_spec(4, 3)
    with pytest.raises(ValueError):
        ComplexGrid2D(spec=spec, values=np.zeros((3, 4), dtype=complex))
    grid = ComplexGrid2D(spec=spec, values=np.zeros((4, 3), dtype=complex))
    assert grid.values.shape == (4, 3)


# ---------------------------------------------------------------------------
# simulate_crossing


def test_simulate_deterministic_and_exact_at_zero_noise():
    spec = wide_spec(12, 10)
    a = simulate_crossing(CAV, ENS, NI, spec, 0.02, seed=5)
    b = simulate_crossing(CAV, ENS, NI, spec, 0.02, seed=5)
    assert np.array_equal(a.values, b.values)
    clean = simulate_crossing(CAV, ENS, NI, spec, 0.0, seed=5)
    ni = replace(NI, omega_d_mean=spec.omega_d_mean)
    assert np.allclose(clean.values, evaluate_model_grid(CAV, ENS, ni, spec),
                       rtol=0, atol=0)
    with pytest.raises(ValueError):
        simulate_crossing(CAV, ENS, NI, spec, -0.1, seed=5)


def test_simulate_zero_coupling_rows_identical():
    spec = wide_spec(8, 20)
    empty = EnsembleParams(g_s=G_S, N=0.0)
    grid = simulate_crossing(CAV, empty, NI, spec, 0.0, seed=0)
    for row in grid.values[1:]:
        assert np.allclose(row, grid.values[0], rtol=0, atol=0)


def test_bare_cavity_dip_sits_at_cavity_resonance():
    spec = wide_spec(6, 101)
    empty = EnsembleParams(g_s=G_S, N=0.0)
    ident = NonIdealityParams(omega_d_mean=spec.omega_d_mean)
    grid = simulate_crossing(CAV, empty, ident, spec, 0.0, seed=0)
    dips = dip_trajectory(grid)
    step = spec.omega_d_values[1] - spec.omega_d_values[0]
    assert np.all(np.abs(dips - CAV.omega_c) < step)


# ---------------------------------------------------------------------------
# normalize_grid


def test_normalize_constant_grid():
    spec = wide_spec(5, 5)
    c = 3.0 * np.exp(0.4j)
    grid = ComplexGrid2D(spec=spec, values=np.full((5, 5), c))
    out = normalize_grid(grid)
    assert np.allclose(np.abs(out.values), 1.0, atol=1e-12)
    assert np.allclose(np.angle(out.values), 0.4, atol=1e-12)


def test_normalize_scale_invariance():
    spec = wide_spec(10, 10)
    grid = simulate_crossing(CAV, ENS, NI, spec, 0.0, seed=0)
    scaled = ComplexGrid2D(spec=spec, values=5.0 * grid.values)
    assert np.allclose(normalize_grid(scaled).values,
                       normalize_grid(grid).values, atol=1e-12)


def test_normalize_all_zero_border_rejected():
    spec = wide_spec(5, 5)
    vals = np.zeros((5, 5), dtype=complex)
    vals[2, 2] = 1.0
    with pytest.raises(AllZeroBorder):
        normalize_grid(ComplexGrid2D(spec=spec, values=vals))


def test_normalized_border_near_unity():
    # far-detuned |Gamma| -> 1, so the border frame should sit near 1
    grid = simulate_crossing(CAV, ENS, NI, wide_spec(), 0.0, seed=0)
    out = normalize_grid(grid).values
    border = np.concatenate([out[0], out[-1], out[1:-1, 0], out[1:-1, -1]])
    assert np.median(np.abs(border)) == pytest.approx(1.0, abs=0.05)


# ---------------------------------------------------------------------------
# fit_crossing


def test_objective_at_truth_is_zero():
    spec = wide_spec(20, 20)
    grid = simulate_crossing(CAV, ENS, NI, spec, 0.0, seed=0)
    ni = replace(NI, omega_d_mean=spec.omega_d_mean)
    model = evaluate_model_grid(CAV, ENS, ni, spec)
    assert objective_l1(model, grid.values) < 1e-9


def test_fit_from_truth_stays_at_truth():
    spec = wide_spec(15, 15)
    grid = simulate_crossing(CAV, ENS, NI, spec, 0.0, seed=0)
    init = guess_from(CAV, ENS, NI, spec)
    res = fit_crossing(grid, init, options=FitOptions(max_evaluations=20000))
    assert res.objective_value < 1e-9
    for err in physical_errors(res, CAV, ENS).values():
        assert abs(err) < 1e-6


def test_fit_determinism():
    spec = wide_spec(12, 12)
    grid = simulate_crossing(CAV, ENS, NI, spec, 0.01, seed=1)
    rng = np.random.default_rng(0)
    init = guess_from(CAV, ENS, NI, spec, rng)
    opts = FitOptions(max_evaluations=4000, seed=11)
    a = fit_crossing(grid, init, options=opts)
    b = fit_crossing(grid, init, options=opts)
    assert a.objective_value == b.objective_value
    assert a.cavity == b.cavity
    assert a.ensemble == b.ensemble
    assert a.nonideal == b.nonideal


def test_fixed_parameters_are_pinned():
    spec = wide_spec(12, 12)
    grid = simulate_crossing(CAV, ENS, NI, spec, 0.0, seed=0)
    rng = np.random.default_rng(4)
    init = guess_from(CAV, ENS, NI, spec, rng)
    aux = ("o_r", "o_i", "A", "b", "psi", "tau", "omega_s_off", "omega_d_off")
    res = fit_crossing(grid, init, options=FitOptions(fixed=aux, seed=2))
    assert res.nonideal.o_i == pytest.approx(NI.o_i, rel=1e-12)
    assert res.nonideal.tau == pytest.approx(NI.tau, rel=1e-12)
    for err in physical_errors(res, CAV, ENS).values():
        assert abs(err) < 1e-6


def test_fixed_parameter_validation():
    spec = wide_spec(5, 5)
    grid = simulate_crossing(CAV, ENS, NI, spec, 0.0, seed=0)
    init = guess_from(CAV, ENS, NI, spec)
    with pytest.raises(InvalidBounds):
        fit_crossing(grid, init, options=FitOptions(fixed=("kapa_s",)))
    from rubymag.fitting import PARAM_NAMES
    with pytest.raises(InvalidBounds):
        fit_crossing(grid, init, options=FitOptions(fixed=tuple(PARAM_NAMES)))


def test_invalid_bounds_rejected():
    spec = wide_spec(5, 5)
    grid = simulate_crossing(CAV, ENS, NI, spec, 0.0, seed=0)
    init = guess_from(CAV, ENS, NI, spec)
    from rubymag.fitting import default_bounds
    bad = default_bounds(init)
    bad["kappa_s"] = (bad["kappa_s"][1], bad["kappa_s"][0])
    with pytest.raises(InvalidBounds):
        fit_crossing(grid, init, bounds=bad)
    bad = default_bounds(init)
    bad["kappa_th"] = (-1.0, 1.0)
    with pytest.raises(InvalidBounds):
        fit_crossing(grid, init, bounds=bad)


def test_round_trip_twenty_random_truths():
    """Noiseless fits recover physical params within 1%, auxiliaries to 5%."""
    rng = np.random.default_rng(7)
    spec = wide_spec(30, 30)
    for _ in range(20):
        u = lambda x: x * rng.uniform(0.5, 1.5)
        cav = CavityParams(kappa_c0=u(TWO_PI * 330e3),
                           kappa_c1=u(TWO_PI * 330e3))
        ens = EnsembleParams(g_s=G_S, N=(u(TWO_PI * 3.5e6) / G_S) ** 2,
                             kappa_s=u(TWO_PI * 42e6),
                             kappa_th=u(TWO_PI * 120e3))
        ni = NonIdealityParams(o_r=u(-0.008), o_i=u(0.12), A=u(0.003),
                               b=u(1e-9), psi=u(0.14), tau=u(-1.2e-8),
                               omega_s_off=u(-7.3e6), omega_d_off=u(-5.6e5))
        grid = simulate_crossing(cav, ens, ni, spec, 0.0, seed=0)
        init = guess_from(cav, ens, ni, spec, rng)
        res = fit_crossing(grid, init, options=FitOptions(seed=3))
        for name, err in physical_errors(res, cav, ens).items():
            assert abs(err) < 0.01, (name, err)
        got, want = res.nonideal, ni
        for name in ("o_r", "o_i", "A", "psi"):
            assert getattr(got, name) == pytest.approx(
                getattr(want, name), rel=0.05, abs=1e-4), name
        assert got.b == pytest.approx(want.b, rel=0.05)
        assert got.tau == pytest.approx(want.tau, rel=0.05)
        assert got.omega_s_off == pytest.approx(want.omega_s_off, rel=0.05)
        assert got.omega_d_off == pytest.approx(want.omega_d_off, rel=0.05)


def test_kappa_th_power_sensitivity():
    """kappa_th recovery degrades far below the threshold power.

    At the threshold drive the saturation term is strong enough that noisy
    grids still pin kappa_th to better than 20%; ten dB lower the estimate
    error blows past 50%.
    """
    p_th = kappa_th_threshold_power(1 / ENS.kappa_th, 2 / ENS.kappa_s, G_S,
                                    TWO_PI * 11.4e9, CAV.kappa_c)
    p_th_dbm = watts_to_dbm(p_th)

    def kth_error(power_dbm, seed):
        spec = wide_spec(power_dbm=power_dbm)
        grid = simulate_crossing(CAV, ENS, NI, spec, 0.05, seed=seed)
        init = guess_from(CAV, ENS, NI, spec)
        res = fit_crossing(normalize_grid(grid), init,
                           options=FitOptions(seed=3))
        return abs(res.ensemble.kappa_th / ENS.kappa_th - 1)

    for seed in (0, 1):
        assert kth_error(p_th_dbm, seed) < 0.20
    for seed in (5, 6):
        assert kth_error(p_th_dbm - 10.0, seed) > 0.50


# ---------------------------------------------------------------------------
# relaxation times


def test_relaxation_times_paper_values():
    t1, t2 = relaxation_times(ENS)
    assert t2 == pytest.approx(7.6e-9, rel=0.02)
    assert t1 == pytest.approx(1.3e-6, rel=0.03)


def test_relaxation_times_trivial_and_errors():
    ens = EnsembleParams(g_s=1.0, N=1.0, kappa_s=2.0, kappa_th=1.0)
    t1, t2 = relaxation_times(ens)
    assert t2 == 1.0
    assert t1 == 1.0
    with pytest.raises(ZeroRate):
        relaxation_times(EnsembleParams(g_s=1.0, N=1.0, kappa_s=0.0))


# ---------------------------------------------------------------------------
# serialization


def test_grid_csv_round_trip(tmp_path):
    spec = wide_spec(6, 5)
    grid = simulate_crossing(CAV, ENS, NI, spec, 0.01, seed=3)
    path = tmp_path / "grid.csv"
    write_grid_csv(path, grid)
    back = read_grid_csv(path, drive_power=spec.drive_power)
    assert np.allclose(back.spec.omega_s_values, spec.omega_s_values)
    assert np.allclose(back.spec.omega_d_values, spec.omega_d_values)
    assert np.allclose(back.values, grid.values, atol=1e-12)


def test_fit_json_units_in_keys(tmp_path):
    spec = wide_spec(5, 5)
    init = guess_from(CAV, ENS, NI, spec)
    d = fit_result_to_dict(init)
    assert d["kappa_s_rad_per_s"] == pytest.approx(ENS.kappa_s)
    assert d["kappa_c_rad_per_s"] == pytest.approx(CAV.kappa_c)
    path = tmp_path / "fit.json"
    write_fit_json(path, init)
    loaded = json.loads(path.read_text())
    assert loaded["g_eff_rad_per_s"] == pytest.approx(ENS.g_eff)
    assert loaded["delay_s"] == pytest.approx(NI.tau)
