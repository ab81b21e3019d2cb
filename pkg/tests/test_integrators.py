import math

import numpy as np
import pytest

from kcocontact import HAMILTONIAN, ScalarField, WaveConfig, integrate_k1, integrate_wave
from kcocontact.errors import BlowUpError, ConfigError, GridError
from kcocontact.hamiltonian import HamiltonianSystem
from kcocontact.integrators import (
    FIXED,
    convergence_study,
    k1_diagnostics,
    l2_error,
    load_k1_csv,
    load_wave_csv,
    observed_orders,
    step_count,
    wave_diagnostics,
    wave_time_step,
)

from support import K1


def ham(text, params=None):
    return HamiltonianSystem(ScalarField.from_expression(text, K1, HAMILTONIAN, params))


def underdamped(t, w, g, q0, p0):
    """Solution of q'' + g q' + w² q = 0 with q(0) = q0, q'(0) = p0."""
    wd = math.sqrt(w * w - g * g / 4)
    c2 = (p0 + g * q0 / 2) / wd
    return np.exp(-g * t / 2) * (q0 * np.cos(wd * t) + c2 * np.sin(wd * t))


def test_step_count_fits_interval():
    assert step_count(1.0, 0.1) == 10
    assert step_count(1.0, 0.3) == 4


def test_harmonic_oscillator_matches_sine():
    traj = integrate_k1(ham("0.5*p**2 + 0.5*q**2"), [0.0, 0.0, 1.0, 0.0], 10.0, 1e-3)
    assert traj.times[-1] == pytest.approx(10.0, abs=1e-12)
    assert np.max(np.abs(traj.q[:, 0] - np.sin(traj.times))) <= 1e-6


def test_damped_oscillator_matches_closed_form():
    w, g = 1.7, 0.4
    traj = integrate_k1(ham("0.5*p**2 + 0.5*w**2*q**2 + g*z", {"w": w, "g": g}), [0, 1.0, 0.5, 0], 10.0, 1e-3)
    # with this h, p = q'
    assert np.max(np.abs(traj.q[:, 0] - underdamped(traj.times, w, g, 1.0, 0.5))) <= 1e-5


def test_k1_z_rate_residual_is_small():
    hsys = ham("0.5*p**2 + 0.5*q**2 + 0.3*z")
    traj = integrate_k1(hsys, [0, 1.0, 0.0, 0.0], 5.0, 1e-2)
    diag = k1_diagnostics(hsys, traj)
    assert np.nanmax(np.abs(diag["z_residual"])) <= 1e-6


def test_rk4_temporal_order():
    hsys = ham("0.5*p**2 + 0.5*q**2 + 0.3*z")

    def solve(dt):
        traj = integrate_k1(hsys, [0, 1.0, 0.0, 0.0], 4.0, dt)
        return dt, {"q": np.max(np.abs(traj.q[:, 0] - underdamped(traj.times, 1.0, 0.3, 1.0, 0.0)))}

    table = convergence_study(solve, [0.2, 0.1, 0.05])
    assert not table.flags
    assert all(abs(o - 4) <= 0.5 for o in table.orders["q"])


def test_convergence_needs_three_levels_and_flags_growth():
    with pytest.raises(GridError):
        convergence_study(lambda h: (h, {"e": h}), [0.1, 0.05])
    orders, flags = observed_orders([0.4, 0.2, 0.1], {"e": [1.0, 0.25, 0.5]})
    assert orders["e"][0] == pytest.approx(2.0)
    assert len(flags) == 1


def test_blow_up_reports_time():
    with pytest.raises(BlowUpError) as info:
        integrate_k1(ham("0.5*p**2 - q**4"), [0, 2.0, 0.0, 0.0], 10.0, 1e-2)
    assert 0 < info.value.time < 10


def test_k1_csv_roundtrip(tmp_path):
    traj = integrate_k1(ham("0.5*p**2 + 0.5*q**2"), [0, 0, 1, 0], 0.5, 0.1)
    path = tmp_path / "traj.csv"
    traj.write_csv(path)
    back = load_k1_csv(path, K1)
    assert np.array_equal(back.states, traj.states)
    assert np.array_equal(back.times, traj.times)


def traveling(nx, T=1.0, **kw):
    return WaveConfig(strain="0.5*ux**2", nx=nx, T=T, u0="sin(x)", ut0="-cos(x)", **kw)


def test_traveling_wave_spatial_order():
    errs = [l2_error(integrate_wave(traveling(nx)), "sin(x - t)") for nx in (32, 64, 128)]
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    assert all(abs(o - 2) <= 0.3 for o in orders), (errs, orders)


def test_conservative_energy_drift():
    traj = integrate_wave(WaveConfig(strain="0.5*ux**2", potential="0.5*u**2", nx=64, T=10.0,
                                     u0="sin(x)", ut0="0.5*cos(2*x)"))
    e = traj.energy
    assert np.max(np.abs(e - e[0])) / e[0] <= 1e-4


def test_damped_energy_balance_and_monotone():
    cfg = WaveConfig(strain="0.5*ux**2", damping="0.2", nx=64, T=2.0, u0="sin(x)", ut0="0")
    traj = integrate_wave(cfg)
    diag = wave_diagnostics(traj)
    assert np.max(np.abs(diag["energy_balance"])) / traj.energy[0] <= 1e-3
    assert np.all(np.diff(traj.energy) <= 0)
    assert np.all(traj.zx == 0)


def test_z_rate_residual_second_order_in_time():
    res = []
    for dt in (0.02, 0.01, 0.005):
        cfg = WaveConfig(strain="0.5*ux**2", potential="sin(t)*u", damping="0.1", nx=32, T=0.4, dt=dt,
                         u0="sin(x)", ut0="cos(x)")
        res.append(np.nanmax(wave_diagnostics(integrate_wave(cfg))["z_residual"]))
    orders = [math.log2(res[i] / res[i + 1]) for i in range(2)]
    assert all(o >= 1.7 for o in orders), (res, orders)


def test_fixed_ends_are_pinned():
    cfg = WaveConfig(strain="0.5*ux**2", nx=33, x1=math.pi, T=1.0, boundary=FIXED,
                     u0="sin(x)", ut0="0")
    traj = integrate_wave(cfg)
    assert np.all(traj.u[:, 0] == traj.u[0, 0])
    assert np.all(traj.u[:, -1] == traj.u[0, -1])
    # standing wave: u = sin(x) cos(t)
    assert np.max(np.abs(traj.u[-1] - np.sin(traj.x) * math.cos(1.0))) <= 1e-2


def test_cfl_and_convexity_are_enforced():
    with pytest.raises(ConfigError):
        wave_time_step(traveling(64, dt=1.0))
    with pytest.raises(ConfigError):
        wave_time_step(WaveConfig(strain="-0.5*ux**2", u0="sin(x)"))
    with pytest.raises(ConfigError):
        WaveConfig(strain="0.5*ux**2", nx=4)
    with pytest.raises(ConfigError):
        WaveConfig(strain="0.5*ux**2 + u")
    dt, steps = wave_time_step(traveling(64, T=1.0))
    assert dt * steps == pytest.approx(1.0, abs=1e-12)
    assert dt <= 0.5 * (2 * math.pi / 64)


def test_wave_csv_roundtrip(tmp_path):
    cfg = traveling(16, T=0.2, save_every=2)
    traj = integrate_wave(cfg)
    path = tmp_path / "wave.csv"
    traj.write_csv(path)
    back = load_wave_csv(path, cfg)
    for name in ("times", "u", "ut", "ux", "zt", "energy", "dissipation"):
        assert np.array_equal(getattr(back, name), getattr(traj, name)), name
