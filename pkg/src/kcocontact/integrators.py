"""Time stepping for k = 1 mechanics and the k = 2 damped nonlinear wave.

Both integrators use classical four-stage Runge-Kutta. The wave solver is a
method of lines: centered differences in space, with the flux differenced
from the stress ``∂W/∂u_x`` at the nodes. Its action coordinate ``z^t`` is integrated
alongside ``u`` and ``u_t`` with ``z^x`` held at zero.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Coords, ScalarField, partials
from .dynamics import GridSection
from .errors import BlowUpError, ConfigError, GridError
from .expressions import Expr
from .jet import Jet
from .phase import LAGRANGIAN, PhasePoint, Signature, as_flat
from .tolerances import DEFAULTS

WAVE_SIGNATURE = Signature(2, 1)
PERIODIC = "periodic"
FIXED = "fixed-ends"
BOUNDARIES = (PERIODIC, FIXED)


def step_count(T, dt):
    """Steps of equal size not exceeding ``dt`` that land exactly on ``T``."""
    if not (T > 0 and dt > 0):
        raise ConfigError(f"need T > 0 and dt > 0, got T={T}, dt={dt}")
    return max(1, math.ceil(T / dt - 1e-9))


def rk4_step(rhs, t, y, dt):
    k1 = rhs(t, y)
    k2 = rhs(t + 0.5 * dt, y + 0.5 * dt * k1)
    k3 = rhs(t + 0.5 * dt, y + 0.5 * dt * k2)
    k4 = rhs(t + dt, y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


# k = 1 ---------------------------------------------------------------------------


def _gradient_kernel(h):
    """Fast value-and-gradient closure for one point of a small field."""
    sig = h.signature
    dim = sig.dim
    eye = np.eye(dim)

    def evaluate(vec):
        jets = [Jet(float(vec[a]), eye[a]) for a in range(dim)]
        out = h.rule(Coords(sig, h.side, jets))
        if isinstance(out, Jet):
            return float(out.val), out.grad
        return float(out), np.zeros(dim)

    return evaluate


def cocontact_k1_rhs(h):
    """Vector field on the state ``(t, q, p, z)`` for ``k = 1``."""
    sig = h.signature
    if sig.k != 1 or not sig.with_time:
        raise ConfigError("k = 1 integration needs a signature with k = 1 and a time slot")
    evaluate = _gradient_kernel(h)
    qs, ps, zi = sig.q_slice, sig.fiber_slice, sig.z_index(0)

    def rhs(t, y):
        # y[0] already equals t at every stage since t' = 1
        val, g = evaluate(y)
        p = y[ps]
        h_p = g[ps]
        out = np.empty(sig.dim)
        out[0] = 1.0
        out[qs] = h_p
        out[ps] = -(g[qs] + p * g[zi])
        out[zi] = p @ h_p - val
        return out

    return rhs


@dataclass
class K1Trajectory:
    """States ``(t, q, p, z)`` at every step."""

    signature: Signature
    times: np.ndarray
    states: np.ndarray
    dt: float

    def point(self, m):
        return PhasePoint.from_flat(self.signature, self.states[m])

    @property
    def q(self):
        return self.states[:, self.signature.q_slice]

    @property
    def p(self):
        return self.states[:, self.signature.fiber_slice]

    @property
    def z(self):
        return self.states[:, self.signature.z_index(0)]

    def section(self):
        sig = self.signature
        n, m = sig.n, self.times.size
        return GridSection(
            (self.times,),
            self.q.T.copy(),
            self.p.T.reshape(n, 1, m).copy(),
            self.z.reshape(1, m).copy(),
        )

    def header(self):
        n = self.signature.n
        return ["t"] + [f"q{i + 1}" for i in range(n)] + [f"p{i + 1}" for i in range(n)] + ["z"]

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.header())
            for row in self.states:
                w.writerow([f"{v:.17g}" for v in row])


def integrate_k1(hsys, x0, T, dt):
    """RK4 for ``q' = h_p``, ``p' = −(h_q + p h_z)``, ``z' = p h_p − h``, ``t' = 1``."""
    sig = hsys.signature
    rhs = cocontact_k1_rhs(hsys.h)
    y = np.array(as_flat(x0, sig), dtype=float)
    steps = step_count(T, dt)
    dt = T / steps
    t0 = y[0]
    states = np.empty((steps + 1, sig.dim))
    states[0] = y
    for m in range(steps):
        t = t0 + m * dt
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                y = rk4_step(rhs, t, y, dt)
        except (OverflowError, ZeroDivisionError):
            raise BlowUpError("k = 1 state overflowed", t) from None
        y[0] = t0 + (m + 1) * dt
        if not np.all(np.isfinite(y)):
            raise BlowUpError("k = 1 state became non-finite", t)
        states[m + 1] = y
    return K1Trajectory(sig, states[:, 0].copy(), states, dt)


def load_k1_csv(path, sig):
    """Read a trajectory written by :meth:`K1Trajectory.write_csv`."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] != sig.dim:
        raise ConfigError(f"{path} has {data.shape[1]} columns, expected {sig.dim}")
    times = data[:, 0].copy()
    dt = float(times[1] - times[0]) if times.size > 1 else 0.0
    return K1Trajectory(sig, times, data, dt)


def k1_diagnostics(hsys, traj):
    """Hamiltonian along the path and the residual of ``z' = p h_p − h``.

    The rate of ``z`` comes from a five-point fourth-order stencil, so the
    residual is reported on nodes two away from either end.
    """
    evaluate = _gradient_kernel(hsys.h)
    sig = traj.signature
    energy = np.empty(traj.times.size)
    z_rate = np.empty(traj.times.size)
    for m, y in enumerate(traj.states):
        val, g = evaluate(y)
        energy[m] = val
        z_rate[m] = y[sig.fiber_slice] @ g[sig.fiber_slice] - val
    z = traj.z
    dt = traj.dt
    resid = np.full(z.size, np.nan)
    if z.size >= 5:
        dz = (-z[4:] + 8 * z[3:-1] - 8 * z[1:-3] + z[:-4]) / (12 * dt)
        resid[2:-2] = dz - z_rate[2:-2]
    return {"time": traj.times, "energy": energy, "z_residual": resid}


# k = 2 wave --------------------------------------------------------------------


@dataclass
class WaveConfig:
    """Damped nonlinear wave ``u_tt = ∂x(∂W/∂u_x) − ∂V/∂u − c(x) u_t``.

    ``strain`` is the strain energy density ``W(t, u_x)``, ``potential`` the
    forcing potential ``V(t, u)`` and ``damping`` the coefficient ``c(x)``.
    These and the initial profiles (in ``x``) are catalogue expressions.
    """

    strain: str
    potential: str = "0"
    damping: str = "0"
    x0: float = 0.0
    x1: float = 2 * math.pi
    nx: int = 64
    boundary: str = PERIODIC
    T: float = 1.0
    dt: float | None = None
    u0: str = "0"
    ut0: str = "0"
    params: dict = field(default_factory=dict)
    save_every: int = 1
    cfl_safety: float = DEFAULTS.cfl_safety

    def __post_init__(self):
        if self.nx < 8:
            raise ConfigError(f"need at least 8 spatial nodes, got {self.nx}", "nx")
        if self.boundary not in BOUNDARIES:
            raise ConfigError(f"boundary must be one of {BOUNDARIES}", "boundary")
        if not self.x1 > self.x0:
            raise ConfigError("need x1 > x0", "x1")
        if self.dt is not None and not self.dt > 0:
            raise ConfigError("dt must be positive", "dt")
        if not self.T > 0:
            raise ConfigError("T must be positive", "T")
        if self.save_every < 1:
            raise ConfigError("save_every must be at least 1", "save_every")
        allowed = {
            "strain": {"t", "ux"},
            "potential": {"t", "u"},
            "damping": {"x"},
            "u0": {"x"},
            "ut0": {"x"},
        }
        for key, names in allowed.items():
            try:
                free = Expr(getattr(self, key)).free_names
            except Exception as exc:
                raise ConfigError(str(exc), key) from None
            extra = free - names - self.params.keys()
            if extra:
                raise ConfigError(f"{key} may only use {sorted(names)}, found {sorted(extra)}", key)

    def field_of(self, key):
        """``strain``, ``potential`` or ``damping`` as a field on wave phase points."""
        return ScalarField.from_expression(getattr(self, key), WAVE_SIGNATURE, LAGRANGIAN, self.params, label=key)

    def lagrangian_text(self):
        return f"0.5*ut**2 - ({self.strain}) - ({self.potential}) - ({self.damping})*zt"

    def lagrangian(self):
        return ScalarField.from_expression(self.lagrangian_text(), WAVE_SIGNATURE, LAGRANGIAN, self.params, "L")

    def grid(self):
        if self.boundary == PERIODIC:
            dx = (self.x1 - self.x0) / self.nx
            return self.x0 + dx * np.arange(self.nx), dx
        dx = (self.x1 - self.x0) / (self.nx - 1)
        return self.x0 + dx * np.arange(self.nx), dx

    def profile(self, key, x):
        env = {**self.params, "x": x}
        return np.broadcast_to(np.asarray(Expr(getattr(self, key)).evaluate(env), dtype=float), x.shape).copy()


class _WaveFields:
    """Grid evaluations of the three wave terms via single-direction jets."""

    UX, U, T, X = 4, 2, 0, 1

    def __init__(self, cfg, x):
        self.strain = cfg.field_of("strain")
        self.potential = cfg.field_of("potential")
        self.damping = partials(cfg.field_of("damping"), self._values(0.0, x, 0.0, 0.0), self.X)[0]
        self.x = x

    def _values(self, t, x, u, ux):
        return [t, x, u, 0.0, ux, 0.0, 0.0]

    def strain_ux(self, t, ux, order=1):
        return partials(self.strain, self._values(t, self.x, 0.0, ux), self.UX, order)

    def potential_u(self, t, u):
        return partials(self.potential, self._values(t, self.x, u, 0.0), self.U)


def _ddx(a, dx, boundary):
    if boundary == PERIODIC:
        return (np.roll(a, -1) - np.roll(a, 1)) / (2 * dx)
    d = np.empty_like(a)
    d[1:-1] = (a[2:] - a[:-2]) / (2 * dx)
    d[0] = (-3 * a[0] + 4 * a[1] - a[2]) / (2 * dx)
    d[-1] = (3 * a[-1] - 4 * a[-2] + a[-3]) / (2 * dx)
    return d


def _quadrature(a, dx, boundary):
    if boundary == PERIODIC:
        return dx * np.sum(a)
    return dx * (np.sum(a) - 0.5 * (a[0] + a[-1]))


def wave_speed_squared(cfg, x=None):
    """Second ``u_x`` derivative of the strain energy at the initial data."""
    if x is None:
        x, _ = cfg.grid()
    dx = cfg.grid()[1]
    ux = _ddx(cfg.profile("u0", x), dx, cfg.boundary)
    fields = _WaveFields(cfg, x)
    return fields.strain_ux(0.0, ux, order=2)[2]


def wave_time_step(cfg):
    """``(dt, steps)``: the configured or CFL-limited step, fitted to ``T``."""
    x, dx = cfg.grid()
    c2 = wave_speed_squared(cfg, x)
    if np.any(c2 <= 0):
        raise ConfigError(
            f"the strain energy must be strictly convex in u_x on the initial data "
            f"(min second derivative {np.min(c2):.3g})",
            "strain",
        )
    limit = cfg.cfl_safety * dx / float(np.sqrt(np.max(c2)))
    dt = limit if cfg.dt is None else cfg.dt
    if dt > limit * (1 + 1e-12):
        raise ConfigError(f"dt = {dt:.6g} violates the CFL bound {limit:.6g}", "dt")
    steps = step_count(cfg.T, dt)
    return cfg.T / steps, steps


@dataclass
class WaveTrajectory:
    """Saved snapshots: arrays are ``(snapshots, nx)``."""

    config: WaveConfig
    x: np.ndarray
    times: np.ndarray
    u: np.ndarray
    ut: np.ndarray
    ux: np.ndarray
    zt: np.ndarray
    zx: np.ndarray
    energy: np.ndarray
    dissipation: np.ndarray
    dt: float

    def section(self):
        """Grid section over ``(t, x)`` with fibers ``(u_t, u_x)`` and ``z = (z^t, 0)``."""
        return GridSection(
            (self.times, self.x),
            self.u[None],
            np.stack([self.ut, self.ux])[None],
            np.stack([self.zt, self.zx]),
        )

    def header(self):
        return ["t", "x", "u", "u_t", "u_x", "z_t", "energy", "dissipation"]

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.header())
            for m, t in enumerate(self.times):
                for j, xj in enumerate(self.x):
                    row = (t, xj, self.u[m, j], self.ut[m, j], self.ux[m, j], self.zt[m, j],
                           self.energy[m], self.dissipation[m])
                    w.writerow([f"{v:.17g}" for v in row])


def load_wave_csv(path, cfg):
    """Read a trajectory written by :meth:`WaveTrajectory.write_csv`."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] != 8:
        raise ConfigError(f"{path} has {data.shape[1]} columns, expected 8")
    x, _ = cfg.grid()
    nx = x.size
    if data.shape[0] % nx:
        raise ConfigError(f"{path} rows are not a whole number of {nx}-node snapshots")
    snaps = data.reshape(-1, nx, 8)
    times = snaps[:, 0, 0].copy()
    dt = float(times[1] - times[0]) if times.size > 1 else 0.0
    u, ut, ux, zt = (snaps[:, :, c].copy() for c in (2, 3, 4, 5))
    return WaveTrajectory(
        cfg, snaps[0, :, 1].copy(), times, u, ut, ux, zt, np.zeros_like(zt),
        snaps[:, 0, 6].copy(), snaps[:, 0, 7].copy(), dt,
    )


def integrate_wave(cfg):
    """Method of lines with RK4 in time; the state is ``(u, u_t, z^t, dissipation)``."""
    x, dx = cfg.grid()
    dt, steps = wave_time_step(cfg)
    fields = _WaveFields(cfg, x)
    damping = fields.damping
    nx = x.size
    bc = cfg.boundary

    def rhs(t, y):
        u, w, zt = y[:nx], y[nx:2 * nx], y[2 * nx:3 * nx]
        ux = _ddx(u, dx, bc)
        strain, stress = fields.strain_ux(t, ux)
        pot, force = fields.potential_u(t, u)
        flux = _ddx(stress, dx, bc)
        out = np.empty_like(y)
        out[:nx] = w
        out[nx:2 * nx] = flux - force - damping * w
        out[2 * nx:3 * nx] = 0.5 * w * w - strain - pot - damping * zt
        out[-1] = _quadrature(damping * w * w, dx, bc)
        if bc == FIXED:
            out[[0, nx - 1]] = 0.0
            out[[nx, 2 * nx - 1]] = 0.0
        return out

    y = np.concatenate([cfg.profile("u0", x), cfg.profile("ut0", x), np.zeros(nx), [0.0]])
    if bc == FIXED:
        y[[nx, 2 * nx - 1]] = 0.0

    saved = [0] + [m for m in range(1, steps + 1) if m % cfg.save_every == 0 or m == steps]
    snaps = np.empty((len(saved), y.size))
    times = np.empty(len(saved))
    snaps[0], times[0] = y, 0.0
    slot = 1
    for m in range(1, steps + 1):
        t = (m - 1) * dt
        y = rk4_step(rhs, t, y, dt)
        if not np.all(np.isfinite(y)):
            raise BlowUpError("wave state became non-finite", t)
        if slot < len(saved) and saved[slot] == m:
            snaps[slot], times[slot] = y, m * dt
            slot += 1

    u, ut, zt = snaps[:, :nx], snaps[:, nx:2 * nx], snaps[:, 2 * nx:3 * nx]
    ux = np.array([_ddx(row, dx, bc) for row in u])
    energy = np.empty(times.size)
    for m, t in enumerate(times):
        strain = fields.strain_ux(t, ux[m])[0]
        pot = fields.potential_u(t, u[m])[0]
        energy[m] = _quadrature(0.5 * ut[m] ** 2 + strain + pot, dx, bc)
    return WaveTrajectory(cfg, x, times, u, ut, ux, zt, np.zeros_like(zt), energy, snaps[:, -1].copy(), dt)


def wave_diagnostics(traj):
    """Energy, dissipation integral, energy balance and the ``z^t`` rate residual.

    The ``z^t`` residual compares a centered time difference of the saved
    snapshots with the Lagrangian density, at interior snapshots.
    """
    cfg = traj.config
    fields = _WaveFields(cfg, traj.x)
    dens = np.empty_like(traj.u)
    for m, t in enumerate(traj.times):
        strain = fields.strain_ux(t, traj.ux[m])[0]
        pot = fields.potential_u(t, traj.u[m])[0]
        dens[m] = 0.5 * traj.ut[m] ** 2 - strain - pot - fields.damping * traj.zt[m]
    z_resid = np.full(traj.times.size, np.nan)
    if traj.times.size >= 3:
        dt = np.diff(traj.times)
        h = dt[0]
        dz = (traj.zt[2:] - traj.zt[:-2]) / (2 * h)
        z_resid[1:-1] = np.max(np.abs(dz - dens[1:-1]), axis=1)
    balance = traj.energy - traj.energy[0] + traj.dissipation
    return {
        "time": traj.times,
        "energy": traj.energy,
        "dissipation": traj.dissipation,
        "energy_balance": balance,
        "z_residual": z_resid,
    }


def l2_error(traj, exact, params=None):
    """Discrete L2 norm of ``u − exact(t, x)`` at the final snapshot."""
    t = traj.times[-1]
    env = {**(params or {}), "t": t, "x": traj.x}
    ref = np.broadcast_to(np.asarray(Expr(exact).evaluate(env), dtype=float), traj.x.shape)
    dx = traj.x[1] - traj.x[0]
    return float(np.sqrt(_quadrature((traj.u[-1] - ref) ** 2, dx, traj.config.boundary)))


# convergence ---------------------------------------------------------------------


@dataclass
class ConvergenceTable:
    """Errors per level and observed orders between consecutive levels."""

    spacing: list
    errors: dict
    orders: dict
    flags: list

    def to_dict(self):
        return {"spacing": self.spacing, "errors": self.errors, "orders": self.orders, "flags": self.flags}

    def write(self, csv_path, json_path):
        names = sorted(self.errors)
        with open(csv_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["spacing"] + [f"{n}_error" for n in names] + [f"{n}_order" for n in names])
            for i, h in enumerate(self.spacing):
                orders = [self.orders[n][i - 1] if i > 0 else "" for n in names]
                w.writerow([f"{h:.17g}"] + [f"{self.errors[n][i]:.17g}" for n in names]
                           + [o if o == "" else f"{o:.17g}" for o in orders])
        with open(json_path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)


def observed_orders(spacing, errors):
    """``log(e_i / e_{i+1}) / log(h_i / h_{i+1})`` for each diagnostic."""
    if len(spacing) < 3:
        raise GridError(f"a convergence study needs at least 3 levels, got {len(spacing)}")
    orders, flags = {}, []
    for name, errs in errors.items():
        errs = [float(e) for e in errs]
        out = []
        for i in range(len(errs) - 1):
            if errs[i + 1] >= errs[i] or errs[i + 1] <= 0:
                flags.append(f"{name}: error does not decrease from level {i} to {i + 1}")
            ratio = errs[i] / errs[i + 1] if errs[i + 1] > 0 else float("inf")
            out.append(math.log(ratio) / math.log(spacing[i] / spacing[i + 1]))
        orders[name] = out
    return orders, flags


def convergence_study(solve, levels):
    """Run ``solve(level) -> (spacing, {diagnostic: error})`` at each level."""
    levels = list(levels)
    if len(levels) < 3:
        raise GridError(f"a convergence study needs at least 3 levels, got {len(levels)}")
    spacing, errors = [], {}
    for level in levels:
        h, errs = solve(level)
        spacing.append(float(h))
        for name, e in errs.items():
            errors.setdefault(name, []).append(float(e))
    orders, flags = observed_orders(spacing, errors)
    return ConvergenceTable(spacing, errors, orders, flags)
