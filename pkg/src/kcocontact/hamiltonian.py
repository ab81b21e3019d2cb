"""Field equations for k-vector fields in Darboux coordinates.

``verify_kvector`` is written against the geometric equations only (forms,
Reeb vectors, the gradient of the energy function), so it also accepts the
Lagrangian side and time-free k-contact systems.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .autodiff import eval_grad
from .errors import ArityError
from .geometry import CanonicalStructure, rank_of, solve_reeb
from .phase import HAMILTONIAN, as_flat
from .tolerances import DEFAULTS


@dataclass(frozen=True)
class KVectorCoeffs:
    """Components of the legs ``X_a`` of a k-vector field at one point.

    ``A[a, b]`` on ``∂/∂t^b`` (``None`` without a time block), ``B[a, i]`` on
    ``∂/∂q^i``, ``C[a, i, b]`` on the fiber slot ``(i, b)``, ``D[a, b]`` on
    ``∂/∂z^b``.
    """

    A: np.ndarray | None
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        k, n = np.shape(self.B)
        if np.shape(self.C) != (k, n, k) or np.shape(self.D) != (k, k):
            raise ArityError("k-vector tables have inconsistent shapes")
        if self.A is not None and np.shape(self.A) != (k, k):
            raise ArityError("time table must be k x k")
        for name in "ABCD":
            arr = getattr(self, name)
            if arr is not None and not np.all(np.isfinite(arr)):
                raise ArityError(f"k-vector table {name} has non-finite entries")

    @property
    def k(self):
        return self.B.shape[0]

    @property
    def n(self):
        return self.B.shape[1]

    def legs(self):
        """``(k, N)`` array; row ``a`` is the vector ``X_a``."""
        k, n = self.k, self.n
        blocks = [] if self.A is None else [self.A]
        blocks += [self.B, self.C.reshape(k, n * k), self.D]
        return np.hstack(blocks)

    @classmethod
    def from_legs(cls, legs, k, n, with_time=True):
        legs = np.asarray(legs, dtype=float)
        kt = k if with_time else 0
        A = legs[:, :kt].copy() if with_time else None
        B = legs[:, kt:kt + n].copy()
        C = legs[:, kt + n:kt + n + n * k].reshape(k, n, k).copy()
        D = legs[:, kt + n + n * k:].copy()
        return cls(A, B, C, D)

    def to_dict(self):
        out = {"B": self.B.tolist(), "C": self.C.tolist(), "D": self.D.tolist()}
        if self.A is not None:
            out = {"A": self.A.tolist(), **out}
        return out


class HamiltonianSystem:
    """A Hamiltonian on the canonical model (or its time-free analogue)."""

    def __init__(self, h, tol=DEFAULTS):
        if h.side != HAMILTONIAN:
            raise ArityError("a Hamiltonian system needs a hamiltonian-side field")
        self.signature = h.signature
        self.h = h
        self.tol = tol
        self._structure = CanonicalStructure(h.signature)

    def forms(self, x):
        return self._structure.forms(x)

    def energy_and_gradient(self, x):
        d = eval_grad(self.h, as_flat(x, self.signature))
        return d.value, d.gradient


@dataclass(frozen=True)
class DeterminedData:
    """The part of a solution the equations fix: ``A``, ``B`` and two traces."""

    A: np.ndarray | None
    B: np.ndarray
    trace_c: np.ndarray  # Σ_a C[a, i, a]
    trace_d: float  # Σ_a D[a, a]

    def to_dict(self):
        out = {"B": self.B.tolist(), "trace_C": self.trace_c.tolist(), "trace_D": self.trace_d}
        if self.A is not None:
            out = {"A": self.A.tolist(), **out}
        return out


def hdw_determined(sys, x):
    sig = sys.signature
    vec = as_flat(x, sig)
    d = eval_grad(sys.h, vec)
    g = d.gradient
    k, n = sig.k, sig.n
    p = vec[sig.fiber_slice].reshape(n, k)
    h_p = g[sig.fiber_slice].reshape(n, k)
    h_z = g[sig.z_slice]
    h_q = g[sig.q_slice]
    B = h_p.T.copy()
    trace_c = -(h_q + p @ h_z)
    trace_d = float(np.sum(p * h_p) - d.value)
    A = np.eye(k) if sig.with_time else None
    return DeterminedData(A, B, trace_c, trace_d)


def canonical_kvector(sys, x):
    """Spread both traces evenly over the diagonal legs."""
    det = hdw_determined(sys, x)
    k, n = det.B.shape
    C = np.zeros((k, n, k))
    for a in range(k):
        C[a, :, a] = det.trace_c / k
    D = np.eye(k) * det.trace_d / k
    return KVectorCoeffs(det.A, det.B, C, D)


@dataclass(frozen=True)
class KVectorReport:
    """Max-norm residual of each of the three field equations."""

    deta_residual: float
    eta_residual: float
    tau_residual: float
    tol: float

    @property
    def passed(self):
        return max(self.deta_residual, self.eta_residual, self.tau_residual) <= self.tol

    def to_dict(self):
        return {
            "deta_equation": self.deta_residual,
            "eta_equation": self.eta_residual,
            "tau_equation": self.tau_residual,
            "tolerance": self.tol,
            "passed": self.passed,
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def reeb_corrected_differential(forms, dh, reeb=None):
    """``dh − Σ R^t_a(h) τ^a − Σ R^z_a(h) η^a``."""
    rt, rz = reeb if reeb is not None else solve_reeb(forms)
    return dh - (rt @ dh) @ forms.tau - (rz @ dh) @ forms.eta


def kvector_residuals(forms, h, dh, legs, reeb=None):
    """Residual arrays of the three equations for legs ``(k, N)``."""
    k = forms.k
    lhs = sum(legs[a] @ forms.deta[a] for a in range(k))
    r_deta = lhs - reeb_corrected_differential(forms, dh, reeb)
    r_eta = np.array([np.sum(forms.eta * legs) + h])
    r_tau = legs @ forms.tau.T - np.eye(k)[:, : forms.tau.shape[0]]
    return r_deta, r_eta, r_tau


def verify_kvector(sys, coeffs, x, tol=DEFAULTS.kvector_residual):
    """Check ``coeffs`` against the field equations of ``sys`` at ``x``.

    ``sys`` needs ``forms(x)`` and ``energy_and_gradient(x)``.
    """
    forms = sys.forms(x)
    h, dh = sys.energy_and_gradient(x)
    legs = coeffs.legs()
    if legs.shape != (forms.k, forms.dim):
        raise ArityError(f"k-vector legs have shape {legs.shape}, expected {(forms.k, forms.dim)}")
    r1, r2, r3 = kvector_residuals(forms, h, dh, legs)

    def norm(r):
        return float(np.max(np.abs(r))) if r.size else 0.0

    return KVectorReport(norm(r1), norm(r2), norm(r3), tol)


def gauge_directions(forms, tol=DEFAULTS.rank_rtol):
    """Basis ``(m, k, N)`` of leg changes that leave every equation unchanged.

    These solve the homogeneous system ``Σ i(δX_a)dη^a = 0``,
    ``Σ η^a(δX_a) = 0``, ``τ^b(δX_a) = 0``.
    """
    k, dim = forms.k, forms.dim
    kt = forms.tau.shape[0]
    rows = []
    # Σ_a δX_a @ Ω_a: for each output component c, coefficient of δX_a[b] is Ω_a[b, c]
    big = np.hstack([forms.deta[a].T for a in range(k)])
    rows.append(big)
    rows.append(forms.eta.reshape(1, k * dim))
    for a in range(k):
        for b in range(kt):
            row = np.zeros(k * dim)
            row[a * dim:(a + 1) * dim] = forms.tau[b]
            rows.append(row[None, :])
    kern = rank_of(rows, tol).kernel
    return kern.T.reshape(-1, k, dim)


def h_from_lagrangian(lsys, y, guess=None):
    """``E_L`` at the velocities the inverse Legendre map assigns to ``y``."""
    return lsys.energy(lsys.legendre_inverse(y, guess))


def lie_derivative_residual(sys, x, step=DEFAULTS.lie_fd_step, kvector=canonical_kvector):
    """Gap between ``Σ ℒ_{X_a} η^a`` and ``−Σ R^t_a(h) τ^a − Σ R^z_a(h) η^a``.

    The Lie derivative uses ``ℒ_X η = i(X)dη + d(i(X)η)``; the last
    differential comes from central differences of the scalar
    ``x ↦ Σ η^a(X_a)`` with the legs recomputed at each shifted point.
    """
    sig = sys.signature
    vec = np.array(as_flat(x, sig), dtype=float)

    def pairing(y):
        f = sys.forms(y)
        return float(np.sum(f.eta * kvector(sys, y).legs()))

    d_pair = np.empty(sig.dim)
    for a in range(sig.dim):
        e = np.zeros(sig.dim)
        e[a] = step
        d_pair[a] = (pairing(vec + e) - pairing(vec - e)) / (2 * step)
    forms = sys.forms(vec)
    legs = kvector(sys, vec).legs()
    lie = sum(legs[a] @ forms.deta[a] for a in range(forms.k)) + d_pair
    _, dh = sys.energy_and_gradient(vec)
    rt, rz = solve_reeb(forms)
    target = -(rt @ dh) @ forms.tau - (rz @ dh) @ forms.eta
    return float(np.max(np.abs(lie - target)))
