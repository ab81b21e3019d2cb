"""Objects built from a Lagrangian on the velocity phase bundle.

The system exposes the same ``forms(x)`` / ``energy_and_gradient(x)`` surface
as the Hamiltonian side, so the geometric checks in :mod:`geometry` and
:mod:`hamiltonian` run on either one unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import ScalarField, eval_grad, eval_hess
from .errors import ArityError, LegendreInversionError, RegularityError
from .geometry import FormsAtPoint
from .hamiltonian import KVectorCoeffs
from .phase import LAGRANGIAN, PhasePoint, as_flat
from .tolerances import DEFAULTS


@dataclass(frozen=True)
class HessianBlock:
    """Fiber Hessian ``W[(i,a),(j,b)] = ∂²L/∂v^i_a∂v^j_b`` with row-major ``(i, a)``."""

    W: np.ndarray
    Winv: np.ndarray | None
    regular: bool
    cond: float


@dataclass(frozen=True)
class HolonomicParts:
    """``L = kinetic + damping``: kinetic ignores z, damping ignores the fibers."""

    kinetic: ScalarField
    damping: ScalarField


class LagrangianSystem:
    def __init__(self, L, parts=None, tol=DEFAULTS):
        if L.side != LAGRANGIAN:
            raise ArityError("a Lagrangian system needs a lagrangian-side field")
        self.signature = L.signature
        self.L = L
        self.parts = parts
        self.tol = tol

    # pointwise objects ---------------------------------------------------

    def _hess(self, x):
        return eval_hess(self.L, as_flat(x, self.signature))

    def energy(self, x):
        """``Σ v·∂L/∂v − L``."""
        vec = as_flat(x, self.signature)
        d = eval_grad(self.L, vec)
        sl = self.signature.fiber_slice
        return float(vec[sl] @ d.gradient[sl] - d.value)

    def energy_and_gradient(self, x):
        """Energy and its gradient, which needs only the Hessian of ``L``."""
        vec = as_flat(x, self.signature)
        d = self._hess(vec)
        sl = self.signature.fiber_slice
        v = vec[sl]
        grad = d.hessian[:, sl] @ v - d.gradient
        grad[sl] += d.gradient[sl]
        return float(v @ d.gradient[sl] - d.value), grad

    def cartan_contact_forms(self, x):
        """``(theta, eta, deta)`` with shapes ``(k, N)``, ``(k, N)``, ``(k, N, N)``."""
        return self._forms_from(self._hess(x))

    def _forms_from(self, d):
        sig = self.signature
        k, n, dim = sig.k, sig.n, sig.dim
        theta = np.zeros((k, dim))
        deta = np.empty((k, dim, dim))
        for a in range(k):
            m = np.zeros((dim, dim))
            for i in range(n):
                col = sig.fiber_index(i, a)
                theta[a, sig.q_index(i)] = d.gradient[col]
                m[sig.q_index(i)] = d.hessian[:, col]
            # η = dz − θ, so dη = Σ dq^i ∧ d(∂L/∂v^i_a)
            deta[a] = m - m.T
        eta = -theta
        for a in range(k):
            eta[a, sig.z_index(a)] = 1.0
        return theta, eta, deta

    def forms(self, x):
        sig = self.signature
        _, eta, deta = self.cartan_contact_forms(x)
        tau = np.zeros((sig.kt, sig.dim))
        for a in range(sig.kt):
            tau[a, sig.t_index(a)] = 1.0
        return FormsAtPoint(tau, eta, deta)

    def hessian(self, x):
        return self._block(self._hess(x))

    def _block(self, d):
        sl = self.signature.fiber_slice
        W = np.array(d.hessian[sl, sl])
        cond = float(np.linalg.cond(W)) if W.any() else float("inf")
        regular = bool(np.isfinite(cond) and cond < self.tol.regular_cond)
        return HessianBlock(W, np.linalg.inv(W) if regular else None, regular, cond)

    # Legendre map ----------------------------------------------------------

    def momenta(self, vec):
        return eval_grad(self.L, vec).gradient[self.signature.fiber_slice]

    def legendre(self, x):
        """Hamiltonian-side point with the fibers replaced by ``∂L/∂v``."""
        vec = np.array(as_flat(x, self.signature), dtype=float)
        vec[self.signature.fiber_slice] = self.momenta(vec)
        return PhasePoint.from_flat(self.signature, vec)

    def legendre_inverse(self, y, guess=None):
        """Newton solve of ``∂L/∂v(t, q, v, z) = p`` for ``v`` with ``t, q, z`` frozen."""
        sig, tol = self.signature, self.tol
        target = as_flat(y, sig)
        sl = sig.fiber_slice
        p = target[sl]
        vec = np.array(target, dtype=float)
        if guess is not None:
            vec[sl] = np.asarray(guess, dtype=float).ravel()
        resid = self.momenta(vec) - p
        err = np.max(np.abs(resid))
        for _ in range(tol.newton_max_iter):
            if err <= tol.newton_residual:
                return PhasePoint.from_flat(sig, vec)
            block = self.hessian(vec)
            if not block.regular:
                raise LegendreInversionError(
                    f"fiber Hessian is singular (cond {block.cond:.3g}) at velocities {vec[sl]}"
                )
            step = -block.Winv @ resid
            scale = 1.0
            while True:
                trial = vec.copy()
                trial[sl] += scale * step
                trial_resid = self.momenta(trial) - p
                trial_err = np.max(np.abs(trial_resid))
                if trial_err < err or scale < 1e-8:
                    break
                scale *= 0.5
            vec, resid, err = trial, trial_resid, trial_err
        if err <= tol.newton_residual:
            return PhasePoint.from_flat(sig, vec)
        raise LegendreInversionError(
            f"no convergence after {tol.newton_max_iter} iterations (residual {err:.3e})"
        )

    # Reeb fields -------------------------------------------------------------

    def reeb_closed_form(self, x):
        """``(Rt, Rz)`` from the fiber Hessian inverse and the mixed t-v, z-v blocks."""
        sig = self.signature
        d = self._hess(x)
        block = self._block(d)
        if not block.regular:
            raise RegularityError(f"fiber Hessian is singular (cond {block.cond:.3g})")
        sl = sig.fiber_slice
        rt = np.zeros((sig.kt, sig.dim))
        rz = np.zeros((sig.k, sig.dim))
        for a in range(sig.kt):
            rt[a, sig.t_index(a)] = 1.0
            rt[a, sl] = -block.Winv @ d.hessian[sig.t_index(a), sl]
        for a in range(sig.k):
            rz[a, sig.z_index(a)] = 1.0
            rz[a, sl] = -block.Winv @ d.hessian[sig.z_index(a), sl]
        return rt, rz

    # field equations -------------------------------------------------------

    def canonical_kvector(self, x):
        """A second-order solution: ``A = δ``, ``B = v``, ``D = δ L / k``.

        The fiber components ``C`` are the least-norm solution of the
        Euler-Lagrange equations, which only fix the contractions
        ``Σ W[(i,a),(j,b)] C[a,j,b]``.
        """
        sig = self.signature
        k, n = sig.k, sig.n
        vec = as_flat(x, sig)
        d = self._hess(vec)
        block = self._block(d)
        if not block.regular:
            raise RegularityError(f"fiber Hessian is singular (cond {block.cond:.3g})")
        v = vec[sig.fiber_slice].reshape(n, k)
        D = np.eye(k) * d.value / k
        H, g = d.hessian, d.gradient
        mat = np.zeros((n, k * n * k))
        rhs = np.zeros(n)
        for i in range(n):
            rhs[i] = g[sig.q_index(i)]
            for a in range(k):
                via = sig.fiber_index(i, a)
                rhs[i] += g[sig.z_index(a)] * g[via]
                if sig.with_time:
                    rhs[i] -= H[sig.t_index(a), via]
                for j in range(n):
                    rhs[i] -= H[sig.q_index(j), via] * v[j, a]
                for b in range(k):
                    rhs[i] -= H[sig.z_index(b), via] * D[a, b]
                for j in range(n):
                    for b in range(k):
                        mat[i, (a * n + j) * k + b] = block.W[i * k + a, j * k + b]
        C = np.linalg.lstsq(mat, rhs, rcond=None)[0].reshape(k, n, k)
        A = np.eye(k) if sig.with_time else None
        return KVectorCoeffs(A, v.T.copy(), C, D)


def _slot_violations(field, forbidden):
    """Flat indices in ``forbidden`` that ``field`` depends on."""
    deps = field.dependency_indices()
    if deps is not None:
        return sorted(deps & forbidden)
    # opaque rule: probe the gradient at fixed points
    rng = np.random.default_rng(0)
    hits = set()
    for _ in range(8):
        g = eval_grad(field, rng.uniform(-1.0, 1.0, field.signature.dim)).gradient
        hits |= {a for a in forbidden if g[a] != 0.0}
    return sorted(hits)


def assemble_holonomic(kinetic, damping, tol=DEFAULTS):
    """``L = kinetic + damping`` with the slot restrictions checked."""
    sig = kinetic.signature
    if damping.signature != sig or kinetic.side != LAGRANGIAN or damping.side != LAGRANGIAN:
        raise ArityError("both parts must be lagrangian-side fields of one signature")
    z_slots = set(range(sig.z_slice.start, sig.z_slice.stop))
    fiber_slots = set(range(sig.fiber_slice.start, sig.fiber_slice.stop))
    names = sig.labels(LAGRANGIAN)
    bad = _slot_violations(kinetic, z_slots)
    if bad:
        raise ArityError(f"kinetic part depends on z slots {[names[a] for a in bad]}")
    bad = _slot_violations(damping, fiber_slots)
    if bad:
        raise ArityError(f"damping part depends on fiber slots {[names[a] for a in bad]}")
    return LagrangianSystem(kinetic + damping, HolonomicParts(kinetic, damping), tol)


def damping_value(sys, x):
    return sys.parts.damping(x) if sys.parts is not None else 0.0

