"""Pointwise exterior calculus for k-cocontact structures.

Everything here lives in the tangent and cotangent spaces of a single point:
covectors and vectors are 1-D arrays over the coordinate basis, two-forms are
antisymmetric matrices with ``Ω(X, Y) = Xᵀ Ω Y``. A structure is any object
with a ``signature`` and a ``forms(x) -> FormsAtPoint`` method.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ArityError, StructureViolation
from .phase import as_flat
from .tolerances import DEFAULTS


@dataclass(frozen=True)
class FormsAtPoint:
    """``tau`` and ``eta`` are ``(k, N)``; ``deta`` is ``(k, N, N)``.

    A k-contact point (no time block) has ``tau`` of shape ``(0, N)``.
    """

    tau: np.ndarray
    eta: np.ndarray
    deta: np.ndarray

    def __post_init__(self):
        k, dim = self.eta.shape
        if self.tau.shape not in ((k, dim), (0, dim)) or self.deta.shape != (k, dim, dim):
            raise ArityError("tau, eta, deta shapes disagree")
        for a in range(k):
            check_two_form(self.deta[a])

    @property
    def k(self):
        return self.eta.shape[0]

    @property
    def dim(self):
        return self.eta.shape[1]


def check_two_form(omega):
    if not np.array_equal(omega, -omega.T):
        raise ArityError("two-form matrix is not antisymmetric")
    return omega


def wedge(a, b):
    """Matrix of ``a ∧ b`` for covectors ``a, b``."""
    m = np.outer(a, b)
    return m - m.T


def basis(dim, idx):
    e = np.zeros(dim)
    e[idx] = 1.0
    return e


def contract1(w, v):
    """``i(v) w`` for a covector ``w``."""
    w = np.asarray(w, dtype=float)
    v = np.asarray(v, dtype=float)
    if w.shape != v.shape or w.ndim != 1:
        raise ArityError(f"cannot pair covector {w.shape} with vector {v.shape}")
    return float(w @ v)


def contract2(omega, v):
    """``i(v) Ω``, the covector ``b ↦ Σ_a v^a Ω_ab``."""
    omega = np.asarray(omega, dtype=float)
    v = np.asarray(v, dtype=float)
    if omega.ndim != 2 or omega.shape != (v.size, v.size):
        raise ArityError(f"cannot contract two-form {omega.shape} with vector {v.shape}")
    return v @ omega


@dataclass(frozen=True)
class RankResult:
    rank: int
    kernel: np.ndarray  # columns span the null space
    singular_values: np.ndarray


def rank_of(rows, tol=DEFAULTS.rank_rtol, dim=None):
    """Numerical rank of the stacked rows, with a kernel basis.

    ``rows`` may mix covectors and two-form matrices (whose rows are stacked,
    i.e. the constraint ``v ↦ i(v)Ω`` up to sign).
    """
    if not tol > 0:
        raise ValueError("rank tolerance must be positive")
    blocks = [np.atleast_2d(np.asarray(r, dtype=float)) for r in rows]
    if not blocks:
        n = dim or 0
        return RankResult(0, np.eye(n), np.empty(0))
    mat = np.vstack(blocks)
    n = mat.shape[1]
    _, s, vt = np.linalg.svd(mat)
    smax = s[0] if s.size else 0.0
    rank = int(np.sum(s > tol * smax)) if smax > 0 else 0
    return RankResult(rank, vt[rank:].T.copy(), s)


def _kernel_dim(rows, dim, tol):
    return dim - rank_of(rows, tol).rank


# Conditions defining a k-cocontact structure, each a rank or kernel count.
# The leading number groups them; 4 covers the three pairwise intersections.
CONDITIONS = (
    "1:eta_independent",
    "2:tau_independent",
    "3:deta_kernel_2k",
    "4a:eta_tau_independent",
    "4b:eta_deta_kernel_k",
    "4c:tau_deta_kernel_k",
    "5:joint_kernel_trivial",
)


# Without a time block: η independent, ker dη of dimension k, and
# ker η ∩ ker dη trivial.
CONTACT_CONDITIONS = (
    "1:eta_independent",
    "2:deta_kernel_k",
    "3:joint_kernel_trivial",
)


def axiom_ranks(forms, tol=DEFAULTS.rank_rtol):
    """Computed and expected value for every condition at one point."""
    k, dim = forms.k, forms.dim
    eta = list(forms.eta)
    tau = list(forms.tau)
    deta = list(forms.deta)
    if not tau:
        return {
            CONTACT_CONDITIONS[0]: (rank_of(eta, tol).rank, k),
            CONTACT_CONDITIONS[1]: (_kernel_dim(deta, dim, tol), k),
            CONTACT_CONDITIONS[2]: (_kernel_dim(eta + deta, dim, tol), 0),
        }
    return {
        CONDITIONS[0]: (rank_of(eta, tol).rank, k),
        CONDITIONS[1]: (rank_of(tau, tol).rank, k),
        CONDITIONS[2]: (_kernel_dim(deta, dim, tol), 2 * k),
        CONDITIONS[3]: (rank_of(eta + tau, tol).rank, 2 * k),
        CONDITIONS[4]: (_kernel_dim(eta + deta, dim, tol), k),
        CONDITIONS[5]: (_kernel_dim(tau + deta, dim, tol), k),
        CONDITIONS[6]: (_kernel_dim(eta + tau + deta, dim, tol), 0),
    }


@dataclass
class AxiomReport:
    """Per point, per condition: computed rank, expected rank, pass flag."""

    points: list = field(default_factory=list)
    tol: float = DEFAULTS.rank_rtol

    @property
    def passed(self):
        return all(p["passed"] for p in self.points)

    def failures(self):
        out = []
        for p in self.points:
            for name, c in p["conditions"].items():
                if not c["pass"]:
                    out.append((p["index"], name))
        return out

    def failed_conditions(self):
        return sorted({name for _, name in self.failures()})

    def raise_for_failure(self):
        fails = self.failed_conditions()
        if fails:
            raise StructureViolation(f"k-cocontact condition(s) violated: {', '.join(fails)}", fails[0])

    def to_dict(self):
        return {
            "passed": self.passed,
            "rank_tolerance": self.tol,
            "failed_conditions": self.failed_conditions(),
            "points": self.points,
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def verify_axioms(structure, pts, tol=DEFAULTS.rank_rtol):
    """Check the five defining rank conditions at every point of ``pts``."""
    report = AxiomReport(tol=tol)
    for idx, x in enumerate(pts):
        ranks = axiom_ranks(structure.forms(x), tol)
        conds = {name: {"value": v, "expected": e, "pass": v == e} for name, (v, e) in ranks.items()}
        vec = as_flat(x, structure.signature)
        report.points.append(
            {
                "index": idx,
                "point": [float(c) for c in vec],
                "conditions": conds,
                "passed": all(c["pass"] for c in conds.values()),
            }
        )
    return report


def solve_reeb(forms, tol=DEFAULTS.reeb_residual, rank_tol=DEFAULTS.rank_rtol):
    """Space-time and contact Reeb vectors at a point.

    Returns ``(Rt, Rz)``, each ``(k, N)``; row ``a`` is ``R^t_a`` / ``R^z_a``.
    Solved jointly as the least-norm solution of
    ``i(R)dη^b = 0, i(R)η^b = ·, i(R)τ^b = ·`` via SVD. Without a time
    block ``Rt`` has no rows.
    """
    k, dim = forms.k, forms.dim
    kt = forms.tau.shape[0]
    mat = np.vstack([forms.deta[b].T for b in range(k)] + [forms.eta, forms.tau])
    rhs = np.zeros((mat.shape[0], kt + k))
    off = k * dim
    for a in range(kt):
        rhs[off + k + a, a] = 1.0  # τ^a(R^t_a) = 1
    for a in range(k):
        rhs[off + a, kt + a] = 1.0  # η^a(R^z_a) = 1
    sol, _, _, s = np.linalg.lstsq(mat, rhs, rcond=None)
    last = CONDITIONS[6] if kt else CONTACT_CONDITIONS[2]
    if s.size == 0 or np.sum(s > rank_tol * s[0]) < dim:
        raise StructureViolation("Reeb system is singular: the Reeb vectors are not unique", last)
    resid = np.max(np.abs(mat @ sol - rhs))
    if resid > tol * max(1.0, np.max(np.abs(mat))):
        raise StructureViolation(f"Reeb system is inconsistent (residual {resid:.3e})", last)
    return sol[:, :kt].T.copy(), sol[:, kt:].T.copy()


class CanonicalStructure:
    """Darboux model ``τ^a = dt^a``, ``η^a = dz^a − p_i^a dq^i`` on the Hamiltonian side.

    With ``with_time=False`` signatures this is the canonical k-contact
    structure and ``tau`` has no rows.
    """

    def __init__(self, signature):
        self.signature = signature

    def forms(self, x):
        sig = self.signature
        vec = as_flat(x, sig)
        k, n, dim = sig.k, sig.n, sig.dim
        tau = np.zeros((k if sig.with_time else 0, dim))
        for a in range(tau.shape[0]):
            tau[a, sig.t_index(a)] = 1.0
        eta = np.zeros((k, dim))
        deta = np.zeros((k, dim, dim))
        for a in range(k):
            eta[a, sig.z_index(a)] = 1.0
            for i in range(n):
                qi, pia = sig.q_index(i), sig.fiber_index(i, a)
                eta[a, qi] = -vec[pia]
                deta[a, qi, pia] = 1.0
                deta[a, pia, qi] = -1.0
        return FormsAtPoint(tau, eta, deta)


class FunctionStructure:
    """Wraps an arbitrary ``x -> (tau, eta, deta)`` evaluator."""

    def __init__(self, signature, fn):
        self.signature = signature
        self._fn = fn

    def forms(self, x):
        tau, eta, deta = self._fn(x)
        return FormsAtPoint(np.asarray(tau, float), np.asarray(eta, float), np.asarray(deta, float))


def dual_frame_defect(forms, rt, rz):
    """Largest deviation of the Reeb vectors from their defining relations."""
    k, kt = forms.k, forms.tau.shape[0]
    gaps = [
        forms.tau @ rt.T - np.eye(kt),
        forms.eta @ rt.T,
        forms.eta @ rz.T - np.eye(k),
        forms.tau @ rz.T,
    ]
    for b in range(k):
        gaps += [rt @ forms.deta[b], rz @ forms.deta[b]]
    return float(max((np.max(np.abs(g)) for g in gaps if g.size), default=0.0))
