"""Discretized sections over a rectangular grid and their equation residuals.

A :class:`GridSection` stores ``q``, the fibers and ``z`` on a uniform grid
in the independent variables; the time block of every node equals its grid
coordinates. Derivatives come from second-order centered differences and are
defined on interior nodes only.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np

from .autodiff import eval_grad, grad_batch
from .errors import ArityError, GridError
from .phase import Signature, as_flat
from .tolerances import DEFAULTS


class HolonomyWarning(UserWarning):
    """Stored fiber values differ from the differentiated configuration."""


@dataclass
class GridSection:
    """Values over ``axes`` (k uniform 1-D arrays); grid axes trail each array.

    ``q`` is ``(n,) + shape``, ``fiber`` is ``(n, k) + shape``, ``z`` is
    ``(k,) + shape``. With ``with_time=False`` the node coordinates are
    parameters only and points carry no time block.
    """

    axes: tuple
    q: np.ndarray
    fiber: np.ndarray
    z: np.ndarray
    with_time: bool = True

    def __post_init__(self):
        self.axes = tuple(np.asarray(a, dtype=float) for a in self.axes)
        self.q = np.asarray(self.q, dtype=float)
        self.fiber = np.asarray(self.fiber, dtype=float)
        self.z = np.asarray(self.z, dtype=float)
        k = len(self.axes)
        shape = self.shape
        n = self.q.shape[0] if self.q.ndim else 0
        if k < 1 or n < 1:
            raise GridError("a section needs at least one axis and one configuration coordinate")
        if self.q.shape != (n,) + shape or self.fiber.shape != (n, k) + shape or self.z.shape != (k,) + shape:
            raise GridError(
                f"section arrays q{self.q.shape}, fiber{self.fiber.shape}, z{self.z.shape} "
                f"do not match n={n}, k={k}, grid {shape}"
            )
        for a, ax in enumerate(self.axes):
            if ax.ndim != 1 or ax.size < 2:
                raise GridError(f"axis {a} must be a 1-D array with at least 2 nodes")
            steps = np.diff(ax)
            if not np.allclose(steps, steps[0], rtol=1e-9, atol=0.0) or steps[0] <= 0:
                raise GridError(f"axis {a} is not uniformly increasing")

    @property
    def shape(self):
        return tuple(ax.size for ax in self.axes)

    @property
    def spacing(self):
        return tuple(float(ax[1] - ax[0]) for ax in self.axes)

    @property
    def signature(self):
        return Signature(len(self.axes), self.q.shape[0], self.with_time)

    def points(self):
        """Flat coordinates at every node, shape ``grid + (N,)``."""
        sig = self.signature
        k, n = sig.k, sig.n
        blocks = []
        if self.with_time:
            blocks += list(np.meshgrid(*self.axes, indexing="ij"))
        blocks += list(self.q)
        blocks += list(self.fiber.reshape((n * k,) + self.shape))
        blocks += list(self.z)
        return np.stack(blocks, axis=-1)

    def point(self, node):
        return self.points()[tuple(node)]


def _interior(arr, k):
    sl = (slice(None),) * (arr.ndim - k) + (slice(1, -1),) * k
    return arr[sl]


def centered(arr, axis, h, k):
    """Centered difference along grid axis ``axis``, restricted to interior nodes."""
    ax = arr.ndim - k + axis
    size = arr.shape[ax]
    d = (np.take(arr, np.arange(2, size), axis=ax) - np.take(arr, np.arange(0, size - 2), axis=ax)) / (2 * h)
    sl = [slice(None)] * arr.ndim
    for b in range(k):
        if b != axis:
            sl[arr.ndim - k + b] = slice(1, -1)
    return d[tuple(sl)]


@dataclass
class ProlongedSection:
    """A section plus centered derivatives on interior nodes.

    The derivative index leads: ``dq[a, i]``, ``dfiber[a, i, b]``, ``dz[a, b]``
    are ``∂/∂r^a`` of ``q^i``, fiber ``(i, b)`` and ``z^b``.
    """

    section: GridSection
    dq: np.ndarray
    dfiber: np.ndarray
    dz: np.ndarray
    holonomy_gap: float = field(default=0.0)

    @property
    def interior_shape(self):
        return tuple(s - 2 for s in self.section.shape)


def prolong(s):
    """Centered first derivatives of every block of ``s``.

    ``holonomy_gap`` records how far the fibers are from ``∂q/∂r``; it is
    only meaningful for velocity-side sections.
    """
    k = len(s.axes)
    if min(s.shape) < 3:
        raise GridError(f"prolongation needs at least 3 nodes per axis, grid is {s.shape}")
    h = s.spacing
    dq = np.stack([centered(s.q, a, h[a], k) for a in range(k)])
    dfiber = np.stack([centered(s.fiber, a, h[a], k) for a in range(k)])
    dz = np.stack([centered(s.z, a, h[a], k) for a in range(k)])
    # fiber (i, a) against ∂q^i/∂r^a
    stored = np.moveaxis(_interior(s.fiber, k), 1, 0)
    gap = float(np.max(np.abs(stored - dq))) if dq.size else 0.0
    return ProlongedSection(s, dq, dfiber, dz, gap)


def _warn_holonomy(ps, tol):
    if ps.holonomy_gap > tol:
        warnings.warn(
            f"fiber values differ from the prolonged derivatives by {ps.holonomy_gap:.3e}",
            HolonomyWarning,
            stacklevel=3,
        )


# residuals ---------------------------------------------------------------------


def sopde_residual(coeffs, x):
    """``max |B[a, i] − v^i_a|``: zero for second-order k-vector fields."""
    k, n = coeffs.k, coeffs.n
    sig = Signature(k, n, coeffs.A is not None)
    vec = as_flat(x, sig)
    v = vec[sig.fiber_slice].reshape(n, k)
    return float(np.max(np.abs(coeffs.B - v.T)))


@dataclass(frozen=True)
class ELResidual:
    """``time``: ``∂t^b/∂r^a − δ``; ``el``: per ``i``; ``z``: trace equation."""

    time: np.ndarray
    el: np.ndarray
    z: np.ndarray | float


@dataclass(frozen=True)
class HDWResidual:
    """``time``; ``q[a, i]``: ``∂q^i/∂r^a − ∂h/∂p_i^a``; ``p``: per ``i``; ``z``: trace."""

    time: np.ndarray
    q: np.ndarray
    p: np.ndarray
    z: np.ndarray | float


def _check_node(ps, node):
    node = tuple(int(c) for c in node)
    shape = ps.section.shape
    if len(node) != len(shape) or not all(0 < c < s - 1 for c, s in zip(node, shape)):
        raise GridError(f"node {node} is not interior to a grid of shape {shape}")
    return node


def _check_sig(field_sig, section):
    if field_sig != section.signature:
        raise ArityError(f"field signature {field_sig} does not match section {section.signature}")


def _time_residual(section, k):
    # t equals the grid coordinates at every node, so ∂t/∂r = δ identically
    return np.zeros((k, k)) if section.with_time else np.zeros((0, k))


def el_residual(lsys, ps, node, holonomy_tol=DEFAULTS.holonomy):
    """Euler-Lagrange residuals at one interior node.

    The divergence of the momenta is a centered difference of ``∂L/∂v``
    evaluated at the neighbouring nodes. A non-holonomic section is
    evaluated anyway, with a :class:`HolonomyWarning`.
    """
    s = ps.section
    sig = lsys.signature
    _check_sig(sig, s)
    node = _check_node(ps, node)
    _warn_holonomy(ps, holonomy_tol)
    k, n = sig.k, sig.n
    h = s.spacing
    pts = s.points()
    d0 = eval_grad(lsys.L, pts[node])
    g = d0.gradient
    div = np.zeros(n)
    for a in range(k):
        up, dn = list(node), list(node)
        up[a] += 1
        dn[a] -= 1
        gu = eval_grad(lsys.L, pts[tuple(up)]).gradient
        gd = eval_grad(lsys.L, pts[tuple(dn)]).gradient
        for i in range(n):
            col = sig.fiber_index(i, a)
            div[i] += (gu[col] - gd[col]) / (2 * h[a])
    rhs = np.array(
        [g[sig.q_index(i)] + sum(g[sig.z_index(a)] * g[sig.fiber_index(i, a)] for a in range(k)) for i in range(n)]
    )
    inner = tuple(c - 1 for c in node)
    trace = sum(ps.dz[(a, a) + inner] for a in range(k))
    return ELResidual(_time_residual(s, k), div - rhs, float(trace - d0.value))


def el_residual_field(lsys, ps, holonomy_tol=DEFAULTS.holonomy):
    """Vectorized :func:`el_residual` over all interior nodes."""
    s = ps.section
    sig = lsys.signature
    _check_sig(sig, s)
    _warn_holonomy(ps, holonomy_tol)
    k, n = sig.k, sig.n
    h = s.spacing
    pts = s.points()
    vals, grads = grad_batch(lsys.L, pts.reshape(-1, sig.dim))
    vals = vals.reshape(s.shape)
    grads = np.moveaxis(grads.reshape(s.shape + (sig.dim,)), -1, 0)
    el = np.empty((n,) + ps.interior_shape)
    for i in range(n):
        div = sum(centered(grads[sig.fiber_index(i, a)], a, h[a], k) for a in range(k))
        rhs = grads[sig.q_index(i)] + sum(grads[sig.z_index(a)] * grads[sig.fiber_index(i, a)] for a in range(k))
        el[i] = div - _interior(rhs, k)
    trace = sum(ps.dz[a, a] for a in range(k))
    return ELResidual(_time_residual(s, k), el, trace - _interior(vals, k))


def _hdw_parts(k, n, sig, g, val, p):
    """Right-hand sides of the four groups from gradient ``g`` of ``h``."""
    h_p = np.array([[g[sig.fiber_index(i, a)] for i in range(n)] for a in range(k)])
    force = np.array(
        [g[sig.q_index(i)] + sum(p[i][a] * g[sig.z_index(a)] for a in range(k)) for i in range(n)]
    )
    z_rate = sum(p[i][a] * h_p[a][i] for i in range(n) for a in range(k)) - val
    return h_p, force, z_rate


def hdw_residual(hsys, ps, node):
    """Residuals of the Hamilton-De Donder-Weyl equations at one interior node."""
    s = ps.section
    sig = hsys.signature
    _check_sig(sig, s)
    node = _check_node(ps, node)
    k, n = sig.k, sig.n
    x = s.points()[node]
    d = eval_grad(hsys.h, x)
    p = x[sig.fiber_slice].reshape(n, k)
    h_p, force, z_rate = _hdw_parts(k, n, sig, d.gradient, d.value, p)
    inner = tuple(c - 1 for c in node)
    dq = ps.dq[(slice(None), slice(None)) + inner]
    div_p = np.array([sum(ps.dfiber[(a, i, a) + inner] for a in range(k)) for i in range(n)])
    trace_z = sum(ps.dz[(a, a) + inner] for a in range(k))
    return HDWResidual(_time_residual(s, k), dq - h_p, div_p + force, float(trace_z - z_rate))


def hdw_residual_field(hsys, ps):
    """Vectorized :func:`hdw_residual` over all interior nodes."""
    s = ps.section
    sig = hsys.signature
    _check_sig(sig, s)
    k, n = sig.k, sig.n
    pts = _interior(np.moveaxis(s.points(), -1, 0), k)
    inner = pts.shape[1:]
    vals, grads = grad_batch(hsys.h, np.moveaxis(pts, 0, -1).reshape(-1, sig.dim))
    vals = vals.reshape(inner)
    g = np.moveaxis(grads.reshape(inner + (sig.dim,)), -1, 0)
    p = pts[sig.fiber_slice].reshape((n, k) + inner)
    h_p, force, z_rate = _hdw_parts(k, n, sig, g, vals, p)
    div_p = np.stack([sum(ps.dfiber[a, i, a] for a in range(k)) for i in range(n)])
    trace_z = sum(ps.dz[a, a] for a in range(k))
    return HDWResidual(_time_residual(s, k), ps.dq - h_p, div_p + force, trace_z - z_rate)


# summaries -----------------------------------------------------------------------


def summarize(residual):
    """``{group: {"max": .., "mean": ..}}`` over the interior nodes."""
    out = {}
    for name, arr in vars(residual).items():
        arr = np.abs(np.asarray(arr, dtype=float))
        out[name] = {
            "max": float(arr.max()) if arr.size else 0.0,
            "mean": float(arr.mean()) if arr.size else 0.0,
        }
    return out


def summary_rows(spacing, summary):
    """CSV rows keyed by grid spacing, one per residual group."""
    h = ";".join(f"{v:.17g}" for v in np.atleast_1d(spacing))
    return [{"spacing": h, "group": g, "max": s["max"], "mean": s["mean"]} for g, s in summary.items()]


def write_summary_csv(path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["spacing", "group", "max", "mean"])
        writer.writeheader()
        for row in rows:
            writer.writerow({**row, "max": f"{row['max']:.17g}", "mean": f"{row['mean']:.17g}"})


def transport_section(lsys, s):
    """Push a velocity-side section through the Legendre map, node by node."""
    sig = lsys.signature
    _check_sig(sig, s)
    k, n = sig.k, sig.n
    _, grads = grad_batch(lsys.L, s.points().reshape(-1, sig.dim))
    mom = grads[:, sig.fiber_slice].T.reshape((n, k) + s.shape)
    return GridSection(s.axes, s.q.copy(), mom, s.z.copy(), s.with_time)
