"""Derivative oracle for scalar fields on phase points.

Fields are declared either from catalogue expression strings or from Python
callables that receive a :class:`Coords` view. Both routes are evaluated on
:class:`~kcocontact.jet.Jet` values, which gives exact first and second
partials of the declared rule. :func:`fd_check` is the independent
central-difference cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

import numpy as np

from .errors import ArityError, NumericDomainError
from .expressions import Expr
from .jet import Jet
from .phase import LAGRANGIAN, SIDES, Signature, as_flat
from .tolerances import DEFAULTS


class Coords:
    """Per-coordinate values handed to a field rule.

    ``c.t[a]``, ``c.q[i]``, ``c.fiber[i][a]``, ``c.z[a]``; ``c["ux"]`` looks a
    coordinate up by any of its names.
    """

    def __init__(self, sig, side, values):
        self._sig = sig
        self._side = side
        self.values = values
        self.t = values[sig.t_slice]
        self.q = values[sig.q_slice]
        fib = values[sig.fiber_slice]
        self.fiber = [fib[i * sig.k:(i + 1) * sig.k] for i in range(sig.n)]
        self.z = values[sig.z_slice]

    @property
    def v(self):
        return self.fiber

    p = v

    def __getitem__(self, name):
        return self.values[self._sig.coordinate_names(self._side)[name]]


@dataclass(frozen=True)
class ScalarField:
    """A real function on phase points of a fixed signature."""

    signature: Signature
    rule: Callable[[Coords], Any]
    side: str = LAGRANGIAN
    label: str = ""
    expr: Expr | None = field(default=None, compare=False)
    params: Mapping[str, float] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.side not in SIDES:
            raise ValueError(f"side must be one of {SIDES}, got {self.side!r}")

    @classmethod
    def from_expression(cls, text, signature, side=LAGRANGIAN, params=None, label=""):
        expr = text if isinstance(text, Expr) else Expr(text)
        params = dict(params or {})
        names = signature.coordinate_names(side)
        unknown = expr.free_names - names.keys() - params.keys()
        if unknown:
            raise ArityError(
                f"expression {expr.text!r} uses {sorted(unknown)}, which are neither coordinates of "
                f"a {side} point with k={signature.k}, n={signature.n} nor declared parameters"
            )
        used = [(name, names[name]) for name in sorted(expr.free_names) if name in names]

        def rule(c):
            env = dict(params)
            for name, idx in used:
                env[name] = c.values[idx]
            return expr.evaluate(env)

        return cls(signature, rule, side, label or expr.text, expr, params)

    def dependency_indices(self):
        """Flat indices the expression mentions, or ``None`` for opaque callables."""
        if self.expr is None:
            return None
        names = self.signature.coordinate_names(self.side)
        return {names[n] for n in self.expr.free_names if n in names}

    def __call__(self, x):
        vec = as_flat(x, self.signature)
        with np.errstate(all="ignore"):
            out = self.rule(Coords(self.signature, self.side, list(vec)))
        out = float(out)
        if not np.isfinite(out):
            raise NumericDomainError(f"field {self.label!r} is not finite at {vec}")
        return out

    def _combine(self, other, sign):
        if self.signature != other.signature or self.side != other.side:
            raise ArityError("cannot combine fields of different signature or side")
        a, b = self.rule, other.rule
        if sign > 0:
            rule = lambda c: a(c) + b(c)  # noqa: E731
        else:
            rule = lambda c: a(c) - b(c)  # noqa: E731
        op = "+" if sign > 0 else "-"
        expr = None
        if self.expr is not None and other.expr is not None:
            expr = Expr(f"({self.expr.text}) {op} ({other.expr.text})")
        params = {**self.params, **other.params}
        return ScalarField(self.signature, rule, self.side, f"({self.label}) {op} ({other.label})", expr, params)

    def __add__(self, other):
        return self._combine(other, +1)

    def __sub__(self, other):
        return self._combine(other, -1)


@dataclass(frozen=True)
class Derivative1:
    value: float
    gradient: np.ndarray


@dataclass(frozen=True)
class Derivative2:
    value: float
    gradient: np.ndarray
    hessian: np.ndarray


def _propagate(f, values, order):
    """Run ``f`` on jets seeded at ``values`` (shape ``(N,) + S``)."""
    sig = f.signature
    if values.shape[:1] != (sig.dim,):
        raise ArityError(f"field {f.label!r} expects {sig.dim} coordinates, got {values.shape[0]}")
    jets = Jet.seed(values, order)
    with np.errstate(all="ignore"):
        out = f.rule(Coords(sig, f.side, jets))
    if not isinstance(out, Jet):
        tail = values.shape[1:]
        const = np.broadcast_to(np.asarray(out, dtype=float), tail)
        hess = np.zeros((sig.dim, sig.dim) + tail) if order >= 2 else None
        out = Jet(np.array(const), np.zeros((sig.dim,) + tail), hess)
    parts = [out.val, out.grad] + ([out.hess] if order >= 2 else [])
    if not all(np.isfinite(p).all() for p in parts):
        raise NumericDomainError(f"non-finite derivative of field {f.label!r}")
    return out


def eval_grad(f, x):
    """Value and exact gradient of ``f`` at a point."""
    vec = as_flat(x, f.signature)
    out = _propagate(f, vec, order=1)
    return Derivative1(float(out.val), np.array(out.grad, dtype=float))


def eval_hess(f, x):
    """Value, gradient and exact symmetric Hessian of ``f`` at a point."""
    vec = as_flat(x, f.signature)
    out = _propagate(f, vec, order=2)
    return Derivative2(float(out.val), np.array(out.grad, dtype=float), np.array(out.hess, dtype=float))


def grad_batch(f, points):
    """Values ``(m,)`` and gradients ``(m, N)`` at the rows of ``points``."""
    pts = np.asarray(points, dtype=float)
    out = _propagate(f, pts.T, order=1)
    return np.asarray(out.val, dtype=float), np.moveaxis(np.asarray(out.grad), 0, -1)


def hess_batch(f, points):
    """Values, gradients and Hessians ``(m, N, N)`` at the rows of ``points``."""
    pts = np.asarray(points, dtype=float)
    out = _propagate(f, pts.T, order=2)
    hess = np.moveaxis(np.asarray(out.hess), (0, 1), (-2, -1))
    return np.asarray(out.val, dtype=float), np.moveaxis(np.asarray(out.grad), 0, -1), hess


def partials(f, values, wrt, order=1):
    """Value and derivatives of ``f`` along the single coordinate ``wrt``.

    ``values`` holds one entry per flat coordinate; entries may be arrays
    that broadcast together, which evaluates a whole grid in one pass.
    Returns ``(value, d1)`` or ``(value, d1, d2)``.
    """
    sig = f.signature
    if len(values) != sig.dim:
        raise ArityError(f"field {f.label!r} expects {sig.dim} coordinates, got {len(values)}")
    args = [np.asarray(v, dtype=float) for v in values]
    tail = np.broadcast_shapes(*(a.shape for a in args))
    x = np.broadcast_to(args[wrt], tail)
    args[wrt] = Jet(x, np.ones((1,) + tail), np.zeros((1, 1) + tail) if order >= 2 else None)
    with np.errstate(all="ignore"):
        out = f.rule(Coords(sig, f.side, args))
    if isinstance(out, Jet):
        parts = [np.broadcast_to(out.val, tail), np.broadcast_to(out.grad[0], tail)]
        if order >= 2:
            parts.append(np.broadcast_to(out.hess[0, 0], tail))
    else:
        parts = [np.broadcast_to(np.asarray(out, dtype=float), tail)]
        parts += [np.zeros(tail)] * order
    if not all(np.isfinite(p).all() for p in parts):
        raise NumericDomainError(f"non-finite derivative of field {f.label!r}")
    return tuple(np.array(p, dtype=float) for p in parts)


def _discrepancy(exact, approx):
    # relative where the derivative is large, absolute near zero
    return float(np.max(np.abs(exact - approx) / np.maximum(1.0, np.abs(exact))))


def fd_check(f, x, step=DEFAULTS.fd_step):
    """Max relative gap between the propagated gradient and central differences."""
    if not step > 0:
        raise ValueError(f"finite-difference step must be positive, got {step}")
    vec = as_flat(x, f.signature)
    exact = eval_grad(f, vec).gradient
    approx = np.empty_like(exact)
    for a in range(vec.size):
        e = np.zeros_like(vec)
        e[a] = step
        approx[a] = (f(vec + e) - f(vec - e)) / (2 * step)
    return _discrepancy(exact, approx)


def fd_check_hessian(f, x, step=DEFAULTS.fd_step):
    """Same comparison one order up: Hessian against differences of the gradient."""
    if not step > 0:
        raise ValueError(f"finite-difference step must be positive, got {step}")
    vec = as_flat(x, f.signature)
    exact = eval_hess(f, vec).hessian
    approx = np.empty_like(exact)
    for a in range(vec.size):
        e = np.zeros_like(vec)
        e[a] = step
        approx[:, a] = (eval_grad(f, vec + e).gradient - eval_grad(f, vec - e).gradient) / (2 * step)
    return _discrepancy(exact, approx)
