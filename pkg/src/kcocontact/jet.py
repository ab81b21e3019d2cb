"""Second-order forward-mode jets.

A :class:`Jet` carries a value together with its gradient and (optionally)
Hessian with respect to ``N`` seeded input directions. Values may be numpy
arrays of any shape ``S``; the gradient then has shape ``(N,) + S`` and the
Hessian ``(N, N) + S``, which lets one propagation sweep a whole grid.

Hessian updates only ever add terms of the form ``g ⊗ g`` or ``M + Mᵀ``, so
the propagated Hessian is symmetric bit for bit.
"""

from __future__ import annotations

import numpy as np


def _outer(a, b):
    return a[:, None] * b[None, :]


class Jet:
    __slots__ = ("val", "grad", "hess")
    __array_ufunc__ = None

    def __init__(self, val, grad, hess=None):
        self.val = val
        self.grad = grad
        self.hess = hess

    @classmethod
    def seed(cls, values, order=2):
        """Independent variables: one jet per entry of ``values`` (shape ``(N,) + S``)."""
        values = np.asarray(values, dtype=float)
        n = values.shape[0]
        tail = values.shape[1:]
        eye = np.eye(n)
        if tail:
            eye = eye.reshape((n, n) + (1,) * len(tail))
        out = []
        for a in range(n):
            grad = np.broadcast_to(eye[a], (n,) + tail) if tail else eye[a]
            hess = np.zeros((n, n) + tail) if order >= 2 else None
            out.append(cls(values[a], grad, hess))
        return out

    def __repr__(self):
        return f"Jet(val={self.val!r})"

    # helpers -------------------------------------------------------------

    def _lift(self, c):
        return Jet(c, np.zeros_like(self.grad), None if self.hess is None else np.zeros_like(self.hess))

    def _chain(self, f0, f1, f2):
        grad = f1 * self.grad
        hess = None
        if self.hess is not None:
            hess = f1 * self.hess + f2 * _outer(self.grad, self.grad)
        return Jet(f0, grad, hess)

    # arithmetic ----------------------------------------------------------

    def __neg__(self):
        return Jet(-self.val, -self.grad, None if self.hess is None else -self.hess)

    def __pos__(self):
        return self

    def __add__(self, o):
        if isinstance(o, Jet):
            hess = None if self.hess is None else self.hess + o.hess
            return Jet(self.val + o.val, self.grad + o.grad, hess)
        return Jet(self.val + o, self.grad, self.hess)

    __radd__ = __add__

    def __sub__(self, o):
        if isinstance(o, Jet):
            hess = None if self.hess is None else self.hess - o.hess
            return Jet(self.val - o.val, self.grad - o.grad, hess)
        return Jet(self.val - o, self.grad, self.hess)

    def __rsub__(self, o):
        return (-self) + o

    def __mul__(self, o):
        if isinstance(o, Jet):
            grad = self.val * o.grad + o.val * self.grad
            hess = None
            if self.hess is not None:
                m = _outer(self.grad, o.grad)
                hess = self.val * o.hess + o.val * self.hess + (m + np.swapaxes(m, 0, 1))
            return Jet(self.val * o.val, grad, hess)
        return Jet(self.val * o, self.grad * o, None if self.hess is None else self.hess * o)

    __rmul__ = __mul__

    def reciprocal(self):
        v = self.val
        return self._chain(1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v))

    def __truediv__(self, o):
        if isinstance(o, Jet):
            return self * o.reciprocal()
        return self * (1.0 / o)

    def __rtruediv__(self, o):
        return self.reciprocal() * o

    def __pow__(self, p):
        if isinstance(p, Jet):
            return exp(p * log(self))
        if float(p) == int(p):
            p = int(p)
            if p == 0:
                return self._lift(np.ones_like(self.val))
            if p == 1:
                return self
            if p == 2:
                return self * self
            if p > 2:
                v = self.val
                return self._chain(v**p, p * v ** (p - 1), p * (p - 1) * v ** (p - 2))
            return (self ** (-p)).reciprocal()
        v = self.val
        return self._chain(v**p, p * v ** (p - 1), p * (p - 1) * v ** (p - 2))

    def __rpow__(self, c):
        return exp(self * np.log(c))


# catalogue functions: dispatch on Jet, fall back to numpy -----------------


def sin(x):
    if isinstance(x, Jet):
        s, c = np.sin(x.val), np.cos(x.val)
        return x._chain(s, c, -s)
    return np.sin(x)


def cos(x):
    if isinstance(x, Jet):
        s, c = np.sin(x.val), np.cos(x.val)
        return x._chain(c, -s, -c)
    return np.cos(x)


def tan(x):
    if isinstance(x, Jet):
        t = np.tan(x.val)
        sec2 = 1.0 + t * t
        return x._chain(t, sec2, 2.0 * t * sec2)
    return np.tan(x)


def exp(x):
    if isinstance(x, Jet):
        e = np.exp(x.val)
        return x._chain(e, e, e)
    return np.exp(x)


def log(x):
    if isinstance(x, Jet):
        v = x.val
        return x._chain(np.log(v), 1.0 / v, -1.0 / (v * v))
    return np.log(x)


def sqrt(x):
    if isinstance(x, Jet):
        r = np.sqrt(x.val)
        return x._chain(r, 0.5 / r, -0.25 / (r * x.val))
    return np.sqrt(x)


def sinh(x):
    if isinstance(x, Jet):
        s, c = np.sinh(x.val), np.cosh(x.val)
        return x._chain(s, c, s)
    return np.sinh(x)


def cosh(x):
    if isinstance(x, Jet):
        s, c = np.sinh(x.val), np.cosh(x.val)
        return x._chain(c, s, c)
    return np.cosh(x)


def tanh(x):
    if isinstance(x, Jet):
        t = np.tanh(x.val)
        d = 1.0 - t * t
        return x._chain(t, d, -2.0 * t * d)
    return np.tanh(x)
