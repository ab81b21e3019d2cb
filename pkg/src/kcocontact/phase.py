"""Coordinates on the phase bundles.

A point carries ``(t^a, q^i, fiber^i_a, z^a)``: the fiber block holds the
velocities ``v^i_a`` on the Lagrangian side and the momenta ``p_i^a`` on the
Hamiltonian side. Flattened vectors use the order t, q, fiber (row-major in
``(i, a)``), z. Points of a k-contact manifold have no t block.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ArityError

LAGRANGIAN = "lagrangian"
HAMILTONIAN = "hamiltonian"
SIDES = (LAGRANGIAN, HAMILTONIAN)


@dataclass(frozen=True)
class Signature:
    """Counts of independent variables ``k`` and configuration coordinates ``n``."""

    k: int
    n: int
    with_time: bool = True

    def __post_init__(self):
        if self.k < 1 or self.n < 1:
            raise ArityError(f"signature needs k >= 1 and n >= 1, got k={self.k}, n={self.n}")

    @property
    def kt(self):
        return self.k if self.with_time else 0

    @property
    def dim(self):
        return self.kt + self.n + self.n * self.k + self.k

    @property
    def t_slice(self):
        return slice(0, self.kt)

    @property
    def q_slice(self):
        return slice(self.kt, self.kt + self.n)

    @property
    def fiber_slice(self):
        start = self.kt + self.n
        return slice(start, start + self.n * self.k)

    @property
    def z_slice(self):
        start = self.kt + self.n + self.n * self.k
        return slice(start, start + self.k)

    def t_index(self, a):
        if not self.with_time:
            raise ArityError("k-contact signature has no t coordinates")
        return a

    def q_index(self, i):
        return self.kt + i

    def fiber_index(self, i, a):
        return self.kt + self.n + i * self.k + a

    def z_index(self, a):
        return self.kt + self.n + self.n * self.k + a

    def without_time(self):
        return Signature(self.k, self.n, with_time=False)

    def with_time_block(self):
        return Signature(self.k, self.n, with_time=True)

    def coordinate_names(self, side):
        """Map every accepted coordinate name to its flat index.

        Generic names ``t1, q1, v1_1 | p1_1, z1`` always exist. Aliases:
        ``t, q, v|p, z`` when k = n = 1, and the string names
        ``t, x, u, ut, ux | pt, px, zt, zx`` when k = 2, n = 1.
        """
        if side not in SIDES:
            raise ValueError(f"unknown side {side!r}")
        fib = "v" if side == LAGRANGIAN else "p"
        names = {}
        if self.with_time:
            for a in range(self.k):
                names[f"t{a + 1}"] = self.t_index(a)
        for i in range(self.n):
            names[f"q{i + 1}"] = self.q_index(i)
            for a in range(self.k):
                names[f"{fib}{i + 1}_{a + 1}"] = self.fiber_index(i, a)
        for a in range(self.k):
            names[f"z{a + 1}"] = self.z_index(a)

        if self.k == 1:
            if self.with_time:
                names["t"] = self.t_index(0)
            names["z"] = self.z_index(0)
            for i in range(self.n):
                names[f"{fib}{i + 1}"] = self.fiber_index(i, 0)
            if self.n == 1:
                names["q"] = self.q_index(0)
                names[fib] = self.fiber_index(0, 0)
        if self.k == 2 and self.n == 1:
            if self.with_time:
                names["t"] = self.t_index(0)
                names["x"] = self.t_index(1)
            names["u"] = self.q_index(0)
            mom = "u" if side == LAGRANGIAN else "p"
            names[f"{mom}t"] = self.fiber_index(0, 0)
            names[f"{mom}x"] = self.fiber_index(0, 1)
            names["zt"] = self.z_index(0)
            names["zx"] = self.z_index(1)
        return names

    def labels(self, side):
        """One canonical label per flat index, for reports."""
        out = [None] * self.dim
        for name, idx in self.coordinate_names(side).items():
            if out[idx] is None:
                out[idx] = name
        return out


@dataclass(frozen=True)
class PhasePoint:
    """A point ``(t, q, fiber, z)``; ``fiber`` has shape ``(n, k)``."""

    t: np.ndarray
    q: np.ndarray
    fiber: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        for name in ("t", "q", "fiber", "z"):
            arr = np.asarray(getattr(self, name), dtype=float)
            object.__setattr__(self, name, arr)
        if self.t.ndim != 1 or self.q.ndim != 1 or self.z.ndim != 1 or self.fiber.ndim != 2:
            raise ArityError("PhasePoint blocks must be t[k], q[n], fiber[n, k], z[k]")
        n, k = self.fiber.shape
        if self.q.shape != (n,) or self.z.shape != (k,) or self.t.shape not in ((k,), (0,)):
            raise ArityError(
                f"inconsistent PhasePoint shapes t{self.t.shape} q{self.q.shape} "
                f"fiber{self.fiber.shape} z{self.z.shape}"
            )
        if not all(np.all(np.isfinite(a)) for a in (self.t, self.q, self.fiber, self.z)):
            raise ArityError("PhasePoint entries must be finite")

    @cached_property
    def signature(self):
        n, k = self.fiber.shape
        return Signature(k, n, with_time=self.t.shape[0] == k)

    def flat(self):
        return np.concatenate([self.t, self.q, self.fiber.ravel(), self.z])

    @classmethod
    def from_flat(cls, sig, vec):
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (sig.dim,):
            raise ArityError(f"expected {sig.dim} coordinates, got shape {vec.shape}")
        return cls(
            t=vec[sig.t_slice],
            q=vec[sig.q_slice],
            fiber=vec[sig.fiber_slice].reshape(sig.n, sig.k),
            z=vec[sig.z_slice],
        )

    def replace(self, **blocks):
        data = dict(t=self.t, q=self.q, fiber=self.fiber, z=self.z)
        data.update(blocks)
        return PhasePoint(**data)

    def drop_time(self):
        return PhasePoint(np.empty(0), self.q, self.fiber, self.z)

    def attach_time(self, t):
        return PhasePoint(np.asarray(t, dtype=float), self.q, self.fiber, self.z)


def as_flat(x, sig):
    """Accept a PhasePoint or a flat vector and return the flat vector."""
    if isinstance(x, PhasePoint):
        if x.signature != sig:
            raise ArityError(f"point signature {x.signature} does not match {sig}")
        return x.flat()
    vec = np.asarray(x, dtype=float)
    if vec.shape[-1:] != (sig.dim,):
        raise ArityError(f"expected {sig.dim} coordinates, got shape {vec.shape}")
    return vec


def random_points(sig, count, rng, ranges=None, side=None):
    """Uniform samples; ``ranges`` maps coordinate names to ``(low, high)``."""
    low = np.full(sig.dim, -1.0)
    high = np.full(sig.dim, 1.0)
    if ranges:
        names = sig.coordinate_names(side)
        for name, (lo, hi) in ranges.items():
            if name not in names:
                raise ArityError(f"unknown coordinate name {name!r} in sample ranges")
            low[names[name]], high[names[name]] = lo, hi
    flat = rng.uniform(low, high, size=(count, sig.dim))
    return [PhasePoint.from_flat(sig, row) for row in flat]
