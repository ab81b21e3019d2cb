"""Shared builders for the test suite: the damped string family and random
catalogue fields."""

import numpy as np

from kcocontact import HAMILTONIAN, LAGRANGIAN, ScalarField, Signature
from kcocontact.hamiltonian import HamiltonianSystem
from kcocontact.lagrangian import LagrangianSystem, assemble_holonomic
from kcocontact.phase import random_points

WAVE = Signature(2, 1)
K1 = Signature(1, 1)


def string_lagrangian(strain="0.5*ux**2", potential="0", damping="0", params=None):
    """Holonomic-damping string: kinetic ``½u_t² − W − V``, damping ``−c(x) z^t``."""
    kinetic = ScalarField.from_expression(f"0.5*ut**2 - ({strain}) - ({potential})", WAVE, LAGRANGIAN, params)
    damp = ScalarField.from_expression(f"-({damping})*zt", WAVE, LAGRANGIAN, params)
    return assemble_holonomic(kinetic, damp)


def string_lagrangian_flat(strain="0.5*ux**2", potential="0", damping="0"):
    """The same Lagrangian as a single expression, without the decomposition."""
    text = f"0.5*ut**2 - ({strain}) - ({potential}) - ({damping})*zt"
    return LagrangianSystem(ScalarField.from_expression(text, WAVE, LAGRANGIAN))


def string_hamiltonian(potential="0", damping="0"):
    """Hand-derived Hamiltonian of the quadratic-strain string."""
    text = f"0.5*pt**2 - 0.5*px**2 + ({potential}) + ({damping})*zt"
    return HamiltonianSystem(ScalarField.from_expression(text, WAVE, HAMILTONIAN))


def points(sig, count, seed, ranges=None, side=LAGRANGIAN):
    return random_points(sig, count, np.random.default_rng(seed), ranges, side)


# random catalogue fields -------------------------------------------------------

_UNARY = ("sin({})", "cos({})", "exp(0.3*{})", "1/(2 + ({})**2)", "tanh({})", "sqrt(3 + ({})**2)")


def random_expression(rng, names, terms=4):
    """A sum of products of catalogue primitives over ``names``."""
    out = []
    for _ in range(terms):
        c = rng.uniform(-2, 2)
        a, b = rng.choice(names, size=2)
        kind = rng.integers(4)
        if kind == 0:
            out.append(f"{c:.6f}*{a}**{int(rng.integers(1, 4))}*{b}")
        elif kind == 1:
            out.append(f"{c:.6f}*" + _UNARY[rng.integers(len(_UNARY))].format(f"{a} - {b}"))
        elif kind == 2:
            inner = _UNARY[rng.integers(len(_UNARY))].format(a)
            out.append(f"{c:.6f}*{b}*{inner}")
        else:
            out.append(f"{c:.6f}*{a}/(1.5 + cos({b}))")
    return " + ".join(out)


def random_fields(count, seed):
    """``count`` pairs ``(field, point)`` over varied signatures and sides."""
    rng = np.random.default_rng(seed)
    sigs = [Signature(1, 1), Signature(2, 1), Signature(1, 2), Signature(2, 2), Signature(3, 1)]
    out = []
    for m in range(count):
        sig = sigs[m % len(sigs)]
        side = (LAGRANGIAN, HAMILTONIAN)[m % 2]
        names = sorted(sig.coordinate_names(side))
        text = random_expression(rng, names)
        field = ScalarField.from_expression(text, sig, side)
        x = rng.uniform(-1, 1, sig.dim)
        out.append((field, x))
    return out
