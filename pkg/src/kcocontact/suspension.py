"""Autonomous cocontact systems and their time-free k-contact counterparts.

Dropping the time block of an autonomous Hamiltonian gives a k-contact
Hamiltonian; k-vector fields go back up by adding unit time components, and
sections by attaching their grid coordinates as times.
"""

from __future__ import annotations

import numpy as np

from .autodiff import Coords, ScalarField, grad_batch
from .dynamics import GridSection, ProlongedSection, hdw_residual, hdw_residual_field
from .errors import ArityError, NotAutonomousError
from .hamiltonian import HamiltonianSystem, KVectorCoeffs, canonical_kvector, verify_kvector
from .phase import HAMILTONIAN, as_flat
from .tolerances import DEFAULTS


class KContactSystem(HamiltonianSystem):
    """A Hamiltonian on the time-free canonical model."""

    def __init__(self, h, tol=DEFAULTS):
        if h.signature.with_time:
            raise ArityError("a k-contact Hamiltonian takes no time coordinates")
        super().__init__(h, tol)


def is_autonomous(hsys, samples, tol=DEFAULTS.autonomy):
    """``|∂h/∂t^a| <= tol`` at every sample."""
    sig = hsys.signature
    if not sig.with_time:
        return True
    pts = np.array([as_flat(x, sig) for x in samples], dtype=float).reshape(-1, sig.dim)
    if pts.shape[0] == 0:
        return True
    _, grads = grad_batch(hsys.h, pts)
    return bool(np.max(np.abs(grads[:, sig.t_slice])) <= tol)


def project(hsys, samples, tol=DEFAULTS.autonomy):
    """The k-contact Hamiltonian ``h0(x0) = h(0, x0)`` of an autonomous system."""
    if not is_autonomous(hsys, samples, tol):
        raise NotAutonomousError(f"∂h/∂t exceeds {tol:g} at the sampled points")
    h = hsys.h
    sig = hsys.signature
    sig0 = sig.without_time()
    if h.expr is not None:
        frozen = {name: 0.0 for name, idx in sig.coordinate_names(HAMILTONIAN).items() if idx < sig.kt}
        h0 = ScalarField.from_expression(h.expr, sig0, HAMILTONIAN, {**h.params, **frozen}, label=h.label)
    else:
        zeros = [0.0] * sig.kt

        def rule(c):
            return h.rule(Coords(sig, HAMILTONIAN, zeros + list(c.values)))

        h0 = ScalarField(sig0, rule, HAMILTONIAN, h.label)
    return KContactSystem(h0, hsys.tol)


def pullback(csys):
    """The cocontact Hamiltonian ``h(t, x0) = h0(x0)``."""
    h0 = csys.h
    sig = h0.signature.with_time_block()
    kt = sig.k
    if h0.expr is not None:
        h = ScalarField.from_expression(h0.expr, sig, HAMILTONIAN, h0.params, label=h0.label)
    else:

        def rule(c):
            return h0.rule(Coords(h0.signature, HAMILTONIAN, list(c.values)[kt:]))

        h = ScalarField(sig, rule, HAMILTONIAN, h0.label)
    return HamiltonianSystem(h, csys.tol)


def suspend(coeffs0, x0=None):
    """Lift a k-contact k-vector field: add ``∂/∂t^a`` to leg ``a``."""
    if coeffs0.A is not None:
        raise ArityError("coefficients already carry a time block")
    k = coeffs0.k
    return KVectorCoeffs(np.eye(k), coeffs0.B.copy(), coeffs0.C.copy(), coeffs0.D.copy())


def kcontact_canonical_kvector(csys, x0):
    return canonical_kvector(csys, x0)


def kcontact_residual(csys, candidate, where=None, tol=DEFAULTS.kvector_residual):
    """Residuals of the k-contact field equations.

    ``candidate`` is either :class:`KVectorCoeffs` at the point ``where`` or a
    :class:`ProlongedSection` (``where`` an interior node, or ``None`` for
    the whole interior).
    """
    if isinstance(candidate, KVectorCoeffs):
        return verify_kvector(csys, candidate, where, tol)
    if isinstance(candidate, ProlongedSection):
        if candidate.section.with_time:
            raise ArityError("k-contact residuals need a section without a time block")
        if where is None:
            return hdw_residual_field(csys, candidate)
        return hdw_residual(csys, candidate, where)
    raise TypeError(f"cannot evaluate k-contact residuals of {type(candidate).__name__}")


def roundtrip_sections(section):
    """Drop the time block of a cocontact section, or attach grid times to a contact one."""
    if not isinstance(section, GridSection):
        raise TypeError("expected a GridSection")
    return GridSection(
        section.axes,
        section.q.copy(),
        section.fiber.copy(),
        section.z.copy(),
        with_time=not section.with_time,
    )
