import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kcocontact import HAMILTONIAN, LAGRANGIAN, KVectorCoeffs, ScalarField, Signature, canonical_kvector, hdw_determined, verify_kvector
from kcocontact.errors import ArityError
from kcocontact.geometry import solve_reeb
from kcocontact.hamiltonian import (
    HamiltonianSystem,
    gauge_directions,
    h_from_lagrangian,
    lie_derivative_residual,
)
from kcocontact.lagrangian import LagrangianSystem

from support import K1, WAVE, points, string_hamiltonian, string_lagrangian

DAMPED_STRING = string_hamiltonian("sin(t)*u", "x")


def ham(text, sig=K1):
    return HamiltonianSystem(ScalarField.from_expression(text, sig, HAMILTONIAN))


def test_string_determined_data():
    for y in points(WAVE, 10, 1, side=HAMILTONIAN):
        t, x, u = y.t[0], y.t[1], y.q[0]
        pt, px = y.fiber[0]
        zt = y.z[0]
        det = hdw_determined(DAMPED_STRING, y)
        assert np.array_equal(det.A, np.eye(2))
        assert np.allclose(det.B, [[pt], [-px]], atol=1e-15)
        assert det.trace_c[0] == pytest.approx(-np.sin(t) - x * pt, abs=1e-14)
        assert det.trace_d == pytest.approx(0.5 * pt**2 - 0.5 * px**2 - np.sin(t) * u - x * zt, abs=1e-14)


def test_k1_kvector_is_fully_determined():
    hsys = ham("0.5*p**2 + 0.5*q**2 + 0.3*z - cos(t)*q")
    y = np.array([0.4, 0.7, -0.2, 0.1])
    c = canonical_kvector(hsys, y)
    t, q, p, z = y
    assert c.B[0, 0] == pytest.approx(p)
    assert c.C[0, 0, 0] == pytest.approx(-(q - np.cos(t) + 0.3 * p))
    assert c.D[0, 0] == pytest.approx(p * p - (0.5 * p**2 + 0.5 * q**2 + 0.3 * z - np.cos(t) * q))
    assert gauge_directions(hsys.forms(y)).shape[0] == 0


def test_string_uniform_trace_split():
    for y in points(WAVE, 10, 2, side=HAMILTONIAN):
        det = hdw_determined(DAMPED_STRING, y)
        c = canonical_kvector(DAMPED_STRING, y)
        assert c.C[0, 0, 0] == c.C[1, 0, 1] == pytest.approx(det.trace_c[0] / 2)
        assert c.C[0, 0, 1] == c.C[1, 0, 0] == 0.0
        assert verify_kvector(DAMPED_STRING, c, y).passed


@pytest.mark.parametrize("sig", [Signature(1, 2), Signature(2, 2), Signature(3, 1)])
def test_canonical_kvector_general_signatures(sig):
    names = sorted(sig.coordinate_names(HAMILTONIAN))
    text = " + ".join(f"0.3*sin({a})*{b}" for a, b in zip(names, names[1:] + names[:1]))
    hsys = ham(text + " + " + " + ".join(f"0.5*{n}**2" for n in names if n.startswith("p")), sig)
    for y in points(sig, 5, 3, side=HAMILTONIAN):
        rep = verify_kvector(hsys, canonical_kvector(hsys, y), y)
        assert rep.passed, rep.to_dict()


def test_perturbed_b_shows_in_first_equation():
    y = points(WAVE, 1, 4, side=HAMILTONIAN)[0]
    c = canonical_kvector(DAMPED_STRING, y)
    bad = KVectorCoeffs(c.A, c.B + 1e-3, c.C, c.D)
    rep = verify_kvector(DAMPED_STRING, bad, y)
    assert 1e-4 <= rep.deta_residual <= 1e-2
    assert not rep.passed


def test_reeb_compensated_modification_is_still_a_solution():
    for y in points(WAVE, 10, 5, side=HAMILTONIAN):
        c = canonical_kvector(DAMPED_STRING, y)
        _, rz = solve_reeb(DAMPED_STRING.forms(y))
        legs = c.legs()
        r = 0.7
        legs[0] += r * rz[0]
        legs[1] -= r * rz[1]
        moved = KVectorCoeffs.from_legs(legs, 2, 1)
        assert verify_kvector(DAMPED_STRING, moved, y).passed


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_gauge_directions_leave_residuals_unchanged(seed):
    rng = np.random.default_rng(seed)
    y = rng.uniform(-2, 2, WAVE.dim)
    forms = DAMPED_STRING.forms(y)
    gauge = gauge_directions(forms)
    assert gauge.shape[0] > 0
    c = canonical_kvector(DAMPED_STRING, y)
    legs = c.legs() + np.tensordot(rng.normal(size=gauge.shape[0]), gauge, axes=1)
    rep = verify_kvector(DAMPED_STRING, KVectorCoeffs.from_legs(legs, 2, 1), y)
    assert rep.passed, rep.to_dict()


def test_h_from_lagrangian_examples():
    free = LagrangianSystem(ScalarField.from_expression("0.5*v**2", K1, LAGRANGIAN))
    assert h_from_lagrangian(free, [0, 0, 2.0, 0]) == pytest.approx(2.0, abs=1e-12)
    lsys = string_lagrangian("0.5*ux**2", "sin(t)*u", "x")
    for y in points(WAVE, 10, 6, side=HAMILTONIAN):
        assert h_from_lagrangian(lsys, y) == pytest.approx(DAMPED_STRING.h(y), abs=1e-9)


def test_lie_derivative_reformulation():
    for y in points(WAVE, 5, 7, side=HAMILTONIAN):
        assert lie_derivative_residual(DAMPED_STRING, y) <= 1e-6
    lsys = string_lagrangian("(1 + t**2)*0.5*ux**2", "sin(t)*u", "0.1")
    for x in points(WAVE, 3, 8):
        assert lie_derivative_residual(lsys, x, kvector=lambda s, p: s.canonical_kvector(p)) <= 1e-6


def test_kvector_shape_validation():
    with pytest.raises(ArityError):
        KVectorCoeffs(None, np.zeros((2, 1)), np.zeros((2, 1, 1)), np.zeros((2, 2)))
    with pytest.raises(ArityError):
        KVectorCoeffs(None, np.zeros((1, 1)), np.full((1, 1, 1), np.nan), np.zeros((1, 1)))
    c = canonical_kvector(DAMPED_STRING, np.zeros(7))
    with pytest.raises(ArityError):
        verify_kvector(ham("0.5*p**2"), c, np.zeros(4))
    rt = KVectorCoeffs.from_legs(c.legs(), 2, 1)
    assert np.array_equal(rt.legs(), c.legs())
    assert set(c.to_dict()) == {"A", "B", "C", "D"}
