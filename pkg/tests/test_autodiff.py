import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kcocontact import HAMILTONIAN, LAGRANGIAN, PhasePoint, ScalarField, Signature, eval_grad, eval_hess, fd_check
from kcocontact.autodiff import fd_check_hessian, grad_batch, hess_batch, partials
from kcocontact import jet
from kcocontact.errors import ArityError, ExpressionError, NumericDomainError

from support import K1, WAVE, random_fields

finite = st.floats(-3, 3, allow_nan=False, allow_infinity=False)


def test_half_square_value_and_slope():
    f = ScalarField.from_expression("0.5*v**2", K1)
    d = eval_grad(f, [0.0, 0.0, 3.0, 0.0])
    assert d.value == 4.5
    assert d.gradient[2] == 3.0
    assert eval_hess(f, [0.0, 0.0, 3.0, 0.0]).hessian[2, 2] == 1.0


def test_string_lagrangian_z_slope_is_minus_damping():
    # L = ½u_t² − ½u_x² − x z^t at (t, x, u, ut, ux, zt, zx) = (0, 2, 0, 1, 1, 5, 0)
    f = ScalarField.from_expression("0.5*ut**2 - 0.5*ux**2 - x*zt", WAVE)
    d = eval_grad(f, [0, 2, 0, 1, 1, 5, 0])
    assert d.gradient[WAVE.z_index(0)] == -2.0


def test_string_fiber_hessian_is_diag_one_minus_one():
    f = ScalarField.from_expression("0.5*ut**2 - 0.5*ux**2 - sin(t)*u - 0.1*zt", WAVE)
    H = eval_hess(f, np.random.default_rng(0).uniform(-1, 1, 7)).hessian
    sl = WAVE.fiber_slice
    assert np.array_equal(H[sl, sl], np.diag([1.0, -1.0]))


def test_holonomic_damping_has_no_z_velocity_block():
    f = ScalarField.from_expression("0.5*ut**2 - (1+t**2)*0.5*ux**2 - cos(x)*u*zt - zx*u**2", WAVE)
    H = eval_hess(f, np.random.default_rng(1).uniform(-1, 1, 7)).hessian
    assert np.all(H[WAVE.z_slice, WAVE.fiber_slice] == 0.0)


def test_fd_check_quadratic_is_roundoff_level():
    f = ScalarField.from_expression("0.5*v**2", K1)
    assert fd_check(f, [0.3, -0.2, 1.7, 0.1], 1e-5) <= 1e-9


def test_fd_check_sine_forcing():
    f = ScalarField.from_expression("sin(t)*u**2", WAVE)
    x = np.random.default_rng(2).uniform(-1, 1, 7)
    assert fd_check(f, x, 1e-5) <= 1e-6


def test_fd_check_rejects_zero_step():
    f = ScalarField.from_expression("0.5*v**2", K1)
    with pytest.raises(ValueError):
        fd_check(f, [0, 0, 1, 0], 0.0)


@pytest.mark.parametrize("field, x", random_fields(25, seed=11))
def test_random_fields_gradient_and_hessian_match_differences(field, x):
    assert fd_check(field, x) <= 1e-6
    assert fd_check_hessian(field, x) <= 1e-5


@settings(max_examples=50, deadline=None)
@given(st.lists(finite, min_size=7, max_size=7))
def test_hessian_exactly_symmetric(values):
    f = ScalarField.from_expression("sin(t*ux)*exp(0.2*u) + ut**3*zx/(2 + x**2) + cos(zt*u)", WAVE)
    H = eval_hess(f, values).hessian
    assert np.array_equal(H, H.T)


def test_callable_rule_matches_expression():
    f_expr = ScalarField.from_expression("q**2*p + sin(t)*z", K1, HAMILTONIAN)
    f_call = ScalarField(K1, lambda c: c.q[0] ** 2 * c.p[0][0] + jet.sin(c["t"]) * c.z[0], HAMILTONIAN)
    x = [0.4, -0.3, 1.2, 0.7]
    a, b = eval_hess(f_expr, x), eval_hess(f_call, x)
    assert a.value == pytest.approx(b.value, abs=1e-15)
    assert np.allclose(a.gradient, b.gradient, atol=1e-15)
    assert np.allclose(a.hessian, b.hessian, atol=1e-15)


def test_batch_and_partials_agree_with_pointwise():
    f = ScalarField.from_expression("sin(t)*u**2 + ux**4/4 - ut*zt", WAVE)
    pts = np.random.default_rng(3).uniform(-1, 1, (5, 7))
    vals, grads, hess = hess_batch(f, pts)
    vals1, grads1 = grad_batch(f, pts)
    for m, x in enumerate(pts):
        d = eval_hess(f, x)
        assert vals[m] == pytest.approx(d.value, abs=1e-14)
        assert np.allclose(grads[m], d.gradient, atol=1e-14)
        assert np.allclose(grads1[m], d.gradient, atol=1e-14)
        assert np.allclose(hess[m], d.hessian, atol=1e-14)
    val, d1, d2 = partials(f, list(pts.T), WAVE.fiber_index(0, 1), order=2)
    for m, x in enumerate(pts):
        d = eval_hess(f, x)
        i = WAVE.fiber_index(0, 1)
        assert d1[m] == pytest.approx(d.gradient[i], abs=1e-14)
        assert d2[m] == pytest.approx(d.hessian[i, i], abs=1e-14)


def test_arity_and_domain_errors():
    f = ScalarField.from_expression("0.5*v**2", K1)
    with pytest.raises(ArityError):
        eval_grad(f, [1.0, 2.0])
    with pytest.raises(ArityError):
        eval_grad(f, PhasePoint([0.0, 0.0], [0.0], [[1.0, 1.0]], [0.0, 0.0]))
    g = ScalarField.from_expression("log(q)", K1)
    with pytest.raises(NumericDomainError):
        eval_grad(g, [0.0, -1.0, 0.0, 0.0])
    with pytest.raises(ArityError):
        ScalarField.from_expression("ux**2", K1)
    with pytest.raises(ExpressionError):
        ScalarField.from_expression("__import__('os')", K1)


def test_signature_names_and_sides():
    names = Signature(2, 1).coordinate_names(HAMILTONIAN)
    assert [names[n] for n in ("t", "x", "u", "pt", "px", "zt", "zx")] == list(range(7))
    names = Signature(2, 1).coordinate_names(LAGRANGIAN)
    assert names["ux"] == names["v1_2"] == 4
