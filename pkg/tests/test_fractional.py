import math

import numpy as np
import pytest
from scipy import integrate, special

from fracstein._bases import backend_for, step_pairing
from fracstein._quadrature import composite_rule, gauss_jacobi, singular_end_rule
from fracstein.fractional import (
    BasisSpec,
    FracOrder,
    GridFunction,
    basis_e,
    basis_gram,
    basis_h,
    frac_integral_left,
    frac_integral_right,
    gamma_fn,
    gauss_2f1,
    h_interval_integrals,
    h_values,
    hs_norm,
    hyp2f1,
    hyp2f1_direct_series,
    inner_product,
    parseval_partial_sums,
    uniform_grid,
)
from fracstein.stein import dirac_norm

import frozen

SMOOTH = [
    lambda t: np.exp(t),
    lambda t: np.cos(3 * t) + t**2,
    lambda t: 1.0 / (1.0 + t),
]


# ---------------------------------------------------------------- special functions


def test_gamma_known_values():
    assert gamma_fn(1.0) == 1.0
    assert gamma_fn(0.5) == pytest.approx(math.sqrt(math.pi), rel=1e-14)
    assert gamma_fn(0.75) == pytest.approx(frozen.GAMMA_3_4, rel=1e-14)
    assert gamma_fn(0.75) == pytest.approx(1.2254167, abs=1e-7)


@pytest.mark.parametrize("x", [0.0, -1.5])
def test_gamma_rejects_nonpositive(x):
    with pytest.raises(ValueError):
        gamma_fn(x)


def test_2f1_trivial_cases():
    assert gauss_2f1(0.3, 0.7, 1.9, 0.0) == 1.0
    assert gauss_2f1(0.0, 0.7, 1.9, -3.0) == 1.0


def test_2f1_log_identity_two_routes():
    assert gauss_2f1(1, 1, 2, -1.0) == pytest.approx(math.log(2), abs=1e-13)
    assert hyp2f1_direct_series(1, 1, 2, -1.0) == pytest.approx(frozen.LN2, abs=1e-9)


@pytest.mark.parametrize("z", [-40.0, -3.0, -0.9, -0.4, 0.2, 0.6, 0.9, 0.99])
@pytest.mark.parametrize("abc", [(-0.25, 0.25, 1.25), (0.25, -0.25, 0.75), (0.3, 1.1, 2.4), (-0.75, 1.0, 2.75)])
def test_2f1_against_scipy(abc, z):
    a, b, c = abc
    assert gauss_2f1(a, b, c, z) == pytest.approx(special.hyp2f1(a, b, c, z), rel=1e-11, abs=1e-13)


def test_2f1_vectorised_matches_scalar():
    z = np.linspace(-5, 0.95, 23)
    vec = hyp2f1(-0.25, 0.25, 1.25, z)
    assert np.allclose(vec, [gauss_2f1(-0.25, 0.25, 1.25, v) for v in z], rtol=1e-15, atol=0)


def test_2f1_domain_errors():
    with pytest.raises(ValueError):
        gauss_2f1(0.5, 0.5, -2.0, 0.1)
    with pytest.raises(ValueError):
        gauss_2f1(0.5, 0.5, 1.5, 1.0)


# ---------------------------------------------------------------- quadrature building blocks


@pytest.mark.parametrize("left,right", [(-0.25, 0.0), (0.0, -0.5), (-0.4, -0.3)])
def test_gauss_jacobi_integrates_weighted_polynomials(left, right):
    u, w = gauss_jacobi(12, left, right)
    for k in range(6):
        exact = special.beta(left + 1 + k, right + 1)
        assert np.sum(w * u**k) == pytest.approx(exact, rel=1e-13)


def test_singular_end_rule_integrates_power():
    x, w, d = singular_end_rule(0.0, 1.0, "right", -0.5, with_distance=True)
    exact = math.e * math.sqrt(math.pi) * math.erf(1.0)
    assert np.sum(w * np.exp(x) * d**-0.5) == pytest.approx(exact, rel=1e-13)


def test_composite_rule_resolves_right_power():
    x, w = composite_rule(np.linspace(0, 1, 5), p=16, grade="right")
    assert np.sum(w * (1 - x) ** 0.25) == pytest.approx(1 / 1.25, rel=1e-10)


# ---------------------------------------------------------------- orders and norms


@pytest.mark.parametrize("alpha", sorted(frozen.HS_NORM))
def test_hs_norm_matches_double_integral(alpha):
    assert hs_norm(alpha) == pytest.approx(frozen.HS_NORM[alpha], rel=1e-12)


def test_hs_norm_alpha_one_is_inverse_sqrt2():
    assert hs_norm(1.0) == pytest.approx(1 / math.sqrt(2), rel=1e-15)


def test_hs_norm_rounded_value():
    # a six-digit reference of 0.942310 is off in the sixth digit; the exact value is 0.9422921
    assert hs_norm(0.75) == pytest.approx(0.942310, rel=1e-4)


@pytest.mark.parametrize("alpha", [0.5, 0.3, FracOrder(0.1)])
def test_hs_norm_rejects_small_order(alpha):
    with pytest.raises(ValueError, match="not Hilbert-Schmidt"):
        hs_norm(alpha)


def test_frac_order_flags():
    assert FracOrder(0.75).hilbert_schmidt
    assert not FracOrder(0.5).hilbert_schmidt
    with pytest.raises(ValueError):
        FracOrder(float("nan"))


# ---------------------------------------------------------------- grid functions


def test_grid_function_invariants():
    g = uniform_grid(5)
    with pytest.raises(ValueError):
        GridFunction(g[::-1], np.zeros(5))
    with pytest.raises(ValueError):
        GridFunction(g[1:], np.zeros(4))
    with pytest.raises(ValueError):
        GridFunction(g, np.array([0, 1, np.nan, 0, 0]))
    with pytest.raises(ValueError):
        GridFunction(g, np.zeros(4))


def test_grid_function_csv_round_trip():
    f = GridFunction.from_callable(lambda t: t**2, uniform_grid(9))
    lines = f.to_csv().splitlines()
    assert lines[0] == "node,value"
    data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    assert np.array_equal(data[:, 0], f.grid) and np.array_equal(data[:, 1], f.values)


def test_spline_fallback_interpolates():
    g = uniform_grid(257)
    f = GridFunction(g, np.sin(g))
    x = np.array([0.123, 0.5, 0.987])
    assert np.allclose(f(x), np.sin(x), atol=1e-9)


def test_inner_product_smooth():
    f = GridFunction.from_callable(np.exp)
    g = GridFunction.from_callable(np.cos)
    assert inner_product(f, g) == pytest.approx(integrate.quad(lambda t: np.exp(t) * np.cos(t), 0, 1)[0], rel=1e-13)


# ---------------------------------------------------------------- fractional integrals


def test_half_integral_of_one():
    one = GridFunction.from_callable(np.ones_like)
    assert frac_integral_left(one, 0.5)(np.array([1.0]))[0] == pytest.approx(1 / math.gamma(1.5), rel=1e-13)
    assert frac_integral_right(one, 0.5)(np.array([0.0]))[0] == pytest.approx(1.128379, abs=1e-6)


@pytest.mark.parametrize("alpha", [0.2, 0.5, 0.85])
def test_power_function_identity(alpha):
    one = GridFunction.from_callable(np.ones_like)
    g = uniform_grid()
    assert np.max(np.abs(frac_integral_left(one, alpha).values - g**alpha / math.gamma(alpha + 1))) < 1e-12


def test_order_zero_is_identity_and_order_one_integrates():
    f = GridFunction.from_callable(np.exp)
    assert frac_integral_left(f, 0.0) is f
    g = uniform_grid()
    assert np.max(np.abs(frac_integral_left(f, 1.0).values - (np.exp(g) - 1))) < 1e-13


@pytest.mark.parametrize("alpha", [-0.1, 1.2])
def test_order_out_of_range(alpha):
    with pytest.raises(ValueError):
        frac_integral_left(GridFunction.from_callable(np.exp), alpha)


@pytest.mark.parametrize("fn", SMOOTH)
@pytest.mark.parametrize("a,b", [(0.5, 0.5), (0.3, 0.6), (0.25, 0.25)])
def test_semigroup(fn, a, b):
    f = GridFunction.from_callable(fn)
    lhs = frac_integral_left(frac_integral_left(f, b), a)
    rhs = frac_integral_left(f, a + b)
    x = uniform_grid()[::16]
    assert np.max(np.abs(lhs(x) - rhs(x))) < 1e-6


def test_half_half_is_running_integral_of_one():
    one = GridFunction.from_callable(np.ones_like)
    twice = frac_integral_left(frac_integral_left(one, 0.5), 0.5)
    x = uniform_grid()[::32]
    assert np.max(np.abs(twice(x) - x)) < 1e-10


@pytest.mark.parametrize("alpha", [0.3, 0.75])
def test_duality(alpha):
    f = GridFunction.from_callable(lambda t: np.cos(2 * t))
    g = GridFunction.from_callable(lambda t: np.exp(-t) + t)
    lhs = inner_product(f, frac_integral_left(g, alpha))
    rhs = inner_product(frac_integral_right(f, alpha), g)
    assert lhs == pytest.approx(rhs, abs=1e-10)


def test_left_integral_against_adaptive_quadrature():
    f = GridFunction.from_callable(np.exp)
    x = 0.7
    ref = integrate.quad(lambda t: np.exp(t), 0, x, weight="alg", wvar=(0, -0.35))[0] / math.gamma(0.65)
    assert frac_integral_left(f, 0.65)(np.array([x]))[0] == pytest.approx(ref, rel=1e-12)


# ---------------------------------------------------------------- bases


@pytest.mark.parametrize("kind", ["haar", "cosine"])
def test_basis_orthonormal(kind):
    assert np.max(np.abs(basis_gram(BasisSpec(kind, 64)) - np.eye(64))) < 1e-12


def test_basis_index_checked():
    with pytest.raises(ValueError):
        basis_h(0, 0.75, BasisSpec("haar", 8))
    with pytest.raises(ValueError):
        basis_h(9, 0.75, BasisSpec("haar", 8))
    with pytest.raises(ValueError):
        BasisSpec("legendre", 8)


def test_haar_h_against_adaptive_quadrature():
    h3 = basis_h(3, 0.75, BasisSpec("haar", 8))
    assert h3(np.array([0.1]))[0] == pytest.approx(frozen.HAAR_H3_3_4_AT_0_1, rel=1e-12)


def test_cosine_h_matches_fractional_integral_of_e():
    spec = BasisSpec("cosine", 6)
    x = np.linspace(0, 1, 41)
    for n in (1, 2, 6):
        direct = frac_integral_right(basis_e(n, spec), 0.75)(x)
        assert np.max(np.abs(basis_h(n, 0.75, spec)(x) - direct)) < 1e-10


def test_h_vanishes_at_right_end():
    spec = BasisSpec("cosine", 4)
    assert basis_h(1, 0.75, spec)(np.array([1.0]))[0] == 0.0
    assert np.all(h_values(0.75, BasisSpec("haar", 16), np.array([1.0])) == 0.0)


def test_basis_h_is_cached():
    spec = BasisSpec("haar", 8)
    assert basis_h(2, 0.75, spec) is basis_h(2, 0.75, spec)


def test_interval_integrals_against_quadrature():
    spec = BasisSpec("haar", 8)
    edges = np.array([0.0, 0.3, 0.55, 1.0])
    C = h_interval_integrals(0.75, spec, edges)
    for n in (1, 4, 8):
        f = basis_h(n, 0.75, spec)
        for j in range(3):
            ref = integrate.quad(lambda t: f(np.array([t]))[0], edges[j], edges[j + 1], points=[k / 8 for k in range(9)], limit=200)[0]
            assert C[n - 1, j] == pytest.approx(ref, abs=1e-9)


def test_step_pairing_against_mpmath():
    assert step_pairing(0.75, 0.7, 0.3) == pytest.approx(frozen.STEP_PAIRING_3_4, rel=1e-13)
    assert step_pairing(0.75, 0.3, 0.7) == step_pairing(0.75, 0.7, 0.3)


@pytest.mark.parametrize("order", [0.55, 0.75, 0.95])
def test_haar_gram_two_routes(order):
    be = backend_for("haar", 32)
    x, w = composite_rule(be.panel_edges, p=20, grade="right")
    H = be.h(order, x)
    assert np.max(np.abs(be.gram(order) - (H * w) @ H.T)) < 1e-12


# ---------------------------------------------------------------- Parseval and the Dirac norm


def test_dirac_norm_values():
    assert dirac_norm(0.75, 0.0) == pytest.approx(frozen.DIRAC_3_4_AT_0, rel=1e-14)
    assert dirac_norm(0.75, 0.0) == pytest.approx(2 / frozen.GAMMA_3_4**2, rel=1e-14)
    assert dirac_norm(0.75, 0.0) == pytest.approx(1.33188, rel=1e-5)
    assert dirac_norm(0.9, 1.0) == 0.0
    with pytest.raises(ValueError):
        dirac_norm(0.5, 0.3)


@pytest.mark.parametrize("kind", ["haar", "cosine"])
@pytest.mark.parametrize("tau", [0.0, 0.3, 0.5, 0.9])
def test_parseval_monotone_and_bounded(kind, tau):
    s = parseval_partial_sums(0.75, tau, BasisSpec(kind, 128))
    assert np.all(np.diff(s) >= 0)
    assert s[-1] <= dirac_norm(0.75, tau) * (1 + 1e-12)


def test_parseval_limit_at_one_is_zero():
    assert parseval_partial_sums(0.75, 1.0, BasisSpec("haar", 32))[-1] == 0.0


def test_parseval_dyadic_point_within_two_percent():
    s = parseval_partial_sums(0.75, 0.5, BasisSpec("haar", 256))
    assert 1 - s[-1] / dirac_norm(0.75, 0.5) < 0.02
