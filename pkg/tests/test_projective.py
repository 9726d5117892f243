from math import gamma, pi

import numpy as np
import pytest
from hypothesis import given, strategies as st

from radonrange.errors import IndexOutOfRange, NotOrthonormal, OnIncidence, RankDeficient
from radonrange.geometry import Dimensions, sample_frames
from radonrange.projective import (ComplexFrame, HomogeneousField, extend_homogeneous,
                                   gram_factor, kernel_john_check, kernel_scalar, kernel_scale,
                                   leray_coefficient, projective_john_residual,
                                   projective_radon, projective_stiefel_function,
                                   random_complex_frame, sphere_rule)
from radonrange.rangecheck import StiefelFunction, john_residual


def lorentzian(n, p, a=None):
    a = np.eye(n + 1)[0] if a is None else np.asarray(a) / np.linalg.norm(a)
    return HomogeneousField(lambda x: 1.0 / (1.0 + (x @ a) ** 2), n, p)


def orthonormal(n, p, seed):
    return sample_frames(Dimensions(n + 1, p + 1), 1, seed)[0].tau


def test_constant_on_great_circle():
    one = HomogeneousField(lambda x: np.ones(x.shape[:-1]), 2, 1)
    assert abs(projective_radon(one, [[0.0, 0.0, 1.0]]) - pi) <= 1e-10
    assert abs(projective_radon(one, orthonormal(2, 1, 4)) - pi) <= 1e-10


@pytest.mark.parametrize("p", [0, 1, 2, 3, 4])
def test_sphere_rule_area(p):
    _, w = sphere_rule(p, 12)
    assert abs(w.sum() - 2 * pi ** ((p + 1) / 2) / gamma((p + 1) / 2)) <= 1e-12


def test_subsphere_second_moment():
    # int_{S^2} u_1^2 = 4 pi / 3
    f = HomogeneousField(lambda x: x[..., 1] ** 2, 3, 2)
    assert abs(projective_radon(f, [[1.0, 0, 0, 0]]) - 0.5 * 4 * pi / 3) <= 1e-12


def test_point_case_p0():
    f = lorentzian(2, 0)
    xi = orthonormal(2, 0, 1)
    x = np.cross(xi[0], xi[1])
    assert projective_radon(f, xi) == pytest.approx(float(f.on_sphere(x[None])[0]), rel=1e-14)


def test_odd_field_rejected():
    with pytest.raises(ValueError):
        HomogeneousField(lambda x: x[..., 0], 2, 1)


def test_off_sphere_homogeneity():
    f = lorentzian(3, 1)
    x = np.array([[0.3, -1.0, 2.0, 0.5]])
    assert f(2.5 * x)[0] == pytest.approx(2.5 ** -2 * f(x)[0], rel=1e-14)
    assert f(-x)[0] == pytest.approx(f(x)[0], rel=1e-14)


def test_not_orthonormal():
    with pytest.raises(NotOrthonormal):
        projective_radon(lorentzian(3, 1), [[1.0, 0, 0, 0], [0.5, 1.0, 0, 0]])


@pytest.mark.parametrize("n,p", [(3, 1), (4, 2), (5, 3)])
def test_rotation_equivariance(n, p):
    rng = np.random.default_rng(n)
    a = rng.standard_normal(n + 1)
    R, _ = np.linalg.qr(rng.standard_normal((n + 1, n + 1)))
    f = lorentzian(n, p, a)
    g = lorentzian(n, p, R.T @ a)          # g(x) = f(R x)
    xi = orthonormal(n, p, 7)
    assert projective_radon(f, xi @ R.T, 32) == pytest.approx(projective_radon(g, xi, 32),
                                                              rel=1e-10)


def test_extend_homogeneous_examples(rng):
    f = lorentzian(3, 1)
    psi = lambda r: projective_radon(f, r)
    xi = orthonormal(3, 1, 2)
    assert extend_homogeneous(psi, xi) == pytest.approx(psi(xi), rel=1e-14)
    assert extend_homogeneous(psi, 3.0 * xi) == pytest.approx(psi(xi) / 9.0, rel=1e-13)
    with pytest.raises(RankDeficient):
        extend_homogeneous(psi, np.array([[1.0, 0, 0, 0], [2.0, 0, 0, 0]]))


def test_two_factorizations_agree(rng):
    f = lorentzian(4, 2, rng.standard_normal(5))
    psi = lambda r: projective_radon(f, r, 24)
    for _ in range(100):
        tau = rng.standard_normal((2, 5))
        a = extend_homogeneous(psi, tau, "cholesky")
        b = extend_homogeneous(psi, tau, "polar")
        assert abs(a - b) <= 1e-10 * abs(a)


def test_gram_factor_shapes(rng):
    tau = rng.standard_normal((3, 6))
    for method in ("cholesky", "polar"):
        mu, rho = gram_factor(tau, method)
        np.testing.assert_allclose(mu @ rho, tau, atol=1e-12)
        np.testing.assert_allclose(rho @ rho.T, np.eye(3), atol=1e-12)
    assert np.allclose(np.triu(gram_factor(tau)[0], 1), 0.0)


def test_extension_group_laws(rng):
    f = lorentzian(3, 1, [1.0, 2.0, -1.0, 0.5])
    psi = projective_stiefel_function(f)
    xi = rng.standard_normal((2, 4))
    base = psi(xi)
    nu, _ = np.linalg.qr(rng.standard_normal((2, 2)))
    assert psi(nu @ xi) == pytest.approx(base, rel=1e-12)
    mu = rng.standard_normal((2, 2))
    assert psi(mu @ xi) == pytest.approx(base / abs(np.linalg.det(mu)), rel=1e-10)


def test_john_residual_second_order():
    f = lorentzian(3, 1, [1.0, 0.5, -0.3, 0.2])
    rng = np.random.default_rng(5)
    pts = [rng.standard_normal((2, 4)) for _ in range(4)]
    rms = [projective_john_residual(f, pts, h).rms for h in (0.1, 0.05, 0.025)]
    for a, b in zip(rms, rms[1:]):
        assert 3.2 <= a / b <= 4.8


def test_john_vacuous_and_perturbed():
    f = lorentzian(3, 2)
    rep = projective_john_residual(f, [orthonormal(3, 2, 0)], 0.05)
    assert rep.vacuous and rep.sup == 0.0
    g = projective_stiefel_function(lorentzian(3, 1))
    bumped = StiefelFunction(lambda x: g(x) + 0.1 * x[0, 0] * x[1, 1], g.dims)
    xi = np.random.default_rng(1).standard_normal((2, 4))
    r = john_residual(bumped, xi, 0.05, order=6)
    assert abs(r.r[0, 1, 0, 1]) >= 0.1 - 1e-3


def test_kernel_scalar_examples():
    assert kernel_scalar(ComplexFrame([1, 1], [[1, -2]])) == -1
    rng = np.random.default_rng(2)
    fr = random_complex_frame(4, 1, rng)
    g = kernel_scalar(fr)
    lam = 0.7 - 1.3j
    assert kernel_scalar(ComplexFrame(lam * fr.z, fr.zeta)) == pytest.approx(g * lam ** -3, rel=1e-14)
    lams = np.array([2.0, -0.5 + 1j, 3j])
    torus = kernel_scalar(ComplexFrame(fr.z, lams[:, None] * fr.zeta))
    assert torus == pytest.approx(g / np.prod(lams), rel=1e-14)


def test_on_incidence():
    with pytest.raises(OnIncidence):
        kernel_scalar(ComplexFrame([1, 1, 0], [[1, -1, 5]]))
    with pytest.raises(OnIncidence):
        kernel_john_check(ComplexFrame([1, 1, 0], [[1, -1, 5], [0, 0, 1]]))


def test_leray_coefficient():
    assert leray_coefficient([1, 0, 0], 0) == 1
    assert leray_coefficient([0, 5, 0, 0], 1) == -5
    z = np.array([1 + 2j, -0.5, 3j])
    for j in range(3):
        assert leray_coefficient(2.5j * z, j) == pytest.approx(2.5j * leray_coefficient(z, j))
    with pytest.raises(IndexOutOfRange):
        leray_coefficient(z, 3)


@given(st.integers(0, 2**32 - 1), st.integers(1, 5))
def test_kernel_analytic_bracket_vanishes(seed, n):
    rng = np.random.default_rng(seed)
    p = int(rng.integers(0, n))
    fr = random_complex_frame(n, p, rng)
    assert kernel_john_check(fr, "analytic") <= 1e-14 * kernel_scale(fr)


def test_kernel_finite_difference():
    rng = np.random.default_rng(8)
    for _ in range(20):
        fr = random_complex_frame(3, 1, rng)
        assert kernel_john_check(fr, "finite_difference") <= 1e-6 * kernel_scale(fr)


def test_kernel_vacuous():
    fr = random_complex_frame(3, 2, np.random.default_rng(0))
    assert kernel_john_check(fr) == 0.0 and kernel_john_check(fr, "finite_difference") == 0.0
