import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from perfhom.geometry import LameParams
from perfhom.kernels import (REMAINDER_REACH, PeriodicGreen, SingularPointError, TruncationError, adjoint_kernel,
                             conormal_from_gradient, conormal_kernel, green_for, kelvin, kelvin_gradient,
                             kernel_difference, minimal_image, scaled_green)

P2 = LameParams(1.0, 1.0)
P2b = LameParams(2.5, 0.7)
P3 = LameParams(1.0, 1.0, dim=3)

coord = st.floats(-2.0, 2.0).filter(lambda v: abs(v) > 0.05)


def lame_apply(fn, x, params, h=5e-3):
    """Fourth-order finite-difference L = mu Lap + (lam+mu) grad div applied to each column of fn."""
    d = x.shape[-1]
    E = np.eye(d)
    c1 = {-2: 1 / 12, -1: -8 / 12, 1: 8 / 12, 2: -1 / 12}
    c2 = {-2: -1 / 12, -1: 16 / 12, 0: -30 / 12, 1: 16 / 12, 2: -1 / 12}

    def second(i, j):
        if i == j:
            return sum(w * fn(x + a * h * E[i]) for a, w in c2.items()) / h ** 2
        return sum(wa * wb * fn(x + a * h * E[i] + b * h * E[j])
                   for a, wa in c1.items() for b, wb in c1.items()) / h ** 2

    H = [[second(i, j) for j in range(d)] for i in range(d)]
    lap = sum(H[i][i] for i in range(d))
    out = params.mu * lap
    for j in range(d):
        out[j] += (params.lam + params.mu) * sum(H[j][i][i] for i in range(d))
    return out


@pytest.mark.parametrize("params", [P2, P2b])
def test_kelvin_is_lame_harmonic_off_origin(params):
    x = np.array([0.31, -0.52])
    r = lame_apply(lambda y: kelvin(y, params), x, params)
    assert np.abs(r).max() < 1e-6


def test_kelvin_3d_is_lame_harmonic_off_origin():
    x = np.array([0.31, -0.52, 0.4])
    assert np.abs(lame_apply(lambda y: kelvin(y, P3), x, P3)).max() < 1e-6


@pytest.mark.parametrize("params", [P2, P2b, P3])
def test_kelvin_flux_through_circle_is_identity(params):
    # int over |y| = rho of the conormal derivative of Gamma_k is e_k (L Gamma = delta)
    d = params.dim
    if d == 2:
        t = np.linspace(0, 2 * np.pi, 200, endpoint=False)
        n = np.stack([np.cos(t), np.sin(t)], -1)
        w = np.full(len(t), 2 * np.pi * 0.7 / len(t))
    else:
        xg, wg = np.polynomial.legendre.leggauss(24)
        ph = np.linspace(0, 2 * np.pi, 48, endpoint=False)
        Z, PH = np.meshgrid(xg, ph, indexing="ij")
        s = np.sqrt(1 - Z ** 2)
        n = np.stack([s * np.cos(PH), s * np.sin(PH), Z], -1).reshape(-1, 3)
        w = (wg[:, None] * np.full(len(ph), 2 * np.pi / len(ph))).ravel() * 0.7 ** 2
    y = 0.7 * n
    grad = kelvin_gradient(y, params)
    lm = params.lam + params.mu
    div = np.einsum("mjjk->mk", grad)
    trac = lm * n[:, :, None] * div[:, None, :] + params.mu * np.einsum("mijk,mi->mjk", grad, n)
    assert np.abs(np.einsum("m,mjk->jk", w, trac) - np.eye(d)).max() < 1e-10


def test_kelvin_abnormal_rescaling():
    x = np.array([[0.3, -0.2], [1.5, 0.1]])
    for r in (0.5, np.e, 2.0):
        diff = kelvin(x / r, P2) - kelvin(x, P2)
        assert np.abs(diff + P2.c1 / (2 * np.pi) * np.log(r) * np.eye(2)).max() < 1e-14


@given(coord, coord)
@settings(max_examples=30, deadline=None)
def test_kelvin_gradient_matches_finite_differences(a, b):
    x = np.array([a, b])
    g = kelvin_gradient(x, P2b)
    h = 1e-6
    fd = np.stack([(kelvin(x + h * e, P2b) - kelvin(x - h * e, P2b)) / (2 * h) for e in np.eye(2)])
    scale = max(1.0, np.abs(g).max())
    assert np.abs(g - fd).max() / scale < 1e-7


def test_kelvin_gradient_3d_matches_finite_differences():
    x = np.array([0.4, -0.3, 0.25])
    h = 1e-6
    fd = np.stack([(kelvin(x + h * e, P3) - kelvin(x - h * e, P3)) / (2 * h) for e in np.eye(3)])
    assert np.abs(kelvin_gradient(x, P3) - fd).max() < 1e-7


@given(coord, coord, st.floats(0, 2 * np.pi))
@settings(max_examples=30, deadline=None)
def test_closed_form_kernel_matches_gradient_contraction(a, b, th):
    x = np.array([a, b])
    y = np.array([0.1, -0.05])
    n = np.array([np.cos(th), np.sin(th)])
    k1 = conormal_kernel(x, y, n, P2b)
    k2 = conormal_from_gradient(kelvin_gradient(x - y, P2b), n, P2b)
    assert np.abs(k1 - k2).max() < 1e-10 * max(1.0, np.abs(k1).max())
    parts = conormal_kernel(x, y, n, P2b, split=True)
    assert np.allclose(parts.weak + parts.cauchy, k1, atol=0)
    assert np.allclose(parts.cauchy, -parts.cauchy.T, atol=1e-15)


@given(coord, coord, st.floats(0, 2 * np.pi), st.floats(0, 2 * np.pi))
@settings(max_examples=30, deadline=None)
def test_kernel_difference_closed_form(a, b, t1, t2):
    x = np.array([a, b])
    y = np.array([-0.2, 0.3])
    nx, ny = np.array([np.cos(t1), np.sin(t1)]), np.array([np.cos(t2), np.sin(t2)])
    d = adjoint_kernel(x, y, nx, P2) - conormal_kernel(x, y, ny, P2)
    assert np.abs(kernel_difference(x, y, nx, ny, P2) - d).max() < 1e-10 * max(1.0, np.abs(d).max())


def test_kernels_reject_singular_point():
    with pytest.raises(SingularPointError):
        kelvin(np.zeros(2), P2)
    with pytest.raises(SingularPointError):
        conormal_kernel(np.ones(2), np.ones(2), np.array([1.0, 0.0]), P2)


# ---------------------------------------------------------------------------
# periodic Green function


def test_periodic_green_is_periodic_and_even():
    g = green_for(P2)
    x = np.array([[0.13, 0.37], [-0.41, 0.22]])
    G0 = g.evaluate(x, grad=False)
    for s in ([1, 0], [0, 1], [-2, 3]):
        assert np.abs(g.evaluate(x + np.array(s), grad=False) - G0).max() < 1e-12
    assert np.abs(g.evaluate(-x, grad=False) - G0).max() < 1e-12
    assert np.abs(G0 - np.swapaxes(G0, -1, -2)).max() < 1e-14


def test_periodic_green_independent_of_ewald_split():
    x = np.array([[0.13, 0.37], [-0.41, 0.22], [0.5, 0.5]])
    a = PeriodicGreen(P2b, alpha=4.0, cutoff=12).evaluate(x)
    b = PeriodicGreen(P2b, alpha=5.0, cutoff=18).evaluate(x)
    assert np.abs(a[0] - b[0]).max() < 1e-9
    assert np.abs(a[1] - b[1]).max() < 1e-8


def test_periodic_green_solves_lame_with_uniform_sink():
    # L G = delta - 1 on the unit torus
    g = green_for(P2b)
    x = np.array([0.27, -0.33])
    r = lame_apply(lambda y: g.evaluate(y, grad=False), x, P2b)
    assert np.abs(r + np.eye(2)).max() < 1e-6


def test_periodic_green_has_zero_cell_mean():
    g = green_for(P2)
    c1, c2 = P2.c1, P2.c2
    xg, wg = np.polynomial.legendre.leggauss(40)
    X, Y = np.meshgrid(0.5 * xg, 0.5 * xg, indexing="ij")
    W = 0.25 * np.outer(wg, wg)
    R = g.remainder(np.stack([X, Y], -1), grad=False, direct=True)
    mean_R = np.einsum("ab,abjk->jk", W, R)
    # cell integrals of log r and x_a x_b / r^2 by polar quadrature over the eight triangles
    log_int = 8 * integrate.quad(lambda t: integrate.quad(lambda r: r * np.log(r), 0, 0.5 / np.cos(t))[0],
                                 0, np.pi / 4, epsabs=1e-13)[0]
    mean_G = c1 / (2 * np.pi) * log_int * np.eye(2) - c2 / (2 * np.pi) * 0.5 * np.eye(2) + mean_R
    assert np.abs(mean_G).max() < 1e-8


def test_truncation_error_is_explicit():
    with pytest.raises(TruncationError):
        PeriodicGreen(P2, alpha=4.0, cutoff=3, accuracy=1e-12)


@given(st.floats(-REMAINDER_REACH, REMAINDER_REACH), st.floats(-REMAINDER_REACH, REMAINDER_REACH))
@settings(max_examples=40, deadline=None)
def test_remainder_table_matches_direct_ewald(a, b):
    g = green_for(P2)
    x = np.array([[a, b]])
    R, dR = g.remainder(x)
    Rd, dRd = g.remainder(x, direct=True)
    assert np.abs(R - Rd).max() < 1e-8
    assert np.abs(dR - dRd).max() < 1e-7


def test_remainder_gradient_matches_finite_differences():
    g = green_for(P2)
    x = np.array([0.21, -0.34])
    _, dR = g.remainder(x[None], direct=True)
    h = 1e-5
    fd = np.stack([(g.remainder((x + h * e)[None], grad=False, direct=True)
                    - g.remainder((x - h * e)[None], grad=False, direct=True))[0] / (2 * h) for e in np.eye(2)])
    assert np.abs(dR[0] - fd).max() < 1e-8


@pytest.mark.parametrize("eta", [0.05, 0.2])
def test_scaled_green_equation_and_periodicity(eta):
    # L G^eta = delta - eta^2 on the torus of side 1/eta
    x = np.array([1.3, -2.1])
    fn = lambda y: scaled_green(y, eta, P2, grad=False)
    assert np.abs(lame_apply(fn, x, P2) + eta ** 2 * np.eye(2)).max() < 1e-6
    assert np.abs(fn(x + np.array([1 / eta, 0])) - fn(x)).max() < 1e-10


def test_scaled_green_cell_integral():
    # int over the scaled cell of G^eta equals -(c1/2pi) log(eta) eta^-2 I
    eta = 0.25
    g = green_for(P2)
    L = 0.5 / eta
    xg, wg = np.polynomial.legendre.leggauss(40)
    X, Y = np.meshgrid(L * xg, L * xg, indexing="ij")
    W = L * L * np.outer(wg, wg)
    R = g.remainder(eta * np.stack([X, Y], -1), grad=False, direct=True)
    int_R = np.einsum("ab,abjk->jk", W, R)
    log_int = 8 * integrate.quad(lambda t: integrate.quad(lambda r: r * np.log(r), 0, L / np.cos(t))[0],
                                 0, np.pi / 4, epsabs=1e-12)[0]
    int_gamma = P2.c1 / (2 * np.pi) * log_int * np.eye(2) - P2.c2 / (2 * np.pi) * 0.5 * (2 * L) ** 2 * np.eye(2)
    expected = -P2.c1 / (2 * np.pi) * np.log(eta) / eta ** 2 * np.eye(2)
    assert np.abs(int_R + int_gamma - expected).max() < 1e-7


def test_minimal_image_lands_in_scaled_cell():
    eta = 0.1
    x = np.array([[12.3, -7.9], [4.9, 5.1]])
    z = minimal_image(x, eta)
    assert np.all(np.abs(z) <= 0.5 / eta + 1e-12)
    assert np.allclose(np.round(eta * (x - z)), eta * (x - z))
