"""Kelvin matrix, conormal kernels and the periodic / scaled Green functions.

Array conventions: points have shape (..., d); ``kelvin`` returns (..., d, d)
with entry [j, k] the j-th component of the k-th column; gradients are
(..., d, d, d) with entry [i, j, k] = d_i Gamma^j_k.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import ndimage
from scipy.special import exp1

from .geometry import LameParams


# R = G - Gamma is smooth on this box (no other lattice point within 1/4)
REMAINDER_REACH = 0.75
# the spline table extends past the reach so edge effects of the fit stay outside
_TABLE_HALF_WIDTH = REMAINDER_REACH + 0.0625


class SingularPointError(ValueError):
    """Kernel evaluated at its singular point."""


class TruncationError(RuntimeError):
    """Ewald truncation cannot meet the requested accuracy."""


def lame_constants(params: LameParams):
    """Return ``(c1, c2, omega_d)``."""
    return params.c1, params.c2, params.omega


def _check_nonzero(r2):
    if np.any(r2 == 0):
        raise SingularPointError("kernel evaluated at its singular point")


def kelvin(x, params: LameParams) -> np.ndarray:
    """Kelvin matrix Gamma(x) for d in {2, 3}."""
    x = np.asarray(x, dtype=float)
    d = x.shape[-1]
    if d != params.dim:
        raise ValueError("point dimension does not match params.dim")
    c1, c2, om = lame_constants(params)
    r2 = np.sum(x * x, axis=-1)
    _check_nonzero(r2)
    eye = np.eye(d)
    xx = x[..., :, None] * x[..., None, :]
    if d == 2:
        iso = c1 / (2 * np.pi) * 0.5 * np.log(r2)
        return iso[..., None, None] * eye - c2 / (2 * np.pi) * xx / r2[..., None, None]
    r = np.sqrt(r2)
    iso = c1 / ((2 - d) * om) / r ** (d - 2)
    return iso[..., None, None] * eye - c2 / om * xx / (r ** d)[..., None, None]


def kelvin_gradient(x, params: LameParams) -> np.ndarray:
    """Derivatives d_i Gamma^j_k of the Kelvin matrix."""
    x = np.asarray(x, dtype=float)
    d = x.shape[-1]
    c1, c2, om = lame_constants(params)
    r2 = np.sum(x * x, axis=-1)
    _check_nonzero(r2)
    u = x / (r2 ** (d / 2))[..., None]
    P = x[..., :, None] * x[..., None, :] / r2[..., None, None]
    out = (c2 * d / om) * u[..., :, None, None] * P[..., None, :, :]
    for i in range(d):
        out[..., i, :, i] -= c2 / om * u
        out[..., :, i, i] += c1 / om * u
        out[..., i, i, :] -= c2 / om * u
    return out


def conormal_from_gradient(grad, n_y, params: LameParams) -> np.ndarray:
    """Kernel matrix [i, k] of the conormal derivative in y of G_k(x - y).

    ``grad`` holds d_i G^j_k evaluated at x - y, ``n_y`` the normal at y.
    """
    lm = params.lam + params.mu
    div = np.einsum("...jjk->...k", grad)
    flux = np.einsum("...jik,...j->...ik", grad, n_y)
    return -(lm * n_y[..., :, None] * div[..., None, :] + params.mu * flux)


@dataclass(frozen=True)
class KernelParts:
    weak: np.ndarray
    cauchy: np.ndarray

    @property
    def total(self):
        return self.weak + self.cauchy


def conormal_kernel(x, y, n_y, params: LameParams, split: bool = False):
    """Double-layer kernel K_ik(x; y) from its three-term closed form.

    With ``split`` the weakly singular part (first two terms) and the Cauchy
    part (third term) are returned separately.
    """
    x, y, n_y = (np.asarray(a, dtype=float) for a in (x, y, n_y))
    d = x.shape[-1]
    c1, c2, om = lame_constants(params)
    mu = params.mu
    z = x - y
    r2 = np.sum(z * z, axis=-1)
    _check_nonzero(r2)
    rd = (r2 ** (d / 2))[..., None, None]
    nz = np.sum(n_y * z, axis=-1)[..., None, None]
    zz = z[..., :, None] * z[..., None, :]
    weak = -mu * c1 / om * nz * np.eye(d) / rd - d * mu * c2 / om * nz * zz / (rd * r2[..., None, None])
    wedge = z[..., :, None] * n_y[..., None, :] - n_y[..., :, None] * z[..., None, :]
    cauchy = mu * c2 / om * wedge / rd
    parts = KernelParts(weak, cauchy)
    return parts if split else parts.total


def adjoint_kernel(x, y, n_x, params: LameParams) -> np.ndarray:
    """K*_ik(x; y) = K_ki(y; x)."""
    return np.swapaxes(conormal_kernel(y, x, n_x, params), -1, -2)


def kernel_difference(x, y, n_x, n_y, params: LameParams) -> np.ndarray:
    """K*_ik(x; y) - K_ik(x; y) from its closed three-term form."""
    x, y, n_x, n_y = (np.asarray(a, dtype=float) for a in (x, y, n_x, n_y))
    d = x.shape[-1]
    c1, c2, om = lame_constants(params)
    mu = params.mu
    z = x - y
    r2 = np.sum(z * z, axis=-1)
    _check_nonzero(r2)
    rd = (r2 ** (d / 2))[..., None, None]
    ns = n_x + n_y
    nd = n_x - n_y
    zs = np.sum(z * ns, axis=-1)[..., None, None]
    zz = z[..., :, None] * z[..., None, :]
    out = mu * c1 / om * zs * np.eye(d) / rd
    out = out + d * mu * c2 / om * zs * zz / (rd * r2[..., None, None])
    out = out + mu * c2 / om * (z[..., :, None] * nd[..., None, :] - nd[..., :, None] * z[..., None, :]) / rd
    return out


# ---------------------------------------------------------------------------
# periodic Green function (d = 2)


def _ein(s):
    """Entire function Ein(s) = int_0^s (1 - e^-t)/t dt = E1(s) + log s + gamma."""
    s = np.asarray(s, dtype=float)
    out = np.empty_like(s)
    small = s < 1.0
    ss = s[small]
    term = ss.copy()
    acc = ss.copy()
    for n in range(2, 30):
        term = -term * ss * (n - 1) / (n * n)
        acc = acc + term
    out[small] = acc
    sb = s[~small]
    out[~small] = exp1(sb) + np.log(sb) + np.euler_gamma
    return out


def _phi1(s):
    """(1 - e^-s)/s, stable near 0."""
    s = np.asarray(s, dtype=float)
    safe = np.where(s > 1e-8, s, 1.0)
    return np.where(s > 1e-8, -np.expm1(-s) / safe, 1.0 - 0.5 * s)


def _phi1_prime(s):
    """d/ds of (1 - e^-s)/s, stable near 0."""
    s = np.asarray(s, dtype=float)
    safe = np.where(s > 1e-3, s, 1.0)
    big = (np.exp(-s) * (s + 1.0) - 1.0) / safe ** 2
    # series: -1/2 + s/3 - s^2/8 + s^3/30 - s^4/144
    ser = -0.5 + s / 3 - s ** 2 / 8 + s ** 3 / 30 - s ** 4 / 144 + s ** 5 / 840
    return np.where(s > 1e-3, big, ser)


class PeriodicGreen:
    """Ewald evaluation of the zero-mean periodic Green function on the unit torus.

    The short-range sum runs over the 3x3 nearest lattice images, the
    long-range sum over Fourier modes with ``|xi|_inf <= cutoff``.
    """

    def __init__(self, params: LameParams, alpha: float = 4.0, cutoff: int = 12,
                 accuracy: float = 1e-8, table_n: int = 416):
        if params.dim != 2:
            raise ValueError("periodic Green function is implemented for d = 2 only")
        if cutoff > 20:
            raise ValueError("Fourier truncation limited to 41^2 modes")
        self.params = params
        self.alpha = float(alpha)
        self.cutoff = int(cutoff)
        self.accuracy = float(accuracy)
        self.table_n = int(table_n)
        est = self.truncation_estimate()
        if est > accuracy:
            raise TruncationError(f"Ewald truncation error {est:.2e} exceeds accuracy {accuracy:.1e}")
        m = np.arange(-cutoff, cutoff + 1)
        xi = np.stack(np.meshgrid(m, m, indexing="ij"), -1).reshape(-1, 2)
        # half plane: G is even so pair xi with -xi
        keep = (xi[:, 0] > 0) | ((xi[:, 0] == 0) & (xi[:, 1] > 0))
        xi = xi[keep].astype(float)
        k = 2 * np.pi * xi
        k2 = np.sum(k * k, axis=1)
        c1, c2 = params.c1, params.c2
        damp = np.exp(-k2 / (4 * self.alpha ** 2))
        eye = np.eye(2)
        kk = k[:, :, None] * k[:, None, :]
        self._k = k
        # factor 2 accounts for the mirrored half plane
        self._coef = 2 * damp[:, None, None] * (-(c1 + c2) / k2[:, None, None] * eye
                                               + 2 * c2 * (1 + k2 / (4 * self.alpha ** 2))[:, None, None]
                                               * kk / k2[:, None, None] ** 2)
        img = np.arange(-1, 2)
        self._images = np.stack(np.meshgrid(img, img, indexing="ij"), -1).reshape(-1, 2).astype(float)
        self._const = (c1 + c2) / (4 * self.alpha ** 2)
        self._table = None

    def truncation_estimate(self) -> float:
        a2 = self.alpha ** 2
        c1, c2 = self.params.c1, self.params.c2
        # nearest omitted image is at distance >= 2 - _TABLE_HALF_WIDTH from a table point
        d2 = (2 - _TABLE_HALF_WIDTH) ** 2
        real = 16 * (c1 / (4 * np.pi) * exp1(d2 * a2) + c2 / (2 * np.pi) * np.exp(-d2 * a2))
        kmin = 2 * np.pi * (self.cutoff + 1)
        shell = 8 * (self.cutoff + 1)
        fourier = shell * np.exp(-kmin ** 2 / (4 * a2)) * (c1 + 3 * c2 * (1 + kmin ** 2 / (4 * a2))) / kmin ** 2
        # gradients carry one extra factor of k
        return float(max(real, fourier * kmin))

    # -- direct evaluation ---------------------------------------------------
    def _fourier(self, x, grad: bool):
        x = np.asarray(x, dtype=float).reshape(-1, 2)
        G = np.zeros((len(x), 2, 2))
        dG = np.zeros((len(x), 2, 2, 2)) if grad else None
        for s in range(0, len(x), 2048):
            ph = x[s:s + 2048] @ self._k.T
            G[s:s + 2048] = np.einsum("pm,mjk->pjk", np.cos(ph), self._coef)
            if grad:
                dG[s:s + 2048] = -np.einsum("pm,mi,mjk->pijk", np.sin(ph), self._k, self._coef)
        return G, dG

    def _image_terms(self, w, grad: bool, skip_origin: bool):
        """Screened short-range terms for displacement vectors ``w`` (m, 2)."""
        c1, c2 = self.params.c1, self.params.c2
        a2 = self.alpha ** 2
        r2 = np.sum(w * w, axis=1)
        s = a2 * r2
        ww = w[:, :, None] * w[:, None, :]
        if skip_origin:
            # smooth remainder of the z = 0 image after removing Gamma
            iso = -c1 / (4 * np.pi) * (_ein(s) - np.euler_gamma) + c1 / (2 * np.pi) * np.log(self.alpha)
            G = iso[:, None, None] * np.eye(2) + c2 / (2 * np.pi) * a2 * _phi1(s)[:, None, None] * ww
            if not grad:
                return G, None
            # d_c of the isotropic part: -(c1/2pi) a2 phi1(s) w_c
            # tensor part Q(r2) w_a w_b with Q = -a2 phi1(s): d_c = 2 w_c Q' w_a w_b + Q (d_ac w_b + d_bc w_a)
            ph = _phi1(s)
            Q = -a2 * ph
            Qp = -a2 * a2 * _phi1_prime(s)
            dG = self._radial_grad(w, -c1 / (2 * np.pi) * a2 * ph, -c2 / (2 * np.pi), Q, Qp)
            return G, dG
        e1 = exp1(s)
        ex = np.exp(-s)
        G = -c1 / (4 * np.pi) * e1[:, None, None] * np.eye(2) - c2 / (2 * np.pi) * (ex / r2)[:, None, None] * ww
        if not grad:
            return G, None
        P = ex / r2
        Pp = -a2 * ex / r2 - ex / r2 ** 2
        dG = self._radial_grad(w, c1 / (2 * np.pi) * ex / r2, -c2 / (2 * np.pi), P, Pp)
        return G, dG

    @staticmethod
    def _radial_grad(w, iso_coef, ten_scale, P, Pp):
        """Gradient of iso(r2)*I + ten_scale * P(r2) w w^T where d_c iso = iso_coef * w_c."""
        eye = np.eye(2)
        wc = w[:, :, None, None]
        wa = w[:, None, :, None]
        wb = w[:, None, None, :]
        out = iso_coef[:, None, None, None] * wc * eye[None, None]
        ten = 2 * wc * Pp[:, None, None, None] * wa * wb
        ten = ten + P[:, None, None, None] * (eye[None, :, :, None] * wb + eye[None, :, None, :] * wa)
        return out + ten_scale * ten

    def evaluate(self, x, grad: bool = True, remainder: bool = False):
        """Direct Ewald evaluation of G (or R = G - Gamma) and its gradient.

        For ``remainder`` the points must lie in [-REMAINDER_REACH, REMAINDER_REACH]^2,
        the closed cell with a margin on which R extends smoothly; otherwise
        points are first reduced modulo the lattice.
        """
        x = np.asarray(x, dtype=float)
        shape = x.shape[:-1]
        x = x.reshape(-1, 2)
        if remainder:
            if np.any(np.abs(x) > REMAINDER_REACH + 1e-12):
                raise ValueError("remainder is tabulated on the unit cell plus a margin of 1/4")
            w = x
        else:
            w = x - np.round(x)
            if np.any(np.sum(w * w, axis=1) == 0):
                raise SingularPointError("periodic Green function evaluated at a lattice point")
        G, dG = self._fourier(w, grad)
        G = G + self._const * np.eye(2)
        for z in self._images:
            origin = not z.any()
            g, dg = self._image_terms(w + z, grad, skip_origin=origin and remainder)
            G = G + g
            if grad:
                dG = dG + dg
        G = G.reshape(shape + (2, 2))
        if grad:
            return G, dG.reshape(shape + (2, 2, 2))
        return G

    # -- tabulated remainder ---------------------------------------------------
    def _build_table(self):
        n = self.table_n
        s = np.linspace(-_TABLE_HALF_WIDTH, _TABLE_HALF_WIDTH, n + 1)
        X, Y = np.meshgrid(s, s, indexing="ij")
        pts = np.stack([X, Y], -1).reshape(-1, 2)
        R, dR = self._fourier(pts, True)
        R = R + self._const * np.eye(2)
        for z in self._images:
            g, dg = self._image_terms(pts + z, True, skip_origin=not z.any())
            R, dR = R + g, dR + dg
        comps = [R[:, 0, 0], R[:, 0, 1], R[:, 1, 1]]
        comps += [dR[:, i, a, b] for i in range(2) for a, b in ((0, 0), (0, 1), (1, 1))]
        # cubic B-spline coefficients for map_coordinates
        self._table = np.stack([ndimage.spline_filter(c.reshape(n + 1, n + 1), order=3, mode="mirror")
                                for c in comps])
        self._step = s[1] - s[0]

    def remainder(self, x, grad: bool = True, direct: bool = False):
        """R = G - Gamma near the closed cell, interpolated unless ``direct``."""
        if direct:
            return self.evaluate(x, grad=grad, remainder=True)
        x = np.asarray(x, dtype=float)
        if np.any(np.abs(x) > REMAINDER_REACH + 1e-12):
            raise ValueError("remainder is tabulated on the unit cell plus a margin of 1/4")
        if self._table is None:
            self._build_table()
        shape = x.shape[:-1]
        idx = ((x.reshape(-1, 2) + _TABLE_HALF_WIDTH) / self._step).T

        def interp(c):
            return ndimage.map_coordinates(self._table[c], idx, order=3, mode="mirror", prefilter=False)

        R = np.empty((idx.shape[1], 2, 2))
        R[:, 0, 0], R[:, 1, 1] = interp(0), interp(2)
        R[:, 0, 1] = R[:, 1, 0] = interp(1)
        R = R.reshape(shape + (2, 2))
        if not grad:
            return R
        dR = np.empty((idx.shape[1], 2, 2, 2))
        for i in range(2):
            dR[:, i, 0, 0], dR[:, i, 1, 1] = interp(3 + 3 * i), interp(5 + 3 * i)
            dR[:, i, 0, 1] = dR[:, i, 1, 0] = interp(4 + 3 * i)
        return R, dR.reshape(shape + (2, 2, 2))


@lru_cache(maxsize=16)
def green_for(params: LameParams, alpha: float = 4.0, cutoff: int = 12, accuracy: float = 1e-8) -> PeriodicGreen:
    """Shared PeriodicGreen instance per parameter set (tables built lazily)."""
    return PeriodicGreen(params, alpha=alpha, cutoff=cutoff, accuracy=accuracy)


def periodic_green(x, params: LameParams, accuracy: float = 1e-8):
    """G(x) and its gradient at points of the unit cell (x not a lattice point)."""
    return green_for(params, accuracy=accuracy).evaluate(x, grad=True)


def remainder(x, params: LameParams, direct: bool = True):
    """R(x) = G(x) - Gamma(x) and its gradient on the closed unit cell."""
    return green_for(params).remainder(x, grad=True, direct=direct)


def minimal_image(x, eta: float):
    """Representative of ``x`` in the scaled cell [-1/(2 eta), 1/(2 eta)]^2."""
    x = np.asarray(x, dtype=float)
    return x - np.round(eta * x) / eta


def scaled_green(x, eta: float, params: LameParams, green: PeriodicGreen | None = None,
                 grad: bool = True, direct: bool = False):
    """G^eta(x) = Gamma(x) + R(eta x) on the scaled torus, with gradient.

    Points are reduced to the minimal image first, so any x off the lattice
    (1/eta) Z^2 is accepted.
    """
    if not 0 < eta <= 0.5:
        raise ValueError("eta must lie in (0, 0.5]")
    g = green or green_for(params)
    z = minimal_image(x, eta)
    w = np.clip(eta * z, -0.5, 0.5)
    if grad:
        R, dR = g.remainder(w, grad=True, direct=direct)
        return kelvin(z, params) + R, kelvin_gradient(z, params) + eta * dR
    return kelvin(z, params) + g.remainder(w, grad=False, direct=direct)
