"""Hole shapes, trapezoid panelizations of closed curves and perforation lattices.

All objects here are immutable; the curve parametrizations are analytic so that
equispaced trapezoid quadrature converges spectrally.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import shapely
from scipy.optimize import minimize_scalar


class GeometryError(ValueError):
    """Raised for invalid hole shapes, panelizations or perforations."""


@dataclass(frozen=True)
class LameParams:
    """Lamé moduli and the Kelvin constants derived from them.

    Parameters
    ----------
    lam, mu : float
        Lamé moduli; require ``mu > 0`` and ``dim*lam + 2*mu > 0``.
    dim : int
        Space dimension, 2 or 3.
    """

    lam: float = 1.0
    mu: float = 1.0
    dim: int = 2

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise GeometryError(f"dimension must be 2 or 3, got {self.dim}")
        if not self.mu > 0:
            raise GeometryError("shear modulus mu must be positive")
        if not self.dim * self.lam + 2 * self.mu > 0:
            raise GeometryError("ellipticity requires dim*lambda + 2*mu > 0")

    @property
    def c1(self) -> float:
        return 0.5 * (1.0 / self.mu + 1.0 / (self.lam + 2 * self.mu))

    @property
    def c2(self) -> float:
        return 0.5 * (1.0 / self.mu - 1.0 / (self.lam + 2 * self.mu))

    @property
    def omega(self) -> float:
        """Surface area of the unit sphere in R^dim."""
        return 2 * np.pi if self.dim == 2 else 4 * np.pi


# ---------------------------------------------------------------------------
# curves

_KITE_DEFAULT_SCALE = 0.6


def _circle(p, t, order):
    (r,) = p
    c, s = np.cos(t), np.sin(t)
    if order == 0:
        return np.stack([r * c, r * s], -1)
    if order == 1:
        return np.stack([-r * s, r * c], -1)
    if order == 2:
        return np.stack([-r * c, -r * s], -1)
    return np.stack([r * s, -r * c], -1)


def _ellipse(p, t, order):
    a, b = p
    c, s = np.cos(t), np.sin(t)
    table = [(a * c, b * s), (-a * s, b * c), (-a * c, -b * s), (a * s, -b * c)]
    return np.stack(table[order], -1)


def _kite(p, t, order):
    (k,) = p
    c, s, c2, s2 = np.cos(t), np.sin(t), np.cos(2 * t), np.sin(2 * t)
    if order == 0:
        xy = (0.25 * c + 0.1625 * c2 - 0.1625, 0.375 * s)
    elif order == 1:
        xy = (-0.25 * s - 0.325 * s2, 0.375 * c)
    elif order == 2:
        xy = (-0.25 * c - 0.65 * c2, -0.375 * s)
    else:
        xy = (0.25 * s + 1.3 * s2, -0.375 * c)
    return k * np.stack(xy, -1)


def _star(p, t, order):
    # r(t) = r0 (1 + amp cos(m t)), position r(t)(cos t, sin t)
    r0, amp, m = p
    c, s = np.cos(t), np.sin(t)
    rr = [r0 * (1 + amp * np.cos(m * t)), -r0 * amp * m * np.sin(m * t),
          -r0 * amp * m * m * np.cos(m * t), r0 * amp * m ** 3 * np.sin(m * t)]
    # Leibniz rule for (r e)^{(order)} with e = (cos, sin)
    e = [np.stack([c, s], -1), np.stack([-s, c], -1), np.stack([-c, -s], -1), np.stack([s, -c], -1)]
    binom = [[1], [1, 1], [1, 2, 1], [1, 3, 3, 1]][order]
    return sum(binom[i] * rr[i][..., None] * e[order - i] for i in range(order + 1))


_SHAPES = {"circle": (_circle, 1), "ellipse": (_ellipse, 2), "kite": (_kite, 1), "star": (_star, 3)}


@dataclass(frozen=True)
class Curve:
    """Closed analytic curve bounding the hole T, counterclockwise in theta.

    ``scale`` multiplies every coordinate; scaled copies are used for the
    free-space scaling law and may leave the unit cell (``fits_cell`` False).
    """

    kind: str
    params: tuple
    scale: float = 1.0
    r1: float = field(default=0.0, compare=False)
    r2: float = field(default=0.0, compare=False)

    def _eval(self, t, order):
        fn, _ = _SHAPES[self.kind]
        return self.scale * fn(self.params, np.asarray(t, dtype=float), order)

    def point(self, t):
        return self._eval(t, 0)

    def d1(self, t):
        return self._eval(t, 1)

    def d2(self, t):
        return self._eval(t, 2)

    def d3(self, t):
        return self._eval(t, 3)

    def normal(self, t):
        """Outward unit normal (points into the exterior of T)."""
        v = self.d1(t)
        sp = np.linalg.norm(v, axis=-1, keepdims=True)
        return np.stack([v[..., 1], -v[..., 0]], -1) / sp

    @property
    def fits_cell(self) -> bool:
        return self.r2 < 0.5

    def scaled(self, r: float) -> "Curve":
        return Curve(self.kind, self.params, self.scale * r, self.r1 * r, self.r2 * r)

    def spec(self) -> str:
        body = ",".join(repr(float(p)) for p in self.params)
        s = f"{self.kind}:{body}"
        return s if self.scale == 1.0 else f"{s}@{self.scale!r}"

    @cached_property
    def _polygon(self):
        t = np.linspace(0, 2 * np.pi, 8192, endpoint=False)
        return shapely.Polygon(self.point(t))

    def contains(self, pts) -> np.ndarray:
        """Boolean mask of points strictly inside T (closure for analytic kinds)."""
        pts = np.asarray(pts, dtype=float)
        x, y = pts[..., 0] / self.scale, pts[..., 1] / self.scale
        if self.kind == "circle":
            return x * x + y * y <= self.params[0] ** 2
        if self.kind == "ellipse":
            a, b = self.params
            return (x / a) ** 2 + (y / b) ** 2 <= 1.0
        poly = self._polygon
        out = np.zeros(x.shape, dtype=bool)
        rr = np.hypot(pts[..., 0], pts[..., 1])
        cand = (rr <= self.r2 * (1 + 1e-9)) & (rr > 0)
        out[cand] = shapely.contains_xy(poly, pts[..., 0][cand], pts[..., 1][cand])
        out[rr == 0] = True
        return out

    @cached_property
    def area(self) -> float:
        p = panelize(self, 256)
        return 0.5 * p.integrate(np.sum(p.points * p.normals, axis=-1))


def make_curve(kind: str, params=(), *, check_cell: bool = True) -> Curve:
    """Build and validate a hole boundary.

    Parameters
    ----------
    kind : {"circle", "ellipse", "kite", "star"}
    params : tuple of float
        circle: (radius,); ellipse: (a, b) semi-axes; kite: (scale,) with
        default 0.6; star: (r0, amplitude, lobes).
    check_cell : bool
        Reject curves with outer radius ``r2 >= 1/2``.
    """
    if kind not in _SHAPES:
        raise GeometryError(f"unknown curve kind {kind!r}")
    params = tuple(float(p) for p in params)
    if kind == "kite" and not params:
        params = (_KITE_DEFAULT_SCALE,)
    if len(params) != _SHAPES[kind][1]:
        raise GeometryError(f"{kind} expects {_SHAPES[kind][1]} parameters, got {len(params)}")
    if kind == "star" and (params[2] != int(params[2]) or params[2] < 1):
        raise GeometryError("star lobe count must be a positive integer")
    sizes = params[:2] if kind == "ellipse" else params[:1]
    if min(sizes) <= 0:
        raise GeometryError("shape size parameters must be positive")
    c = Curve(kind, params)
    t = np.linspace(0, 2 * np.pi, 4096, endpoint=False)
    ring = shapely.LinearRing(c.point(t))
    if not ring.is_simple:
        raise GeometryError("curve parameters give a self-intersecting boundary")
    poly = shapely.Polygon(ring)
    if not poly.exterior.is_ccw:
        raise GeometryError("curve must be counterclockwise in theta")
    if not poly.contains(shapely.Point(0.0, 0.0)):
        raise GeometryError("hole must contain the origin")
    r = np.linalg.norm(c.point(t), axis=-1)
    r1 = _refine_radius(c, t, r, -1.0)
    r2 = _refine_radius(c, t, r, 1.0)
    c = Curve(kind, params, 1.0, r1, r2)
    if check_cell and not r2 < 0.5:
        raise GeometryError(f"outer radius r2 = {r2:.6g} >= 1/2 violates the unit-cell assumption")
    return c


def _refine_radius(c: Curve, t, r, sign):
    i = int(np.argmax(sign * r))
    h = t[1] - t[0]
    res = minimize_scalar(lambda s: -sign * float(np.linalg.norm(c.point(s))),
                          bounds=(t[i] - h, t[i] + h), method="bounded",
                          options={"xatol": 1e-14})
    best = -sign * res.fun
    return float(max(best, r[i]) if sign > 0 else min(best, r[i]))


def parse_hole(text: str) -> Curve:
    """Parse ``"circle:0.25"``, ``"ellipse:0.3,0.2"``, ``"kite:default"`` or ``"star:r0,amp,m"``."""
    kind, _, rest = text.strip().partition(":")
    kind = kind.strip().lower()
    rest = rest.strip()
    scale = 1.0
    if "@" in rest:
        rest, _, s = rest.partition("@")
        scale = float(s)
    if rest in ("", "default"):
        params = ()
    else:
        params = tuple(float(v) for v in rest.split(","))
    c = make_curve(kind, params, check_cell=scale == 1.0)
    return c if scale == 1.0 else c.scaled(scale)


# ---------------------------------------------------------------------------
# panelization


@dataclass(frozen=True, eq=False)
class Panelization:
    """Equispaced trapezoid nodes on a curve."""

    curve: Curve
    n: int
    theta: np.ndarray
    points: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    speed: np.ndarray
    normals: np.ndarray
    tangents: np.ndarray
    curvature: np.ndarray

    @property
    def h(self) -> float:
        return 2 * np.pi / self.n

    @property
    def weights(self) -> np.ndarray:
        """Trapezoid weights times speed, i.e. arclength weights."""
        return self.h * self.speed

    @property
    def length(self) -> float:
        return float(np.sum(self.weights))

    @property
    def spacing(self) -> float:
        """Largest arclength distance between consecutive nodes."""
        return float(self.h * self.speed.max())

    def integrate(self, values):
        values = np.asarray(values)
        return np.tensordot(self.weights, values, axes=(0, 0))

    def inner(self, a, b) -> float:
        """Weighted boundary inner product of two densities of shape (n, d)."""
        return float(np.sum(self.weights[:, None] * a * b))

    def upsample(self, factor: int) -> "Panelization":
        return panelize(self.curve, self.n * factor)


def panelize(curve: Curve, n_nodes: int) -> Panelization:
    if n_nodes % 2:
        raise GeometryError("n_nodes must be even for the logarithmic quadrature")
    if n_nodes < 32:
        raise GeometryError("n_nodes must be at least 32")
    t = 2 * np.pi * np.arange(n_nodes) / n_nodes
    x, v, a = curve.point(t), curve.d1(t), curve.d2(t)
    sp = np.linalg.norm(v, axis=-1)
    tau = v / sp[:, None]
    nrm = np.stack([tau[:, 1], -tau[:, 0]], -1)
    kappa = (v[:, 0] * a[:, 1] - v[:, 1] * a[:, 0]) / sp ** 3
    return Panelization(curve, n_nodes, t, x, v, a, sp, nrm, tau, kappa)


def upsample_density(values: np.ndarray, factor: int) -> np.ndarray:
    """Trigonometric interpolation of nodal values onto ``factor`` times more nodes."""
    values = np.asarray(values)
    n = values.shape[0]
    if factor == 1:
        return values.copy()
    m = n * factor
    coef = np.fft.rfft(values, axis=0)
    # split the Nyquist coefficient so the interpolant stays real and symmetric
    coef = coef.copy()
    coef[n // 2] *= 0.5
    big = np.zeros((m // 2 + 1,) + values.shape[1:], dtype=complex)
    big[: n // 2 + 1] = coef
    return np.fft.irfft(big, n=m, axis=0) * factor


def closest_parameter(curve: Curve, pts, pan: Panelization | None = None):
    """Parameter of the boundary point nearest to each of ``pts`` (Newton refined)."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    if pan is None:
        pan = panelize(curve, 512)
    d2 = np.sum((pts[:, None, :] - pan.points[None]) ** 2, axis=-1)
    t = pan.theta[np.argmin(d2, axis=1)].copy()
    for _ in range(30):
        x, v, a = curve.point(t), curve.d1(t), curve.d2(t)
        r = x - pts
        g = np.sum(r * v, -1)
        hss = np.sum(v * v, -1) + np.sum(r * a, -1)
        step = np.where(hss > 0, g / np.where(hss > 0, hss, 1.0), 0.0)
        step = np.clip(step, -pan.h, pan.h)
        t = t - step
        if np.max(np.abs(step)) < 1e-15:
            break
    return np.mod(t, 2 * np.pi)


# ---------------------------------------------------------------------------
# perforations


@dataclass(frozen=True, eq=False)
class PerforationSpec:
    """Holes ``eps*(z + eta*T)`` inside the unit square, cut holes dropped."""

    epsilon: float
    eta: float
    curve: Curve
    centers: np.ndarray

    @property
    def count(self) -> int:
        return len(self.centers)

    def local_coords(self, x) -> np.ndarray:
        """Coordinates of ``x`` in the scaled cell of its nearest lattice point."""
        x = np.asarray(x, dtype=float)
        y = x / self.epsilon
        return (y - np.round(y)) / self.eta

    def in_hole(self, x) -> np.ndarray:
        """Mask of points inside a retained hole (closure)."""
        x = np.asarray(x, dtype=float)
        z = np.round(x / self.epsilon)
        loc = (x / self.epsilon - z) / self.eta
        inside = self.curve.contains(loc)
        if not inside.any():
            return inside
        kept = {tuple(c) for c in np.round(self.centers / self.epsilon).astype(int)}
        zi = z.astype(int)
        keep = np.array([tuple(v) in kept for v in zi.reshape(-1, zi.shape[-1])]).reshape(inside.shape)
        return inside & keep


def build_perforation(epsilon: float, eta: float, curve: Curve) -> PerforationSpec:
    if not 0 < epsilon < 1:
        raise GeometryError("epsilon must lie in (0, 1)")
    if not eta > 0:
        raise GeometryError("eta must be positive")
    if not eta * curve.r2 < 0.5:
        raise GeometryError(f"hole exits unit cell: eta*r2 = {eta * curve.r2:.6g} >= 1/2")
    if not eta < 1:
        raise GeometryError("eta must lie in (0, 1)")
    t = np.linspace(0, 2 * np.pi, 2048, endpoint=False)
    pts = curve.point(t) * eta * epsilon
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    zmax = int(np.floor(1.0 / epsilon)) + 1
    z = np.arange(0, zmax + 1)
    zz = np.stack(np.meshgrid(z, z, indexing="ij"), -1).reshape(-1, 2)
    c = epsilon * zz
    ok = np.all(c + lo > 0, axis=1) & np.all(c + hi < 1, axis=1)
    return PerforationSpec(float(epsilon), float(eta), curve, c[ok])
