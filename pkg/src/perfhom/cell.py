"""Rescaled cell problem, cell averages, effective matrices and oscillating fields.

The cell problem lives on the scaled torus of side 1/eta with the hole T at
the origin: L chi_k = -eta^2 e_k outside T, chi_k = 0 on the boundary.  The
solution is represented as chi_k = G^eta_k + c_k + D^eta[g_k] where the
density g_k solves a periodic Dirichlet problem.  Matrices such as
``chi(x)`` are indexed [j, k] = j-th component of chi_k.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

import numpy as np
from scipy.optimize import brentq

from .bie import (assemble, decompose, eval_double, kernel_basis, richardson_trace,
                  solve_periodic_dirichlet)
from .geometry import Curve, LameParams, panelize
from .kernels import conormal_from_gradient, green_for, minimal_image, scaled_green
from .rates import RateFit, fit_rate


class CellError(RuntimeError):
    """Cell solve failed one of its self-checks."""


# ---------------------------------------------------------------------------
# scale factor and eta laws

REGIMES = ("sub", "critical", "super")


@dataclass(frozen=True)
class EtaLaw:
    """Hole-size law eta(eps): ``fixed`` (a), ``power`` (eps^a) or ``exp`` (exp(-a / eps^q))."""

    kind: str
    a: float
    q: float = 2.0

    def __call__(self, eps: float) -> float:
        if self.kind == "fixed":
            return self.a
        if self.kind == "power":
            return eps ** self.a
        return float(np.exp(-self.a / eps ** self.q))

    def regime(self, d: int = 2) -> str:
        """Limit of sigma_eps as eps -> 0 declared by the law itself."""
        if d == 3:
            # sigma^2 = eps^2 eta^{-1}
            if self.kind == "fixed" or (self.kind == "power" and self.a < 2):
                return "super"
            if self.kind == "power":
                return "critical" if self.a == 2 else "sub"
            return "sub"
        if self.kind in ("fixed", "power"):
            return "super"
        if self.q == 2:
            return "critical"
        return "sub" if self.q > 2 else "super"

    def spec(self) -> str:
        if self.kind == "exp":
            return f"exp:{self.a!r},{self.q!r}" if self.q != 2 else f"exp:{self.a!r}"
        return f"{self.kind}:{self.a!r}"


def parse_eta_law(text: str) -> EtaLaw:
    """Parse ``fixed:0.25``, ``power:0.25`` / ``power:eps^0.25``, ``exp:a`` or ``exp:a,q``."""
    m = re.fullmatch(r"\s*(fixed|power|exp)\s*:\s*(.+?)\s*", text)
    if not m:
        raise ValueError(f"cannot parse eta law {text!r}")
    kind, arg = m.groups()
    arg = re.sub(r"^(eps|ε)\s*\^\s*", "", arg)
    try:
        vals = [float(v) for v in arg.split(",")]
    except ValueError as exc:
        raise ValueError(f"cannot parse eta law {text!r}") from exc
    if kind == "exp":
        if len(vals) not in (1, 2) or vals[0] <= 0:
            raise ValueError("exp law needs a > 0 and optional q")
        return EtaLaw(kind, vals[0], vals[1] if len(vals) == 2 else 2.0)
    if len(vals) != 1:
        raise ValueError(f"{kind} law takes one parameter")
    if kind == "fixed" and not 0 < vals[0] < 1:
        raise ValueError("fixed eta must lie in (0, 1)")
    if kind == "power" and vals[0] <= 0:
        raise ValueError("power law exponent must be positive")
    return EtaLaw(kind, vals[0])


class Sigma(NamedTuple):
    sigma: float
    sigma2: float
    regime: str | None


def sigma(epsilon: float, eta: float, d: int = 2, law: EtaLaw | str | None = None) -> Sigma:
    """sigma_eps with sigma^2 = eps^2 |log eta| (d = 2) or eps^2 eta^{-1} (d = 3).

    The regime is reported only when an eta law is declared.
    """
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    if not 0 < eta <= 1:
        raise ValueError("eta must lie in (0, 1)")
    if d == 2:
        if eta == 1:
            raise ValueError("eta = 1 is excluded in 2D (|log eta| = 0)")
        s2 = epsilon ** 2 * abs(np.log(eta))
    elif d == 3:
        if eta == 1:
            raise ValueError("eta must lie in (0, 1)")
        s2 = epsilon ** 2 / eta
    else:
        raise ValueError("d must be 2 or 3")
    if isinstance(law, str):
        law = parse_eta_law(law)
    return Sigma(float(np.sqrt(s2)), float(s2), law.regime(d) if law is not None else None)


# ---------------------------------------------------------------------------
# cell solution


@dataclass(eq=False)
class CellSolution:
    eta: float
    params: LameParams
    curve: Curve
    n_nodes: int
    rescale: float
    c: np.ndarray              # [j, k]
    g: np.ndarray              # (n, 2, 2): density for chi_k in [..., k]
    h: np.ndarray
    g_mean: np.ndarray         # [j, k] arclength mean of g_k
    solve_residual: float
    condition: float
    balance_residual: float
    c_formula_residual: float
    A_T: np.ndarray
    trace_residual: float = np.nan

    def __post_init__(self):
        self.pan = panelize(self.curve, self.n_nodes)
        self.green = green_for(self.params)

    @property
    def log_factor(self) -> float:
        return abs(np.log(self.eta))

    @property
    def g_prime(self) -> np.ndarray:
        return self.g - self.g_mean[None]

    @property
    def area(self) -> float:
        return self.curve.area

    # -- evaluation ------------------------------------------------------------
    def _periodic_double(self, x):
        """eta * D_1[g](x): the smooth periodic part of the double layer."""
        pan, eta = self.pan, self.eta
        out = np.zeros((len(x), 2, 2))
        wg = self.g * pan.weights[:, None, None]
        for s in range(0, len(x), 256):
            w = eta * (x[s:s + 256, None, :] - pan.points[None])
            _, dR = self.green.remainder(w)
            K = conormal_from_gradient(dR, pan.normals[None], self.params)
            out[s:s + 256] = eta * np.einsum("mnik,nic->mkc", K, wg)
        return out

    def chi(self, x) -> np.ndarray:
        """chi(x) as matrices [j, k]; zero inside the hole."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        xm = minimal_image(x, self.eta)
        out = np.zeros((len(x), 2, 2))
        outside = ~self.curve.contains(xm)
        if not outside.any():
            return out
        y = xm[outside]
        G = scaled_green(y, self.eta, self.params, green=self.green, grad=False)
        D = eval_double(self.pan, self.g, y, self.params, extrapolate=True)
        out[outside] = G + self.c[None] + D + self._periodic_double(y)
        return out

    def chi_gradient(self, x, step: float = 1e-5) -> np.ndarray:
        """Central-difference gradient [.., b, j, k] = d_b chi^j_k."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        m = len(x)
        pts = np.concatenate([x + step * e for e in (np.array([1.0, 0]), np.array([-1.0, 0]),
                                                     np.array([0, 1.0]), np.array([0, -1.0]))])
        v = self.chi(pts).reshape(4, m, 2, 2)
        return np.stack([(v[0] - v[1]) / (2 * step), (v[2] - v[3]) / (2 * step)], axis=1)

    def pde_residual(self, x, step: float = 1e-3) -> np.ndarray:
        """Relative FD residual |L chi_k + eta^2 e_k| at points away from the hole."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        off = [(i, j) for i in (-1, 0, 1) for j in (-1, 0, 1)]
        pts = np.concatenate([x + step * np.array(o, dtype=float) for o in off])
        v = self.chi(pts).reshape(3, 3, len(x), 2, 2)
        dxx = (v[2, 1] - 2 * v[1, 1] + v[0, 1]) / step ** 2
        dyy = (v[1, 2] - 2 * v[1, 1] + v[1, 0]) / step ** 2
        dxy = (v[2, 2] - v[2, 0] - v[0, 2] + v[0, 0]) / (4 * step ** 2)
        lap = dxx + dyy
        # grad div: component 0 = d_xx u0 + d_xy u1, component 1 = d_xy u0 + d_yy u1
        gd = np.stack([dxx[:, 0] + dxy[:, 1], dxy[:, 0] + dyy[:, 1]], axis=1)
        mu, lm = self.params.mu, self.params.lam + self.params.mu
        L = mu * lap + lm * gd
        res = L + self.eta ** 2 * np.eye(2)[None]
        scale = mu * np.abs(lap) + lm * np.abs(gd) + self.eta ** 2
        return np.abs(res).max(axis=(1, 2)) / scale.max(axis=(1, 2))

    def boundary_trace(self, n_offsets: int = 8, t0: float | None = None) -> np.ndarray:
        """Exterior trace of chi on the nodes by Richardson extrapolation."""
        pan = self.pan
        if t0 is None:
            t0 = self.curve.r1 / 80
        ts = t0 * np.arange(1, n_offsets + 1)
        pts = pan.points[None] + ts[:, None, None] * pan.normals[None]
        v = self.chi(pts.reshape(-1, 2)).reshape(len(ts), pan.n, 2, 2)
        return richardson_trace(v, ts)

    @cached_property
    def average(self) -> np.ndarray:
        return cell_average(self, method="boundary")


def solve_cell(curve: Curve, eta: float, params: LameParams, n_nodes: int = 256,
               trace_tol: float = 1e-6, check_trace: bool = True) -> CellSolution:
    """Solve the rescaled cell problem for both unit loads e_1, e_2."""
    if params.dim != 2:
        raise ValueError("cell solves are implemented for d = 2 only")
    if not 0 < eta <= 0.25:
        raise ValueError("eta must lie in (0, 0.25]")
    pan = panelize(curve, n_nodes)
    kb = kernel_basis(pan, params)
    pan = kb.pan
    curve = pan.curve
    green = green_for(params)
    G = scaled_green(pan.points, eta, params, green=green, grad=False)          # (n, j, k)
    c = np.zeros((2, 2))
    h = np.zeros((pan.n, 2, 2))
    for k in range(2):
        dec = decompose(kb, -G[:, :, k])
        c[:, k] = dec.pi0
        h[:, :, k] = dec.pi1
    op = assemble(pan, "K_eta", params, eta=eta, green=green)
    sol = solve_periodic_dirichlet(pan, eta, h, params, op=op)
    g = sol.g.reshape(pan.n, 2, 2)
    g_mean = pan.integrate(g) / pan.length
    g_prime = g - g_mean[None]
    # Pi_0 balance: -eta^2 |T| <g> + eta Pi_0 K_1[g'] = 0
    K1 = assemble(pan, "D_eta_restricted", params, eta=eta, green=green)
    bal = np.zeros((2, 2))
    for k in range(2):
        bal[:, k] = -eta ** 2 * curve.area * g_mean[:, k] + eta * decompose(kb, K1 @ g_prime[:, :, k]).pi0
    bal_scale = max(np.abs(eta ** 2 * curve.area * g_mean).max(), 1e-300)
    # constant part against its closed form A_T e_k - S_1[phi*_j](0)
    R0 = green.remainder(-eta * pan.points, grad=False)
    s1 = np.einsum("njk,qnj,n->qk", R0, kb.phi_star, pan.weights)       # [j, k] = S_1[phi*_j]^k(0)
    c_formula = kb.A_T.T - s1
    out = CellSolution(eta, params, curve, pan.n, kb.rescale, c, g, h, g_mean, sol.residual,
                       sol.condition, float(np.abs(bal).max() / bal_scale),
                       float(np.abs(c - c_formula).max()), kb.A_T)
    if check_trace:
        tr = out.boundary_trace()
        out.trace_residual = float(np.abs(tr).max())
        if out.trace_residual > trace_tol:
            raise CellError(f"boundary trace residual {out.trace_residual:.2e} above {trace_tol:.0e}; "
                            "increase n_nodes")
    return out


# ---------------------------------------------------------------------------
# cell averages


def _hole_integrals(sol: CellSolution):
    """Integrals over T of Gamma, R(eta x) and D^eta[g]; all [j, k] matrices."""
    pan, params, eta = sol.pan, sol.params, sol.eta
    x, N, W = pan.points, pan.normals, pan.weights
    c1, c2 = params.c1, params.c2
    r = np.linalg.norm(x, axis=1)
    xn = np.sum(x * N, axis=1)
    I_log = np.sum(W * xn * (2 * np.log(r) - 1) / 4)
    I_xx = np.einsum("n,na,nb->ab", W * np.log(r), N, x) - I_log * np.eye(2)
    I_xx = 0.5 * (I_xx + I_xx.T)
    gamma_int = c1 / (2 * np.pi) * I_log * np.eye(2) - c2 / (2 * np.pi) * I_xx
    # int_T f = oint F N_1 with F(x) = int_0^{x_1} f(t, x_2) dt
    s, w = np.polynomial.legendre.leggauss(24)
    pts = np.stack([0.5 * (s[None, :] + 1) * x[:, :1], np.broadcast_to(x[:, 1:], (pan.n, len(s)))], -1)
    R = sol.green.remainder(eta * pts.reshape(-1, 2), grad=False).reshape(pan.n, len(s), 2, 2)
    F = 0.5 * x[:, 0, None, None] * np.einsum("q,nqjk->njk", w, R)
    rem_int = np.einsum("n,njk->jk", W * N[:, 0], F)
    # int_T D^eta[g] through the single layer of the normal components
    S = assemble(pan, "S_eta", params, eta=eta, green=sol.green)
    B = np.zeros((pan.n, 2, 2, 2))
    for a in range(2):
        for j in range(2):
            dens = np.zeros((pan.n, 2))
            dens[:, j] = N[:, a]
            B[:, a, j, :] = S @ dens
    Q = conormal_from_gradient(B, N, params)                   # (n, i, k)
    dbl_int = np.einsum("n,nik,nic->kc", W, Q, sol.g)
    return gamma_int, rem_int, dbl_int


def _polar_nodes(sol: CellSolution, n_theta: int = 32, n_radial: int = 8, panel: float = 0.4):
    """Quadrature nodes and weights for the scaled cell minus T (star-shaped T)."""
    curve, eta = sol.curve, sol.eta
    t = np.linspace(0, 2 * np.pi, 4097)
    X, V = curve.point(t), curve.d1(t)
    cross = X[:, 0] * V[:, 1] - X[:, 1] * V[:, 0]
    if np.any(cross <= 0):
        raise CellError("polar quadrature needs a hole star-shaped with respect to the origin")
    f = lambda s: abs(curve.point(np.array([s]))[0, 0]) - abs(curve.point(np.array([s]))[0, 1])  # noqa: E731
    vals = np.abs(X[:, 0]) - np.abs(X[:, 1])
    breaks = [0.0]
    for i in np.nonzero(np.sign(vals[:-1]) != np.sign(vals[1:]))[0]:
        breaks.append(brentq(f, t[i], t[i + 1], xtol=1e-15))
    breaks.append(2 * np.pi)
    breaks = np.unique(breaks)
    st, wt = np.polynomial.legendre.leggauss(n_theta)
    sr, wr = np.polynomial.legendre.leggauss(n_radial)
    pts, wts = [], []
    for a, b in zip(breaks[:-1], breaks[1:]):
        if b - a < 1e-14:
            continue
        tt = 0.5 * (b - a) * (st + 1) + a
        Xt, Vt = curve.point(tt), curve.d1(tt)
        jac = Xt[:, 0] * Vt[:, 1] - Xt[:, 1] * Vt[:, 0]
        for ti in range(len(tt)):
            rho_max = 0.5 / (eta * np.abs(Xt[ti]).max())
            umax = np.log(rho_max)
            npan = max(1, int(np.ceil(umax / panel)))
            edges = np.linspace(0.0, umax, npan + 1)
            u = (0.5 * (edges[1:] - edges[:-1])[:, None] * (sr[None] + 1) + edges[:-1, None]).ravel()
            wu = (0.5 * (edges[1:] - edges[:-1])[:, None] * wr[None]).ravel()
            rho = np.exp(u)
            pts.append(rho[:, None] * Xt[ti][None])
            # dx = rho (X x X') drho dt and drho = rho du
            wts.append(wu * rho ** 2 * jac[ti] * 0.5 * (b - a) * wt[ti])
    return np.concatenate(pts), np.concatenate(wts)


def _grid_nodes(sol: CellSolution, grid_n: int):
    L = 1.0 / sol.eta
    hh = L / grid_n
    s = -0.5 * L + hh * (np.arange(grid_n) + 0.5)
    X, Y = np.meshgrid(s, s, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel()], -1)
    keep = ~sol.curve.contains(pts)
    return pts[keep], np.full(keep.sum(), hh * hh)


def cell_average(sol: CellSolution, method: str = "boundary", grid_n: int = 256) -> np.ndarray:
    """Mean of the zero-extended chi over the whole scaled cell, as [j, k].

    ``boundary`` reduces every volume integral to boundary integrals,
    ``polar`` uses tensor Gauss quadrature on rays from the origin and
    ``grid`` the masked midpoint rule with ``grid_n`` cells per side.
    """
    eta = sol.eta
    if method == "boundary":
        gamma_int, rem_int, dbl_int = _hole_integrals(sol)
        total = -sol.params.c1 / (2 * np.pi) * np.log(eta) / eta ** 2 * np.eye(2) \
            - gamma_int - rem_int + sol.c * (1 / eta ** 2 - sol.area) - dbl_int
        return eta ** 2 * total
    if method == "polar":
        pts, w = _polar_nodes(sol)
    elif method == "grid":
        if grid_n < 128:
            raise ValueError("grid_n must be at least 128")
        pts, w = _grid_nodes(sol, grid_n)
    else:
        raise ValueError(f"unknown averaging method {method!r}")
    vals = np.zeros((2, 2))
    for s in range(0, len(pts), 4096):
        vals += np.einsum("m,mjk->jk", w[s:s + 4096], sol.chi(pts[s:s + 4096]))
    return eta ** 2 * vals


def l2_distance(sol: CellSolution, m=None) -> np.ndarray:
    """||v_k - m_k||_{L^2(D)} for each k, D a union of whole eps-cells of unit area.

    v_k = chi_k(local)/|log eta|; ``m`` defaults to (c1/2pi) I.
    """
    if m is None:
        m = sol.params.c1 / (2 * np.pi) * np.eye(2)
    pts, w = _polar_nodes(sol)
    L = sol.log_factor
    acc = np.zeros(2)
    for s in range(0, len(pts), 4096):
        d = sol.chi(pts[s:s + 4096]) / L - m[None]
        acc += np.einsum("m,mjk->k", w[s:s + 4096], d * d)
    acc += sol.area * np.sum(m * m, axis=0)
    return np.sqrt(sol.eta ** 2 * acc)


def gradient_norms(sol: CellSolution):
    """(||grad chi_k||_{L^2}, energy_k) over the scaled cell minus T.

    The energy int mu |grad chi_k|^2 + (lambda+mu) (div chi_k)^2 equals the
    diagonal entry of the cell average, which serves as a check.
    """
    pts, w = _polar_nodes(sol)
    grad2 = np.zeros(2)
    energy = np.zeros(2)
    mu, lm = sol.params.mu, sol.params.lam + sol.params.mu
    for s in range(0, len(pts), 2048):
        D = sol.chi_gradient(pts[s:s + 2048])                    # [m, b, j, k]
        ww = w[s:s + 2048]
        grad2 += np.einsum("m,mbjk->k", ww, D * D)
        div = np.einsum("mjjk->mk", D)
        energy += np.einsum("m,mk->k", ww, mu * np.einsum("mbjk->mk", D * D) + lm * div * div)
    return np.sqrt(grad2), energy


# ---------------------------------------------------------------------------
# effective matrices

MATRIX_REGIMES = ("dilute_2d", "dilute_3d", "classical")


@dataclass(frozen=True)
class EffectiveMatrix:
    M: np.ndarray
    regime: str
    provenance: str

    @property
    def inverse(self) -> np.ndarray:
        return np.linalg.inv(self.M)


def effective_matrix(regime: str, params: LameParams, cell_solution: CellSolution | None = None,
                     m_convention: str = "proof", A_T=None) -> EffectiveMatrix:
    """Effective matrix M of the homogenized problem.

    ``dilute_2d``: M = (2 pi / c1) I so that M^{-1} e_k is the limit of v_k
    (``m_convention="display"`` gives M = (c1 / 2 pi) I instead).
    ``dilute_3d``: M = A_T^{-1} for a supplied capacity matrix ``A_T``.
    ``classical``: M = <v>^{-1} = |log eta| <chi>^{-1} from a cell solution.
    """
    if regime not in MATRIX_REGIMES:
        raise ValueError(f"unknown regime {regime!r}")
    if m_convention not in ("proof", "display"):
        raise ValueError("m_convention must be 'proof' or 'display'")
    if regime == "dilute_2d":
        f = params.c1 / (2 * np.pi)
        M = (1 / f if m_convention == "proof" else f) * np.eye(2)
        prov = "formula"
    elif regime == "dilute_3d":
        if A_T is None:
            raise ValueError("dilute_3d needs the capacity matrix A_T")
        M = np.linalg.inv(np.asarray(A_T, dtype=float))
        prov = "formula"
    else:
        if cell_solution is None:
            raise ValueError("classical regime needs a cell solution")
        avg = cell_solution.average / cell_solution.log_factor
        avg = 0.5 * (avg + avg.T)
        if np.linalg.cond(avg) > 1e12:
            raise CellError("cell average is singular")
        M = np.linalg.inv(avg)
        prov = "cell_average"
    M = 0.5 * (M + M.T)
    if np.any(np.linalg.eigvalsh(M) <= 0):
        raise CellError("effective matrix is not positive definite")
    return EffectiveMatrix(M, regime, prov)


# ---------------------------------------------------------------------------
# oscillating fields


@dataclass(eq=False)
class OscillatingField:
    """v_k(x) = chi_k((x - eps z)/(eps eta)) / |log eta| with z the nearest lattice point."""

    cell: CellSolution
    epsilon: float

    @property
    def eta(self) -> float:
        return self.cell.eta

    def local(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return (x / self.epsilon - np.round(x / self.epsilon)) / self.eta

    def __call__(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return self.cell.chi(self.local(x)) / self.cell.log_factor

    def on_grid(self, grid_n: int) -> np.ndarray:
        """Values at the nodes i/grid_n, i = 0..grid_n, shape (grid_n+1, grid_n+1, 2, 2)."""
        per = self.epsilon * grid_n
        m = int(round(per))
        if abs(per - m) > 1e-9:
            raise ValueError("epsilon * grid_n must be an integer to tile the cell")
        s = np.arange(m) / grid_n
        X, Y = np.meshgrid(s, s, indexing="ij")
        vals = self(np.stack([X.ravel(), Y.ravel()], -1)).reshape(m, m, 2, 2)
        idx = np.arange(grid_n + 1) % m
        return vals[np.ix_(idx, idx)]


def oscillating_field(cell_solution: CellSolution, epsilon: float) -> OscillatingField:
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    if cell_solution.eta * cell_solution.curve.r2 >= 0.5:
        raise ValueError("hole does not fit the cell")
    return OscillatingField(cell_solution, float(epsilon))


# ---------------------------------------------------------------------------
# dilute limit of the averages


@dataclass(frozen=True)
class LimitReport:
    etas: np.ndarray
    averages: np.ndarray        # <v> for each eta, [j, k]
    errors: np.ndarray          # max_k |<v_k> - (c1/2pi) e_k|
    fit: RateFit


def average_limit_check(curve: Curve, params: LameParams, eta_list, n_nodes: int = 256,
                        method: str = "boundary") -> LimitReport:
    """Decay of |<v_k> - (c1/2pi) e_k| against 1/|log eta|."""
    etas = np.asarray(eta_list, dtype=float)
    if len(etas) < 3:
        raise ValueError("need at least three eta values")
    if np.any(np.diff(etas) >= 0):
        raise ValueError("eta_list must be decreasing")
    if np.log10(etas[0] / etas[-1]) < 1:
        raise ValueError("eta_list must span at least one decade")
    target = params.c1 / (2 * np.pi) * np.eye(2)
    avgs, errs = [], []
    for eta in etas:
        sol = solve_cell(curve, float(eta), params, n_nodes)
        v = cell_average(sol, method=method) / sol.log_factor
        avgs.append(v)
        errs.append(np.linalg.norm(v - target, axis=0).max())
    errs = np.array(errs)
    return LimitReport(etas, np.array(avgs), errs, fit_rate(etas, errs, "log"))

