"""Finite-difference oracle for the perforated Lamé problem and the effective models.

Grids are uniform on D = (0,1)^2 with nodes x_i = i h, h = 1/n.  Fields are
arrays of shape (n+1, n+1, 2).  The operator -L = -mu Lap - (lambda+mu) grad div
uses the compact three-point second differences and a centered mixed
difference; restricted to the fluid nodes it is symmetric positive definite.
"""
from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy import ndimage

from .geometry import LameParams, PerforationSpec

FLUID, HOLE, BOUNDARY = 0, 1, 2
REGIMES = ("super", "critical", "sub")


class ResolutionError(ValueError):
    """Holes are not resolved by the grid."""


class SolverError(RuntimeError):
    """Iterative solve did not converge."""


@dataclass(eq=False)
class GridField:
    n: int
    values: np.ndarray                   # (n+1, n+1, 2)
    mask: np.ndarray                     # (n+1, n+1) of FLUID/HOLE/BOUNDARY
    info: dict = field(default_factory=dict)

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def fluid(self) -> np.ndarray:
        return self.mask == FLUID

    def l2_norm(self) -> float:
        return l2_norm(self.values, self.n, self.mask)

    def h1_seminorm(self) -> float:
        return h1_seminorm(self.values, self.n, self.mask)


def grid_nodes(n: int):
    s = np.arange(n + 1) / n
    X, Y = np.meshgrid(s, s, indexing="ij")
    return np.stack([X, Y], -1)


def _eval_f(f, n: int) -> np.ndarray:
    x = grid_nodes(n)
    if callable(f):
        vals = np.asarray(f(x), dtype=float)
    else:
        vals = np.broadcast_to(np.asarray(f, dtype=float), x.shape)
    if vals.shape != x.shape:
        raise ValueError("load must evaluate to shape (n+1, n+1, 2)")
    return np.array(vals)


def l2_norm(values, n: int, mask=None) -> float:
    """Nodal L^2 norm (node sums times h^2) over fluid nodes."""
    v = np.asarray(values)
    if mask is not None:
        v = np.where((mask == FLUID)[..., None], v, 0.0)
    return float(np.sqrt(np.sum(v * v) / n ** 2))


def h1_seminorm(values, n: int, mask=None) -> float:
    """Forward-difference H^1 seminorm over edges joining two fluid nodes."""
    v = np.asarray(values)
    fl = np.ones(v.shape[:2], bool) if mask is None else (mask == FLUID)
    dx = (v[1:] - v[:-1]) * n
    dy = (v[:, 1:] - v[:, :-1]) * n
    ex = fl[1:] & fl[:-1]
    ey = fl[:, 1:] & fl[:, :-1]
    tot = np.sum(dx[ex] ** 2) + np.sum(dy[ey] ** 2)
    return float(np.sqrt(tot / n ** 2))


def _operator(n: int, params: LameParams, shift=None):
    """-L on the (n-1)^2 interior nodes, unknowns ordered [u1 nodes, u2 nodes]."""
    m = n - 1
    h = 1.0 / n
    e = np.ones(m)
    T = sp.diags([e[:-1], -2 * e, e[:-1]], [-1, 0, 1]) / h ** 2
    C = sp.diags([-e[:-1], e[:-1]], [-1, 1]) / (2 * h)
    I = sp.identity(m)
    Dxx = sp.kron(T, I)
    Dyy = sp.kron(I, T)
    Dxy = sp.kron(C, C)
    mu, lm = params.mu, params.lam + params.mu
    lap = Dxx + Dyy
    A = -sp.bmat([[mu * lap + lm * Dxx, lm * Dxy], [lm * Dxy, mu * lap + lm * Dyy]])
    if shift is not None:
        S = np.asarray(shift, dtype=float)
        A = A + sp.kron(sp.csr_matrix(S), sp.identity(m * m))
    return A.tocsr()


def _solve_spd(A, b, rtol: float = 1e-10):
    """Conjugate gradients with diagonal (Jacobi) scaling."""
    d = A.diagonal()
    Minv = spla.LinearOperator(A.shape, matvec=lambda v: v / d)
    it = [0]

    def count(_):
        it[0] += 1

    x, _ = spla.cg(A, b, rtol=rtol, atol=0.0, M=Minv, maxiter=20 * A.shape[0], callback=count)
    rel = float(np.linalg.norm(A @ x - b) / max(np.linalg.norm(b), 1e-300))
    if rel > 10 * rtol:
        raise SolverError(f"conjugate gradients stalled at relative residual {rel:.2e}")
    return x, {"iterations": it[0], "residual": rel}


def _solve_masked(n, params, fvals, fluid_inner, shift=None, rtol=1e-10):
    m = n - 1
    A = _operator(n, params, shift)
    keep = np.concatenate([fluid_inner.ravel(), fluid_inner.ravel()])
    idx = np.nonzero(keep)[0]
    Af = A[idx][:, idx]
    b = np.concatenate([fvals[1:-1, 1:-1, 0].ravel(), fvals[1:-1, 1:-1, 1].ravel()])[idx]
    u = np.zeros(2 * m * m)
    info = {"unknowns": len(idx)}
    if len(idx) and np.any(b != 0):
        u[idx], sinfo = _solve_spd(Af.tocsr(), b, rtol)
        info.update(sinfo)
    else:
        info.update(iterations=0, residual=0.0)
    out = np.zeros((n + 1, n + 1, 2))
    out[1:-1, 1:-1, 0] = u[: m * m].reshape(m, m)
    out[1:-1, 1:-1, 1] = u[m * m:].reshape(m, m)
    return out, info


def energy(values, n: int, params: LameParams) -> float:
    """Discrete energy mu sum |D+ u|^2 + (lambda+mu)(|Dx+ u1|^2 + |Dy+ u2|^2 + 2 <Dx0 u1, Dy0 u2>), times h^2.

    With zero boundary values this equals u . (-L_h u) h^2 exactly.
    """
    u = np.asarray(values)
    mu, lm = params.mu, params.lam + params.mu
    dx = (u[1:] - u[:-1]) * n
    dy = (u[:, 1:] - u[:, :-1]) * n
    cx = (u[2:, 1:-1] - u[:-2, 1:-1]) * n / 2
    cy = (u[1:-1, 2:] - u[1:-1, :-2]) * n / 2
    e = mu * (np.sum(dx ** 2) + np.sum(dy ** 2))
    e += lm * (np.sum(dx[..., 0] ** 2) + np.sum(dy[..., 1] ** 2) + 2 * np.sum(cx[..., 0] * cy[..., 1]))
    return float(e / n ** 2)


def solve_perforated(perforation: PerforationSpec, f, params: LameParams, grid_n: int,
                     rtol: float = 1e-10, check_resolution: bool = True) -> GridField:
    """Zero-extended solution of -L u = f in the perforated square, u = 0 on holes and the outer boundary."""
    eps, eta = perforation.epsilon, perforation.eta
    if check_resolution and grid_n < 8 / (eps * eta):
        raise ResolutionError(f"grid_n = {grid_n} < 8/(eps*eta) = {8 / (eps * eta):.3g}: holes unresolved")
    x = grid_nodes(grid_n)
    mask = np.full((grid_n + 1, grid_n + 1), FLUID, dtype=np.uint8)
    mask[perforation.in_hole(x.reshape(-1, 2)).reshape(mask.shape)] = HOLE
    mask[[0, -1], :] = BOUNDARY
    mask[:, [0, -1]] = BOUNDARY
    fvals = _eval_f(f, grid_n)
    fluid_inner = (mask == FLUID)[1:-1, 1:-1]
    u, info = _solve_masked(grid_n, params, fvals, fluid_inner, rtol=rtol)
    E = energy(u, grid_n, params)
    W = float(np.sum(fvals * u) / grid_n ** 2)
    info["energy"] = E
    info["work"] = W
    info["energy_residual"] = abs(E - W) / max(abs(W), 1e-300)
    return GridField(grid_n, u, mask, info)


def solve_effective(regime: str, M, sigma0, f, params: LameParams, grid_n: int,
                    rtol: float = 1e-10) -> GridField:
    """Effective solution: M^{-1} f (super), -L u + (M/sigma0^2) u = f (critical) or -L u = f (sub)."""
    if regime not in REGIMES:
        raise ValueError(f"unknown regime {regime!r}")
    M = np.asarray(M, dtype=float)
    if not np.allclose(M, M.T) or np.any(np.linalg.eigvalsh(0.5 * (M + M.T)) <= 0):
        raise ValueError("M must be symmetric positive definite")
    fvals = _eval_f(f, grid_n)
    if regime == "super":
        u = np.einsum("jk,...k->...j", np.linalg.inv(M), fvals)
        return GridField(grid_n, u, np.full(u.shape[:2], FLUID, dtype=np.uint8), {"algebraic": True})
    shift = None
    if regime == "critical":
        if sigma0 is None or sigma0 <= 0:
            raise ValueError("critical regime needs sigma0 > 0")
        shift = M / sigma0 ** 2
    mask = np.full((grid_n + 1, grid_n + 1), FLUID, dtype=np.uint8)
    mask[[0, -1], :] = BOUNDARY
    mask[:, [0, -1]] = BOUNDARY
    u, info = _solve_masked(grid_n, params, fvals, np.ones((grid_n - 1, grid_n - 1), bool), shift, rtol)
    return GridField(grid_n, u, mask, info)


def _periodic_operator(m: int, h: float, params: LameParams):
    """-L on an m x m periodic node grid of step h."""
    e = np.ones(m)
    T = sp.diags([e[:-1], -2 * e, e[:-1], [1.0], [1.0]], [-1, 0, 1, m - 1, 1 - m]) / h ** 2
    C = sp.diags([-e[:-1], e[:-1], [1.0], [-1.0]], [-1, 1, 1 - m, m - 1]) / (2 * h)
    I = sp.identity(m)
    Dxx, Dyy, Dxy = sp.kron(T, I), sp.kron(I, T), sp.kron(C, C)
    mu, lm = params.mu, params.lam + params.mu
    lap = Dxx + Dyy
    return -sp.bmat([[mu * lap + lm * Dxx, lm * Dxy], [lm * Dxy, mu * lap + lm * Dyy]]).tocsr()


def grid_cell_field(epsilon: float, eta: float, curve, params: LameParams, grid_n: int,
                    sigma_eps: float) -> np.ndarray:
    """Oscillating fields from the finite-difference cell problem on the masked grid.

    Solves -L_h v_k = e_k / sigma^2 on the fluid nodes of one periodic
    cell of side ``epsilon`` (v_k = 0 on hole nodes) and tiles the result
    over D.  The hole mask is the one used by :func:`solve_perforated`, so
    the discrete oscillating-test identity holds up to consistency error.
    Returns shape (n+1, n+1, 2, 2) with [..., j, k] = v_k^j.
    """
    per = epsilon * grid_n
    m = int(round(per))
    if abs(per - m) > 1e-9:
        raise ValueError("epsilon * grid_n must be an integer to tile the cell")
    if m < 8 / eta:
        raise ResolutionError(f"cell has {m} nodes per side; holes need at least {8 / eta:.1f}")
    h = 1.0 / grid_n
    s = np.arange(m) * h
    X, Y = np.meshgrid(s, s, indexing="ij")
    x = np.stack([X.ravel(), Y.ravel()], -1)
    fluid = ~curve.contains((x / epsilon - np.round(x / epsilon)) / eta)
    idx = np.nonzero(np.concatenate([fluid, fluid]))[0]
    A = _periodic_operator(m, h, params)[idx][:, idx].tocsc()
    lu = spla.splu(A)
    out = np.zeros((m, m, 2, 2))
    for k in range(2):
        b = np.zeros(2 * m * m)
        b[k * m * m:(k + 1) * m * m] = 1.0 / sigma_eps ** 2
        v = np.zeros(2 * m * m)
        v[idx] = lu.solve(b[idx])
        out[..., 0, k] = v[: m * m].reshape(m, m)
        out[..., 1, k] = v[m * m:].reshape(m, m)
    wrap = np.arange(grid_n + 1) % m
    return out[np.ix_(wrap, wrap)]


@dataclass(eq=False)
class DiscrepancyField:
    regime: str
    field: GridField
    l2: float
    h1: float


def discrepancy(regime: str, u_eps: GridField, u_or_f, v, M, sigma_eps: float,
                sigma0: float | None = None) -> DiscrepancyField:
    """Corrector discrepancy zeta on the grid of ``u_eps``.

    ``v`` holds the oscillating fields on the nodes, shape (n+1, n+1, 2, 2)
    with v[..., :, k] = v_k.  ``u_or_f`` is the load (super) or the
    effective solution (critical, sub), as a GridField or nodal array.
    """
    if regime not in REGIMES:
        raise ValueError(f"unknown regime {regime!r}")
    n = u_eps.n
    w = u_or_f.values if isinstance(u_or_f, GridField) else (
        _eval_f(u_or_f, n) if callable(u_or_f) else np.asarray(u_or_f, dtype=float))
    v = np.asarray(v, dtype=float)
    if w.shape != u_eps.values.shape or v.shape != u_eps.values.shape + (2,):
        raise ValueError("grid mismatch between the discrepancy inputs")
    M = np.asarray(M, dtype=float)
    if regime == "super":
        coef = w
        zeta = u_eps.values / sigma_eps ** 2 - np.einsum("...jk,...k->...j", v, coef)
    elif regime == "critical":
        if sigma0 is None:
            raise ValueError("critical regime needs sigma0")
        coef = sigma_eps ** 2 * np.einsum("jk,...k->...j", M / sigma0 ** 2, w)
        zeta = u_eps.values - np.einsum("...jk,...k->...j", v, coef)
    else:
        coef = np.einsum("jk,...k->...j", M, w)
        zeta = u_eps.values - np.einsum("...jk,...k->...j", v, coef)
    fld = GridField(n, zeta, u_eps.mask.copy())
    return DiscrepancyField(regime, fld, fld.l2_norm(), fld.h1_seminorm())


def bump(n: int, center=(0.5, 0.5), radius: float = 0.35) -> np.ndarray:
    """Smooth compactly supported test function exp(1 - 1/(1 - r^2/R^2))."""
    x = grid_nodes(n)
    r2 = np.sum((x - np.asarray(center)) ** 2, axis=-1) / radius ** 2
    out = np.zeros(r2.shape)
    inside = r2 < 1
    out[inside] = np.exp(1 - 1 / (1 - r2[inside]))
    return out


def _centered_grad(a, n: int):
    """Second-order centered gradient on the interior nodes; d[..., b] = d_b a."""
    gx = (a[2:, 1:-1] - a[:-2, 1:-1]) * n / 2
    gy = (a[1:-1, 2:] - a[1:-1, :-2]) * n / 2
    return np.stack([gx, gy], axis=-1)


@dataclass(frozen=True)
class IdentityReport:
    integrals: tuple
    residual: float


def oscillating_test_identity(u_eps: GridField, v_k, f, phi_test, sigma_eps: float, params: LameParams,
                              k: int) -> IdentityReport:
    """The five integrals of the oscillating-test identity and its relative residual.

    I1 = int mu grad u : (v (x) grad phi), I2 = int (lambda+mu) div u (grad phi . v),
    I3, I4 the same with u and v exchanged, I5 = int phi (f . v - e_k . u / sigma^2);
    the residual is |I1 + I2 - I3 - I4 - I5| / max |I_j|.
    """
    n = u_eps.n
    u = u_eps.values
    v = np.asarray(v_k, dtype=float)
    fv = _eval_f(f, n)
    phi = np.asarray(phi_test, dtype=float)
    mu, lm = params.mu, params.lam + params.mu
    gu = _centered_grad(u, n)          # [i, j, a, b] = d_b u^a
    gv = _centered_grad(v, n)
    gp = _centered_grad(phi, n)        # [i, j, b]
    ui, vi = u[1:-1, 1:-1], v[1:-1, 1:-1]
    h2 = 1.0 / n ** 2
    I1 = mu * h2 * np.einsum("ijab,ijb,ija->", gu, gp, vi)
    I2 = lm * h2 * np.sum(np.einsum("ijaa->ij", gu) * np.einsum("ijb,ijb->ij", gp, vi))
    I3 = mu * h2 * np.einsum("ijab,ijb,ija->", gv, gp, ui)
    I4 = lm * h2 * np.sum(np.einsum("ijaa->ij", gv) * np.einsum("ijb,ijb->ij", gp, ui))
    I5 = h2 * np.sum(phi * (np.sum(fv * v, axis=-1) - u[..., k] / sigma_eps ** 2))
    ints = (float(I1), float(I2), float(I3), float(I4), float(I5))
    scale = max(abs(t) for t in ints)
    if scale == 0:
        return IdentityReport(ints, 0.0)
    return IdentityReport(ints, abs(I1 + I2 - I3 - I4 - I5) / scale)


def weak_limit_metric(w, u, window: float, epsilon: float) -> float:
    """L^2 norm of box averages (side ``window``) of w - u: a weak-convergence surrogate."""
    if window < 2 * epsilon - 1e-12:
        raise ValueError("window must be at least 2*epsilon")
    wv = w.values if isinstance(w, GridField) else np.asarray(w, dtype=float)
    uv = u.values if isinstance(u, GridField) else np.asarray(u, dtype=float)
    if wv.shape != uv.shape:
        raise ValueError("grid mismatch")
    n = wv.shape[0] - 1
    size = max(1, int(round(window * n)))
    d = wv - uv
    avg = np.stack([ndimage.uniform_filter(d[..., c], size=size, mode="constant") for c in range(d.shape[-1])], -1)
    return l2_norm(avg, n)


def poincare_ratio(u_eps: GridField, sigma_eps: float) -> float:
    """||u|| / (sigma ||grad u||), bounded uniformly by the cube-wise Poincare inequality."""
    return u_eps.l2_norm() / (sigma_eps * u_eps.h1_seminorm())


# ---------------------------------------------------------------------------
# export

_MAGIC = b"PERFHOMGF1"


def write_grid(path, fld: GridField):
    """Flat binary: magic, n (int64), h (float64), mask (uint8), values (float64, row-major)."""
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<qd", fld.n, fld.h))
        fh.write(np.ascontiguousarray(fld.mask, dtype=np.uint8).tobytes())
        fh.write(np.ascontiguousarray(fld.values, dtype="<f8").tobytes())


def read_grid(path) -> GridField:
    with open(path, "rb") as fh:
        if fh.read(len(_MAGIC)) != _MAGIC:
            raise ValueError("not a perfhom grid file")
        n, _ = struct.unpack("<qd", fh.read(16))
        mask = np.frombuffer(fh.read((n + 1) ** 2), dtype=np.uint8).reshape(n + 1, n + 1).copy()
        vals = np.frombuffer(fh.read(), dtype="<f8").reshape(n + 1, n + 1, 2).copy()
    return GridField(int(n), vals, mask)


def write_csv_slice(path, fld: GridField, axis: int = 1, index: int | None = None):
    """One grid line (fixed ``axis`` coordinate) as CSV columns x, y, u1, u2, mask."""
    n = fld.n
    index = n // 2 if index is None else index
    x = grid_nodes(n)
    sl = (slice(None), index) if axis == 1 else (index, slice(None))
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["x", "y", "u1", "u2", "mask"])
        for p, u, m in zip(x[sl], fld.values[sl], fld.mask[sl]):
            wr.writerow([f"{p[0]:.17g}", f"{p[1]:.17g}", f"{u[0]:.17g}", f"{u[1]:.17g}", int(m)])
