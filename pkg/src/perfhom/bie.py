"""Nyström discretization of elastostatic layer potentials on a closed curve.

Densities are arrays of shape (n, 2); operators act on the flattened
node-major vector ``phi.reshape(-1)``.  The single layer uses Kress
logarithmic weights, the Cauchy part of the double layer the alternating
point trapezoid rule.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .geometry import Curve, LameParams, Panelization, closest_parameter, panelize, upsample_density
from .kernels import (REMAINDER_REACH, PeriodicGreen, conormal_from_gradient, conormal_kernel, green_for, kelvin,
                      kelvin_gradient, scaled_green)


class QuadratureError(RuntimeError):
    """Target too close to the boundary for the requested evaluation."""


class KernelBasisError(RuntimeError):
    """Kernel extraction failed (dimension or normalization)."""


class SolveError(RuntimeError):
    """Boundary system near-degenerate."""


LABELS = ("S", "K", "Kstar", "S_eta", "K_eta", "Kstar_eta", "D_eta_restricted")
_J = np.array([[0.0, 1.0], [-1.0, 0.0]])


@dataclass(frozen=True, eq=False)
class BoundaryOperator:
    label: str
    matrix: np.ndarray
    pan: Panelization
    params: LameParams
    eta: float | None = None

    def apply(self, phi) -> np.ndarray:
        phi = np.asarray(phi, dtype=float)
        if phi.ndim == 1 and phi.shape[0] == 2:
            phi = np.broadcast_to(phi, (self.pan.n, 2))
        return (self.matrix @ phi.reshape(-1)).reshape(-1, 2)

    def __matmul__(self, phi):
        return self.apply(phi)


def _blocks_to_matrix(blocks):
    n = blocks.shape[0]
    return blocks.transpose(0, 2, 1, 3).reshape(2 * n, 2 * n)


def kress_log_weights(n: int) -> np.ndarray:
    """Weights R[(i - j) mod n] for int_0^{2pi} log(4 sin^2((t - s)/2)) f(s) ds."""
    m = n // 2
    d = 2 * np.pi * np.arange(n) / n
    k = np.arange(1, m)
    return -(2 * np.pi / m) * (np.cos(np.outer(d, k)) / k).sum(axis=1) - (np.pi / m ** 2) * np.cos(m * d)


def cot_pv_weights(n: int) -> np.ndarray:
    """Alternating-point weights W[(i - j) mod n] for PV int (1/2) cot((t - s)/2) f(s) ds."""
    h = 2 * np.pi / n
    off = np.arange(n)
    w = np.zeros(n)
    odd = off % 2 == 1
    w[odd] = h / np.tan(0.5 * h * off[odd])
    return w


def _geometry_tables(pan: Panelization):
    n = pan.n
    x = pan.points
    z = x[:, None, :] - x[None, :, :]
    r2 = np.sum(z * z, axis=-1)
    np.fill_diagonal(r2, 1.0)
    idx = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
    dt = pan.h * idx
    return z, r2, idx, dt


def _single_layer(pan: Panelization, params: LameParams) -> np.ndarray:
    n, h = pan.n, pan.h
    c1, c2 = params.c1, params.c2
    z, r2, idx, dt = _geometry_tables(pan)
    logsin = np.log(4 * np.sin(0.5 * dt) ** 2 + np.eye(n))
    smooth_log = 0.5 * np.log(r2) - 0.5 * logsin
    np.fill_diagonal(smooth_log, np.log(pan.speed))
    zz = z[..., :, None] * z[..., None, :] / r2[..., None, None]
    tau = pan.tangents
    zz[np.arange(n), np.arange(n)] = tau[:, :, None] * tau[:, None, :]
    R = kress_log_weights(n)[idx]
    iso = c1 / (2 * np.pi) * (0.5 * R + h * smooth_log) * pan.speed[None, :]
    blocks = iso[..., None, None] * np.eye(2) - c2 / (2 * np.pi) * h * zz * pan.speed[None, :, None, None]
    return _blocks_to_matrix(blocks)


def _double_layer(pan: Panelization, params: LameParams, adjoint: bool) -> np.ndarray:
    n, h = pan.n, pan.h
    mu, c1, c2 = params.mu, params.c1, params.c2
    z, r2, idx, dt = _geometry_tables(pan)
    x, N, tau = pan.points, pan.normals, pan.tangents
    ii, jj = np.nonzero(~np.eye(n, dtype=bool))
    weak = np.zeros((n, n, 2, 2))
    if adjoint:
        # K*_ik(x_i; y_j) = K_ki(y_j; x_i): normal at the target
        parts = conormal_kernel(x[jj], x[ii], N[ii], params, split=True)
        weak[ii, jj] = parts.weak
        ztau = np.sum(z * tau[:, None, :], axis=-1)
    else:
        parts = conormal_kernel(x[ii], x[jj], N[jj], params, split=True)
        weak[ii, jj] = np.swapaxes(parts.weak, -1, -2)
        ztau = np.sum(z * tau[None, :, :], axis=-1)
    kap = pan.curvature
    diag = (mu * c1 * kap / (4 * np.pi))[:, None, None] * np.eye(2) \
        + (mu * c2 * kap / (2 * np.pi))[:, None, None] * tau[:, :, None] * tau[:, None, :]
    weak[np.arange(n), np.arange(n)] = diag
    weak = weak * (h * pan.speed)[None, :, None, None]
    # Cauchy part: <z, tau> |y'| / |z|^2 = (1/2) cot((t - s)/2) + smooth
    half_cot = 0.5 / np.tan(0.5 * dt + np.eye(n))
    smooth = ztau * pan.speed[None, :] / r2 - half_cot
    a = np.sum(pan.d1 * pan.d2, axis=1) / pan.speed ** 2
    np.fill_diagonal(smooth, -0.5 * a)
    wts = cot_pv_weights(n)[idx] + h * smooth
    cauchy = (mu * c2 / (2 * np.pi)) * wts[..., None, None] * _J
    return _blocks_to_matrix(weak + cauchy)


def _remainder_at(green: PeriodicGreen, w):
    """R and grad R at displacement w, falling back to direct evaluation off the table."""
    inside = np.all(np.abs(w) <= REMAINDER_REACH, axis=-1)
    R = np.empty(w.shape[:-1] + (2, 2))
    dR = np.empty(w.shape[:-1] + (2, 2, 2))
    if inside.any():
        R[inside], dR[inside] = green.remainder(w[inside])
    if (~inside).any():
        wo = w[~inside]
        G, dG = green.evaluate(wo)
        R[~inside] = G - kelvin(wo, green.params)
        dR[~inside] = dG - kelvin_gradient(wo, green.params)
    return R, dR


def _periodic_parts(pan: Panelization, params: LameParams, eta: float, green: PeriodicGreen):
    z = pan.points[:, None, :] - pan.points[None, :, :]
    R, dR = _remainder_at(green, eta * z)
    wt = (pan.h * pan.speed)[None, :, None, None]
    S1 = R * wt
    K1 = np.swapaxes(conormal_from_gradient(dR, pan.normals[None, :, :], params), -1, -2) * wt
    Ks1 = conormal_from_gradient(-dR, pan.normals[:, None, :], params) * wt
    return _blocks_to_matrix(S1), _blocks_to_matrix(K1), _blocks_to_matrix(Ks1)


def assemble(pan: Panelization, label: str, params: LameParams, eta: float | None = None,
             green: PeriodicGreen | None = None) -> BoundaryOperator:
    """Dense Nyström matrix of a layer operator on ``pan``.

    Labels: ``S``, ``K``, ``Kstar`` (free space); ``S_eta``, ``K_eta``,
    ``Kstar_eta`` (periodic, scaled torus of side 1/eta) and
    ``D_eta_restricted`` (the periodic correction K^eta_{T,1} alone).
    """
    if label not in LABELS:
        raise ValueError(f"unknown operator label {label!r}")
    if params.dim != 2:
        raise ValueError("boundary operators are implemented for d = 2 only")
    periodic = label.endswith("eta") or label == "D_eta_restricted"
    if periodic != (eta is not None):
        raise ValueError("eta must be supplied exactly for periodic operators")
    if periodic and not 0 < eta < 1 / (2 * pan.curve.r2):
        raise ValueError("eta out of range (0, 1/(2 r2))")
    if label == "S":
        mat = _single_layer(pan, params)
    elif label == "K":
        mat = _double_layer(pan, params, adjoint=False)
    elif label == "Kstar":
        mat = _double_layer(pan, params, adjoint=True)
    else:
        green = green or green_for(params)
        S1, K1, Ks1 = _periodic_parts(pan, params, eta, green)
        if label == "S_eta":
            mat = _single_layer(pan, params) + S1
        elif label == "K_eta":
            mat = _double_layer(pan, params, adjoint=False) + eta * K1
        elif label == "Kstar_eta":
            mat = _double_layer(pan, params, adjoint=True) + eta * Ks1
        else:
            mat = K1
    return BoundaryOperator(label, mat, pan, params, eta)


# ---------------------------------------------------------------------------
# evaluation off the boundary


def _kernel_single(pan, phi, x, params, eta, green, grad):
    z = x[:, None, :] - pan.points[None, :, :]
    if eta is None:
        G = kelvin(z, params)
        dG = kelvin_gradient(z, params) if grad else None
    else:
        out = scaled_green(z.reshape(-1, 2), eta, params, green=green, grad=grad)
        G, dG = (out[0].reshape(z.shape[:2] + (2, 2)), out[1].reshape(z.shape[:2] + (2, 2, 2))) if grad \
            else (out.reshape(z.shape[:2] + (2, 2)), None)
    wphi = phi * pan.weights.reshape((-1,) + (1,) * (phi.ndim - 1))
    val = np.einsum("mnjk,nk...->mj...", G, wphi)
    if not grad:
        return val
    # du^a/dx_b = sum d_b G^a_k phi^k
    return val, np.einsum("mnbak,nk...->mab...", dG, wphi)


def _kernel_double(pan, phi, x, params, eta, green):
    z = x[:, None, :] - pan.points[None, :, :]
    if eta is None:
        dG = kelvin_gradient(z, params)
    else:
        _, dG = scaled_green(z.reshape(-1, 2), eta, params, green=green)
        dG = dG.reshape(z.shape[:2] + (2, 2, 2))
    K = conormal_from_gradient(dG, pan.normals[None, :, :], params)
    return np.einsum("mnik,ni...->mk...", K, phi * pan.weights.reshape((-1,) + (1,) * (phi.ndim - 1)))


def boundary_distance(pan: Panelization, x):
    """Distance to the curve, signed positive outside, and the foot parameter."""
    x = np.atleast_2d(x)
    t = closest_parameter(pan.curve, x, pan if pan.n >= 256 else None)
    xb = pan.curve.point(t)
    nb = pan.curve.normal(t)
    return np.sum((x - xb) * nb, axis=-1), t


def _near_eval(pan, phi, x, fn, max_factor, extrapolate):
    """Evaluate ``fn(pan, phi, x)`` with upsampling near the curve."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    d2 = np.min(np.sum((x[:, None, :] - pan.points[None]) ** 2, axis=-1), axis=1) if len(x) else np.zeros(0)
    band = 5 * pan.spacing
    far = np.sqrt(d2) >= band
    res = [None] * len(x)
    out = None

    def store(sel, vals):
        nonlocal out
        if out is None:
            if isinstance(vals, tuple):
                out = tuple(np.zeros((len(x),) + v.shape[1:]) for v in vals)
            else:
                out = np.zeros((len(x),) + vals.shape[1:])
        if isinstance(vals, tuple):
            for o, v in zip(out, vals):
                o[sel] = v
        else:
            out[sel] = vals

    for s in range(0, len(x), 512):
        sl = np.arange(s, min(s + 512, len(x)))
        sel = sl[far[sl]]
        if len(sel):
            store(sel, fn(pan, phi, x[sel]))
    near = np.nonzero(~far)[0]
    if len(near):
        dist, t = boundary_distance(pan, x[near])
        ad = np.abs(dist)
        need = np.where(ad > 0, band / np.maximum(ad, 1e-300), np.inf)
        factor = 2 ** np.ceil(np.log2(np.maximum(need, 1.0)))
        ok = factor <= max_factor
        for f in np.unique(factor[ok]):
            sel = near[ok & (factor == f)]
            fine = pan.upsample(int(f)) if f > 1 else pan
            fphi = upsample_density(phi, int(f)) if f > 1 else phi
            for s in range(0, len(sel), 128):
                store(sel[s:s + 128], fn(fine, fphi, x[sel[s:s + 128]]))
        bad = near[~ok]
        if len(bad):
            if not extrapolate:
                raise QuadratureError("target inside the unreliable near-boundary band")
            fine = pan.upsample(max_factor)
            fphi = upsample_density(phi, max_factor)
            t0 = band / max_factor
            tb = t[~ok]
            db = dist[~ok]
            side = np.where(db >= 0, 1.0, -1.0)
            xb = pan.curve.point(tb)
            nb = pan.curve.normal(tb)
            ts = t0 * np.arange(1, 7)
            pts = xb[:, None, :] + (side[:, None] * ts[None, :])[..., None] * nb[:, None, :]
            vals = fn(fine, fphi, pts.reshape(-1, 2))
            # polynomial interpolation along the normal line
            V = np.vander(ts, 6, increasing=True)
            Vinv = np.linalg.inv(V)

            def interp(v):
                v = v.reshape((len(bad), 6) + v.shape[1:])
                coef = np.einsum("pj,mj...->mp...", Vinv, v)
                powers = np.abs(db)[:, None] ** np.arange(6)[None, :]
                return np.einsum("mp,mp...->m...", powers, coef)

            store(bad, tuple(interp(v) for v in vals) if isinstance(vals, tuple) else interp(vals))
    return out


def eval_single(pan: Panelization, phi, x, params: LameParams, eta: float | None = None,
                grad: bool = False, green: PeriodicGreen | None = None, max_factor: int = 256,
                extrapolate: bool = False):
    """Single-layer potential S[phi](x) (and its Jacobian [a, b] = d_b u^a)."""
    phi = np.asarray(phi, dtype=float)
    fn = lambda p, f, xx: _kernel_single(p, f, xx, params, eta, green, grad)  # noqa: E731
    return _near_eval(pan, phi, x, fn, max_factor, extrapolate)


def eval_double(pan: Panelization, phi, x, params: LameParams, eta: float | None = None,
                green: PeriodicGreen | None = None, max_factor: int = 256, extrapolate: bool = False):
    """Double-layer potential D[phi](x)."""
    phi = np.asarray(phi, dtype=float)
    fn = lambda p, f, xx: _kernel_double(p, f, xx, params, eta, green)  # noqa: E731
    return _near_eval(pan, phi, x, fn, max_factor, extrapolate)


def conormal(jac, n, params: LameParams):
    """(lambda+mu)(div u) N + mu (grad u) N from a Jacobian [.., a, b] = d_b u^a."""
    div = np.trace(jac, axis1=-2, axis2=-1)
    return (params.lam + params.mu) * div[..., None] * n + params.mu * np.einsum("...ab,...b->...a", jac, n)


# ---------------------------------------------------------------------------
# jump relations


def richardson_trace(values, ts):
    """Extrapolate samples F(t_j) of a smooth function to t = 0."""
    ts = np.asarray(ts, dtype=float)
    V = np.vander(ts, len(ts), increasing=True)
    w = np.linalg.solve(V.T, np.eye(len(ts))[0])
    return np.tensordot(w, values, axes=(0, 0))


@dataclass
class JumpReport:
    continuity: float
    conormal_jump: float
    trace_plus: float
    trace_minus: float
    double_jump: float
    double_sign: int
    double_trace: float
    flux_interior: float
    flux_exterior: float

    def residuals(self) -> dict:
        return {k: getattr(self, k) for k in ("continuity", "conormal_jump", "trace_plus", "trace_minus",
                                              "double_jump", "double_trace", "flux_interior", "flux_exterior")}


def verify_jumps(pan: Panelization, phi, params: LameParams, n_offsets: int = 8, t0: float | None = None,
                 ops: dict | None = None):
    """Two-sided traces of S, its conormal derivative and D by Richardson extrapolation.

    ``phi`` is one density (n, 2) or a stack (m, n, 2); a stack returns one
    report per density.  The double-layer jump is measured as D|_- - D|_+
    (interior minus exterior); ``double_sign`` is the sign s for which that
    jump equals s*phi.  The offsets t0*j, j = 1..n_offsets, must stay well
    below the smallest radius of curvature for the extrapolation to be sharp.
    """
    phi = np.asarray(phi, dtype=float)
    single = phi.ndim == 2
    stack = phi[None] if single else phi
    dens = np.moveaxis(stack, 0, -1)              # (n, 2, m)
    if t0 is None:
        t0 = pan.curve.r1 / 80
    ts = t0 * np.arange(1, n_offsets + 1)
    xb, nb = pan.points, pan.normals
    traces = {}
    for side in (1.0, -1.0):
        pts = (xb[None, :, :] + side * ts[:, None, None] * nb[None, :, :]).reshape(-1, 2)
        S, jac = eval_single(pan, dens, pts, params, grad=True)
        D = eval_double(pan, dens, pts, params)
        shp = (len(ts), pan.n)
        S = np.moveaxis(S, -1, 0).reshape((-1,) + shp + (2,))
        D = np.moveaxis(D, -1, 0).reshape((-1,) + shp + (2,))
        jac = np.moveaxis(jac, -1, 0).reshape((-1,) + shp + (2, 2))
        cn = conormal(jac, nb[None, None], params)
        traces[side] = [richardson_trace(np.moveaxis(a, 1, 0), ts) for a in (S, cn, D)]
    ops = ops or {}
    Ks = ops.get("Kstar") or assemble(pan, "Kstar", params)
    K = ops.get("K") or assemble(pan, "K", params)
    reports = []
    for q, f in enumerate(stack):
        Kphi, Ksphi = K @ f, Ks @ f
        Sp, cnp, Dp = (a[q] for a in traces[1.0])
        Sm, cnm, Dm = (a[q] for a in traces[-1.0])
        scale = max(np.abs(f).max(), 1e-300)
        jump = Dm - Dp
        sign = 1 if np.sum(jump * f) >= 0 else -1
        reports.append(JumpReport(
            continuity=float(np.abs(Sp - Sm).max() / scale),
            conormal_jump=float(np.abs(cnp - cnm - f).max() / scale),
            trace_plus=float(np.abs(cnp - (0.5 * f + Ksphi)).max() / scale),
            trace_minus=float(np.abs(cnm - (-0.5 * f + Ksphi)).max() / scale),
            double_jump=float(np.abs(jump - sign * f).max() / scale),
            double_sign=sign,
            double_trace=float(max(np.abs(Dp - (-0.5 * f + Kphi)).max(),
                                   np.abs(Dm - (0.5 * f + Kphi)).max()) / scale),
            flux_interior=float(np.abs(pan.integrate(cnm)).max() / scale),
            flux_exterior=float(np.abs(pan.integrate(cnp) - pan.integrate(f)).max() / scale),
        ))
    return reports[0] if single else reports


# ---------------------------------------------------------------------------
# kernel basis and decomposition


@dataclass(frozen=True, eq=False)
class KernelBasis:
    pan: Panelization
    phi_star: np.ndarray          # (2, n, 2): phi_star[j] is the density phi*_j
    A_T: np.ndarray
    singular_values: np.ndarray   # three smallest, ascending
    constancy_residual: float
    moment_condition: float
    rescale: float = 1.0
    probes: np.ndarray = field(default=None, repr=False)


def _probe_points(curve: Curve):
    ang = np.pi / 4 + 0.5 * np.pi * np.arange(4)
    return 0.5 * curve.r1 * np.stack([np.cos(ang), np.sin(ang)], -1)


def kernel_basis(pan: Panelization, params: LameParams, kernel_tol: float = 1e-8, gap_tol: float = 1e-3,
                 max_rescales: int = 3, _depth: int = 0) -> KernelBasis:
    """Densities spanning ker(-1/2 I + K*) normalized to unit moments, and A_T.

    If the dimension/normalization checks fail, the curve is rescaled by 0.9
    (up to ``max_rescales`` times) and the rescaling factor is recorded.
    """
    try:
        Ks = assemble(pan, "Kstar", params)
        A = Ks.matrix - 0.5 * np.eye(2 * pan.n)
        _, s, vt = np.linalg.svd(A)
        small = s[::-1][:3]
        if not (small[1] <= kernel_tol and small[2] >= gap_tol):
            raise KernelBasisError(f"kernel dimension != 2 at this resolution (singular values {small})")
        V = vt[-2:].T.reshape(pan.n, 2, 2)          # [node, component, vector]
        mom = np.einsum("n,nab->ab", pan.weights, V)  # [component, vector]
        cond = np.linalg.cond(mom)
        if cond > 1e8:
            raise KernelBasisError(f"degenerate moment normalization (condition {cond:.2e})")
        phi = np.einsum("nab,bj->jna", V, np.linalg.inv(mom))
        probes = _probe_points(pan.curve)
        S = assemble(pan, "S", params)
        A_T = np.zeros((2, 2))
        resid = 0.0
        for j in range(2):
            vals = eval_single(pan, phi[j], probes, params)
            const = vals.mean(axis=0)
            A_T[:, j] = -const
            nodal = S @ phi[j]
            resid = max(resid, np.abs(nodal - const).max(), np.abs(vals - const).max())
        if abs(np.linalg.det(A_T)) < 1e-10 * max(np.abs(A_T).max(), 1e-300) ** 2:
            raise KernelBasisError("A_T is singular for this curve")
        return KernelBasis(pan, phi, A_T, small, float(resid), float(cond), 0.9 ** _depth, probes)
    except KernelBasisError:
        if _depth >= max_rescales:
            raise
        curve = pan.curve.scaled(0.9)
        return kernel_basis(panelize(curve, pan.n), params, kernel_tol, gap_tol, max_rescales, _depth + 1)


@dataclass(frozen=True, eq=False)
class Decomposition:
    phi: np.ndarray
    pi0: np.ndarray
    pi1: np.ndarray


def decompose(kb: KernelBasis, phi) -> Decomposition:
    """Split phi into a constant plus a field orthogonal to the kernel basis."""
    phi = np.asarray(phi, dtype=float)
    if phi.ndim == 1:
        phi = np.broadcast_to(phi, (kb.pan.n, 2))
    pi0 = np.array([kb.pan.inner(kb.phi_star[k], phi) for k in range(2)])
    return Decomposition(phi, pi0, phi - pi0[None, :])


# ---------------------------------------------------------------------------
# periodic Dirichlet solve


@dataclass(frozen=True, eq=False)
class PeriodicSolve:
    g: np.ndarray
    residual: float
    condition: float


def solve_periodic_dirichlet(pan: Panelization, eta: float, h, params: LameParams,
                             op: BoundaryOperator | None = None, max_condition: float = 1e10) -> PeriodicSolve:
    """Solve (-1/2 I + K^eta) g = h by dense LU."""
    if op is None:
        op = assemble(pan, "K_eta", params, eta=eta)
    h = np.asarray(h, dtype=float)
    if h.ndim >= 2 and h.shape[:2] == (pan.n, 2):
        rhs = h.reshape((2 * pan.n,) + h.shape[2:])
    elif h.shape[0] == 2 * pan.n:
        rhs = h
    else:
        raise ValueError("boundary data must have shape (n, 2, ...) or (2n, ...)")
    A = op.matrix - 0.5 * np.eye(2 * pan.n)
    cond = float(np.linalg.cond(A))
    if cond > max_condition:
        raise SolveError(f"periodic boundary system near-degenerate (condition {cond:.2e})")
    g = sla.lu_solve(sla.lu_factor(A), rhs)
    res = np.abs(A @ g - rhs).max() / max(np.abs(rhs).max(), 1e-300)
    return PeriodicSolve(g.reshape(h.shape), float(res), cond)


# ---------------------------------------------------------------------------
# binary export

_MAGIC = b"PERFHOMOP1"


def write_operator(path, op: BoundaryOperator):
    """Row-major float64 matrix preceded by a fixed header (label, n, d, eta)."""
    eta = np.nan if op.eta is None else float(op.eta)
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(op.label.encode().ljust(16, b"\0"))
        fh.write(struct.pack("<qqd", op.pan.n, op.params.dim, eta))
        fh.write(np.ascontiguousarray(op.matrix, dtype="<f8").tobytes())


def read_operator(path):
    """Return ``(label, n, d, eta, matrix)`` from a file written by ``write_operator``."""
    with open(path, "rb") as fh:
        if fh.read(len(_MAGIC)) != _MAGIC:
            raise ValueError("not a perfhom operator file")
        label = fh.read(16).rstrip(b"\0").decode()
        n, d, eta = struct.unpack("<qqd", fh.read(24))
        mat = np.frombuffer(fh.read(), dtype="<f8").reshape(d * n, d * n)
    return label, n, d, (None if np.isnan(eta) else eta), mat
