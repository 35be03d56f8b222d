import numpy as np
import pytest

from perfhom.geometry import LameParams, build_perforation, parse_hole
from perfhom.homogenize import (FLUID, HOLE, GridField, ResolutionError, bump, discrepancy, energy, grid_cell_field,
                                grid_nodes, h1_seminorm, l2_norm, oscillating_test_identity, poincare_ratio,
                                read_grid, solve_effective, solve_perforated, weak_limit_metric, write_csv_slice,
                                write_grid)

P = LameParams(1.0, 1.0)
Pb = LameParams(2.5, 0.7)
pi = np.pi


def sine_load(x):
    return np.stack([np.sin(pi * x[..., 0]) * np.sin(pi * x[..., 1]),
                     np.sin(2 * pi * x[..., 0]) * np.sin(pi * x[..., 1])], -1)


def manufactured(params):
    """u = (sin pi x sin pi y, sin 2pi x sin pi y) and f = -L u, written out by hand."""
    mu, lm = params.mu, params.lam + params.mu

    def u(x):
        return sine_load(x)

    def f(x):
        X, Y = x[..., 0], x[..., 1]
        a = np.sin(pi * X) * np.sin(pi * Y)
        b = np.sin(2 * pi * X) * np.sin(pi * Y)
        ddx_div = -pi ** 2 * a + 2 * pi ** 2 * np.cos(2 * pi * X) * np.cos(pi * Y)
        ddy_div = pi ** 2 * np.cos(pi * X) * np.cos(pi * Y) - pi ** 2 * b
        return np.stack([2 * pi ** 2 * mu * a - lm * ddx_div, 5 * pi ** 2 * mu * b - lm * ddy_div], -1)

    return u, f


def _err(fld, u):
    return np.abs(fld.values - u(grid_nodes(fld.n))).max()


@pytest.mark.parametrize("params", [P, Pb])
def test_effective_solver_converges_at_second_order(params):
    u, f = manufactured(params)
    e = [_err(solve_effective("sub", np.eye(2), None, f, params, n), u) for n in (32, 64, 128)]
    assert e[2] < 1e-3
    assert np.log2(e[0] / e[1]) == pytest.approx(2.0, abs=0.15)
    assert np.log2(e[1] / e[2]) == pytest.approx(2.0, abs=0.15)


def test_critical_solver_with_zeroth_order_term():
    M = np.array([[2.0, 0.5], [0.5, 1.0]])
    s0 = 0.8
    u, f0 = manufactured(P)
    f = lambda x: f0(x) + np.einsum("jk,...k->...j", M / s0 ** 2, u(x))  # noqa: E731
    e = [_err(solve_effective("critical", M, s0, f, P, n), u) for n in (32, 64)]
    assert np.log2(e[0] / e[1]) == pytest.approx(2.0, abs=0.15)


def test_super_effective_is_algebraic():
    M = 3 * pi * np.eye(2)
    fld = solve_effective("super", M, None, np.array([1.0, 0.0]), P, 16)
    assert np.allclose(fld.values[..., 0], 1 / (3 * pi), atol=1e-15)
    assert np.allclose(fld.values[..., 1], 0.0, atol=0)


def test_effective_rejections():
    with pytest.raises(ValueError):
        solve_effective("super", -np.eye(2), None, sine_load, P, 16)
    with pytest.raises(ValueError):
        solve_effective("critical", np.eye(2), None, sine_load, P, 16)
    with pytest.raises(ValueError):
        solve_effective("dilute", np.eye(2), None, sine_load, P, 16)


def test_perforated_solver_converges_without_holes_in_the_way():
    # holes far smaller than h never capture a node, so the manufactured solution is recovered
    u, f = manufactured(P)
    perf = build_perforation(1 / 3, 1e-3, parse_hole("circle:0.25"))
    e = []
    for n in (32, 64):
        fld = solve_perforated(perf, f, P, n, check_resolution=False)
        assert np.all(fld.mask[1:-1, 1:-1] == FLUID)
        e.append(_err(fld, u))
    assert np.log2(e[0] / e[1]) == pytest.approx(2.0, abs=0.15)


@pytest.fixture(scope="module")
def perforated():
    perf = build_perforation(0.25, 0.25, parse_hole("circle:0.25"))
    return perf, solve_perforated(perf, sine_load, P, 128)


def test_perforated_solution_vanishes_on_holes_and_boundary(perforated):
    perf, u = perforated
    assert np.all(u.values[u.mask != FLUID] == 0)
    assert u.mask[32, 32] == HOLE
    assert u.info["residual"] <= 1e-9


def test_perforated_energy_identity(perforated):
    _, u = perforated
    assert u.info["energy_residual"] < 1e-6
    assert energy(u.values, u.n, P) == pytest.approx(u.info["energy"], rel=1e-14)


def test_perforated_solver_is_linear(perforated):
    perf, u = perforated
    f2 = lambda x: np.stack([x[..., 1], 1.0 - x[..., 0]], -1)  # noqa: E731
    u2 = solve_perforated(perf, f2, P, 128)
    u3 = solve_perforated(perf, lambda x: 2 * sine_load(x) - f2(x), P, 128)
    scale = np.abs(u3.values).max()
    assert np.abs(u3.values - 2 * u.values + u2.values).max() < 1e-8 * scale


def test_zero_load_gives_zero_solution(perforated):
    perf, _ = perforated
    z = solve_perforated(perf, np.zeros(2), P, 128)
    assert not z.values.any() and z.info["iterations"] == 0


def test_resolution_guard():
    perf = build_perforation(0.125, 0.1, parse_hole("circle:0.25"))
    with pytest.raises(ResolutionError, match="640"):
        solve_perforated(perf, sine_load, P, 256)


def test_poincare_ratio_stays_bounded():
    ratios = []
    for eps in (0.25, 0.125):
        perf = build_perforation(eps, 0.25, parse_hole("circle:0.25"))
        u = solve_perforated(perf, sine_load, P, 256)
        ratios.append(poincare_ratio(u, eps * np.sqrt(np.log(4))))
    assert max(ratios) / min(ratios) < 2


def test_norms_on_linear_field():
    n = 64
    x = grid_nodes(n)
    vals = np.stack([x[..., 0], 2 * x[..., 1]], -1)
    # |grad|^2 = 1 + 4 on each edge set; edge sums carry n(n+1) terms per direction
    assert h1_seminorm(vals, n) == pytest.approx(np.sqrt((n * (n + 1)) * 5 / n ** 2))
    assert l2_norm(np.ones((n + 1, n + 1, 2)), n) == pytest.approx(np.sqrt(2) * (n + 1) / n)


# ---------------------------------------------------------------------------
# discrepancy, oscillating-test identity, weak metric


def test_discrepancy_of_exact_corrector_vanishes():
    n = 16
    v = np.broadcast_to(np.eye(2) * 0.1, (n + 1, n + 1, 2, 2))
    w = grid_nodes(n)
    s = 0.5
    u = GridField(n, s ** 2 * 0.1 * w, np.zeros((n + 1, n + 1), np.uint8))
    d = discrepancy("super", u, w, v, np.eye(2), s)
    assert d.l2 < 1e-15 and d.h1 < 1e-14
    M = np.array([[2.0, 0.1], [0.1, 1.0]])
    u2 = GridField(n, 0.1 * np.einsum("jk,...k->...j", M, w), u.mask)
    assert discrepancy("sub", u2, w, v, M, s).l2 < 1e-15
    with pytest.raises(ValueError):
        discrepancy("super", u, w[:-1], v, np.eye(2), s)
    with pytest.raises(ValueError):
        discrepancy("critical", u, w, v, np.eye(2), s)


def test_identity_with_zero_test_function(perforated):
    _, u = perforated
    v = np.zeros((129, 129, 2))
    rep = oscillating_test_identity(u, v, sine_load, np.zeros((129, 129)), 1.0, P, 0)
    assert rep.residual == 0.0


def test_identity_with_grid_cell_field_refines():
    curve = parse_hole("circle:0.25")
    eps, eta = 0.25, 0.25
    s = eps * np.sqrt(np.log(4))
    res = []
    for n in (128, 256):
        u = solve_perforated(build_perforation(eps, eta, curve), sine_load, P, n)
        v = grid_cell_field(eps, eta, curve, P, n, s)
        phi = bump(n, (0.47, 0.55))
        res.append(max(oscillating_test_identity(u, v[..., k], sine_load, phi, s, P, k).residual
                       for k in range(2)))
    assert res[1] < res[0] / 2.5
    assert res[1] < 5e-3


def test_grid_cell_field_guards():
    with pytest.raises(ResolutionError):
        grid_cell_field(0.25, 0.1, parse_hole("circle:0.25"), P, 128, 1.0)
    with pytest.raises(ValueError):
        grid_cell_field(0.3, 0.25, parse_hole("circle:0.25"), P, 128, 1.0)


def test_bump_support_and_peak():
    b = bump(64, (0.5, 0.5), 0.25)
    assert b[32, 32] == pytest.approx(1.0)
    x = grid_nodes(64)
    assert np.all(b[np.linalg.norm(x - 0.5, axis=-1) >= 0.25] == 0)


def test_weak_metric():
    n = 128
    x = grid_nodes(n)
    u = sine_load(x)
    assert weak_limit_metric(u, u, 0.25, 0.125) == 0.0
    osc = u + np.sin(2 * pi * 16 * x[..., :1])
    # fast oscillations average out in windows of whole periods
    assert weak_limit_metric(osc, u, 0.25, 0.0625) < 0.05 * l2_norm(osc - u, n)
    with pytest.raises(ValueError):
        weak_limit_metric(u, u, 0.1, 0.125)


# ---------------------------------------------------------------------------
# export


def test_grid_file_roundtrip(tmp_path, perforated):
    _, u = perforated
    path = tmp_path / "u.grid"
    write_grid(path, u)
    back = read_grid(path)
    assert back.n == u.n and np.array_equal(back.values, u.values) and np.array_equal(back.mask, u.mask)
    (tmp_path / "bad").write_bytes(b"nope")
    with pytest.raises(ValueError):
        read_grid(tmp_path / "bad")


def test_csv_slice(tmp_path, perforated):
    _, u = perforated
    path = tmp_path / "s.csv"
    write_csv_slice(path, u)
    rows = path.read_text().splitlines()
    assert rows[0] == "x,y,u1,u2,mask" and len(rows) == u.n + 2
    x, y, u1, u2, m = rows[40].split(",")
    assert float(y) == 0.5 and float(u1) == u.values[39, 64, 0] and int(m) == u.mask[39, 64]
