"""Stabilized difference factors, moment-fitted stencils, corrected blocks."""
import numpy as np
import pytest

from multiscat import quadrature as q
from multiscat.geometry import build_surface_grid
from multiscat.kernels import kernel_matrix
from multiscat.surfaces import HeightFunction

K1, K2 = 8.0, 16.0


# ----------------------------------------------------------------------
# psi factors
# ----------------------------------------------------------------------
@pytest.mark.parametrize("psi", [q.psi_c, q.psi_s, q.psi_e, q.psi_o,
                                 q.psi_t, q.psi_u])
def test_series_matches_closed_form_on_overlap(psi):
    """Series and closed form must agree where both are accurate.

    The overlap band max(k) r in [0.3, 1.0] is far from the r -> 0
    cancellation, so the closed form is good to ~1e-14 there; 12 series
    terms are converged to far below that.
    """
    r = np.linspace(1.001, 2.2, 60) / max(K1, K2)   # closed-form branch
    closed = psi(K1, K2, r)
    series = q._series_eval(*_coeffs_of(psi), K1, K2, r)
    np.testing.assert_allclose(series, closed, rtol=1e-10,
                               atol=1e-12 * np.abs(closed).max())


def _coeffs_of(psi):
    table = {q.psi_c: q._coeffs_c, q.psi_s: q._coeffs_s,
             q.psi_e: q._coeffs_e, q.psi_o: q._coeffs_o,
             q.psi_t: q._coeffs_t, q.psi_u: q._coeffs_u}
    return table[psi]()


def test_psi_factors_finite_at_zero():
    for psi in (q.psi_c, q.psi_s, q.psi_e, q.psi_o, q.psi_t, q.psi_u):
        v = psi(K1, K2, np.array([0.0, 1e-12, 1e-6]))
        assert np.all(np.isfinite(v))
        assert abs(v[1] - v[0]) < 1e-6 * (1.0 + abs(v[0]))


def test_equal_wavenumbers_give_zero_difference():
    r = np.linspace(0.0, 2.0, 50)
    for psi in (q.psi_c, q.psi_s, q.psi_e, q.psi_o, q.psi_t, q.psi_u):
        np.testing.assert_allclose(psi(5.0, 5.0, r), 0.0, atol=1e-13)


def test_difference_blocks_match_kernel_difference():
    """Off the diagonal, the psi split must equal K(k1) - K(k2) exactly."""
    rng = np.random.default_rng(5)
    t = rng.uniform(0, 1, (6, 3))
    s = rng.uniform(0, 1, (8, 3)) + np.array([1.5, 0.0, 0.0])
    nt = rng.normal(size=(6, 3))
    nt /= np.linalg.norm(nt, axis=1, keepdims=True)
    ns = rng.normal(size=(8, 3))
    ns /= np.linalg.norm(ns, axis=1, keepdims=True)
    out = {kd: np.zeros((6, 8), dtype=complex)
           for kd in ("S", "D", "Dt", "T")}
    q.add_difference_blocks(out, K1, K2, t, s, nt, ns)
    for kd in out:
        ref = kernel_matrix(kd, K1, t, s, tgt_normals=nt, src_normals=ns) \
            - kernel_matrix(kd, K2, t, s, tgt_normals=nt, src_normals=ns)
        np.testing.assert_allclose(out[kd], ref, rtol=1e-10,
                                   atol=1e-12 * np.abs(ref).max())


def test_difference_blocks_stable_at_small_separation():
    """Near the diagonal the naive difference loses digits; the split not.

    Oracle: evaluate the naive difference in extended precision via the
    series (mpmath-free: compare against the split evaluated at a tiny
    perturbation; values must be smooth in r at the 1e-10 level).
    """
    t = np.zeros((1, 3))
    eps = np.array([1e-8, 1e-7, 1e-6, 1e-5])
    vals = []
    for e in eps:
        s = np.array([[e, 0.0, 0.0]])
        out = {"S": np.zeros((1, 1), dtype=complex)}
        q.add_difference_blocks(out, K1, K2, t, s)
        vals.append(out["S"][0, 0])
    vals = np.array(vals)
    lim = 1j * (K1 - K2) / (4 * np.pi)
    # smooth approach to the coincidence limit, no cancellation blowup
    assert abs(vals[0] - lim) < 1e-7
    np.testing.assert_allclose(vals, lim, rtol=1e-3)
    assert np.all(np.isfinite(vals))


# ----------------------------------------------------------------------
# stencil layout
# ----------------------------------------------------------------------
def test_stencil_counts():
    off_ac, deg_ac, off_b, deg_b = q.stencil_layout(5)
    assert off_ac.shape[0] == 13 and off_b.shape[0] == 29
    assert len(deg_ac) == 6 and len(deg_b) == 15
    off_ac, deg_ac, off_b, deg_b = q.stencil_layout(7)
    assert off_ac.shape[0] == 29 and off_b.shape[0] == 49
    assert len(deg_ac) == 15 and len(deg_b) == 28


def test_window_plateau_and_support():
    d = 1.0
    assert q.window(0.0, d) == pytest.approx(1.0)
    assert q.window(0.11 * d, d) == pytest.approx(1.0)
    assert q.window(0.31 * d, d) == pytest.approx(0.0, abs=1e-15)
    rho = np.linspace(0, 0.35, 200)
    w = q.window(rho, d)
    assert np.all(np.diff(w) <= 1e-12)      # monotone rolloff


# ----------------------------------------------------------------------
# corrected self blocks
# ----------------------------------------------------------------------
def _brute_force_block(grid, k1, k2, corr, alpha):
    """Independent reconstruction of the corrected S-diff matrix.

    Works from positions only: explicit 3x3 replication for the smooth
    part, and coordinate-based (not index-arithmetic) column lookup for
    the correction scatter, so the wrap/phase bookkeeping of the package
    is cross-checked rather than repeated.
    """
    d, h, n = grid.d, grid.h, grid.n
    N = grid.n_nodes
    ax, ay = alpha
    A = np.zeros((N, N), dtype=complex)
    for lx in (-1, 0, 1):
        for ly in (-1, 0, 1):
            src = grid.nodes.copy()
            src[:, 0] += lx * d
            src[:, 1] += ly * d
            R = grid.nodes[:, None, :] - src[None, :, :]
            r = np.sqrt(np.einsum("tsk,tsk->ts", R, R))
            hit = r < 1e-13
            r[hit] = 1.0
            blk = (r * q.psi_c(k1, k2, r)
                   + 1j * q.psi_s(k1, k2, r)) / (4 * np.pi)
            blk[hit] = 1j * (k1 - k2) / (4 * np.pi)
            A += (ax ** lx) * (ay ** ly) * blk * grid.weights[None, :]

    xs = grid.nodes[:, 0]
    ys = grid.nodes[:, 1]
    for t in range(N):
        for j, (oi, oj) in enumerate(corr.off_ac):
            x = xs[t] + oi * h
            y = ys[t] + oj * h
            lx = np.floor((x + 0.5 * d) / d)
            ly = np.floor((y + 0.5 * d) / d)
            xb, yb = x - lx * d, y - ly * d
            col = np.argmin((xs - xb) ** 2 + (ys - yb) ** 2)
            assert abs(xs[col] - xb) + abs(ys[col] - yb) < 1e-10
            src = np.array([x, y, float(grid.surface(x, y))])
            r = np.linalg.norm(grid.nodes[t] - src)
            gx, gy = grid.surface.grad(x, y)
            J = np.sqrt(1.0 + gx ** 2 + gy ** 2)
            A[t, col] += (corr.gamma_a[t, j] * q.psi_c(k1, k2, r) * J
                          / (4 * np.pi) * ax ** lx * ay ** ly)
    return A


@pytest.mark.parametrize("alpha", [(1.0, 1.0),
                                   (np.exp(0.7j), np.exp(-0.4j))])
def test_corrected_block_matches_brute_force(alpha):
    """Matrix-level wiring check: wrap indices, phases, diagonal limit."""
    grid = build_surface_grid(HeightFunction.sinusoid(1.0, 0.15), 8)
    corr = q.build_correction(grid, 5)
    got = q.corrected_self_block(("S",), K1, K2, grid, alpha, corr)["S"]
    ref = _brute_force_block(grid, K1, K2, corr, alpha)
    assert np.abs(got - ref).max() < 1e-12


def _windowed_corrected_error(surface, density, n, order):
    """Error of the windowed corrected rule against the polar oracle.

    Windowing removes the (benign, proxy-absorbed) Euler-Maclaurin
    boundary term of the truncated lattice sum, isolating the
    singular-correction order that the scheme is designed to deliver.
    """
    from oracles import sdiff_self_integral

    grid = build_surface_grid(surface, n)
    corr = q.build_correction(grid, order)
    t0 = (n // 2) * n + (n // 2)          # node at parameter (0, 0)
    x0 = grid.nodes[t0]

    val = 0j
    for lx in (-1, 0, 1):
        for ly in (-1, 0, 1):
            src = grid.nodes.copy()
            src[:, 0] += lx * grid.d
            src[:, 1] += ly * grid.d
            rho = np.hypot(src[:, 0], src[:, 1])
            w = q.window(rho, grid.d)
            R = x0[None, :] - src
            r = np.sqrt(np.einsum("sk,sk->s", R, R))
            hit = r < 1e-13
            r[hit] = 1.0
            kd = (r * q.psi_c(K1, K2, r)
                  + 1j * q.psi_s(K1, K2, r)) / (4 * np.pi)
            kd[hit] = 1j * (K1 - K2) / (4 * np.pi)
            val += (w * kd * grid.weights
                    * density(src[:, 0], src[:, 1])).sum()
    # correction (window is 1 on the stencil plateau)
    cols, sx, sy, r, _, _, _, js = q._correction_geometry(grid, corr.off_ac)
    dens = density(grid.nodes[:, 0], grid.nodes[:, 1])
    val += (corr.gamma_a[t0] * q.psi_c(K1, K2, r[t0]) * js[t0]
            / (4 * np.pi) * dens[cols[t0]]).sum()

    def windowed(x, y):
        return density(x, y) * q.window(np.hypot(x, y), grid.d)

    ref = sdiff_self_integral(surface, windowed, K1, K2)
    return abs(val - ref)


def test_windowed_corrected_rule_is_high_order():
    surface = HeightFunction.sinusoid(1.0, 0.15)

    def density(x, y):
        return np.exp(np.sin(2 * np.pi * x)) * np.cos(2 * np.pi * y) + 2.0

    e1 = _windowed_corrected_error(surface, density, 16, 5)
    e2 = _windowed_corrected_error(surface, density, 32, 5)
    slope = np.log2(e1 / e2)
    assert slope > 4.0


def test_correction_weights_shared_for_shifted_surfaces():
    cache = q.CorrectionCache()
    a = build_surface_grid(HeightFunction.sinusoid(1.0, 0.2, 0.0), 10)
    b = build_surface_grid(HeightFunction.sinusoid(1.0, 0.2, -2.0), 10)
    ca = cache.get(a, 5)
    cb = cache.get(b, 5)
    assert ca is cb


def test_correction_cache_disk_roundtrip(tmp_path):
    cache = q.CorrectionCache(directory=tmp_path)
    grid = build_surface_grid(HeightFunction.sinusoid(1.0, 0.2), 8)
    c1 = cache.get(grid, 5)
    cache2 = q.CorrectionCache(directory=tmp_path)
    c2 = cache2.get(grid, 5)
    np.testing.assert_allclose(c1.gamma_b, c2.gamma_b, atol=0)
    assert any(p.suffix == ".npz" for p in tmp_path.iterdir())


def test_flat_grid_weights_broadcast():
    grid = build_surface_grid(HeightFunction.flat(1.0, 0.0), 12)
    corr = q.build_correction(grid, 7)
    # every target shares one weight row on a flat translation-invariant grid
    assert np.all(corr.gamma_b[0] == corr.gamma_b[-1])


def test_kernel_pair_swap_negates_block():
    """G(k1) - G(k2) is antisymmetric under swapping the pair."""
    grid = build_surface_grid(HeightFunction.sinusoid(1.0, 0.1), 8)
    corr = q.build_correction(grid, 5)
    a = q.corrected_self_block(("S",), K1, K2, grid, (1.0, 1.0), corr)["S"]
    b = q.corrected_self_block(("S",), K2, K1, grid, (1.0, 1.0), corr)["S"]
    np.testing.assert_allclose(a, -b, atol=1e-14)


def test_correction_weights_decay_with_h():
    """max correction weight shrinks at measured rate >= 3 for class A."""
    surface = HeightFunction.sinusoid(1.0, 0.15)
    m1 = np.abs(q.build_correction(
        build_surface_grid(surface, 12), 5).gamma_a).max()
    m2 = np.abs(q.build_correction(
        build_surface_grid(surface, 24), 5).gamma_a).max()
    rate = np.log2(m1 / m2)
    assert rate >= 3.0
