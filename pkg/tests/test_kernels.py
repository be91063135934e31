"""Free-space kernels, plane waves, proxy basis, Rayleigh modes."""
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from multiscat.kernels import (RayleighBasis, add_kernel_blocks, greens,
                               kernel_matrix, plane_wave, proxy_matrix,
                               vertical_wavenumber)
from multiscat.config import StackConfig
from multiscat.surfaces import HeightFunction

RNG = np.random.default_rng(11)


def _pair(seed=0):
    rng = np.random.default_rng(seed)
    t = rng.uniform(-1, 1, (5, 3))
    s = rng.uniform(2, 3, (7, 3))       # disjoint: no singular pairs
    nt = rng.normal(size=(5, 3))
    nt /= np.linalg.norm(nt, axis=1, keepdims=True)
    ns = rng.normal(size=(7, 3))
    ns /= np.linalg.norm(ns, axis=1, keepdims=True)
    return t, s, nt, ns


def test_single_layer_matches_green_function():
    t, s, _, _ = _pair()
    k = 3.7
    S = kernel_matrix("S", k, t, s)
    R = t[:, None, :] - s[None, :, :]
    r = np.linalg.norm(R, axis=-1)
    np.testing.assert_allclose(S, np.exp(1j * k * r) / (4 * np.pi * r),
                               atol=1e-14)


def test_double_layer_is_source_normal_derivative():
    """D equals the directional derivative of G in the source point.

    Oracle: central finite differences of the Green function; the kernel
    is analytic away from the diagonal so the FD error is O(eps^2).
    """
    t, s, nt, ns = _pair(1)
    k = 2.9
    D = kernel_matrix("D", k, t, s, src_normals=ns)
    eps = 1e-6
    fd = (greens(k, t[:, None, :], (s + eps * ns)[None, :, :])
          - greens(k, t[:, None, :], (s - eps * ns)[None, :, :])) / (2 * eps)
    np.testing.assert_allclose(D, fd, rtol=1e-7, atol=1e-9)


def test_adjoint_double_layer_is_target_normal_derivative():
    t, s, nt, ns = _pair(2)
    k = 2.9
    Dt = kernel_matrix("Dt", k, t, s, tgt_normals=nt)
    eps = 1e-6
    fd = (greens(k, (t + eps * nt)[:, None, :], s[None, :, :])
          - greens(k, (t - eps * nt)[:, None, :], s[None, :, :])) / (2 * eps)
    np.testing.assert_allclose(Dt, fd, rtol=1e-7, atol=1e-9)


def test_hypersingular_is_mixed_derivative():
    t, s, nt, ns = _pair(3)
    k = 1.8
    T = kernel_matrix("T", k, t, s, tgt_normals=nt, src_normals=ns)
    eps = 1e-5
    # source-normal derivative of the adjoint double layer
    gp = kernel_matrix("Dt", k, t, s + eps * ns, tgt_normals=nt)
    gm = kernel_matrix("Dt", k, t, s - eps * ns, tgt_normals=nt)
    fd = (gp - gm) / (2 * eps)
    np.testing.assert_allclose(T, fd, rtol=1e-5, atol=1e-7)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.5, 12.0), st.integers(0, 10 ** 6))
def test_kernel_satisfies_helmholtz(k, seed):
    """FD Laplacian residual of G decays at second order in the step.

    Property (acceptance criterion): the measured order of the residual
    decay must be at least 1.9.
    """
    rng = np.random.default_rng(seed)
    x = rng.uniform(1.0, 2.0, 3)
    src = np.zeros(3)

    def resid(eps):
        pts = [x]
        for ax in range(3):
            for sgn in (1, -1):
                p = x.copy()
                p[ax] += sgn * eps
                pts.append(p)
        vals = greens(k, np.array(pts), src)
        lap = (vals[1:].sum() - 6 * vals[0]) / eps ** 2
        return abs(lap + k * k * vals[0])

    scale = abs(greens(k, x, src)) * k * k
    e1, e2 = 2e-3, 1e-3
    r1, r2 = resid(e1), resid(e2)
    if r2 < 1e-9 * scale:       # below FD round-off: accept
        return
    order = np.log(r1 / r2) / np.log(e1 / e2)
    assert order > 1.9


def test_weights_and_scale_fold_into_columns():
    t, s, _, ns = _pair(4)
    w = np.linspace(0.5, 1.5, s.shape[0])
    out = {"S": np.zeros((t.shape[0], s.shape[0]), dtype=complex)}
    add_kernel_blocks(out, 2.0, t, s, weights=w, scale=1j)
    np.testing.assert_allclose(out["S"],
                               1j * kernel_matrix("S", 2.0, t, s) * w,
                               atol=1e-14)


def test_chunked_accumulation_matches_dense():
    """The pair-chunk loop must tile the output rows exactly once."""
    import multiscat.kernels as km
    t = RNG.uniform(0, 1, (37, 3))
    s = RNG.uniform(3, 4, (11, 3))
    ref = kernel_matrix("S", 5.0, t, s)
    old = km._PAIR_CHUNK
    try:
        km._PAIR_CHUNK = 50          # forces many small chunks
        chunked = kernel_matrix("S", 5.0, t, s)
    finally:
        km._PAIR_CHUNK = old
    np.testing.assert_allclose(chunked, ref, atol=1e-15)


def test_plane_wave_gradient():
    k_vec = np.array([1.0, -2.0, 0.5])
    pts = RNG.uniform(-1, 1, (6, 3))
    vals, grads = plane_wave(k_vec, pts)
    eps = 1e-7
    for ax in range(3):
        shift = np.zeros(3)
        shift[ax] = eps
        fd = (plane_wave(k_vec, pts + shift)[0]
              - plane_wave(k_vec, pts - shift)[0]) / (2 * eps)
        np.testing.assert_allclose(grads[:, ax], fd, rtol=1e-7, atol=1e-9)


def test_proxy_basis_definition():
    """phi_p = dG/dn_p + i k G, and its target-normal derivative."""
    k = 4.2
    t, s, nt, ns = _pair(5)
    V = proxy_matrix(k, s, ns, t)
    expect = kernel_matrix("D", k, t, s, src_normals=ns) \
        + 1j * k * kernel_matrix("S", k, t, s)
    np.testing.assert_allclose(V, expect, atol=1e-13)
    Vd = proxy_matrix(k, s, ns, t, tgt_normals=nt, deriv=True)
    expect = kernel_matrix("T", k, t, s, tgt_normals=nt, src_normals=ns) \
        + 1j * k * kernel_matrix("Dt", k, t, s, tgt_normals=nt)
    np.testing.assert_allclose(Vd, expect, atol=1e-13)


# ----------------------------------------------------------------------
# Rayleigh basis
# ----------------------------------------------------------------------
def _basis(K=10, phi=5 * np.pi / 6, theta=0.3, k1=8.0, k2=16.0):
    cfg = StackConfig(d=1.0, interfaces=[HeightFunction.flat(1.0, 0.0)],
                      wavenumbers=[k1, k2], phi=phi, theta=theta,
                      n=4, m_wall=4, m_cap=16, n_proxy_theta=4,
                      n_proxy_phi=4, K=K, order=5)
    return cfg, RayleighBasis.build(cfg, 0.6, -0.6)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.2, 30.0), st.floats(0.0, 40.0))
def test_vertical_wavenumber_branch(k, kappa):
    """Propagating orders: k_z > 0 real; evanescent: k_z on +i axis."""
    kz = vertical_wavenumber(k, np.array([kappa ** 2]))[0]
    if kappa < k:
        assert kz.imag == 0.0 and kz.real > 0.0
        assert kz.real == pytest.approx(np.sqrt(k ** 2 - kappa ** 2))
    elif kappa > k:
        assert kz.real == 0.0 and kz.imag > 0.0
        assert kz.imag == pytest.approx(np.sqrt(kappa ** 2 - k ** 2))


def test_branch_rule_across_orders():
    """Acceptance property: branch rule holds for every order to K = 10."""
    cfg, basis = _basis(K=10)
    for kz, k in ((basis.k_u, 8.0), (basis.k_d, 16.0)):
        prop = kz.imag == 0.0
        assert np.all(kz.real[prop] > 0.0)
        assert np.all(kz.imag[~prop] > 0.0)
        assert np.all(kz.real[~prop] == 0.0)
        np.testing.assert_allclose(np.abs(kz ** 2 + (k ** 2 - kz ** 2)),
                                   k ** 2, rtol=1e-12)


def test_flat_index_layout():
    _, basis = _basis(K=3)
    assert basis.flat_index(-3, -3) == 0
    assert basis.flat_index(0, 0) == 24
    assert basis.flat_index(3, 3) == 48
    with pytest.raises(IndexError):
        basis.flat_index(4, 0)


def test_modes_satisfy_helmholtz_and_quasiperiodicity():
    cfg, basis = _basis(K=2, theta=0.4)
    pts = RNG.uniform(-0.5, 0.5, (8, 3))
    pts[:, 2] = np.abs(pts[:, 2]) + 0.7       # above z_u region is fine
    up = basis.modes(pts, "up")
    shifted = pts.copy()
    shifted[:, 0] += cfg.d
    up_s = basis.modes(shifted, "up")
    ax, ay = cfg.alpha
    np.testing.assert_allclose(up_s, ax * up, rtol=1e-12)
    # z-derivative factor
    der = basis.modes(pts, "up", deriv=True)
    np.testing.assert_allclose(der, up * (1j * basis.k_u[None, :]),
                               rtol=1e-12)


def test_rereference_moves_phase_plane():
    cfg, basis = _basis(K=1)
    a_u = np.ones(basis.n_modes, dtype=complex)
    a_d = np.ones(basis.n_modes, dtype=complex)
    au0, ad0 = basis.rereference(a_u, a_d, 0.0, 0.0)
    np.testing.assert_allclose(au0, np.exp(-1j * basis.k_u * basis.z_u))
    np.testing.assert_allclose(ad0, np.exp(1j * basis.k_d * basis.z_d))
    # re-referencing at the native planes is the identity
    au1, ad1 = basis.rereference(a_u, a_d, basis.z_u, basis.z_d)
    np.testing.assert_allclose(au1, a_u)
    np.testing.assert_allclose(ad1, a_d)
