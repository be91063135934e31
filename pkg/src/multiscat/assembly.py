"""Assembly of the periodized boundary-integral block system.

Builds the blocks of

    [ A  B ] [ eta ]   [ f ]          C eta + Q c = 0   (walls)
    [      ] [     ] = [   ]   with
    [ Z  V  W ] ...                    Z eta + V c + W a = 0 (radiation)

with 0-based indices: interfaces i = 0..I-1, layers j = 0..I.  Layer j
lies above interface j; interface i separates layers i and i+1.

Wall-coupling conventions.  The quasi-periodicity rows enforce
``u(R) - alpha_x u(L) = 0`` and ``u(F) - alpha_y u(B) = 0`` (F is the
wall at +y, so F = B + (0, d, 0)).  Expanding the 3x3 phased near-field
sum collapses these rows to single-copy kernel sums at laterally shifted
targets.  The exact collapse carries Bloch phases in *both* lateral
directions (``alpha_y^{-l}`` on the +x-wall terms, etc.); with
``cfg.cross_phases = False`` the transverse factors are dropped, which
is only equivalent when the corresponding Bloch phase is 1.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .config import StackConfig
from .geometry import (CellGeometry, SurfaceGrid, build_cell_geometry,
                       build_surface_grid)
from .kernels import RayleighBasis, add_kernel_blocks, plane_wave, proxy_matrix
from .quadrature import CorrectionCache, corrected_self_block

_EX = np.array([1.0, 0.0, 0.0])
_EY = np.array([0.0, 1.0, 0.0])
_EZ = np.array([0.0, 0.0, 1.0])


def _rk(*vals):
    """Rounded tuple for cache keys built from geometric offsets."""
    return tuple(round(float(v), 12) for v in vals)


class BlockCache:
    """Byte-budgeted memo for angle-independent matrix blocks."""

    def __init__(self, max_bytes: float = 1.5e9):
        self.max_bytes = max_bytes
        self._store = {}
        self._bytes = 0

    def get(self, key, builder):
        if key in self._store:
            return self._store[key]
        val = builder()
        nbytes = sum(v.nbytes for v in val) if isinstance(val, tuple) \
            else val.nbytes
        if self._bytes + nbytes <= self.max_bytes:
            self._store[key] = val
            self._bytes += nbytes
        return val


@dataclass
class SolveContext:
    """Geometry and quadrature data reused across assemblies (angles)."""

    cfg: StackConfig
    grids: list                 # SurfaceGrid per interface
    geom: CellGeometry
    corrections: list           # CorrectionOperator per interface
    t_pre: float = 0.0


def build_context(cfg: StackConfig,
                  corr_cache: CorrectionCache | None = None) -> SolveContext:
    t0 = time.perf_counter()
    grids = [build_surface_grid(g, cfg.n) for g in cfg.interfaces]
    geom = build_cell_geometry(cfg)
    cache = corr_cache if corr_cache is not None else CorrectionCache()
    corrections = [cache.get(g, cfg.order) for g in grids]
    return SolveContext(cfg=cfg, grids=grids, geom=geom,
                        corrections=corrections,
                        t_pre=time.perf_counter() - t0)


@dataclass
class BlockSystem:
    cfg: StackConfig
    basis: RayleighBasis
    A: dict = field(default_factory=dict)    # (i, j) -> (2N, 2N)
    B: dict = field(default_factory=dict)    # (i, j) -> (2N, P)
    C: dict = field(default_factory=dict)    # (j, i) -> (4 M_w, 2N)
    Q: dict = field(default_factory=dict)    # j -> (4 M_w, P)
    Z_U: np.ndarray = None
    Z_D: np.ndarray = None
    V_U: np.ndarray = None
    V_D: np.ndarray = None
    W_U: np.ndarray = None
    W_D: np.ndarray = None
    f: np.ndarray = None                     # (I, 2N) right-hand side rows
    t_fill: float = 0.0


# ----------------------------------------------------------------------
# block builders
# ----------------------------------------------------------------------
def _phased_2x2(k, targets, tgt_normals, grid: SurfaceGrid, alpha,
                sign: float) -> np.ndarray:
    """Phased 3x3 near-field block [[D, S], [T, Dt]] to arbitrary targets."""
    T = targets.shape[0]
    N = grid.n_nodes
    M = np.zeros((2 * T, 2 * N), dtype=complex)
    out = {"D": M[:T, :N], "S": M[:T, N:],
           "T": M[T:, :N], "Dt": M[T:, N:]}
    ax, ay = alpha
    for lx in (-1, 0, 1):
        for ly in (-1, 0, 1):
            src = grid.nodes.copy()
            src[:, 0] += lx * grid.d
            src[:, 1] += ly * grid.d
            add_kernel_blocks(out, k, targets, src,
                              tgt_normals=tgt_normals,
                              src_normals=grid.normals,
                              weights=grid.weights,
                              scale=sign * (ax ** lx) * (ay ** ly))
    return M


def _a_diag(cfg, ctx, i, alpha) -> np.ndarray:
    grid = ctx.grids[i]
    N = grid.n_nodes
    M = np.zeros((2 * N, 2 * N), dtype=complex)
    out = {"D": M[:N, :N], "S": M[:N, N:],
           "T": M[N:, :N], "Dt": M[N:, N:]}
    corrected_self_block(("D", "S", "T", "Dt"), cfg.wavenumbers[i],
                         cfg.wavenumbers[i + 1], grid, alpha,
                         ctx.corrections[i], out=out)
    idx = np.arange(N)
    M[idx, idx] += 1.0
    M[N + idx, N + idx] -= 1.0
    return M


def _b_block(k, grid: SurfaceGrid, proxy_pts, proxy_normals,
             sign: float) -> np.ndarray:
    vals = proxy_matrix(k, proxy_pts, proxy_normals, grid.nodes)
    ders = proxy_matrix(k, proxy_pts, proxy_normals, grid.nodes,
                        tgt_normals=grid.normals, deriv=True)
    return sign * np.concatenate([vals, ders], axis=0)


def _c_block(cfg, k, walls, grid: SurfaceGrid, alpha) -> np.ndarray:
    """Wall quasi-periodicity rows from one interface's densities."""
    ax, ay = alpha
    d = cfg.d
    Mw = walls.n_points
    N = grid.n_nodes
    C = np.zeros((4 * Mw, 2 * N), dtype=complex)

    def rows(base, targets, normal, scale):
        out_v = {"D": C[base:base + Mw, :N], "S": C[base:base + Mw, N:]}
        out_d = {"T": C[base + Mw:base + 2 * Mw, :N],
                 "Dt": C[base + Mw:base + 2 * Mw, N:]}
        nrm = np.broadcast_to(normal, targets.shape)
        add_kernel_blocks(out_v, k, targets, grid.nodes,
                          src_normals=grid.normals, weights=grid.weights,
                          scale=scale)
        add_kernel_blocks(out_d, k, targets, grid.nodes,
                          tgt_normals=nrm, src_normals=grid.normals,
                          weights=grid.weights, scale=scale)

    for l in (-1, 0, 1):
        cx_p = ay ** (-l) if cfg.cross_phases else 1.0
        cx_m = ay ** (+l) if cfg.cross_phases else 1.0
        rows(0, walls.right + d * np.array([1.0, l, 0.0]), _EX,
             (1.0 / ax) * cx_p)
        rows(0, walls.left - d * np.array([1.0, l, 0.0]), _EX,
             -(ax ** 2) * cx_m)
        cy_p = ax ** (-l) if cfg.cross_phases else 1.0
        cy_m = ax ** (+l) if cfg.cross_phases else 1.0
        rows(2 * Mw, walls.front + d * np.array([l, 1.0, 0.0]), _EY,
             (1.0 / ay) * cy_p)
        rows(2 * Mw, walls.back - d * np.array([l, 1.0, 0.0]), _EY,
             -(ay ** 2) * cy_m)
    return C


def _q_block(k, walls, proxy_pts, proxy_normals, alpha) -> np.ndarray:
    ax, ay = alpha
    Mw = walls.n_points
    P = proxy_pts.shape[0]
    Q = np.zeros((4 * Mw, P), dtype=complex)

    def pm(targets, normal=None, deriv=False):
        if deriv:
            nrm = np.broadcast_to(normal, targets.shape)
            return proxy_matrix(k, proxy_pts, proxy_normals, targets,
                                tgt_normals=nrm, deriv=True)
        return proxy_matrix(k, proxy_pts, proxy_normals, targets)

    Q[:Mw] = pm(walls.right) - ax * pm(walls.left)
    Q[Mw:2 * Mw] = pm(walls.right, _EX, True) - ax * pm(walls.left, _EX, True)
    Q[2 * Mw:3 * Mw] = pm(walls.front) - ay * pm(walls.back)
    Q[3 * Mw:] = pm(walls.front, _EY, True) - ay * pm(walls.back, _EY, True)
    return Q


def _cap_blocks(cfg, ctx, basis, alpha, side: str):
    """Z, V, W blocks on the radiation plane U or D."""
    geom = ctx.geom
    if side == "U":
        caps, k, grid = geom.cap_u, cfg.wavenumbers[0], ctx.grids[0]
        ppts = geom.proxy_points[0]
        phase = alpha
    else:
        caps, k, grid = geom.cap_d, cfg.wavenumbers[-1], ctx.grids[-1]
        ppts = geom.proxy_points[-1]
        phase = alpha if cfg.phase_zd else (1.0, 1.0)
    M = caps.shape[0]
    nrm = np.broadcast_to(_EZ, caps.shape)
    Z = _phased_2x2(k, caps, nrm, grid, phase, 1.0)
    V = np.concatenate([
        proxy_matrix(k, ppts, geom.proxy_normals, caps),
        proxy_matrix(k, ppts, geom.proxy_normals, caps,
                     tgt_normals=nrm, deriv=True)], axis=0)
    up = (side == "U")
    E = basis._lateral(caps)
    kz = basis.k_u if up else basis.k_d
    W = np.concatenate([-E, (-1j if up else 1j) * kz[None, :] * E], axis=0)
    return Z, V, W


# ----------------------------------------------------------------------
# system assembly
# ----------------------------------------------------------------------
def assemble_system(cfg: StackConfig, ctx: SolveContext,
                    cache: BlockCache | None = None,
                    dedup: bool = False) -> BlockSystem:
    """Fill every block of the discretized system for one incidence angle.

    With ``dedup=True``, structurally identical blocks (same interface
    shape, relative offset and wavenumber) are filled once and the array
    is shared between the duplicate slots.  The reuse is exact; it is off
    by default so that fill time and memory reflect the number of blocks.
    """
    t0 = time.perf_counter()
    alpha = cfg.alpha
    I = cfg.n_interfaces
    ks = cfg.wavenumbers
    geom = ctx.geom
    basis = RayleighBasis.build(cfg, geom.z_u, geom.z_d)
    sys = BlockSystem(cfg=cfg, basis=basis)
    memo = {}

    def shared(key, builder):
        if cache is not None:
            return cache.get(key, builder)
        return local(key, builder)

    def local(key, builder):
        if not dedup:
            return builder()
        if key not in memo:
            memo[key] = builder()
        return memo[key]

    offs = [g.offset for g in cfg.interfaces]
    shapes = [g.shape_key() for g in cfg.interfaces]
    pcz = [c[2] for c in geom.proxy_centers]

    # ---- A ----
    for i in range(I):
        key = ("Ad", shapes[i], _rk(ks[i], ks[i + 1]), cfg.n, cfg.order)
        sys.A[i, i] = local(key, lambda i=i: _a_diag(cfg, ctx, i, alpha))
    for i in range(I - 1):
        key = ("Ao", shapes[i], shapes[i + 1],
               _rk(offs[i] - offs[i + 1], ks[i + 1]), cfg.n)
        sys.A[i, i + 1] = local(key, lambda i=i: _phased_2x2(
            ks[i + 1], ctx.grids[i].nodes, ctx.grids[i].normals,
            ctx.grids[i + 1], alpha, -1.0))
        key = ("Ao", shapes[i + 1], shapes[i],
               _rk(offs[i + 1] - offs[i], ks[i + 1]), cfg.n)
        sys.A[i + 1, i] = local(key, lambda i=i: _phased_2x2(
            ks[i + 1], ctx.grids[i + 1].nodes, ctx.grids[i + 1].normals,
            ctx.grids[i], alpha, +1.0))

    # ---- B ----  (proxy fields on the interfaces; angle independent)
    for i in range(I):
        key = ("B", shapes[i], _rk(offs[i] - pcz[i], ks[i]), cfg.n_proxy)
        sys.B[i, i] = shared(key, lambda i=i: _b_block(
            ks[i], ctx.grids[i], geom.proxy_points[i],
            geom.proxy_normals, +1.0))
        key = ("B", shapes[i], _rk(offs[i] - pcz[i + 1], -ks[i + 1]),
               cfg.n_proxy)
        sys.B[i, i + 1] = shared(key, lambda i=i: _b_block(
            ks[i + 1], ctx.grids[i], geom.proxy_points[i + 1],
            geom.proxy_normals, -1.0))

    # ---- C ----  (wall rows from neighboring interface densities)
    for j in range(I + 1):
        w = geom.walls[j]
        for i in (j - 1, j):
            if 0 <= i < I:
                key = ("C", shapes[i],
                       _rk(w.z_lo - offs[i], w.z_hi - offs[i], ks[j]),
                       cfg.n, cfg.m_wall)
                sys.C[j, i] = local(key, lambda j=j, i=i: _c_block(
                    cfg, ks[j], geom.walls[j], ctx.grids[i], alpha))

    # ---- Q ----  (proxy fields on the walls)
    for j in range(I + 1):
        w = geom.walls[j]
        key = ("Q", _rk(w.z_lo - pcz[j], w.z_hi - pcz[j], ks[j]),
               cfg.m_wall, cfg.n_proxy,
               _rk(alpha[0].real, alpha[0].imag,
                   alpha[1].real, alpha[1].imag))
        sys.Q[j] = local(key, lambda j=j: _q_block(
            ks[j], geom.walls[j], geom.proxy_points[j],
            geom.proxy_normals, alpha))

    # ---- radiation blocks and right-hand side ----
    sys.Z_U, sys.V_U, sys.W_U = _cap_blocks(cfg, ctx, basis, alpha, "U")
    sys.Z_D, sys.V_D, sys.W_D = _cap_blocks(cfg, ctx, basis, alpha, "D")

    N = cfg.n_nodes
    sys.f = np.zeros((I, 2 * N), dtype=complex)
    vals, grads = plane_wave(cfg.k_inc, ctx.grids[0].nodes)
    sys.f[0, :N] = -vals
    sys.f[0, N:] = -np.einsum("nk,nk->n", grads, ctx.grids[0].normals)
    sys.t_fill = time.perf_counter() - t0
    return sys
