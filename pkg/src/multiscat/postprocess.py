"""Derived quantities: flux balance, field evaluation, sweeps, convergence."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .assembly import BlockCache, assemble_system, build_context
from .config import StackConfig
from .kernels import add_kernel_blocks, plane_wave, proxy_matrix
from .solver import Solution, solve, solve_system


# ----------------------------------------------------------------------
# flux and mode powers
# ----------------------------------------------------------------------
def incident_flux(cfg: StackConfig) -> float:
    return cfg.wavenumbers[0] * abs(np.cos(cfg.phi))


def mode_powers(sol: Solution):
    """Per-order power fractions (reflected, transmitted).

    Evanescent orders carry no flux and report zero.
    """
    basis = sol.basis
    inc = incident_flux(sol.cfg)
    pu = np.where(basis.propagating("up"),
                  basis.k_u.real * np.abs(sol.a_u) ** 2, 0.0) / inc
    pd = np.where(basis.propagating("down"),
                  basis.k_d.real * np.abs(sol.a_d) ** 2, 0.0) / inc
    return pu, pd


def flux_error(sol: Solution) -> float:
    """Relative energy-conservation defect over the propagating orders."""
    pu, pd = mode_powers(sol)
    return abs(pu.sum() + pd.sum() - 1.0)


# ----------------------------------------------------------------------
# field evaluation
# ----------------------------------------------------------------------
def _layer_of(cfg: StackConfig, points: np.ndarray) -> np.ndarray:
    layer = np.zeros(points.shape[0], dtype=int)
    for g in cfg.interfaces:
        layer += points[:, 2] < g(points[:, 0], points[:, 1])
    return layer


def eval_field(sol: Solution, ctx, points: np.ndarray,
               total: bool = False, mask_factor: float = 3.0) -> np.ndarray:
    """Scattered (or total) field of the solved ansatz at arbitrary points.

    Points closer than ``mask_factor * h`` (vertically) to an interface
    are returned as NaN: the smooth quadrature underlying the ansatz
    evaluation is inaccurate there.
    """
    cfg = sol.cfg
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    out = np.full(pts.shape[0], np.nan + 0j, dtype=complex)
    layer = _layer_of(cfg, pts)
    near = np.zeros(pts.shape[0], dtype=bool)
    for g in cfg.interfaces:
        near |= (np.abs(pts[:, 2] - g(pts[:, 0], pts[:, 1]))
                 < mask_factor * ctx.grids[0].h)

    ax, ay = cfg.alpha
    I = cfg.n_interfaces
    for j in range(I + 1):
        sel = (layer == j) & ~near
        if not np.any(sel):
            continue
        p = pts[sel]
        u = np.zeros(p.shape[0], dtype=complex)
        for i in (j - 1, j):
            if not (0 <= i < I):
                continue
            grid = ctx.grids[i]
            N = grid.n_nodes
            blocks = {"D": np.zeros((p.shape[0], N), dtype=complex),
                      "S": np.zeros((p.shape[0], N), dtype=complex)}
            for lx in (-1, 0, 1):
                for ly in (-1, 0, 1):
                    src = grid.nodes.copy()
                    src[:, 0] += lx * grid.d
                    src[:, 1] += ly * grid.d
                    add_kernel_blocks(blocks, cfg.wavenumbers[j], p, src,
                                      src_normals=grid.normals,
                                      weights=grid.weights,
                                      scale=(ax ** lx) * (ay ** ly))
            u += blocks["D"] @ sol.eta[i, :N] + blocks["S"] @ sol.eta[i, N:]
        phi_mat = proxy_matrix(cfg.wavenumbers[j],
                               ctx.geom.proxy_points[j],
                               ctx.geom.proxy_normals, p)
        u += phi_mat @ sol.c[j]
        if total and j == 0:
            u += plane_wave(cfg.k_inc, p)[0]
        out[sel] = u
    return out


# ----------------------------------------------------------------------
# angle sweeps
# ----------------------------------------------------------------------
def normalize_angles(phi: float, theta: float):
    """Fold phi >= pi into the equivalent (phi', theta') below pi."""
    if phi >= np.pi:
        return 2.0 * np.pi - phi, (theta + np.pi) % (2.0 * np.pi)
    return phi, theta


@dataclass
class SweepResult:
    phi: float
    theta: float
    flux_err: float
    refl: np.ndarray         # per-order reflected power fractions
    trans: np.ndarray
    sol: Solution | None = None


def spectra_sweep(cfg: StackConfig, phis, theta: float = 0.0,
                  ctx=None, cache: BlockCache | None = None,
                  keep_solutions: bool = False):
    """Solve the same stack over a sweep of incidence angles.

    Geometry, quadrature corrections, and every angle-independent block
    are built once and shared across the sweep.
    """
    if ctx is None:
        ctx = build_context(cfg)
    if cache is None:
        cache = BlockCache()
    results = []
    for phi in phis:
        p, t = normalize_angles(float(phi), theta)
        c = cfg.with_angles(p, t)
        sys = assemble_system(c, ctx, cache, dedup=True)
        sol = solve_system(sys, ctx, free_blocks=True)
        pu, pd = mode_powers(sol)
        results.append(SweepResult(
            phi=float(phi), theta=theta, flux_err=flux_error(sol),
            refl=pu, trans=pd, sol=sol if keep_solutions else None))
    return results


# ----------------------------------------------------------------------
# convergence studies
# ----------------------------------------------------------------------
_PROBE_UP = np.array([-0.25, -0.25, 0.25])
_PROBE_DN = np.array([-0.25, -0.25, -0.25])


@dataclass
class ConvergenceRow:
    n: int
    n_proxy: int
    flux_err: float
    u_up: complex
    u_dn: complex
    err_up: float = np.nan
    err_dn: float = np.nan


def convergence_study(cfg: StackConfig, ns=None, proxies=None):
    """Self-convergence table against the finest resolution in the list.

    Either ``ns`` (interface nodes per side) or ``proxies`` (pairs of
    proxy sphere counts ``(n_theta, n_phi)``) is swept; the probe points
    follow the reference two-layer experiment, scaled by the period.
    """
    rows = []
    d = cfg.d
    for val in (ns if ns is not None else proxies):
        c = StackConfig.__new__(StackConfig)
        c.__dict__.update(cfg.__dict__)
        if ns is not None:
            c.n = int(val)
        else:
            c.n_proxy_theta, c.n_proxy_phi = (int(val[0]), int(val[1]))
        c.validate()
        ctx = build_context(c)
        sol = solve(c, ctx=ctx)
        uu = eval_field(sol, ctx, _PROBE_UP[None, :] * d)[0]
        ud = eval_field(sol, ctx, _PROBE_DN[None, :] * d)[0]
        rows.append(ConvergenceRow(n=c.n, n_proxy=c.n_proxy,
                                   flux_err=flux_error(sol),
                                   u_up=uu, u_dn=ud))
    ref = rows[-1]
    for row in rows:
        row.err_up = abs(row.u_up - ref.u_up) / max(abs(ref.u_up), 1e-300)
        row.err_dn = abs(row.u_dn - ref.u_dn) / max(abs(ref.u_dn), 1e-300)
    return rows
