"""Discretization of interfaces, matching walls, radiation planes, proxy sphere.

Conventions (shared across the package):

* The reference unit cell is ``[-d/2, d/2)^2`` centered on the origin.
* Interface nodes form a uniform n-by-n grid ``x = -d/2 + i*h`` (no
  offset), index flattened as ``idx = ix * n + iy``.
* Interface normals point in the +z direction.
* Side walls: L/R at ``x = -/+ d/2`` with normal (1, 0, 0); B/F at
  ``y = -/+ d/2`` with normal (0, 1, 0).  F sits at ``+y`` so that
  ``F = B + (0, d, 0)`` pointwise.
* Wall point grids use the open midpoint rule (no edge points), so that
  corner and edge singularities of nearby interfaces are never sampled.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import StackConfig
from .surfaces import HeightFunction


# ----------------------------------------------------------------------
# interface grids
# ----------------------------------------------------------------------
@dataclass
class SurfaceGrid:
    """Tensor-product trapezoidal grid on one periodic interface.

    Attributes
    ----------
    nodes : (N, 3) float array of surface points.
    normals : (N, 3) float array of unit normals (+z orientation).
    jac : (N,) surface area element sqrt(1 + |grad g|^2).
    weights : (N,) smooth-rule quadrature weights ``jac * h^2``.
    """

    surface: HeightFunction
    n: int
    nodes: np.ndarray
    normals: np.ndarray
    jac: np.ndarray
    weights: np.ndarray
    h: float

    @property
    def d(self) -> float:
        return self.surface.d

    @property
    def n_nodes(self) -> int:
        return self.n * self.n

    def param_points(self):
        """The (N,) x and y parameter coordinates of the nodes."""
        return self.nodes[:, 0], self.nodes[:, 1]


def build_surface_grid(surface: HeightFunction, n: int) -> SurfaceGrid:
    """Sample a height function on the uniform n-by-n periodic grid."""
    d = surface.d
    h = d / n
    s = -0.5 * d + h * np.arange(n)
    X, Y = np.meshgrid(s, s, indexing="ij")
    x = X.ravel()
    y = Y.ravel()
    z = surface(x, y)
    gx, gy = surface.grad(x, y)
    jac = np.sqrt(1.0 + gx * gx + gy * gy)
    normals = np.stack([-gx, -gy, np.ones_like(gx)], axis=1) / jac[:, None]
    nodes = np.stack([x, y, z], axis=1)
    return SurfaceGrid(surface=surface, n=n, nodes=nodes, normals=normals,
                       jac=jac, weights=jac * h * h, h=h)


def shifted_sources(grid: SurfaceGrid, lx: int, ly: int) -> np.ndarray:
    """Source nodes of the (lx, ly) lattice copy of an interface grid."""
    out = grid.nodes.copy()
    out[:, 0] += lx * grid.d
    out[:, 1] += ly * grid.d
    return out


# ----------------------------------------------------------------------
# walls and radiation planes
# ----------------------------------------------------------------------
@dataclass
class LayerWalls:
    """Side-wall collocation points for one layer of the unit cell."""

    z_lo: float
    z_hi: float
    left: np.ndarray    # (M_w, 3), x = -d/2
    right: np.ndarray   # (M_w, 3), x = +d/2
    back: np.ndarray    # (M_w, 3), y = -d/2
    front: np.ndarray   # (M_w, 3), y = +d/2

    @property
    def n_points(self) -> int:
        return self.left.shape[0]


@dataclass
class CellGeometry:
    """All auxiliary geometry of the periodized scheme.

    walls[i] carries the side walls of layer i (i = 0 .. I); cap_u/cap_d
    are the upper/lower radiation planes.  Each layer gets its own proxy
    sphere, centered on the vertical midpoint of that layer's wall span;
    all spheres share one surface grid (``proxy_normals``) and radius.
    """

    walls: list
    cap_u: np.ndarray        # (M, 3) points at z = z_u
    cap_d: np.ndarray        # (M, 3) points at z = z_d
    z_u: float
    z_d: float
    proxy_points: list           # per layer: (P, 3)
    proxy_normals: np.ndarray    # (P, 3) outward unit normals (shared)
    proxy_centers: list          # per layer: (3,)
    proxy_radius: float


def _open_grid(lo: float, hi: float, m: int) -> np.ndarray:
    """Midpoint (open) rule nodes on [lo, hi]."""
    step = (hi - lo) / m
    return lo + step * (np.arange(m) + 0.5)


def _wall_points(d: float, m: int, z_lo: float, z_hi: float):
    t = _open_grid(-0.5 * d, 0.5 * d, m)      # lateral coordinate
    z = _open_grid(z_lo, z_hi, m)
    T, Z = np.meshgrid(t, z, indexing="ij")
    t_flat, z_flat = T.ravel(), Z.ravel()

    def at(x=None, y=None):
        pts = np.empty((t_flat.size, 3))
        if x is None:
            pts[:, 0] = t_flat
            pts[:, 1] = y
        else:
            pts[:, 0] = x
            pts[:, 1] = t_flat
        pts[:, 2] = z_flat
        return pts

    return (at(x=-0.5 * d), at(x=+0.5 * d),
            at(y=-0.5 * d), at(y=+0.5 * d))


def build_cell_geometry(cfg: StackConfig) -> CellGeometry:
    """Construct walls, radiation planes and the proxy sphere for a stack."""
    d = cfg.d
    mins = [g.min_max()[0] for g in cfg.interfaces]
    maxs = [g.min_max()[1] for g in cfg.interfaces]
    z_u = cfg.z_u if cfg.z_u is not None else maxs[0] + 0.5 * d
    z_d = cfg.z_d if cfg.z_d is not None else mins[-1] - 0.5 * d

    # Vertical wall extents: each layer's wall spans from just below its
    # lower interface to just above its upper one; top/bottom layers are
    # capped at the radiation planes.
    margin = cfg.wall_margin * d
    walls = []
    n_layers = cfg.n_interfaces + 1
    for i in range(n_layers):
        hi = z_u if i == 0 else maxs[i - 1] + margin
        lo = z_d if i == n_layers - 1 else mins[i] - margin
        L, R, B, F = _wall_points(d, cfg.m_wall, lo, hi)
        walls.append(LayerWalls(z_lo=lo, z_hi=hi,
                                left=L, right=R, back=B, front=F))

    # radiation planes: closed-open uniform grid (periodic trapezoid)
    s = -0.5 * d + (d / cfg.m_cap) * np.arange(cfg.m_cap)
    X, Y = np.meshgrid(s, s, indexing="ij")
    cap_u = np.stack([X.ravel(), Y.ravel(),
                      np.full(X.size, z_u)], axis=1)
    cap_d = np.stack([X.ravel(), Y.ravel(),
                      np.full(X.size, z_d)], axis=1)

    # proxy spheres: Gauss-Legendre in cos(theta) x uniform azimuth,
    # one sphere per layer, centered on the layer's vertical midpoint
    radius = cfg.r_proxy * d
    ct, _ = np.polynomial.legendre.leggauss(cfg.n_proxy_theta)
    phi = 2.0 * np.pi * np.arange(cfg.n_proxy_phi) / cfg.n_proxy_phi
    CT, PH = np.meshgrid(ct, phi, indexing="ij")
    st = np.sqrt(1.0 - CT * CT)
    normals = np.stack([(st * np.cos(PH)).ravel(),
                        (st * np.sin(PH)).ravel(),
                        CT.ravel()], axis=1)
    centers = [np.array([0.0, 0.0, 0.5 * (w.z_lo + w.z_hi)])
               for w in walls]
    points = [c[None, :] + radius * normals for c in centers]
    return CellGeometry(walls=walls, cap_u=cap_u, cap_d=cap_d,
                        z_u=z_u, z_d=z_d,
                        proxy_points=points, proxy_normals=normals,
                        proxy_centers=centers, proxy_radius=radius)
