"""Free-space Helmholtz kernels, plane waves, proxy and Rayleigh bases.

Kernel conventions, with ``R = target - source``, ``r = |R|``, target
normal ``n`` and source normal ``n'``:

* ``S``  : single layer        ``G = exp(ikr) / (4 pi r)``
* ``D``  : double layer        ``dG/dn' =  exp(ikr)(1 - ikr)(R.n') / (4 pi r^3)``
* ``Dt`` : adjoint double layer``dG/dn  = -exp(ikr)(1 - ikr)(R.n ) / (4 pi r^3)``
* ``T``  : hypersingular       ``d2G/dn dn'``

All builders are vectorized over (targets, sources) pairs and accumulate
``scale * kernel * weight`` into caller-provided output blocks, so that
phased lattice-copy sums never allocate more than one pair-chunk of
temporaries.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

KINDS = ("S", "D", "Dt", "T")

#: target-chunk sizing: max number of (target, source) pairs per chunk
_PAIR_CHUNK = 2_000_000


def _chunks(n_targets: int, n_sources: int):
    step = max(1, _PAIR_CHUNK // max(1, n_sources))
    for lo in range(0, n_targets, step):
        yield lo, min(n_targets, lo + step)


def add_kernel_blocks(out: dict, k: float, targets: np.ndarray,
                      sources: np.ndarray, tgt_normals=None,
                      src_normals=None, weights=None, scale=1.0,
                      min_r: float = 0.0):
    """Accumulate kernel matrices: ``out[kind] += scale * K_kind * w``.

    Parameters
    ----------
    out : dict kind -> (T, S) complex array, modified in place.
    weights : optional (S,) quadrature weights folded into the columns.
    scale : complex scalar (Bloch phase and/or sign).
    min_r : raise if any pair distance falls at or below this value.
    """
    kinds = tuple(out)
    need_n = any(kd in ("Dt", "T") for kd in kinds)
    need_np = any(kd in ("D", "T") for kd in kinds)
    if need_n and tgt_normals is None:
        raise ValueError("target normals required for Dt/T kernels")
    if need_np and src_normals is None:
        raise ValueError("source normals required for D/T kernels")

    w = None if weights is None else np.asarray(weights)
    for lo, hi in _chunks(targets.shape[0], sources.shape[0]):
        R = targets[lo:hi, None, :] - sources[None, :, :]
        r2 = np.einsum("tsk,tsk->ts", R, R)
        r = np.sqrt(r2)
        if np.any(r <= min_r):
            raise ValueError("coincident or too-close kernel points")
        inv_r = 1.0 / r
        e = np.exp(1j * k * r) * (0.25 / np.pi)
        if need_np:
            Rnp = np.einsum("tsk,sk->ts", R, src_normals)
        if need_n:
            Rn = np.einsum("tsk,tk->ts", R, tgt_normals[lo:hi])
        if "D" in kinds or "Dt" in kinds or "T" in kinds:
            one_ikr = (1.0 - 1j * k * r) * e * inv_r * inv_r * inv_r

        for kind in kinds:
            if kind == "S":
                block = e * inv_r
            elif kind == "D":
                block = one_ikr * Rnp
            elif kind == "Dt":
                block = -one_ikr * Rn
            else:  # T
                nn = tgt_normals[lo:hi] @ src_normals.T
                blob = (k * k * r2 - 3.0 + 3j * k * r) * e \
                    * inv_r ** 5
                block = one_ikr * nn + blob * Rn * Rnp
            if w is not None:
                block *= w[None, :]
            out[kind][lo:hi] += scale * block
    return out


def kernel_matrix(kind: str, k: float, targets, sources,
                  tgt_normals=None, src_normals=None):
    """Single dense kernel matrix (convenience wrapper)."""
    out = {kind: np.zeros((targets.shape[0], sources.shape[0]),
                          dtype=complex)}
    add_kernel_blocks(out, k, targets, sources, tgt_normals, src_normals)
    return out[kind]


def greens(k: float, targets, sources):
    """Pointwise free-space Green function values (broadcast pairs)."""
    R = np.asarray(targets) - np.asarray(sources)
    r = np.sqrt(np.sum(R * R, axis=-1))
    return np.exp(1j * k * r) / (4.0 * np.pi * r)


# ----------------------------------------------------------------------
# incident plane wave
# ----------------------------------------------------------------------
def plane_wave(k_vec: np.ndarray, points: np.ndarray):
    """Values and gradients of exp(i k_vec . x) at given points."""
    phase = points @ k_vec
    vals = np.exp(1j * phase)
    grads = 1j * k_vec[None, :] * vals[:, None]
    return vals, grads


# ----------------------------------------------------------------------
# proxy basis
# ----------------------------------------------------------------------
def proxy_matrix(k: float, proxy_points, proxy_normals, targets,
                 tgt_normals=None, deriv: bool = False):
    """Proxy-source basis ``phi_p = dG/dn_p + i k G`` evaluated at targets.

    With ``deriv=True`` returns the target-normal derivative matrix
    ``T + i k Dt`` instead of the value matrix ``D + i k S``.
    """
    shape = (targets.shape[0], proxy_points.shape[0])
    if deriv:
        out = {"T": np.zeros(shape, dtype=complex),
               "Dt": np.zeros(shape, dtype=complex)}
        add_kernel_blocks(out, k, targets, proxy_points,
                          tgt_normals=tgt_normals, src_normals=proxy_normals)
        return out["T"] + 1j * k * out["Dt"]
    out = {"D": np.zeros(shape, dtype=complex),
           "S": np.zeros(shape, dtype=complex)}
    add_kernel_blocks(out, k, targets, proxy_points,
                      src_normals=proxy_normals)
    return out["D"] + 1j * k * out["S"]


# ----------------------------------------------------------------------
# Rayleigh-Bloch expansion
# ----------------------------------------------------------------------
def vertical_wavenumber(k: float, kappa2: np.ndarray) -> np.ndarray:
    """Branch ``sqrt(k^2 - kappa^2)``: positive real or positive imaginary."""
    val = k * k - kappa2
    out = np.where(val >= 0.0,
                   np.sqrt(np.maximum(val, 0.0)) + 0j,
                   1j * np.sqrt(np.maximum(-val, 0.0)))
    return out


@dataclass
class RayleighBasis:
    """Rayleigh-Bloch modes of the top and bottom half spaces.

    Modes are indexed by (m, n) in [-K, K]^2, flattened as
    ``c = (m + K) * (2K + 1) + (n + K)``.  Upward modes are referenced at
    z = z_u (``exp(i k_u (z - z_u))``), downward modes at z = z_d.
    """

    K: int
    d: float
    kappa_x: np.ndarray   # (2K+1,) lateral wavenumbers k_1x + 2 pi m / d
    kappa_y: np.ndarray
    k_u: np.ndarray       # (n_modes,) upward vertical wavenumbers
    k_d: np.ndarray       # (n_modes,) downward vertical wavenumbers
    z_u: float
    z_d: float

    @classmethod
    def build(cls, cfg, z_u: float, z_d: float) -> "RayleighBasis":
        K = cfg.K
        m = np.arange(-K, K + 1)
        kx, ky, _ = cfg.k_inc
        kappa_x = kx + 2.0 * np.pi * m / cfg.d
        kappa_y = ky + 2.0 * np.pi * m / cfg.d
        KX, KY = np.meshgrid(kappa_x, kappa_y, indexing="ij")
        kappa2 = (KX * KX + KY * KY).ravel()
        k_u = vertical_wavenumber(cfg.wavenumbers[0], kappa2)
        k_d = vertical_wavenumber(cfg.wavenumbers[-1], kappa2)
        return cls(K=K, d=cfg.d, kappa_x=kappa_x, kappa_y=kappa_y,
                   k_u=k_u, k_d=k_d, z_u=z_u, z_d=z_d)

    @property
    def n_modes(self) -> int:
        return (2 * self.K + 1) ** 2

    def flat_index(self, m: int, n: int) -> int:
        if abs(m) > self.K or abs(n) > self.K:
            raise IndexError("Rayleigh order out of range")
        return (m + self.K) * (2 * self.K + 1) + (n + self.K)

    def _lateral(self, points):
        KX, KY = np.meshgrid(self.kappa_x, self.kappa_y, indexing="ij")
        phase = points[:, 0, None] * KX.ravel()[None, :] \
            + points[:, 1, None] * KY.ravel()[None, :]
        return np.exp(1j * phase)

    def modes(self, points, side: str, deriv: bool = False):
        """Matrix of mode values (or z-derivatives) at given points."""
        lat = self._lateral(points)
        if side == "up":
            vert = np.exp(1j * self.k_u[None, :]
                          * (points[:, 2, None] - self.z_u))
            out = lat * vert
            if deriv:
                out = out * (1j * self.k_u[None, :])
        elif side == "down":
            vert = np.exp(-1j * self.k_d[None, :]
                          * (points[:, 2, None] - self.z_d))
            out = lat * vert
            if deriv:
                out = out * (-1j * self.k_d[None, :])
        else:
            raise ValueError("side must be 'up' or 'down'")
        return out

    def propagating(self, side: str) -> np.ndarray:
        kz = self.k_u if side == "up" else self.k_d
        return (np.abs(kz.imag) == 0.0) & (kz.real > 0.0)

    def rereference(self, a_u, a_d, z_ref_u: float = 0.0,
                    z_ref_d: float = 0.0):
        """Coefficients re-referenced to user-chosen phase planes.

        The solver's raw amplitudes are attached to z_u / z_d; physical
        comparisons (e.g. Fresnel coefficients at a z = 0 interface) want
        ``exp(i k_u z)`` style references instead.
        """
        au = a_u * np.exp(1j * self.k_u * (z_ref_u - self.z_u))
        ad = a_d * np.exp(-1j * self.k_d * (z_ref_d - self.z_d))
        return au, ad
