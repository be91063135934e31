"""Block elimination and fast block-tridiagonal solve.

The assembled system

    A eta + B c = f,    C eta + Q c = 0,    Z eta + V c + W a = 0

is reduced to a block-tridiagonal system in the interface densities
``eta`` alone.  The Rayleigh amplitudes fold into the end layers'
auxiliary unknowns (``c~_1 = [c_1; a_u]``, ``c~_{I+1} = [c_{I+1}; a_d]``)
so that the radiation rows join the wall rows of those layers.  The
ill-conditioned proxy-matching blocks are applied through truncated-SVD
pseudoinverses (relative cutoff ``cfg.lsq_tol``), factored once per layer
and applied to block columns; the pseudoinverse matrix itself is never
formed.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .assembly import (BlockCache, BlockSystem, SolveContext,
                       assemble_system, build_context)
from .config import StackConfig
from .kernels import RayleighBasis
from .quadrature import CorrectionCache


class TruncatedPinv:
    """Factored min-norm least-squares applier for one proxy block."""

    def __init__(self, M: np.ndarray, rel_tol: float):
        U, s, Vh = sla.svd(M, full_matrices=False)
        keep = s > rel_tol * s[0]
        self.U = U[:, keep]
        self.s_inv = 1.0 / s[keep]
        self.Vh = Vh[keep]
        self.rank = int(keep.sum())

    def apply(self, rhs: np.ndarray) -> np.ndarray:
        """Min-norm solution of ``M x ~= rhs`` (rhs may be a matrix)."""
        y = self.U.conj().T @ rhs
        y *= self.s_inv[:, None] if y.ndim > 1 else self.s_inv
        return self.Vh.conj().T @ y


@dataclass
class Solution:
    """Densities, proxy strengths and Rayleigh amplitudes of one solve."""

    cfg: StackConfig
    basis: RayleighBasis
    eta: np.ndarray          # (I, 2N)
    c: list                  # per layer: (P,) proxy strengths
    a_u: np.ndarray          # (n_modes,) upward amplitudes, referenced at z_u
    a_d: np.ndarray          # (n_modes,) downward amplitudes, referenced at z_d
    t_pre: float
    t_fill: float
    t_solve: float

    def amplitude(self, m: int, n: int, side: str = "up") -> complex:
        idx = self.basis.flat_index(m, n)
        return (self.a_u if side == "up" else self.a_d)[idx]


def _fold_end_blocks(sys: BlockSystem):
    """Paper's c~ folding: radiation rows join the end layers' wall rows."""
    cfg = sys.cfg
    I = cfg.n_interfaces
    nm = cfg.n_modes
    P = sys.Q[0].shape[1]

    Qt = dict(sys.Q)
    Qt[0] = np.block([[sys.Q[0], np.zeros((sys.Q[0].shape[0], nm))],
                      [sys.V_U, sys.W_U]])
    Qt[I] = np.block([[sys.Q[I], np.zeros((sys.Q[I].shape[0], nm))],
                      [sys.V_D, sys.W_D]])

    Ct = dict(sys.C)
    Ct[0, 0] = np.concatenate([sys.C[0, 0], sys.Z_U], axis=0)
    Ct[I, I - 1] = np.concatenate([sys.C[I, I - 1], sys.Z_D], axis=0)
    return Ct, Qt, P


def solve_system(sys: BlockSystem, ctx: SolveContext,
                 free_blocks: bool = False) -> Solution:
    """Schur reduction, block LU sweeps, and unknown recovery.

    With ``free_blocks=True`` the assembled blocks in ``sys`` are released
    as soon as they have been folded into the sweep, emptying the caller's
    :class:`BlockSystem`.  This roughly halves the peak working set for
    deep stacks; arrays also held by a :class:`BlockCache` survive there.
    """
    t0 = time.perf_counter()
    cfg = sys.cfg
    I = cfg.n_interfaces
    Ct, Qt, P = _fold_end_blocks(sys)

    pinv = {j: TruncatedPinv(Qt[j], cfg.lsq_tol) for j in range(I + 1)}
    # pinv_j applied to the wall/radiation rows of layer j, per eta block
    QC = {}
    for (j, i), Cji in Ct.items():
        QC[j, i] = pinv[j].apply(Cji)
        if free_blocks:
            Ct[j, i] = None
            sys.C.pop((j, i), None)
    del pinv, Ct, Qt

    def bqc(i, jb, jq, iq):
        # B~[i,jb] @ QC[jq,iq]: the end layers' amplitude padding columns
        # of B~ are zero, so only the first P rows of QC contribute
        return sys.B[i, jb] @ QC[jq, iq][:P]

    # block LU forward sweep; each Schur-corrected block is formed right
    # when the sweep consumes it so only the factorizations and the
    # back-substitution blocks stay resident
    f = sys.f.copy()
    lu = {}
    up = {}                        # inv(At'[i,i]) At[i,i+1] for back sweep
    for i in range(I):
        diag = sys.A[i, i]
        if free_blocks and sum(v is diag for v in sys.A.values()) == 1:
            sys.A.pop((i, i))      # safe to subtract into the block itself
        else:
            diag = diag.copy()
            sys.A.pop((i, i), None) if free_blocks else None
        np.subtract(diag, bqc(i, i, i, i), out=diag)
        np.subtract(diag, bqc(i, i + 1, i + 1, i), out=diag)
        if i > 0:
            upper = sys.A[i - 1, i] - bqc(i - 1, i, i, i)
            lower = sys.A[i, i - 1] - bqc(i, i, i, i - 1)
            right = sla.lu_solve(lu[i - 1], upper)
            del upper
            diag -= lower @ right
            f[i] = f[i] - lower @ sla.lu_solve(lu[i - 1], f[i - 1])
            del lower
            up[i - 1] = right
        lu[i] = sla.lu_factor(diag, overwrite_a=True)
        del diag
        if free_blocks:
            sys.B.pop((i, i), None)
            if i == I - 1:
                sys.B.pop((i, i + 1), None)
            if i > 0:
                sys.A.pop((i - 1, i), None)
                sys.A.pop((i, i - 1), None)
                sys.B.pop((i - 1, i), None)

    eta = np.empty_like(f)
    eta[I - 1] = sla.lu_solve(lu[I - 1], f[I - 1])
    for i in range(I - 2, -1, -1):
        eta[i] = sla.lu_solve(lu[i], f[i]) - up[i] @ eta[i + 1]

    # recovery of proxy strengths and Rayleigh amplitudes
    ctilde = {}
    ctilde[0] = -(QC[0, 0] @ eta[0])
    for j in range(1, I):
        ctilde[j] = -(QC[j, j - 1] @ eta[j - 1] + QC[j, j] @ eta[j])
    ctilde[I] = -(QC[I, I - 1] @ eta[I - 1])

    c = [ctilde[j][:P] for j in range(I + 1)]
    a_u = ctilde[0][P:]
    a_d = ctilde[I][P:]
    t_solve = time.perf_counter() - t0
    return Solution(cfg=cfg, basis=sys.basis, eta=eta, c=c,
                    a_u=a_u, a_d=a_d, t_pre=ctx.t_pre,
                    t_fill=sys.t_fill, t_solve=t_solve)


def solve(cfg: StackConfig, ctx: SolveContext | None = None,
          cache: BlockCache | None = None,
          corr_cache: CorrectionCache | None = None) -> Solution:
    """End-to-end solve of one scattering problem."""
    if ctx is None:
        ctx = build_context(cfg, corr_cache)
    sys = assemble_system(cfg, ctx, cache)
    return solve_system(sys, ctx)
