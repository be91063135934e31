"""Flat two-layer sanity check against the Fresnel formulas.

A flat interface at z = 0 between media with wavenumbers k1 = 8 and
k2 = 16, plane wave coming down at phi = 5 pi / 6.  The specular
reflection and transmission amplitudes have closed forms

    R = (k1z - k2z) / (k1z + k2z),    T = 2 k1z / (k1z + k2z),

which for this parameter pair happen to involve the golden ratio.
"""
import numpy as np

from multiscat import get_preset, solve
from multiscat.postprocess import flux_error, mode_powers

cfg = get_preset("fig4-flat", n=24, m_cap=14, K=4,
                 n_proxy_theta=12, n_proxy_phi=24)

k1z = 8.0 * abs(np.cos(cfg.phi))
k2z = np.sqrt(16.0 ** 2 - (8.0 * np.sin(cfg.phi)) ** 2)
R = (k1z - k2z) / (k1z + k2z)
T = 2.0 * k1z / (k1z + k2z)

sol = solve(cfg)
a_u, a_d = sol.basis.rereference(sol.a_u, sol.a_d)
c0 = sol.basis.flat_index(0, 0)

print(f"n = {cfg.n}, order = {cfg.order}, P = {cfg.n_proxy}")
print(f"a_u(0,0) = {a_u[c0]:+.8f}   exact R = {R:+.8f}")
print(f"|a_d(0,0)| = {abs(a_d[c0]):.8f}   exact T = {T:.8f}")
print(f"specular errors: {abs(a_u[c0] - R):.2e}, {abs(abs(a_d[c0]) - T):.2e}")

pu, pd = mode_powers(sol)
print(f"reflected power {pu.sum():.6f}, transmitted {pd.sum():.6f}")
print(f"flux conservation defect {flux_error(sol):.2e}")
print(f"timings: pre {sol.t_pre:.1f}s  fill {sol.t_fill:.1f}s "
      f"solve {sol.t_solve:.1f}s")
