"""Problem configuration for the periodic multilayer scattering solver."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, asdict

import numpy as np

from .surfaces import HeightFunction

#: supported correction orders of the singular quadrature
CORRECTION_ORDERS = (3, 5, 7)


@dataclass
class StackConfig:
    """Full description of one scattering problem.

    The stack has ``I = len(interfaces)`` interfaces and ``I + 1`` layers;
    ``wavenumbers[i]`` is the wavenumber of layer ``i`` (layer 0 on top).
    The incident plane wave travels downward: ``phi`` in (pi/2, pi).
    """

    d: float
    interfaces: list          # list[HeightFunction], top to bottom
    wavenumbers: list         # list[float], length I + 1
    phi: float                # polar incidence angle, pi/2 < phi < pi
    theta: float = 0.0        # azimuthal incidence angle
    n: int = 40               # interface nodes per side (N = n^2)
    m_wall: int = 20          # side-wall nodes per side (M_w = m_wall^2)
    m_cap: int = 20           # U/D cap nodes per side (M = m_cap^2)
    n_proxy_theta: int = 20   # proxy sphere: Gauss-Legendre polar count
    n_proxy_phi: int = 40     # proxy sphere: uniform azimuthal count
    r_proxy: float = 1.5      # proxy sphere radius, in units of d
    K: int = 10               # Rayleigh orders kept: (2K+1)^2 modes
    order: int = 7            # quadrature correction order (3, 5, 7)
    z_u: float | None = None  # upper radiation plane; default max(g_1)+d/2
    z_d: float | None = None  # lower radiation plane; default min(g_I)-d/2
    wall_margin: float = 0.1  # wall extension beyond interface range, in d
    lsq_tol: float = 1e-12    # relative truncation for pseudoinverses
    phase_zd: bool = True     # apply Bloch phasing in the Z_D block
    cross_phases: bool = True # lateral Bloch phases in wall coupling rows

    # ------------------------------------------------------------------
    def __post_init__(self):
        self.validate()

    @property
    def n_interfaces(self) -> int:
        return len(self.interfaces)

    @property
    def n_nodes(self) -> int:
        return self.n * self.n

    @property
    def n_proxy(self) -> int:
        return self.n_proxy_theta * self.n_proxy_phi

    @property
    def n_modes(self) -> int:
        return (2 * self.K + 1) ** 2

    def validate(self):
        if self.d <= 0:
            raise ValueError("period d must be positive")
        if not self.interfaces:
            raise ValueError("need at least one interface")
        if len(self.wavenumbers) != len(self.interfaces) + 1:
            raise ValueError("need exactly one wavenumber per layer "
                             "(len(interfaces) + 1)")
        if any(k <= 0 for k in self.wavenumbers):
            raise ValueError("wavenumbers must be positive reals")
        if not (0.5 * np.pi < self.phi < 1.5 * np.pi):
            raise ValueError("phi must lie in (pi/2, 3*pi/2) for a "
                             "downward-travelling incident wave")
        for g in self.interfaces:
            if abs(g.d - self.d) > 1e-12 * self.d:
                raise ValueError("interface period does not match config d")
        mins = [g.min_max()[0] for g in self.interfaces]
        maxs = [g.min_max()[1] for g in self.interfaces]
        for i in range(len(self.interfaces) - 1):
            if mins[i] <= maxs[i + 1]:
                raise ValueError(f"interfaces {i} and {i+1} touch or cross")
        if self.z_u is not None and self.z_u <= maxs[0]:
            raise ValueError("z_u must lie above the first interface")
        if self.z_d is not None and self.z_d >= mins[-1]:
            raise ValueError("z_d must lie below the last interface")
        if self.order not in CORRECTION_ORDERS:
            raise ValueError(f"order must be one of {CORRECTION_ORDERS}")
        for name in ("n", "m_wall", "m_cap", "n_proxy_theta", "n_proxy_phi"):
            if getattr(self, name) < 2:
                raise ValueError(f"{name} must be at least 2")
        if self.K < 0:
            raise ValueError("K must be nonnegative")
        if 2 * self.m_cap ** 2 < self.n_modes:
            raise ValueError(
                "underdetermined radiation match: 2*M < (2K+1)^2; "
                "increase m_cap or decrease K")

    # ------------------------------------------------------------------
    # incident wave vector and Bloch phases
    # ------------------------------------------------------------------
    @property
    def k_inc(self) -> np.ndarray:
        """Incident wave vector in layer 1 (z-component negative)."""
        k1 = self.wavenumbers[0]
        return k1 * np.array([np.sin(self.phi) * np.cos(self.theta),
                              np.sin(self.phi) * np.sin(self.theta),
                              np.cos(self.phi)])

    @property
    def alpha(self) -> tuple:
        """Bloch phases (alpha_x, alpha_y) = exp(i d k_{1x,1y})."""
        kx, ky, _ = self.k_inc
        return (np.exp(1j * self.d * kx), np.exp(1j * self.d * ky))

    def with_angles(self, phi: float, theta: float) -> "StackConfig":
        """Copy of this configuration at a different incidence angle."""
        out = StackConfig.__new__(StackConfig)
        out.__dict__.update(self.__dict__)
        out.phi = phi
        out.theta = theta
        out.validate()
        return out

    # ------------------------------------------------------------------
    # serialization
    # ------------------------------------------------------------------
    def to_dict(self) -> dict:
        dd = {k: v for k, v in self.__dict__.items() if k != "interfaces"}
        dd["interfaces"] = [
            {"offset": g.offset,
             "terms": [list(t) for t in g.terms]}
            for g in self.interfaces]
        return dd

    @classmethod
    def from_dict(cls, dd: dict) -> "StackConfig":
        dd = dict(dd)
        d = dd["d"]
        ifaces = []
        for spec in dd.pop("interfaces"):
            if "kind" in spec:
                kind = spec["kind"]
                if kind == "flat":
                    g = HeightFunction.flat(d, spec.get("offset", 0.0))
                elif kind == "sinusoid":
                    g = HeightFunction.sinusoid(d, spec["amplitude"],
                                                spec.get("offset", 0.0))
                else:
                    raise ValueError(f"unknown interface kind {kind!r}")
            else:
                g = HeightFunction(
                    d=d, offset=spec.get("offset", 0.0),
                    terms=tuple(tuple(t) for t in spec.get("terms", [])))
            ifaces.append(g)
        known = set(cls.__dataclass_fields__)
        extra = set(dd) - known
        if extra:
            raise ValueError(f"unknown config fields: {sorted(extra)}")
        return cls(interfaces=ifaces, **dd)

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, default=float)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]
