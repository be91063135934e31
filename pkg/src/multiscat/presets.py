"""Named configurations reproducing the reference experiments."""
from __future__ import annotations

import numpy as np

from .config import StackConfig
from .surfaces import HeightFunction


def _two_layer(_amplitude: float, _n: int, _proxy, **kw) -> StackConfig:
    base = dict(
        d=1.0,
        interfaces=[HeightFunction.sinusoid(1.0, _amplitude)],
        wavenumbers=[8.0, 16.0],
        phi=5.0 * np.pi / 6.0,
        theta=0.0,
        n=_n, m_wall=25, m_cap=25,
        n_proxy_theta=_proxy[0], n_proxy_phi=_proxy[1],
        K=10, order=7)
    if "interfaces" not in kw and "amplitude" in kw:
        base["interfaces"] = [HeightFunction.sinusoid(1.0,
                                                      kw.pop("amplitude"))]
    base.update(kw)
    return StackConfig(**base)


def fig4_flat(**kw) -> StackConfig:
    """Flat two-layer transmission problem (analytic Fresnel reference)."""
    return _two_layer(0.0, 40, (29, 60), **kw)


def fig4_corrugated(**kw) -> StackConfig:
    """Corrugated (amplitude 0.2) two-layer transmission problem."""
    return _two_layer(0.2, 60, (39, 80), **kw)


def fig5_roughness(amplitude: float = 0.5, **kw) -> StackConfig:
    """Two-layer problem with selectable interface roughness."""
    return _two_layer(amplitude, 60, (39, 80), **kw)


def table1_scaling(n_interfaces: int = 2, **kw) -> StackConfig:
    """Linear-in-layers scaling stack: corrugated unit-offset interfaces."""
    ifaces = [HeightFunction.sinusoid(1.0, 0.2, offset=-float(i))
              for i in range(n_interfaces)]
    ks = [10.0 if i % 2 == 0 else 20.0 for i in range(n_interfaces + 1)]
    base = dict(
        d=1.0, interfaces=ifaces, wavenumbers=ks,
        phi=5.0 * np.pi / 6.0, theta=np.pi / 4.0,
        n=60, m_wall=20, m_cap=20,
        n_proxy_theta=34, n_proxy_phi=70, K=10, order=7)
    base.update(kw)
    return StackConfig(**base)


def fig7_spectra(n_layers: int = 11, **kw) -> StackConfig:
    """Flat multilayer stack for reflectance/transmittance spectra."""
    n_ifaces = n_layers - 1
    ifaces = [HeightFunction.flat(1.0, offset=-float(i))
              for i in range(n_ifaces)]
    ks = [2.0 * np.pi if i % 2 == 0 else 4.0 * np.pi
          for i in range(n_layers)]
    base = dict(
        d=1.0, interfaces=ifaces, wavenumbers=ks,
        phi=5.0 * np.pi / 6.0, theta=0.0,
        n=40, m_wall=20, m_cap=20,
        n_proxy_theta=29, n_proxy_phi=60, K=10, order=7)
    base.update(kw)
    return StackConfig(**base)


def fig6_manylayer(n_layers: int = 11, amplitude: float = 0.2,
                   **kw) -> StackConfig:
    """Corrugated many-layer stack at reduced resolution."""
    n_ifaces = n_layers - 1
    ifaces = [HeightFunction.sinusoid(1.0, amplitude, offset=-float(i))
              for i in range(n_ifaces)]
    ks = [10.0 if i % 2 == 0 else 20.0 for i in range(n_layers)]
    base = dict(
        d=1.0, interfaces=ifaces, wavenumbers=ks,
        phi=5.0 * np.pi / 6.0, theta=np.pi / 4.0,
        n=30, m_wall=20, m_cap=20,
        n_proxy_theta=24, n_proxy_phi=50, K=10, order=7)
    base.update(kw)
    return StackConfig(**base)


PRESETS = {
    "fig4-flat": fig4_flat,
    "fig4-corrugated": fig4_corrugated,
    "fig5-roughness": fig5_roughness,
    "table1-scaling": table1_scaling,
    "fig7-spectra": fig7_spectra,
    "fig6-manylayer-scaled": fig6_manylayer,
}


def get_preset(name: str, **kw) -> StackConfig:
    try:
        factory = PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; "
                       f"available: {sorted(PRESETS)}") from None
    return factory(**kw)
