"""File outputs: JSON reports, CSV tables, and the binary field format."""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

FIELD_MAGIC = b"MSFB"
FIELD_VERSION = 1


def write_report(path, report: dict):
    Path(path).write_text(json.dumps(report, indent=2, default=float)
                          + "\n")


def write_rayleigh_csv(path, basis, a_u, a_d, refl, trans):
    """Per-order Rayleigh amplitudes and power fractions."""
    lines = ["m,n,side,re_a,im_a,propagating,power"]
    K = basis.K
    for side, a, prop, power in (("up", a_u, basis.propagating("up"), refl),
                                 ("down", a_d, basis.propagating("down"),
                                  trans)):
        for m in range(-K, K + 1):
            for n in range(-K, K + 1):
                c = basis.flat_index(m, n)
                lines.append(f"{m},{n},{side},{a[c].real:.16e},"
                             f"{a[c].imag:.16e},{int(prop[c])},"
                             f"{power[c]:.16e}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_spectra_csv(path, results):
    lines = ["phi,theta,flux_err,R_total,T_total,R_specular,T_specular"]
    for r in results:
        K = int(round((np.sqrt(r.refl.size) - 1) / 2))
        c0 = (2 * K + 1) * K + K
        lines.append(f"{r.phi:.16e},{r.theta:.16e},{r.flux_err:.6e},"
                     f"{r.refl.sum():.16e},{r.trans.sum():.16e},"
                     f"{r.refl[c0]:.16e},{r.trans[c0]:.16e}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_convergence_csv(path, rows):
    lines = ["n,n_proxy,flux_err,err_up,err_dn,re_u_up,im_u_up,"
             "re_u_dn,im_u_dn"]
    for r in rows:
        lines.append(f"{r.n},{r.n_proxy},{r.flux_err:.6e},{r.err_up:.6e},"
                     f"{r.err_dn:.6e},{r.u_up.real:.16e},{r.u_up.imag:.16e},"
                     f"{r.u_dn.real:.16e},{r.u_dn.imag:.16e}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_field_bin(path, values: np.ndarray, bbox):
    """Binary field dump.

    Layout (little endian): magic ``MSFB``, uint32 version, three uint32
    dims (nx, ny, nz), six float64 bbox bounds (xmin, xmax, ymin, ymax,
    zmin, zmax), then nx*ny*nz complex samples as (re, im) float64 pairs
    in C order.
    """
    values = np.asarray(values)
    if values.ndim != 3:
        raise ValueError("field values must be a 3-D array")
    header = FIELD_MAGIC + struct.pack("<I", FIELD_VERSION)
    header += struct.pack("<III", *values.shape)
    header += struct.pack("<6d", *[float(b) for b in bbox])
    flat = np.ascontiguousarray(values, dtype=np.complex128)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(flat.astype("<c16").tobytes())


def read_field_bin(path):
    """Inverse of :func:`write_field_bin`; returns (values, bbox)."""
    raw = Path(path).read_bytes()
    if raw[:4] != FIELD_MAGIC:
        raise ValueError("not a field file (bad magic)")
    (version,) = struct.unpack_from("<I", raw, 4)
    if version != FIELD_VERSION:
        raise ValueError(f"unsupported field file version {version}")
    nx, ny, nz = struct.unpack_from("<III", raw, 8)
    bbox = struct.unpack_from("<6d", raw, 20)
    vals = np.frombuffer(raw, dtype="<c16", offset=68,
                         count=nx * ny * nz).reshape(nx, ny, nz)
    return vals.copy(), bbox
