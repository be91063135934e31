"""Command line interface: solve | converge | spectra | field.

Each subcommand reads a JSON problem description (validated against the
packaged schema), runs the corresponding computation, and writes its
artifacts into the output directory together with a ``report.json``
summarizing timings and the energy-flux error.

Exit codes: 2 for configuration errors, 3 for solver failures, 4 for
I/O errors.
"""
from __future__ import annotations

import argparse
import importlib.resources
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .assembly import BlockCache, build_context
from .config import StackConfig
from .postprocess import (convergence_study, eval_field, flux_error,
                          mode_powers, spectra_sweep)
from .presets import get_preset
from .solver import solve_system, solve
from .assembly import assemble_system
from . import io as msio

EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_IO = 4


class ConfigError(Exception):
    pass


def _load_schema() -> dict:
    text = (importlib.resources.files("multiscat") / "schema.json").read_text()
    return json.loads(text)


def load_config_file(path: str) -> dict:
    """Read and schema-validate a JSON problem file."""
    try:
        raw = json.loads(open(path).read())
    except OSError as e:
        raise ConfigError(f"cannot read config file: {e}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}")
    import jsonschema
    try:
        jsonschema.validate(raw, _load_schema())
    except jsonschema.ValidationError as e:
        loc = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"config schema violation at {loc}: {e.message}")
    return raw


def build_stack_config(raw: dict, args) -> StackConfig:
    """Turn a validated JSON document (plus CLI overrides) into a config."""
    raw = dict(raw)
    raw.pop("schema_version", None)
    sections = {k: raw.pop(k, None) for k in ("spectra", "converge", "field")}
    preset = raw.pop("preset", None)
    if args.preset is not None:
        preset = args.preset
    if "proxy" in raw:
        proxy = raw.pop("proxy")
        raw["n_proxy_theta"] = proxy["n_theta"]
        raw["n_proxy_phi"] = proxy["n_phi"]
    try:
        if preset is not None:
            base = get_preset(preset).to_dict()
            base.update(raw)
            cfg = StackConfig.from_dict(base)
        else:
            for req in ("d", "interfaces", "wavenumbers", "phi"):
                if req not in raw:
                    raise ConfigError(
                        f"config needs {req!r} (or a 'preset' name)")
            cfg = StackConfig.from_dict(raw)
        if args.order is not None:
            cfg.order = args.order
            cfg.validate()
    except (ValueError, KeyError) as e:
        raise ConfigError(str(e))
    return cfg, sections


def _limit_threads(n: int | None):
    if n is None:
        return
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
        os.environ[var] = str(n)
    try:
        import threadpoolctl
        threadpoolctl.threadpool_limits(n)
    except ImportError:
        pass


def _base_report(cfg: StackConfig, command: str) -> dict:
    return {
        "command": command,
        "version": __version__,
        "config_hash": cfg.config_hash(),
        "n_interfaces": cfg.n_interfaces,
        "n": cfg.n,
        "order": cfg.order,
        "K": cfg.K,
    }


# ----------------------------------------------------------------------
# subcommands
# ----------------------------------------------------------------------
def cmd_solve(cfg, sections, out, args):
    sol = solve(cfg)
    pu, pd = mode_powers(sol)
    report = _base_report(cfg, "solve")
    report.update(t_pre=sol.t_pre, t_fill=sol.t_fill, t_solve=sol.t_solve,
                  flux_err=flux_error(sol),
                  R_total=float(pu.sum()), T_total=float(pd.sum()))
    msio.write_rayleigh_csv(out / "rayleigh.csv", sol.basis,
                            sol.a_u, sol.a_d, pu, pd)
    msio.write_report(out / "report.json", report)


def cmd_spectra(cfg, sections, out, args):
    spec = sections.get("spectra")
    if spec is None:
        raise ConfigError("the 'spectra' section is required for "
                          "the spectra subcommand")
    phis = np.linspace(spec["phi_min"], spec["phi_max"], spec["count"])
    t0 = time.perf_counter()
    results = spectra_sweep(cfg, phis, theta=spec.get("theta", cfg.theta))
    report = _base_report(cfg, "spectra")
    report.update(n_angles=len(results),
                  t_total=time.perf_counter() - t0,
                  max_flux_err=max(r.flux_err for r in results))
    msio.write_spectra_csv(out / "spectra.csv", results)
    msio.write_report(out / "report.json", report)


def cmd_converge(cfg, sections, out, args):
    conv = sections.get("converge") or {}
    ns = conv.get("ns")
    proxies = conv.get("proxies")
    if ns is None and proxies is None:
        ns = [cfg.n // 2, cfg.n, 2 * cfg.n]
    rows = convergence_study(cfg, ns=ns, proxies=proxies)
    report = _base_report(cfg, "converge")
    report.update(n_resolutions=len(rows),
                  flux_err=[r.flux_err for r in rows])
    msio.write_convergence_csv(out / "convergence.csv", rows)
    msio.write_report(out / "report.json", report)


def cmd_field(cfg, sections, out, args):
    fld = sections.get("field") or {}
    d = cfg.d
    bbox = fld.get("bbox")
    if bbox is None:
        gmax = cfg.interfaces[0].min_max()[1]
        gmin = cfg.interfaces[-1].min_max()[0]
        bbox = [-d / 2, d / 2, -d / 2, d / 2, gmin - d, gmax + d]
    nx, ny, nz = fld.get("nx", 40), fld.get("ny", 1), fld.get("nz", 80)
    ctx = build_context(cfg)
    sol = solve(cfg, ctx=ctx)
    xs = np.linspace(bbox[0], bbox[1], nx)
    ys = np.linspace(bbox[2], bbox[3], ny)
    zs = np.linspace(bbox[4], bbox[5], nz)
    X, Y, Z = np.meshgrid(xs, ys, zs, indexing="ij")
    pts = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])
    vals = eval_field(sol, ctx, pts,
                      total=fld.get("total", True)).reshape(nx, ny, nz)
    report = _base_report(cfg, "field")
    report.update(t_pre=sol.t_pre, t_fill=sol.t_fill, t_solve=sol.t_solve,
                  flux_err=flux_error(sol), grid=[nx, ny, nz], bbox=bbox)
    msio.write_field_bin(out / "field.bin", vals, bbox)
    msio.write_report(out / "report.json", report)


_COMMANDS = {"solve": cmd_solve, "spectra": cmd_spectra,
             "converge": cmd_converge, "field": cmd_field}


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="multiscat",
        description="Periodic multilayer acoustic scattering solver.")
    ap.add_argument("--version", action="version",
                    version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_ in (("solve", "single solve; Rayleigh amplitudes"),
                        ("spectra", "incidence-angle sweep"),
                        ("converge", "resolution self-convergence table"),
                        ("field", "solve and sample the field on a grid")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True,
                       help="JSON problem description")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--preset", default=None,
                       help="named base configuration to start from")
        p.add_argument("--order", type=int, choices=(3, 5, 7), default=None,
                       help="override the quadrature correction order")
        p.add_argument("--threads", type=int, default=None,
                       help="cap the number of BLAS threads")
    return ap


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    _limit_threads(args.threads)
    try:
        raw = load_config_file(args.config)
        cfg, sections = build_stack_config(raw, args)
    except ConfigError as e:
        print(f"multiscat: config error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    from pathlib import Path
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        print(f"multiscat: cannot create output directory: {e}",
              file=sys.stderr)
        return EXIT_IO

    try:
        _COMMANDS[args.command](cfg, sections, out, args)
    except ConfigError as e:
        print(f"multiscat: config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print(f"multiscat: I/O error: {e}", file=sys.stderr)
        return EXIT_IO
    except (np.linalg.LinAlgError, FloatingPointError, MemoryError,
            ArithmeticError) as e:
        print(f"multiscat: solver failure: {type(e).__name__}: {e}",
              file=sys.stderr)
        return EXIT_SOLVER
    return 0


if __name__ == "__main__":
    sys.exit(main())
