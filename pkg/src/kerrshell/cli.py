"""Command-line front end emitting reproducible data artifacts.

Every subcommand writes its outputs plus a manifest.json recording the
package version, the normalized configuration and its hash, and the
tolerances in force.  CSV output is RFC-4180 style with `.` decimals and
`#`-prefixed header comments.  Exit codes: 0 success, 1 numerical
failure, 2 invalid input.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys

import numpy as np

from . import __version__
from .config import DEFAULT_TOL
from .geometry import KerrParams
from . import orbits
from .orbits import ConservedSet, isco, photon_radius, marginally_bound_radius
from . import zvc as zvc_mod
from .zvc import BBound, MetricPerturbation, trace_zvc, ZVCNoConvergence
from . import flow as flow_mod
from . import matter as matter_mod
from . import fields as fields_mod


class InvalidInput(ValueError):
    pass


def _load_config_file(path):
    """Optional key=value config file; comment lines start with '#'."""
    out = {}
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise InvalidInput(f"bad config line: {line!r}")
            k, v = line.split("=", 1)
            out[k.strip().replace("-", "_")] = v.strip()
    return out


def _merge_config(args, parser):
    """Config-file values fill in only options left at their defaults
    (explicit flags win)."""
    if not getattr(args, "config", None):
        return args
    file_cfg = _load_config_file(args.config)
    for key, raw in file_cfg.items():
        if not hasattr(args, key):
            raise InvalidInput(f"unknown config key: {key}")
        default = parser.get_default(key)
        if getattr(args, key) == default:
            cur = getattr(args, key)
            if isinstance(cur, float) or isinstance(default, float):
                raw = float(raw)
            elif isinstance(cur, int) or isinstance(default, int):
                raw = int(raw)
            setattr(args, key, raw)
    return args


def _normalized_config(args):
    cfg = {k: v for k, v in sorted(vars(args).items())
           if k not in ("func",) and not k.startswith("_")}
    return cfg


def _write_manifest(outdir, command, args, extra=None):
    cfg = _normalized_config(args)
    payload = json.dumps(cfg, sort_keys=True, default=str)
    manifest = {
        "command": command,
        "version": __version__,
        "config": cfg,
        "config_sha256": hashlib.sha256(payload.encode()).hexdigest(),
        "tolerances": {
            "algebraic": DEFAULT_TOL.algebraic,
            "roundtrip": DEFAULT_TOL.roundtrip,
            "root_merge": DEFAULT_TOL.root_merge,
            "region_boundary": DEFAULT_TOL.region_boundary,
        },
    }
    manifest.update(extra or {})
    os.makedirs(outdir, exist_ok=True)
    with open(os.path.join(outdir, "manifest.json"), "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True, default=str)


def _params(args) -> KerrParams:
    try:
        return KerrParams(args.mass, args.spin)
    except ValueError as e:
        raise InvalidInput(str(e))


def _load_perturbation(path) -> MetricPerturbation:
    with open(path) as f:
        spec = json.load(f)
    kind = spec.get("kind", "zero")
    if kind == "zero":
        return MetricPerturbation.zero()
    if kind == "gaussian-bump":
        return MetricPerturbation.gaussian_bump(
            spec["field"], float(spec["amplitude"]),
            tuple(spec["center"]), tuple(spec["width"]))
    raise InvalidInput(f"unknown perturbation kind {kind!r}")


def _load_bbound(path) -> BBound:
    with open(path) as f:
        spec = json.load(f)
    bb = spec.get("bbound", spec)
    plus = bb.get("plus")
    minus = bb.get("minus")
    return BBound(plus=tuple(plus) if plus else None,
                  minus=tuple(minus) if minus else None)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_special_orbits(args):
    params = _params(args)
    d = abs(params.d)
    rows = []
    for branch in ("+", "-"):
        r_ms, eps_min, ell_min = isco(branch, d)
        rows.append((branch, photon_radius(branch, d), r_ms,
                     marginally_bound_radius(branch, d), eps_min, ell_min))
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "special_orbits.csv")
    with open(path, "w", newline="") as f:
        f.write("# special circular-orbit radii and ISCO constants (M = 1)\n")
        f.write(f"# mass={params.M!r} spin={params.a!r}\n")
        f.write("branch,r_ph,r_ms,r_mb,eps_min,ell_min\n")
        for b, r_ph, r_ms, r_mb, em, lm in rows:
            f.write(f"{b},{r_ph!r},{r_ms!r},{r_mb!r},{em!r},{lm!r}\n")
    _write_manifest(args.out, "special-orbits", args)
    return 0


def cmd_zvc(args):
    params = _params(args)
    h = _load_perturbation(args.perturbation) if args.perturbation else None
    try:
        curve = trace_zvc(params, args.energy, args.angmom, h=h, n=args.n)
    except ValueError as e:
        raise InvalidInput(str(e))
    os.makedirs(args.out, exist_ok=True)
    curve.to_csv(os.path.join(args.out, "zvc.csv"))
    curve.to_json(os.path.join(args.out, "zvc_topology.json"))
    _write_manifest(args.out, "zvc", args,
                    extra={"topology": curve.topology()})
    print(f"components={len(curve.components)} "
          f"trapped={curve.topology()['trapped']}")
    return 0


def cmd_classify(args):
    params = _params(args)
    try:
        cs = ConservedSet(args.energy, args.angmom, args.carter)
        cls = orbits.classify_orbit(cs, args.r0, args.theta0,
                                    args.sign, params)
    except ValueError as e:
        raise InvalidInput(str(e))
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "classification.csv"), "w") as f:
        f.write("# analytic orbit classification\n")
        f.write("eps,lz,q,r0,theta0,sign_vr,class\n")
        f.write(f"{args.energy!r},{args.angmom!r},{args.carter!r},"
                f"{args.r0!r},{args.theta0!r},{args.sign!r},{cls.value}\n")
    _write_manifest(args.out, "classify", args, extra={"class": cls.value})
    print(cls.value)
    return 0


def cmd_integrate(args):
    params = _params(args)
    try:
        cs = ConservedSet(args.energy, args.angmom, args.carter)
        state = flow_mod.state_from_constants(params, cs, args.r0,
                                              args.theta0, args.sign,
                                              args.sign_theta)
    except ValueError as e:
        raise InvalidInput(str(e))
    traj = flow_mod.integrate(params, cs, state, args.tau, rtol=args.tol,
                              escape_radius=args.escape_radius)
    if traj.termination is flow_mod.Termination.STEP_FAILURE:
        print("integration failed: step-size underflow", file=sys.stderr)
        return 1
    os.makedirs(args.out, exist_ok=True)
    traj.to_csv(os.path.join(args.out, "trajectory.csv"),
                metadata={"seed": args.seed})
    fate = flow_mod.fate(traj)
    _write_manifest(args.out, "integrate", args, extra={
        "termination": traj.termination.value,
        "fate": fate.value,
        "drift_q": traj.drift_q,
        "drift_H": traj.drift_H,
    })
    print(f"termination={traj.termination.value} fate={fate.value}")
    return 0


def cmd_matter(args):
    params = _params(args)
    bbound = _load_bbound(args.profile)
    try:
        zvc_mod.validate_bbound(params, bbound)
    except ValueError as e:
        raise InvalidInput(str(e))
    shell = zvc_mod.shell_support(params, bbound, n_grid=4, n_trace=41)
    profile = matter_mod.ProfilePhi.polynomial(bbound)
    cutoff = matter_mod.build_cutoff(params, bbound, shell=shell)
    nr, nz = (int(x) for x in args.grid.split("x"))
    margin = 2.0 * max((shell.rho_max - shell.rho_min) / nr,
                       (shell.z_max - shell.z_min) / nz)
    rho = np.linspace(max(shell.rho_min - margin, 1e-3),
                      shell.rho_max + margin, nr)
    zz = np.linspace(shell.z_min - margin, shell.z_max + margin, nz)
    fieldsout = matter_mod.source_fields(params, rho, zz, profile,
                                         args.delta, cutoff)
    os.makedirs(args.out, exist_ok=True)
    for key in fieldsout.fields:
        fieldsout.to_csv(os.path.join(args.out, f"{key}.csv"), key)
    extra = {"fields_manifest": fieldsout.manifest,
             "all_zero": bool(args.delta == 0.0)}
    _write_manifest(args.out, "matter", args, extra=extra)
    print(f"delta={args.delta} all_zero={extra['all_zero']}")
    return 0


def cmd_picard(args):
    params = _params(args)
    bbound = _load_bbound(args.profile)
    try:
        zvc_mod.validate_bbound(params, bbound)
    except ValueError as e:
        raise InvalidInput(str(e))
    shell = zvc_mod.shell_support(params, bbound, n_grid=4, n_trace=41)
    profile = matter_mod.ProfilePhi.polynomial(bbound)
    cutoff = matter_mod.build_cutoff(params, bbound, shell=shell)
    nr, nz = (int(x) for x in args.grid.split("x"))
    half_z = max(abs(shell.z_min), abs(shell.z_max)) + 4.0
    grid = fields_mod.Grid(rho_max=shell.rho_max + 6.0, z_min=-half_z,
                           z_max=half_z, nr=nr, nz=nz)
    bg = fields_mod.KerrBackground.build(params, grid)
    solver = fields_mod.GreenSolver(grid)
    state = fields_mod.RenormalizedState.zero(grid, args.delta)
    os.makedirs(args.out, exist_ok=True)
    history = []
    converged_at = None
    try:
        for k in range(args.sweeps):
            state = fields_mod.picard_sweep(params, state, profile, cutoff,
                                            args.delta, bg=bg, solver=solver,
                                            shell=shell)
            history.append(dict(state.residuals, norm=state.norm()))
            state.checkpoint(os.path.join(args.out, f"sweep_{k + 1:03d}"))
            if state.norm() <= args.tol and converged_at is None:
                converged_at = k + 1
                if args.delta == 0.0:
                    break
    except fields_mod.PicardDivergence as e:
        print(f"picard sweep diverged: {e}", file=sys.stderr)
        return 1
    _write_manifest(args.out, "picard", args, extra={
        "history": history, "converged_at": converged_at})
    print(f"sweeps={len(history)} final_norm={state.norm():.3e}")
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _common(sp, energy=False, position=False):
    sp.add_argument("--mass", type=float, default=1.0)
    sp.add_argument("--spin", type=float, default=0.0)
    sp.add_argument("--out", default="out")
    sp.add_argument("--tol", type=float, default=1e-10)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--config", default=None,
                    help="key=value file; explicit flags win")
    if energy:
        sp.add_argument("--energy", type=float, required=True)
        sp.add_argument("--angmom", type=float, required=True)
    if position:
        sp.add_argument("--carter", type=float, default=0.0)
        sp.add_argument("--r0", type=float, required=True)
        sp.add_argument("--theta0", type=float, default=np.pi / 2)
        sp.add_argument("--sign", type=float, default=1.0)


def build_parser():
    ap = argparse.ArgumentParser(
        prog="kerrshell",
        description="Trapped Kerr orbits, zero-velocity curves and "
                    "Vlasov matter shells")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("special-orbits",
                        help="photon/ISCO/marginally-bound table")
    _common(sp)
    sp.set_defaults(func=cmd_special_orbits)

    sp = sub.add_parser("zvc", help="trace a zero-velocity curve")
    _common(sp, energy=True)
    sp.add_argument("--perturbation", default=None,
                    help="JSON file describing the metric perturbation")
    sp.add_argument("--n", type=int, default=201)
    sp.set_defaults(func=cmd_zvc)

    sp = sub.add_parser("classify", help="analytic orbit classification")
    _common(sp, energy=True, position=True)
    sp.set_defaults(func=cmd_classify)

    sp = sub.add_parser("integrate", help="integrate the reduced system")
    _common(sp, energy=True, position=True)
    sp.add_argument("--sign-theta", type=float, default=1.0)
    sp.add_argument("--tau", type=float, default=1000.0)
    sp.add_argument("--escape-radius", type=float, default=1000.0)
    sp.set_defaults(func=cmd_integrate)

    sp = sub.add_parser("matter", help="stress-energy and source fields")
    _common(sp)
    sp.add_argument("--profile", required=True,
                    help="JSON file with the parameter rectangles")
    sp.add_argument("--delta", type=float, default=0.0)
    sp.add_argument("--grid", default="128x128")
    sp.set_defaults(func=cmd_matter)

    sp = sub.add_parser("picard", help="damped fixed-point sweeps")
    _common(sp)
    sp.add_argument("--profile", required=True)
    sp.add_argument("--delta", type=float, default=0.0)
    sp.add_argument("--sweeps", type=int, default=3)
    sp.add_argument("--grid", default="48x48")
    sp.set_defaults(func=cmd_picard)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args = _merge_config(args, parser)
        return args.func(args)
    except InvalidInput as e:
        print(f"invalid input: {e}", file=sys.stderr)
        return 2
    except (ZVCNoConvergence, fields_mod.PicardDivergence,
            RuntimeError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
