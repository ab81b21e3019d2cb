"""Command-line front end.

``kcocontact {check,derive,simulate,verify,converge} CONFIG [--out DIR]``

Exit codes: 0 when every check passes, 1 when a mathematical check fails,
2 on operational problems (bad config, missing files, I/O errors).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import warnings

import numpy as np

from .config import load_config
from .dynamics import (
    HolonomyWarning,
    el_residual_field,
    hdw_residual_field,
    prolong,
    sopde_residual,
    summarize,
    transport_section,
)
from .errors import ConfigError, KCocontactError
from .expressions import Expr
from .geometry import dual_frame_defect, solve_reeb, verify_axioms
from .hamiltonian import HamiltonianSystem, canonical_kvector, hdw_determined, verify_kvector
from .integrators import (
    convergence_study,
    integrate_k1,
    integrate_wave,
    k1_diagnostics,
    l2_error,
    load_k1_csv,
    load_wave_csv,
    wave_diagnostics,
)
from .lagrangian import LagrangianSystem
from .phase import HAMILTONIAN, as_flat

EXIT_OK, EXIT_FAIL, EXIT_OPERATIONAL = 0, 1, 2


def _clean(obj):
    """JSON-safe copy: arrays to lists, non-finite floats to ``None``."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _write_json(path, data):
    with open(path, "w") as fh:
        json.dump(_clean(data), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _max(arr):
    arr = np.asarray(arr, dtype=float)
    arr = arr[np.isfinite(arr)]
    return float(np.max(np.abs(arr))) if arr.size else 0.0


def _hamiltonian(cfg):
    if isinstance(cfg.system, HamiltonianSystem):
        return cfg.system
    if cfg.closed_form_h is not None:
        return cfg.closed_form_h
    raise ConfigError("this command needs a Hamiltonian (system.h)", "system.h")


# commands ------------------------------------------------------------------------


def cmd_check(cfg, out):
    """Rank conditions at every sample point, plus the Reeb dual-frame defect."""
    structure = cfg.system
    tol = cfg.tolerances
    report = verify_axioms(structure, cfg.samples, tol.rank_rtol)
    data = report.to_dict()
    for entry, x in zip(data["points"], cfg.samples):
        if entry["passed"]:
            forms = structure.forms(x)
            rt, rz = solve_reeb(forms, tol.reeb_residual, tol.rank_rtol)
            entry["reeb_defect"] = dual_frame_defect(forms, rt, rz)
    _write_json(os.path.join(out, "axioms.json"), data)
    if report.passed:
        print(f"check: all conditions hold at {len(cfg.samples)} points")
        return EXIT_OK
    print(f"check: FAILED conditions {', '.join(report.failed_conditions())}")
    return EXIT_FAIL


def _derive_hamiltonian(cfg, hsys):
    rows, ok = [], True
    labels = hsys.signature.labels(HAMILTONIAN)
    for x in cfg.samples:
        det = hdw_determined(hsys, x)
        coeffs = canonical_kvector(hsys, x)
        rep = verify_kvector(hsys, coeffs, x, cfg.tolerances.kvector_residual)
        ok &= rep.passed
        row = {
            "point": dict(zip(labels, as_flat(x, hsys.signature).tolist())),
            "determined": det.to_dict(),
            "residuals": rep.to_dict(),
        }
        # for k = 1 the tables are fully determined and no gauge is chosen
        row["gauge"] = None if hsys.signature.k == 1 else {"C": coeffs.C, "D": coeffs.D}
        rows.append(row)
    return rows, ok


def _derive_lagrangian(cfg, lsys):
    rows, ok = [], True
    sig = lsys.signature
    labels = sig.labels(lsys.L.side)
    tol = cfg.tolerances
    for x in cfg.samples:
        block = lsys.hessian(x)
        row = {
            "point": dict(zip(labels, as_flat(x, sig).tolist())),
            "energy": lsys.energy(x),
            "momenta": lsys.legendre(x).fiber,
            "fiber_hessian": block.W,
            "regular": block.regular,
            "condition_number": block.cond,
        }
        if block.regular:
            rt, rz = lsys.reeb_closed_form(x)
            coeffs = lsys.canonical_kvector(x)
            rep = verify_kvector(lsys, coeffs, x, tol.kvector_residual)
            sopde = sopde_residual(coeffs, x)
            ok &= rep.passed and sopde <= tol.kvector_residual
            row.update(
                reeb_time=rt,
                reeb_contact=rz,
                kvector=coeffs.to_dict(),
                residuals=rep.to_dict(),
                sopde_residual=sopde,
            )
            if cfg.closed_form_h is not None:
                y = lsys.legendre(x)
                row["hamiltonian_gap"] = abs(lsys.energy(x) - cfg.closed_form_h.h(y))
        else:
            ok = False
        rows.append(row)
    return rows, ok


def cmd_derive(cfg, out):
    """Determined coefficients and the canonical solution at each sample point."""
    if isinstance(cfg.system, LagrangianSystem):
        rows, ok = _derive_lagrangian(cfg, cfg.system)
    else:
        rows, ok = _derive_hamiltonian(cfg, _hamiltonian(cfg))
    _write_json(os.path.join(out, "derive.json"), {"side": cfg.side, "points": rows, "passed": ok})
    print(f"derive: {len(rows)} points, {'all residuals within tolerance' if ok else 'FAILED'}")
    return EXIT_OK if ok else EXIT_FAIL


def _solver_kind(cfg):
    kind = cfg.solver.get("kind")
    if kind is None:
        raise ConfigError("this command needs a solver block", "solver")
    return kind


def _k1_run(cfg, dt=None):
    hsys = _hamiltonian(cfg)
    s = cfg.solver
    return hsys, integrate_k1(hsys, s["x0"], float(s["T"]), float(dt if dt is not None else s["dt"]))


def cmd_simulate(cfg, out):
    kind = _solver_kind(cfg)
    summary = {"config": cfg.raw}
    if kind == "k1":
        hsys, traj = _k1_run(cfg)
        diag = k1_diagnostics(hsys, traj)
        traj.write_csv(os.path.join(out, "trajectory.csv"))
        summary.update(
            steps=traj.times.size - 1,
            dt=traj.dt,
            final_state=traj.states[-1],
            energy_initial=diag["energy"][0],
            energy_final=diag["energy"][-1],
            max_z_residual=_max(diag["z_residual"]),
        )
    else:
        wcfg = cfg.wave_config()
        traj = integrate_wave(wcfg)
        diag = wave_diagnostics(traj)
        traj.write_csv(os.path.join(out, "trajectory.csv"))
        summary.update(
            steps=int(round(wcfg.T / traj.dt)),
            dt=traj.dt,
            snapshots=traj.times.size,
            energy_initial=traj.energy[0],
            energy_final=traj.energy[-1],
            dissipation_final=traj.dissipation[-1],
            max_energy_balance=_max(diag["energy_balance"]),
            energy_nonincreasing=bool(np.all(np.diff(traj.energy) <= 0)),
            max_z_residual=_max(diag["z_residual"]),
        )
        if "exact" in cfg.solver:
            summary["l2_error"] = l2_error(traj, str(cfg.solver["exact"]), wcfg.params)
    _write_json(os.path.join(out, "summary.json"), summary)
    print(f"simulate: wrote {os.path.join(out, 'trajectory.csv')}")
    return EXIT_OK


def _wave_residuals(cfg, traj):
    lsys = cfg.system if isinstance(cfg.system, LagrangianSystem) else LagrangianSystem(traj.config.lagrangian())
    section = traj.section()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", HolonomyWarning)
        ps = prolong(section)
        groups = {f"el.{k}": v for k, v in summarize(el_residual_field(lsys, ps)).items()}
    if cfg.closed_form_h is not None:
        hps = prolong(transport_section(lsys, section))
        groups.update({f"hdw.{k}": v for k, v in summarize(hdw_residual_field(cfg.closed_form_h, hps)).items()})
    return groups, ps.holonomy_gap


def cmd_verify(cfg, out):
    """Recompute residuals on the stored trajectory; pass iff all are within tolerance."""
    kind = _solver_kind(cfg)
    path = os.path.join(out, "trajectory.csv")
    if not os.path.exists(path):
        raise FileNotFoundError(f"no trajectory at {path}; run simulate first")
    tol = cfg.tolerances.section_residual
    result = {"tolerance": tol}
    if kind == "k1":
        hsys = _hamiltonian(cfg)
        traj = load_k1_csv(path, hsys.signature)
        groups = {f"hdw.{k}": v for k, v in summarize(hdw_residual_field(hsys, prolong(traj.section()))).items()}
    else:
        traj = load_wave_csv(path, cfg.wave_config())
        groups, gap = _wave_residuals(cfg, traj)
        result["holonomy_gap"] = gap
        if "exact" in cfg.solver:
            result["l2_error"] = l2_error(traj, str(cfg.solver["exact"]), traj.config.params)
    result["groups"] = groups
    worst = max(g["max"] for g in groups.values())
    result["max_residual"] = worst
    result["passed"] = bool(worst <= tol)
    _write_json(os.path.join(out, "verify.json"), result)
    print(f"verify: max residual {worst:.3e} against tolerance {tol:.1e}: {'pass' if result['passed'] else 'FAIL'}")
    return EXIT_OK if result["passed"] else EXIT_FAIL


def cmd_converge(cfg, out):
    kind = _solver_kind(cfg)
    levels = cfg.solver.get("levels")
    if levels is None:
        raise ConfigError("a convergence study needs solver.levels", "solver.levels")
    if kind == "k1":
        exact = cfg.solver.get("exact")
        if exact is None:
            raise ConfigError("k1 convergence needs the reference q1(t) in solver.exact", "solver.exact")
        ref = Expr(str(exact))
        params = dict(cfg.raw["system"].get("params", {}))

        def solve(dt):
            hsys, traj = _k1_run(cfg, dt)
            q_ref = np.broadcast_to(ref.evaluate({**params, "t": traj.times}), traj.times.shape)
            return traj.dt, {"q_error": np.max(np.abs(traj.q[:, 0] - q_ref))}

    else:

        def solve(nx):
            wcfg = cfg.wave_config(nx=int(nx))
            if cfg.solver.get("dt") is not None:
                base = int(cfg.solver.get("nx", nx))
                wcfg = cfg.wave_config(nx=int(nx), dt=float(cfg.solver["dt"]) * base / int(nx))
            traj = integrate_wave(wcfg)
            errs, _ = _wave_residuals(cfg, traj)
            out_errs = {"el_residual": max(v["max"] for k, v in errs.items() if k.startswith("el."))}
            if "exact" in cfg.solver:
                out_errs["l2_error"] = l2_error(traj, str(cfg.solver["exact"]), wcfg.params)
            return traj.x[1] - traj.x[0], out_errs

    table = convergence_study(solve, levels)
    table.write(os.path.join(out, "convergence.csv"), os.path.join(out, "convergence.json"))
    for name, orders in table.orders.items():
        print(f"converge: {name} orders " + ", ".join(f"{o:.3f}" for o in orders))
    for flag in table.flags:
        print(f"converge: FLAG {flag}")
    return EXIT_OK if not table.flags else EXIT_FAIL


COMMANDS = {
    "check": cmd_check,
    "derive": cmd_derive,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
    "converge": cmd_converge,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="kcocontact", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("config", help="path to a YAML run configuration")
    parser.add_argument("--out", help="output directory (overrides output.dir)")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        out = args.out or cfg.output_dir
        os.makedirs(out, exist_ok=True)
        return COMMANDS[args.command](cfg, out)
    except (ConfigError, OSError) as exc:
        print(f"kcocontact: error: {exc}", file=sys.stderr)
        return EXIT_OPERATIONAL
    except KCocontactError as exc:
        print(f"kcocontact: check failed: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
