"""Command-line front end: pipeline orchestration and plot-ready export.

Subcommands
-----------
run            full pipeline: sample the level set, sweep horizons, emit the
               limiting trajectories, certify the final minimizer
sweep          sampling and horizon sweep only (records, no trajectories)
certify        check a trajectory CSV against the normal-attraction bounds
mech-validate  structural checks and rate-constant table for a mechanism file
models         list built-in models

Outputs are headered CSV for trajectories and JSON for sweep records and
certificates; the resolved configuration is serialized into every output
directory so a run can be reproduced bit-identically under a fixed seed.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 infeasible optimization.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .diagnostics import CandidateCurve, certify_normal_attraction
from .errors import (ConfigError, Infeasible, MechanismValidation,
                     SchemaMismatch, SlowManifoldError)
from .mechanisms import (compile_mechanism, conserved_subspace,
                         forward_rate_table, load_mechanism)
from .models import davis_skodje, linear_model, michaelis_menten
from .objective import ObjectiveSpec, certify
from .optimizer import (LevelSetSpec, default_epsilon, emit_limit_trajectory,
                        horizon_sweep, sample_level_set)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_INFEASIBLE = 4

BUILTIN_MODELS = {
    "davis_skodje": "two-dimensional slow-fast benchmark (parameter: gamma)",
    "michaelis_menten": "enzyme kinetics benchmark (gamma, kappa, beta)",
    "linear": "linear system p' = A p (matrix)",
    "mechanism": "mass-action mechanism compiled from a JSON file",
}

_CONFIG_KEYS = {
    "model", "objective", "T_list", "epsilon", "box", "starts", "seed",
    "tol", "stiff", "emit_span", "units_out", "certify", "accumulation_tol",
    "inner_maxiter",
}
_MODEL_KEYS = {"name", "gamma", "kappa", "beta", "matrix", "mechanism",
               "temperature_K", "initial_composition"}
_OBJECTIVE_KEYS = {"variant", "mode", "orientation", "level", "aggregation"}


def _require_keys(d, allowed, context):
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"unknown {context} keys: {sorted(unknown)}")


def load_config(path):
    with open(path) as fh:
        try:
            cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
    _require_keys(cfg, _CONFIG_KEYS, "config")
    if "model" not in cfg:
        raise ConfigError("config requires a 'model' section")
    _require_keys(cfg["model"], _MODEL_KEYS, "model")
    if "objective" in cfg:
        _require_keys(cfg["objective"], _OBJECTIVE_KEYS, "objective")
    return cfg


def build_model(mcfg, config_dir=None):
    """Instantiate the model described by the config's model section.

    Returns (model, extras) where extras carries mechanism-specific data
    (species names, conservation basis, initial composition).
    """
    name = mcfg.get("name")
    if name == "davis_skodje":
        return davis_skodje(mcfg.get("gamma", 2.0)), {}
    if name == "michaelis_menten":
        return michaelis_menten(mcfg.get("gamma", 1.0),
                                mcfg.get("kappa", 1.0),
                                mcfg.get("beta", 1.0)), {}
    if name == "linear":
        return linear_model(np.asarray(mcfg["matrix"], dtype=float)), {}
    if name == "mechanism" or "mechanism" in mcfg:
        path = Path(mcfg["mechanism"])
        if not path.is_absolute() and config_dir is not None:
            cand = Path(config_dir) / path
            if cand.exists():
                path = cand
        mech = load_mechanism(path)
        if "temperature_K" in mcfg:
            mech.temperature = float(mcfg["temperature_K"])
        model = compile_mechanism(mech)
        comp0 = mcfg.get("initial_composition")
        if comp0 is None:
            raise ConfigError("mechanism models require 'initial_composition'")
        c0 = np.array([float(comp0.get(sp, 0.0)) for sp in mech.species])
        L = conserved_subspace(mech)
        # orthonormal basis of the kernel of the conservation rows: the
        # reachable affine subspace through the initial composition
        _, s, Vt = np.linalg.svd(L)
        rank = int((s > 1e-12 * s.max()).sum())
        basis = Vt[rank:].T
        extras = {"mechanism": mech, "species": mech.species,
                  "conservation": L, "origin": c0, "basis": basis}
        return model, extras
    raise ConfigError(f"unknown model '{name}'")


def _format_float(x):
    return repr(float(x))


def write_trajectory_csv(path, model, traj, columns, units, meta,
                         projection=None, scale=1.0):
    """Headered CSV with time, state coordinates, speed and optional
    projection onto a conserved-subspace basis."""
    with open(path, "w", newline="") as fh:
        fh.write("# slowmanifold trajectory\n")
        for k, v in meta.items():
            fh.write(f"# {k}: {v}\n")
        fh.write(f"# units: state in {units}, time in model units\n")
        fh.write("# columns: t, state coordinates, field speed")
        if projection is not None:
            fh.write(", conserved-subspace coordinates u*")
        fh.write("\n")
        writer = csv.writer(fh)
        header = ["t"] + list(columns) + ["speed"]
        if projection is not None:
            header += [f"u{j+1}" for j in range(projection[1].shape[1])]
        writer.writerow(header)
        for t, state in zip(traj.times, traj.states):
            row = [_format_float(t)]
            row += [_format_float(v * scale) for v in state]
            row.append(_format_float(model.speed(state)))
            if projection is not None:
                origin, basis = projection
                u = basis.T @ (state - origin)
                row += [_format_float(v * scale) for v in u]
            writer.writerow(row)


def read_trajectory_csv(path):
    """Read back (times, states) from a trajectory CSV."""
    times, states = [], []
    with open(path) as fh:
        reader = csv.reader(row for row in fh if not row.startswith("#"))
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaMismatch("trajectory file is empty")
        if not header or header[0] != "t":
            raise SchemaMismatch("trajectory file lacks the expected header")
        n_state = len([c for c in header if c not in ("t", "speed")
                       and not c.startswith("u")])
        for row in reader:
            times.append(float(row[0]))
            states.append([float(v) for v in row[1:1 + n_state]])
    if not times:
        raise SchemaMismatch("trajectory file contains no samples")
    return np.array(times), np.array(states)


def _json_dump(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _resolve_pipeline(cfg, config_dir):
    """Shared setup for run/sweep: model, level set, objective template."""
    model, extras = build_model(cfg["model"], config_dir)
    ocfg = cfg.get("objective", {})
    seed = int(cfg.get("seed", 0))
    tol_cfg = cfg.get("tol", {})
    tol = (float(tol_cfg.get("rel", 1e-8)), float(tol_cfg.get("abs", 1e-10)))
    stiff = bool(cfg.get("stiff", False))
    T_list = [float(T) for T in cfg["T_list"]]

    if "box" in cfg:
        lo = np.asarray(cfg["box"][0], dtype=float)
        hi = np.asarray(cfg["box"][1], dtype=float)
    elif extras:
        c0 = extras["origin"]
        hi = np.maximum(c0 * 1.5, c0 + 1e-9)
        lo = np.zeros_like(c0)
    else:
        lo = np.full(model.dim, -1.0)
        hi = np.full(model.dim, 1.0)

    subspace = (extras["origin"], extras["basis"]) if extras else None
    eps = cfg.get("epsilon", "auto")
    if eps == "auto":
        eps = default_epsilon(model, (lo, hi), subspace=subspace, seed=seed)
    ls = LevelSetSpec(epsilon=float(eps), box=(lo, hi),
                      origin=extras.get("origin") if extras else None,
                      basis=extras.get("basis") if extras else None)
    spec = ObjectiveSpec(
        variant=ocfg.get("variant", "a"),
        mode=ocfg.get("mode", "backward"),
        T=T_list[0],
        level=int(ocfg.get("level", 4)),
        orientation=ocfg.get("orientation", "minimize"),
        aggregation=ocfg.get("aggregation", "sup"),
    )
    return model, extras, ls, spec, T_list, seed, tol, stiff


def _run_pipeline(cfg, outdir, emit=True, do_certify=True, config_dir=None):
    model, extras, ls, spec, T_list, seed, tol, stiff = \
        _resolve_pipeline(cfg, config_dir)
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)

    starts = sample_level_set(model, ls, int(cfg.get("starts", 4)), seed=seed)
    sweep = horizon_sweep(
        model, spec, ls, T_list, starts, tol=tol, stiff=stiff,
        accumulation_tol=float(cfg.get("accumulation_tol", 1e-4)),
        inner_maxiter=int(cfg.get("inner_maxiter", 200)))

    resolved = dict(cfg)
    resolved["epsilon"] = ls.epsilon
    _json_dump(outdir / "config.json", resolved)

    payload = sweep.to_dict()
    payload["epsilon"] = ls.epsilon
    payload["seed"] = seed
    payload["version"] = __version__
    _json_dump(outdir / "sweep.json", payload)

    units = "mol/cm3" if extras else "model units"
    scale = 1.0
    if cfg.get("units_out") == "mol/L" and extras:
        units, scale = "mol/L", 1000.0
    projection = (extras["origin"], extras["basis"]) if extras else None
    columns = extras["species"] if extras else \
        [f"x{j+1}" for j in range(model.dim)]

    if emit:
        span = cfg.get("emit_span", [-T_list[-1], T_list[-1]])
        for rec in sweep.records:
            traj = emit_limit_trajectory(model, rec, span, tol=tol,
                                         stiff=stiff)
            meta = {"model": model.name, "T": rec.T,
                    "epsilon": ls.epsilon, "seed": seed}
            write_trajectory_csv(
                outdir / f"trajectory_T{rec.T:g}.csv", model, traj,
                columns, units, meta, projection=projection, scale=scale)

    if do_certify:
        final = sweep.records[-1]
        report = certify(model, final.p_star, spec.with_horizon(final.T),
                         F_value=final.F_value, tol=tol, stiff=stiff)
        _json_dump(outdir / "certificate.json", report.to_dict())
    return sweep


def cmd_run(args):
    cfg = load_config(args.config)
    _apply_overrides(cfg, args)
    _run_pipeline(cfg, args.out, emit=True, do_certify=True,
                  config_dir=Path(args.config).parent)
    return EXIT_OK


def cmd_sweep(args):
    cfg = load_config(args.config)
    _apply_overrides(cfg, args)
    _run_pipeline(cfg, args.out, emit=False, do_certify=False,
                  config_dir=Path(args.config).parent)
    return EXIT_OK


def cmd_certify(args):
    cfg = load_config(args.config)
    _apply_overrides(cfg, args)
    model, _ = build_model(cfg["model"], Path(args.config).parent)
    times, states = read_trajectory_csv(args.trajectory)
    stride = max(1, len(states) // int(args.samples))
    transverse = None
    if args.transverse == "coordinate":
        # graph-style curves over the first coordinate: transverse bundle is
        # the span of the remaining coordinate directions
        q = model.dim
        transverse = lambda p: np.eye(q)[:, 1:]
    curve = CandidateCurve.from_trajectory(model, states[::stride],
                                           transverse_rule=transverse)
    cert = certify_normal_attraction(model, curve, float(args.nu), float(args.nu_c),
                             float(args.horizon))
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    _json_dump(outdir / "certificate.json", cert.to_dict())
    print("pass" if cert.passed else
          f"refuted (worst_slack={cert.worst_slack:.3e})")
    return EXIT_OK


def cmd_mech_validate(args):
    mech = load_mechanism(args.path)
    L = conserved_subspace(mech)
    print(f"mechanism valid: {len(mech.species)} species, "
          f"{len(mech.reactions)} reactions, "
          f"conservation rank {L.shape[0]}")
    T = args.temperature if args.temperature else mech.temperature
    print(f"rate constants at T = {T} K:")
    for label, kf, kb in forward_rate_table(mech, T):
        line = f"  {label}: k_f = {kf:.6e}"
        if kb is not None:
            line += f", k_b = {kb:.6e}"
        print(line)
    return EXIT_OK


def cmd_models(_args):
    for name, desc in BUILTIN_MODELS.items():
        print(f"{name}: {desc}")
    return EXIT_OK


def _apply_overrides(cfg, args):
    if getattr(args, "seed", None) is not None:
        cfg["seed"] = args.seed
    if getattr(args, "tol_rel", None) is not None:
        cfg.setdefault("tol", {})["rel"] = args.tol_rel
    if getattr(args, "tol_abs", None) is not None:
        cfg.setdefault("tol", {})["abs"] = args.tol_abs
    if getattr(args, "stiff", False):
        cfg["stiff"] = True
    if getattr(args, "units_out", None) is not None:
        cfg["units_out"] = args.units_out


def build_parser():
    parser = argparse.ArgumentParser(
        prog="slowmanifold",
        description="Locate and certify normally attracting invariant "
                    "trajectories of smooth vector fields.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", required=True, help="JSON run config")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--tol-rel", dest="tol_rel", type=float, default=None)
        p.add_argument("--tol-abs", dest="tol_abs", type=float, default=None)
        p.add_argument("--stiff", action="store_true")
        p.add_argument("--units-out", dest="units_out",
                       choices=["mol/cm3", "mol/L"], default=None)

    p_run = sub.add_parser("run", help="full pipeline")
    add_common(p_run)
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="level-set sampling and horizon "
                                           "sweep only")
    add_common(p_sweep)
    p_sweep.set_defaults(func=cmd_sweep)

    p_cert = sub.add_parser("certify", help="certify a trajectory file")
    add_common(p_cert)
    p_cert.add_argument("--trajectory", required=True)
    p_cert.add_argument("--nu", type=float, required=True)
    p_cert.add_argument("--nu-c", dest="nu_c", type=float, required=True)
    p_cert.add_argument("--horizon", type=float, default=5.0)
    p_cert.add_argument("--samples", type=int, default=9)
    p_cert.add_argument("--transverse", choices=["orthogonal", "coordinate"],
                        default="orthogonal",
                        help="transverse bundle rule for the certificate")
    p_cert.set_defaults(func=cmd_certify)

    p_mech = sub.add_parser("mech-validate", help="validate a mechanism file")
    p_mech.add_argument("path")
    p_mech.add_argument("--temperature", type=float, default=None)
    p_mech.set_defaults(func=cmd_mech_validate)

    p_models = sub.add_parser("models", help="list built-in models")
    p_models.set_defaults(func=cmd_models)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, SchemaMismatch, MechanismValidation) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return EXIT_CONFIG
    except Infeasible as exc:
        print(json.dumps({"error": "Infeasible", "message": str(exc)}),
              file=sys.stderr)
        return EXIT_INFEASIBLE
    except SlowManifoldError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
