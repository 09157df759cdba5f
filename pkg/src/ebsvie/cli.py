"""Command-line front end: config ingestion, orchestration, manifests.

Configs are strict JSON; unknown keys are fatal so a typo in a tolerance or
seed cannot silently change a run.  Every command writes a manifest with the
config hash and a content hash per output file.  Exit codes: 0 success,
1 usage or config error, 2 solver failure, 3 invariant failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .catalog import catalog_names, get_instance
from .errors import (ConfigError, EbsvieError, NonContractionError,
                     SimulationError, SingularityError, SolverError)
from .malliavin import pathwise_z, solve_variational_ebsvie
from .model import (ProblemSpec, make_grid, spec_from_dict, spec_to_dict,
                    validate_spec, TriangularIndex)
from .sde import simulate_paths, save_ensemble, write_path_summary
from .solver_mc import (BasisSpec, field_to_csv, glue_windows,
                        solve_ebsvie_regression)
from .solver_pde import SpatialMesh, save_pde_field, solve_nonlocal_pde
from .validate import (adaptedness_probe, cross_validate,
                       deterministic_oracle)

OUTPUT_DIR_ENV = "EBSVIE_OUTPUT_DIR"

_SCHEMA = {
    "problem": None,       # spec document or catalog name
    "grid": {"N"},
    "mesh": {"x_min", "x_max", "J"},
    "mc": {"n_paths", "seed", "basis_degree"},
    "pde": {"theta_weight"},
    "outputs": None,
    "simulate": {"start_t", "start_x"},
    "solve-mc": {"start_t", "start_x", "windows", "tol", "max_iter"},
    "variational": {"start_t", "start_x"},
    "cross-validate": {"points"},
    "oracle": {"N_oracle"},
    "check": set(),
    "bench": {"N_list"},
}


def _check_keys(cfg: dict):
    for key, val in cfg.items():
        if key not in _SCHEMA:
            raise ConfigError(f"unknown config key: {key!r}")
        allowed = _SCHEMA[key]
        if allowed is not None and isinstance(val, dict):
            for sub in val:
                if sub not in allowed:
                    raise ConfigError(f"unknown config key: {key}.{sub}")


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"config parse error at line {exc.lineno}, column {exc.colno}: "
            f"{exc.msg}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    _check_keys(cfg)
    return cfg


def _resolve_spec(cfg) -> ProblemSpec:
    prob = cfg.get("problem")
    if prob is None:
        raise ConfigError("config requires a 'problem' entry")
    if isinstance(prob, str):
        if prob not in catalog_names():
            raise ConfigError(f"unknown catalog instance: {prob!r}")
        return get_instance(prob)
    if isinstance(prob, dict):
        return spec_from_dict(prob)
    raise ConfigError("'problem' must be a name or a problem document")


def _grid(cfg, spec):
    N = int(cfg.get("grid", {}).get("N", 50))
    return make_grid(spec.horizon, N)


def _mesh(cfg):
    m = cfg.get("mesh", {})
    return SpatialMesh(float(m.get("x_min", -6.0)), float(m.get("x_max", 6.0)),
                       int(m.get("J", 200)))


def _mc(cfg):
    m = cfg.get("mc", {})
    return (int(m.get("n_paths", 10000)), int(m.get("seed", 0)),
            BasisSpec(int(m.get("basis_degree", 4))))


def _start(cfg, command, spec):
    blk = cfg.get(command, {})
    t = float(blk.get("start_t", 0.0))
    x = np.asarray(blk.get("start_x", [0.0] * spec.dim_state), dtype=float)
    return t, x


class _Manifest:
    def __init__(self, outdir, cfg, command):
        self.outdir = outdir
        self.cfg = cfg
        self.command = command
        self.files = {}
        self.t0 = time.time()

    def path(self, name):
        return os.path.join(self.outdir, name)

    def add(self, name):
        p = self.path(name)
        h = hashlib.sha256()
        with open(p, "rb") as fh:
            for chunk in iter(lambda: fh.read(65536), b""):
                h.update(chunk)
        self.files[name] = h.hexdigest()

    def write(self, extra=None):
        cfg_hash = hashlib.sha256(
            json.dumps(self.cfg, sort_keys=True).encode()).hexdigest()
        doc = {
            "command": self.command,
            "config_hash": cfg_hash,
            "version": __version__,
            "numpy_version": np.__version__,
            "wall_time_s": round(time.time() - self.t0, 3),
            "files": self.files,
        }
        if extra:
            doc.update(extra)
        with open(self.path("run_manifest.json"), "w") as fh:
            json.dump(doc, fh, indent=2)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _cmd_simulate(cfg, man):
    spec = _resolve_spec(cfg)
    grid = _grid(cfg, spec)
    n_paths, seed, _ = _mc(cfg)
    start = _start(cfg, "simulate", spec)
    ens = simulate_paths(spec, grid, start, n_paths, seed)
    save_ensemble(ens, man.path("ensemble.npz"))
    write_path_summary(ens, man.path("paths_summary.csv"))
    man.add("ensemble.npz")
    man.add("paths_summary.csv")
    man.write({"seed": seed})
    return 0


def _cmd_solve_mc(cfg, man):
    spec = _resolve_spec(cfg)
    grid = _grid(cfg, spec)
    n_paths, seed, basis = _mc(cfg)
    start = _start(cfg, "solve-mc", spec)
    blk = cfg.get("solve-mc", {})
    ens = simulate_paths(spec, grid, start, n_paths, seed)
    windows = int(blk.get("windows", 1))
    if windows > 1:
        fld = glue_windows(spec, ens, windows,
                           float(blk.get("tol", 1e-10)),
                           int(blk.get("max_iter", 50)), basis)
    else:
        fld = solve_ebsvie_regression(spec, ens, basis)
    field_to_csv(fld, man.path("field.csv"))
    man.add("field.csv")
    man.write({"seed": seed, "n_paths": n_paths, "N": grid.n_steps,
               "basis_degree": basis.degree})
    return 0


def _cmd_solve_pde(cfg, man):
    spec = _resolve_spec(cfg)
    grid = _grid(cfg, spec)
    mesh = _mesh(cfg)
    w = float(cfg.get("pde", {}).get("theta_weight", 0.5))
    fld = solve_nonlocal_pde(spec, grid, mesh, w)
    save_pde_field(fld, man.path("pde_field.npz"))
    man.add("pde_field.npz")
    man.write({"N": grid.n_steps, "J": mesh.n_cells})
    return 0


def _cmd_variational(cfg, man):
    spec = _resolve_spec(cfg)
    grid = _grid(cfg, spec)
    n_paths, seed, basis = _mc(cfg)
    start = _start(cfg, "variational", spec)
    ens = simulate_paths(spec, grid, start, n_paths, seed)
    base = solve_ebsvie_regression(spec, ens, basis)
    var = solve_variational_ebsvie(spec, ens, base, basis)
    pw = pathwise_z(var, ens, spec)
    with open(man.path("z_compare.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "k", "z_regression_mean", "z_pathwise_mean",
                    "rms_difference"])
        N = grid.n_steps
        for k in range(N):
            labels = [k] if base.t_shared else range(k + 1)
            for i in labels:
                zr = base.z_path(i, k)[:, 0, 0]
                zp = pw.z_path(i, k)[:, 0, 0]
                w.writerow([i, k, f"{zr.mean():.10g}", f"{zp.mean():.10g}",
                            f"{float(np.sqrt(np.mean((zr - zp) ** 2))):.6g}"])
    man.add("z_compare.csv")
    man.write({"seed": seed})
    return 0


def _cmd_cross_validate(cfg, man):
    spec = _resolve_spec(cfg)
    grid = _grid(cfg, spec)
    mesh = _mesh(cfg)
    n_paths, seed, basis = _mc(cfg)
    pts = cfg.get("cross-validate", {}).get("points")
    if pts is not None:
        pts = [tuple(p) for p in pts]
    rep = cross_validate(spec, grid, mesh, pts,
                         mc_params={"n_paths": n_paths, "seed": seed,
                                    "basis_degree": basis.degree},
                         pde_params=cfg.get("pde", {}))
    rep.to_json(man.path("crossval.json"))
    rep.to_csv(man.path("crossval.csv"))
    man.add("crossval.json")
    man.add("crossval.csv")
    man.write({"n_pass": rep.n_pass, "n_points": rep.n_points})
    return 0


def _cmd_oracle(cfg, man):
    spec = _resolve_spec(cfg)
    N_oracle = int(cfg.get("oracle", {}).get("N_oracle", 2000))
    fld = deterministic_oracle(spec, N_oracle)
    stride = max(1, N_oracle // 100)
    with open(man.path("oracle.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "s"] + [f"y{j}" for j in range(fld.dim_value)])
        for i in range(0, N_oracle + 1, stride):
            for k in range(i, N_oracle + 1, stride):
                w.writerow([f"{fld.grid.nodes[i]:.10g}",
                            f"{fld.grid.nodes[k]:.10g}"]
                           + [f"{v:.12g}" for v in fld.value(i, k)])
    man.add("oracle.csv")
    man.write({"N_oracle": N_oracle})
    return 0


def _cmd_check(cfg, man):
    """Exact-invariant suite over the whole catalog."""
    results = []
    failed = False

    def record(name, ok, detail=""):
        nonlocal failed
        results.append({"check": name, "passed": bool(ok), "detail": detail})
        if not ok:
            failed = True

    for name in catalog_names():
        spec = get_instance(name)
        rep = validate_spec(spec, n_probes=100, seed=0)
        record(f"validate:{name}", rep.passed, rep.summary() if not rep.passed else "")
        doc = spec_to_dict(spec)
        rt = spec_from_dict(doc)
        record(f"roundtrip:{name}", spec_to_dict(rt) == doc)

    # exact constants propagate
    spec = get_instance("constant")
    grid = make_grid(spec.horizon, 16)
    ens = simulate_paths(spec, grid, (0.0, np.zeros(1)), 500, 1)
    fld = solve_ebsvie_regression(spec, ens)
    ok = all(np.array_equal(fld.y_path(k, k), np.ones((500, 1)))
             for k in range(17))
    okz = all(np.array_equal(fld.z_path(k, k), np.zeros((500, 1, 1)))
              for k in range(16))
    record("constant_exact", ok and okz)

    # frozen region exact on every instance
    for name in catalog_names():
        spec = get_instance(name)
        grid = make_grid(spec.horizon, 20)
        ens = simulate_paths(spec, grid, (0.5 * spec.horizon, np.zeros(1)),
                             400, 3)
        fld = solve_ebsvie_regression(spec, ens)
        probe = adaptedness_probe(fld, ens.start_t)
        record(f"frozen:{name}", probe["passed"],
               "" if probe["passed"] else str(probe["failures"][:3]))

    # triangular index bookkeeping
    idx = TriangularIndex(12)
    record("triangle_count", len(list(idx)) == len(idx) == 13 * 14 // 2)

    with open(man.path("check_report.json"), "w") as fh:
        json.dump({"passed": not failed, "results": results}, fh, indent=2)
    man.add("check_report.json")
    man.write({"passed": not failed})
    return 3 if failed else 0


def _cmd_bench(cfg, man):
    """Convergence-order study against the deterministic oracle."""
    spec = _resolve_spec(cfg) if cfg.get("problem") else get_instance(
        "deterministic_linear")
    if not spec.x_independent:
        raise ConfigError("bench requires an x-independent instance")
    N_list = [int(n) for n in cfg.get("bench", {}).get("N_list", [25, 50, 100])]
    oracle = deterministic_oracle(spec, 4000)
    rows = []
    prev_err = None
    for N in N_list:
        grid = make_grid(spec.horizon, N)
        ens = simulate_paths(spec, grid, (0.0, np.zeros(spec.dim_state)),
                             64, 0)
        fld = solve_ebsvie_regression(spec, ens)
        stride = 4000 // N
        err = 0.0
        for i in range(N + 1):
            for k in range(i, N + 1):
                ref = oracle.value(i * stride, k * stride)
                err = max(err, float(np.abs(fld.mean[i, k] - ref).max()))
        order = (np.log2(prev_err / err) if prev_err else float("nan"))
        rows.append((N, err, order))
        prev_err = err
    with open(man.path("convergence.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["N", "max_err", "observed_order"])
        for N, err, order in rows:
            w.writerow([N, f"{err:.6g}", f"{order:.4g}"])
    man.add("convergence.csv")
    man.write()
    return 0


def emit_plotdata(artifact, kind: str, path, **opts) -> None:
    """Tidy CSV for downstream plotting; one observation per row."""
    if kind == "diagonal":
        nodes = artifact.grid.nodes
        diag = np.nanmean(artifact.diagonal_paths, axis=1)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["s"] + [f"y{j}" for j in range(diag.shape[1])])
            for k in range(len(nodes)):
                if np.all(np.isfinite(diag[k])):
                    w.writerow([f"{nodes[k]:.10g}"]
                               + [f"{v:.12g}" for v in diag[k]])
    elif kind == "slice":
        i = int(opts.get("i", 0))
        k = int(opts.get("k", artifact.grid.n_steps))
        lay = artifact.layer(i, k)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x"] + [f"theta{j}" for j in range(lay.shape[1])])
            for j, x in enumerate(artifact.mesh.nodes):
                w.writerow([f"{x:.10g}"] + [f"{v:.12g}" for v in lay[j]])
    elif kind == "convergence":
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["N", "err"])
            for N, err in zip(artifact["N"], artifact["err"]):
                w.writerow([N, f"{err:.6g}"])
    elif kind == "z-compare":
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["i", "k", "z_regression", "z_pathwise", "z_pde"])
            for row in artifact:
                w.writerow(list(row))
    else:
        raise ValueError(f"unknown plot kind: {kind!r}")


_COMMANDS = {
    "simulate": _cmd_simulate,
    "solve-mc": _cmd_solve_mc,
    "solve-pde": _cmd_solve_pde,
    "variational": _cmd_variational,
    "cross-validate": _cmd_cross_validate,
    "oracle": _cmd_oracle,
    "check": _cmd_check,
    "bench": _cmd_bench,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="ebsvie",
        description="Numerical laboratory for extended backward stochastic "
                    "Volterra integral equations")
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", required=False,
                        help="JSON run configuration")
    parser.add_argument("--output-dir", default=None,
                        help=f"output directory (default ${OUTPUT_DIR_ENV} or cwd)")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker cap; 1 is the reproducibility reference")
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0

    try:
        cfg = load_config(args.config) if args.config else {}
        outdir = (args.output_dir or cfg.get("outputs")
                  or os.environ.get(OUTPUT_DIR_ENV) or ".")
        os.makedirs(outdir, exist_ok=True)
        man = _Manifest(outdir, cfg, args.command)
        return _COMMANDS[args.command](cfg, man)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (SolverError, SimulationError, SingularityError,
            NonContractionError) as exc:
        print(f"solver error [{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 2
    except EbsvieError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
