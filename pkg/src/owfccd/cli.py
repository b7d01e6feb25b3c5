"""Command-line pipeline: ingest -> scengen -> solve -> freqcheck -> report.

Each stage reads the previous stage's artifact from the output directory
and writes its own, tagged with a schema version. Exit codes: 0 success,
1 user or data error, 2 internal error.
"""

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import __version__
from .config import (CASES, CONFIG_DIR_ENV, Config, ConfigError, RunManifest, default_config_path,
                     load_config, load_run_manifest)
from .core import DomainError
from .freqcheck import (assets_from_solution, simulate_trip, verify_reserve_delivery,
                        write_trajectory_csv)
from .ingest import IngestError, complete_days, history_array, load_manifest, load_poi_year
from .model import build_program, fix_case
from .report import ReportError, reconcile, write_design_report, write_revenue_report
from .scengen import (build_tree, clean_pool, fit_weibull, generate_pool, load_tree, save_tree,
                      wind_to_power_tree, WIND)
from .solver.slp import load_solution, save_solution, solve_slp
from .synthetic import write_synthetic_dataset
from .windpower import default_curve, upscale

logger = logging.getLogger("owfccd")

HISTORY_SCHEMA = "owfccd.history/1"
FREQ_SCHEMA = "owfccd.freqcheck/1"
USER_ERRORS = (ConfigError, IngestError, DomainError, ReportError, FileNotFoundError)


class ArtifactError(ValueError):
    """Missing or incompatible upstream artifact."""


# run context ----------------------------------------------------------------

class Run:
    def __init__(self, manifest, config):
        self.manifest = manifest
        self.config = config
        self.out = manifest.output_dir
        os.makedirs(self.out, exist_ok=True)

    def path(self, name):
        return os.path.join(self.out, name)

    def need(self, name, stage):
        p = self.path(name)
        if not os.path.exists(p):
            raise ArtifactError(f"missing artifact {p}; run '{stage}' first")
        return p


def _resolve(args):
    manifest = load_run_manifest(args.manifest) if args.manifest else RunManifest()
    overrides = {}
    if args.config:
        overrides["config"] = args.config
    if getattr(args, "data", None):
        overrides["data"] = args.data
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.case:
        overrides["cases"] = tuple(args.case)
    if args.out:
        overrides["output_dir"] = args.out
    manifest = RunManifest(**{**manifest.__dict__, **overrides})
    if manifest.config is None:
        manifest = RunManifest(**{**manifest.__dict__, "config": default_config_path()})
    manifest.check_paths()
    config = load_config(manifest.config) if manifest.config else Config()
    return Run(manifest, config)


def _write_json(path, doc):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _read_json(path, schema):
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("schema") != schema:
        raise ArtifactError(f"{path}: expected schema {schema}, found {doc.get('schema')!r}")
    return doc


# stages ---------------------------------------------------------------------

def cmd_ingest(run):
    m = run.manifest
    if m.data is None:
        raise ConfigError("ingest needs a data manifest (--data or 'data' in the run manifest)")
    table = load_manifest(m.data)
    poi = run.config.poi
    year = run.config.year
    if year is None:
        years = sorted({y for (p, _, y) in table if p == poi})
        if len(years) != 1:
            raise ConfigError(f"data manifest has years {years} for {poi}; set 'year' in the config")
        year = years[0]
    try:
        prices, wind = load_poi_year(table, poi, year)
    except KeyError as exc:
        raise IngestError(f"data manifest has no entry for {exc.args[0]}") from None
    days = complete_days(prices, wind, run.config.scengen.utc_offset_hours)
    if len(days) < 2:
        raise IngestError(f"only {len(days)} complete days for {poi} {year}")
    hist = history_array(days)
    path = run.path("history.json")
    _write_json(path, {"schema": HISTORY_SCHEMA, "poi": poi, "year": int(year),
                       "dates": [str(d.date.date()) for d in days],
                       "shape": list(hist.shape), "data": hist.ravel().tolist()})
    logger.info("ingested %d days for %s %s", len(days), poi, year)
    return [path]


def cmd_scengen(run):
    doc = _read_json(run.need("history.json", "ingest"), HISTORY_SCHEMA)
    hist = np.array(doc["data"], dtype=float).reshape(doc["shape"])
    s = run.config.scengen
    pool = generate_pool(hist, s.pool_size, seed=run.manifest.seed, markovian=s.markovian,
                         batch=s.batch)
    pool, floored = clean_pool(pool)
    tree = build_tree(pool, s.shape, seed=run.manifest.seed)
    fit = fit_weibull(hist[:, :, WIND].ravel())
    curve = upscale(default_curve(), run.config.farm.rated_power_mw)
    tree = wind_to_power_tree(tree, curve)
    path = run.path("tree.json")
    save_tree(tree, path)
    rpath = run.path("scengen_report.json")
    _write_json(rpath, {"schema": "owfccd.scengen_report/1", "seed": run.manifest.seed,
                        "pool_size": s.pool_size, "shape": list(s.shape),
                        "floored_reserve_prices": floored,
                        "weibull": {"shape": fit.shape, "scale": fit.scale,
                                    "ks_statistic": fit.ks_statistic, "ks_pvalue": fit.ks_pvalue,
                                    "n": fit.n}})
    return [path, rpath]


def _program(run, case):
    try:
        tree = load_tree(run.need("tree.json", "scengen"))
    except (KeyError, json.JSONDecodeError) as exc:
        raise ArtifactError(f"unreadable tree artifact: {exc}") from None
    return fix_case(build_program(tree, **run.config.model_kwargs()), case)


def cmd_solve(run):
    paths, failed = [], []
    for case in run.manifest.cases:
        program = _program(run, case)
        opts = run.config.solver
        sol = solve_slp(program, opts.__class__(**{**opts.__dict__, "seed": run.manifest.seed}))
        path = run.path(f"solution_{case}.json")
        save_solution(sol, path)
        paths.append(path)
        logger.info("%s: %s after %d iterations, sz_e=%.3f MW sz_c=%.3f MW", case, sol.status,
                    sol.iterations, sol.sz_e, sol.sz_c)
        if not sol.success:
            failed.append(f"{case} ({sol.status})")
    if failed:
        raise DomainError(f"solver did not succeed for {', '.join(failed)}")
    return paths


def _load(run, case):
    program = _program(run, case)
    sol = load_solution(run.need(f"solution_{case}.json", "solve"), program)
    if len(sol.x) != program.n_vars:
        raise ArtifactError(f"solution_{case}.json does not match the current tree/config")
    return sol


def cmd_freqcheck(run):
    f, grid = run.config.freq, run.config.freq_grid
    paths = []
    for case in run.manifest.cases:
        sol = _load(run, case)
        probs = [prob for _, _, prob, _ in sol.program.tree.leaves()]
        leaf = int(np.argmax(probs)) if f.leaf is None else f.leaf
        reserve = sol.schedule("rWU")[leaf] + sol.schedule("rBU")[leaf]
        quarter = int(np.argmax(reserve)) if f.quarter is None else f.quarter
        assets = assets_from_solution(sol, quarter, leaf)
        traj = simulate_trip(grid, f.trip_mw, assets, f.horizon_s, f.dt_s)
        bare = simulate_trip(grid, f.trip_mw, [(0.0, 0.0)], f.horizon_s, f.dt_s)
        check = verify_reserve_delivery(sol, quarter, traj, leaf)
        csv_path = run.path(f"trajectory_{case}.csv")
        write_trajectory_csv(traj, csv_path)
        path = run.path(f"freqcheck_{case}.json")
        _write_json(path, {"schema": FREQ_SCHEMA, "case": case, "leaf": leaf, "quarter": quarter,
                           "trip_mw": f.trip_mw, "status": traj.status,
                           "nadir_hz": traj.nadir_hz, "nadir_hz_without_droop": bare.nadir_hz,
                           "steady_state_pu": traj.steady_state_pu, "delivery": check})
        paths += [path, csv_path]
    return paths


def cmd_report(run):
    sols = [_load(run, case) for case in run.manifest.cases]
    write_design_report(sols, run.out)
    paths = [run.path(n) for n in ("design_battery.csv", "design_cable.csv", "design_raw.json")]
    for sol in sols:
        gap = reconcile(sol)
        if gap > 1e-6:
            raise ReportError(f"{sol.case}: revenue does not reconcile with objective ({gap:.2e})")
        write_revenue_report(sol, run.out)
        paths.append(run.path(f"revenue_{sol.case}.csv"))
    return paths


def cmd_synth(args):
    path = write_synthetic_dataset(args.out or "data", poi=args.poi, year=args.year,
                                   n_days=args.days, seed=args.seed or 0)
    return [path]


COMMANDS = {"ingest": cmd_ingest, "scengen": cmd_scengen, "solve": cmd_solve,
            "freqcheck": cmd_freqcheck, "report": cmd_report}


# argument parsing -------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # usage mistakes are user errors, not internal ones
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser():
    p = _Parser(
        prog="owfccd", description="Offshore wind farm, storage and cable co-design pipeline.",
        epilog=f"Default config: ${CONFIG_DIR_ENV}/config.json when set.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name in list(COMMANDS) + ["all"]:
        sp = sub.add_parser(name, help=f"run the {name} stage" if name != "all"
                            else "run every stage in order")
        sp.add_argument("--manifest", help="run manifest JSON")
        sp.add_argument("--config", help="config JSON (overrides the manifest)")
        sp.add_argument("--data", help="data manifest JSON (ingest)")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--case", action="append", choices=CASES,
                        help="case to run; repeat for several (default: all)")
        sp.add_argument("--out", help="output directory")
    sp = sub.add_parser("synth", help="write a synthetic data set and its manifest")
    sp.add_argument("--out", help="directory for CSVs (default ./data)")
    sp.add_argument("--days", type=int, default=60)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--poi", default="WCASCADE")
    sp.add_argument("--year", type=int, default=2022)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        if args.command == "synth":
            written = cmd_synth(args)
        else:
            run = _resolve(args)
            stages = list(COMMANDS) if args.command == "all" else [args.command]
            written = []
            for stage in stages:
                written += COMMANDS[stage](run)
    except USER_ERRORS + (ArtifactError,) as exc:
        print(f"owfccd: error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:        # noqa: BLE001
        logger.debug("internal error", exc_info=True)
        print(f"owfccd: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
