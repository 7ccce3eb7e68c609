"""Command-line front end.

Two subcommands: ``importance`` runs one configured importance computation
and writes a JSON result document (plus optional flat CSV and SVG chart);
``benchmark`` times methods over a grid of feature counts and writes a
timing CSV. Runs are reproducible: the resolved configuration and master
seed are embedded in every output, and re-running an embedded config
reproduces the per-feature table exactly.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .learners import LEARNERS, LinearModel, make_learner
from .perturbation import CFI, PFI, RFI
from .refit import LOCO, WVIM
from .resampling import make_resampling
from .sage import ConditionalSAGE, MarginalSAGE
from .samplers import SAMPLERS, make_sampler
from .simulate import SIMULATORS, load_csv, sim_peak
from .svg import render_svg

METHODS = ("pfi", "cfi", "rfi", "loco", "wvim", "sage_marginal", "sage_conditional")
CI_METHODS = ("none", "quantile", "raw", "nadeau_bengio", "cpi", "lei")


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# configuration schema: section -> key -> caster
# ---------------------------------------------------------------------------

def _bool(s):
    if isinstance(s, bool):
        return s
    if str(s).lower() in ("1", "true", "yes", "on"):
        return True
    if str(s).lower() in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {s!r}")


def _floats(s):
    return [float(x) for x in str(s).split(",") if x.strip() != ""]


def _names(s):
    return [x.strip() for x in str(s).split(",") if x.strip() != ""]


def _groups(s):
    if isinstance(s, dict):
        return s
    out = {}
    for part in str(s).split(";"):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise ConfigError(f"bad group spec {part!r}; expected name=f1,f2")
        name, feats = part.split("=", 1)
        out[name.strip()] = _names(feats)
    if not out:
        raise ConfigError("empty groups specification")
    return out


SCHEMA = {
    "run": {"seed": int, "threads": int},
    "task": {"sim": str, "csv": str, "target": str, "n": int, "r": float,
             "d": int, "p": int, "coefficients": _floats, "noise_sd": float},
    "learner": {"id": str, "n_trees": int, "mtry": int, "min_node_size": int,
                "max_depth": int, "bootstrap": _bool, "k": int, "lam": float},
    "resampling": {"id": str, "folds": int, "repeats": int, "ratio": float},
    "method": {"id": str, "measure": str, "n_repeats": int, "sampler": str, "groups": _groups,
               "features": _names, "conditioning_set": _names, "direction": str,
               "n_permutations": int, "n_samples": int, "min_permutations": int,
               "early_stopping": _bool, "convergence_ratio": float,
               "background_size": int},
    "inference": {"ci": str, "test": str, "alternative": str, "alpha": float,
                  "p_adjust": str},
    "output": {"out": str, "out_csv": str, "svg": str},
}

DEFAULTS = {
    "run": {"seed": 1, "threads": 1},
    "task": {"sim": "correlated", "target": "y", "n": 5000, "r": 0.8, "d": 5,
             "noise_sd": 0.2},
    "learner": {"id": "linear"},
    "resampling": {"id": "holdout"},
    "method": {"id": "pfi", "measure": "mse", "n_repeats": 5, "n_permutations": 100,
               "n_samples": 100, "min_permutations": 20, "early_stopping": False,
               "convergence_ratio": 0.025, "background_size": 512},
    "inference": {"ci": "none", "test": "t", "alternative": "two.sided",
                  "alpha": 0.05, "p_adjust": "none"},
    "output": {},
}


def read_config_file(path):
    parser = configparser.ConfigParser()
    if not parser.read(path):
        raise ConfigError(f"cannot read config file: {path}")
    out = {}
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        out[section] = {}
        for key, raw in parser.items(section):
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            try:
                out[section][key] = SCHEMA[section][key](raw)
            except ConfigError:
                raise
            except Exception as err:
                raise ConfigError(f"bad value for [{section}] {key}: {raw!r} ({err})") from None
    return out


def merge_config(file_cfg, flag_cfg):
    """Defaults, then file values, then flags."""
    cfg = {s: dict(v) for s, v in DEFAULTS.items()}
    for source in (file_cfg, flag_cfg):
        for section, kv in source.items():
            cfg.setdefault(section, {})
            for k, v in kv.items():
                if v is not None:
                    cfg[section][k] = v
    return cfg


# ---------------------------------------------------------------------------
# building blocks from a resolved config
# ---------------------------------------------------------------------------

def build_task(cfg):
    t = cfg["task"]
    if t.get("csv"):
        return load_csv(t["csv"], target=t.get("target", "y"))
    sim = t.get("sim", "correlated")
    if sim not in SIMULATORS:
        raise ConfigError(f"unknown simulator: {sim!r} (choose from {sorted(SIMULATORS)})")
    seed = cfg["run"]["seed"]
    if sim == "correlated":
        return SIMULATORS[sim](n=t["n"], r=t["r"], noise_sd=t["noise_sd"], random_state=seed)
    if sim == "independent":
        coef = t.get("coefficients")
        if coef is None:
            p = t.get("p")
            if p is None:
                raise ConfigError("independent simulator needs coefficients or p")
            coef = [1.0] * int(p)
        return SIMULATORS[sim](n=t["n"], coefficients=coef, noise_sd=t["noise_sd"],
                               random_state=seed)
    return SIMULATORS[sim](n=t["n"], d=t["d"], random_state=seed)


def build_learner(cfg):
    lc = dict(cfg["learner"])
    lid = lc.pop("id")
    if lid not in LEARNERS:
        raise ConfigError(f"unknown learner: {lid!r} (choose from {sorted(LEARNERS)})")
    if lid == "forest":
        lc.setdefault("n_threads", cfg["run"]["threads"])
    try:
        return make_learner(lid, **lc)
    except ValueError as err:
        raise ConfigError(str(err)) from None


def build_resampling(cfg):
    rc = dict(cfg["resampling"])
    rid = rc.pop("id")
    rc["random_state"] = cfg["run"]["seed"]
    try:
        return make_resampling(rid, **rc)
    except ValueError as err:
        raise ConfigError(str(err)) from None


def build_estimator(cfg, learner, resampling):
    mc = cfg["method"]
    mid = mc["id"]
    if mid not in METHODS:
        raise ConfigError(f"unknown method: {mid!r} (choose from {METHODS})")
    seed = cfg["run"]["seed"]
    threads = cfg["run"]["threads"]
    common = dict(learner=learner, measure=mc.get("measure", "mse"),
                  resampling=resampling, random_state=seed, n_threads=threads)

    def sampler_or_none(default=None):
        sid = mc.get("sampler", default)
        if sid is None:
            return None
        if sid not in SAMPLERS:
            raise ConfigError(f"unknown sampler: {sid!r} (choose from {sorted(SAMPLERS)})")
        return make_sampler(sid)

    if mid == "pfi":
        return PFI(n_repeats=mc["n_repeats"], features=mc.get("features"),
                   groups=mc.get("groups"), **common)
    if mid == "cfi":
        return CFI(sampler=sampler_or_none("conditional_gaussian"),
                   n_repeats=mc["n_repeats"], features=mc.get("features"),
                   groups=mc.get("groups"), **common)
    if mid == "rfi":
        return RFI(sampler=sampler_or_none("conditional_gaussian"),
                   conditioning_set=mc.get("conditioning_set", ()),
                   n_repeats=mc["n_repeats"], features=mc.get("features"),
                   groups=mc.get("groups"), **common)
    if mid == "loco":
        return LOCO(groups=mc.get("groups"), features=mc.get("features"),
                    n_repeats=mc["n_repeats"], **common)
    if mid == "wvim":
        return WVIM(direction=mc.get("direction", "leave-out"),
                    groups=mc.get("groups"), features=mc.get("features"),
                    n_repeats=mc["n_repeats"], **common)
    sage_kw = dict(n_permutations=mc["n_permutations"], n_samples=mc["n_samples"],
                   min_permutations=mc["min_permutations"],
                   early_stopping=mc["early_stopping"],
                   convergence_ratio=mc["convergence_ratio"],
                   background_size=mc["background_size"], **common)
    if mid == "sage_marginal":
        return MarginalSAGE(**sage_kw)
    return ConditionalSAGE(sampler=sampler_or_none("conditional_gaussian"), **sage_kw)


# ---------------------------------------------------------------------------
# output documents
# ---------------------------------------------------------------------------

def _jsonable(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (np.floating, float)):
        return float(v)
    if isinstance(v, (np.integer, int)):
        return int(v)
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def result_document(cfg, table, scores, timing, warnings, extra_meta=None):
    doc = {
        "engine_version": __version__,
        "config": _jsonable(cfg),
        "results": [ _jsonable(dict(row)) for _, row in table.iterrows() ],
        "scores": [ _jsonable(dict(row)) for _, row in scores.records.iterrows() ],
        "warnings": list(warnings),
        "timing": {k: float(v) for k, v in timing.items()},
    }
    if extra_meta:
        doc["meta"] = _jsonable(extra_meta)
    return doc


def write_table_csv(table, path):
    cols = list(table.columns)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for _, row in table.iterrows():
            w.writerow([row["feature"] if c == "feature" else repr(float(row[c]))
                        for c in cols])


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _flag_config(args):
    """Collect explicitly-set flags into config sections."""
    m = {
        "run": {"seed": args.seed, "threads": args.threads},
        "task": {"sim": args.sim, "csv": args.csv, "target": args.target,
                 "n": args.n, "r": args.r, "d": args.d, "p": args.p,
                 "coefficients": _floats(args.coefficients) if args.coefficients else None,
                 "noise_sd": args.noise_sd},
        "learner": {"id": args.learner, "n_trees": args.n_trees,
                    "max_depth": args.max_depth},
        "resampling": {"id": args.resampling, "folds": args.folds,
                       "repeats": args.repeats, "ratio": args.ratio},
        "method": {"id": args.method, "measure": args.measure,
                   "n_repeats": args.n_repeats,
                   "sampler": args.sampler,
                   "groups": _groups(args.groups) if args.groups else None,
                   "features": _names(args.features) if args.features else None,
                   "conditioning_set": _names(args.conditioning_set)
                       if args.conditioning_set is not None else None,
                   "direction": args.direction,
                   "n_permutations": args.n_permutations,
                   "n_samples": args.n_samples,
                   "min_permutations": args.min_permutations,
                   "early_stopping": False if args.no_early_stopping else None},
        "inference": {"ci": args.ci, "test": args.test,
                      "alternative": args.alternative, "alpha": args.alpha,
                      "p_adjust": args.p_adjust},
        "output": {"out": args.out, "out_csv": args.out_csv, "svg": args.svg},
    }
    return {s: {k: v for k, v in kv.items() if v is not None} for s, kv in m.items()}


def _validate_config(cfg):
    if cfg["inference"]["ci"] not in CI_METHODS:
        raise ConfigError(f"unknown ci method: {cfg['inference']['ci']!r} "
                          f"(choose from {CI_METHODS})")
    mc = cfg["method"]
    if mc["n_repeats"] < 1:
        raise ConfigError("n_repeats must be >= 1")
    if mc["n_permutations"] < mc["min_permutations"]:
        raise ConfigError("n_permutations must be >= min_permutations")
    if not 0.0 < cfg["inference"]["alpha"] < 1.0:
        raise ConfigError("alpha must lie strictly between 0 and 1")
    if cfg["run"]["threads"] < 1:
        raise ConfigError("threads must be >= 1")


def cmd_importance(args):
    file_cfg = read_config_file(args.config) if args.config else {}
    cfg = merge_config(file_cfg, _flag_config(args))
    _validate_config(cfg)

    timing = {}
    t0 = time.perf_counter()
    try:
        task = build_task(cfg)
        learner = build_learner(cfg)
        resampling = build_resampling(cfg)
        est = build_estimator(cfg, learner, resampling)
    except ConfigError:
        raise
    except ValueError as err:
        raise ConfigError(str(err)) from None
    timing["setup_s"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    est.fit(task)
    timing["compute_s"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    inf = cfg["inference"]
    table = est.importance(ci_method=None if inf["ci"] == "none" else inf["ci"],
                           alternative=inf["alternative"], alpha=inf["alpha"],
                           test=inf["test"], p_adjust=inf["p_adjust"])
    timing["inference_s"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    if cfg["output"].get("out_csv"):
        write_table_csv(table, cfg["output"]["out_csv"])
    if cfg["output"].get("svg"):
        render_svg(table, cfg["output"]["svg"],
                   title=f"{cfg['method']['id']} importance")
    warnings = list(est.scores_.warnings)
    warnings.extend(table.attrs.get("meta", {}).get("warnings", []))
    timing["output_s"] = time.perf_counter() - t0
    doc = result_document(cfg, table, est.scores_, timing, warnings,
                          extra_meta=est.scores_.meta)
    out = cfg["output"].get("out")
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=1)
            fh.write("\n")
    else:
        json.dump(doc["results"], sys.stdout, indent=1)
        sys.stdout.write("\n")
    return 0


def cmd_benchmark(args):
    methods = _names(args.methods)
    for m in methods:
        if m not in ("pfi", "cfi", "sage_marginal", "sage_conditional"):
            raise ConfigError(f"benchmark supports pfi, cfi, sage_marginal, "
                              f"sage_conditional; got {m!r}")
    p_grid = [int(x) for x in _names(args.p_grid)]
    if not p_grid or any(p < 1 for p in p_grid):
        raise ConfigError(f"invalid p grid: {args.p_grid!r}")
    if args.replications < 1:
        raise ConfigError("replications must be >= 1")
    rows = []
    for method in methods:
        for p in p_grid:
            for rep in range(1, args.replications + 1):
                task = sim_peak(n=args.n, d=p, random_state=(args.seed, p, rep))
                learner = LinearModel()
                resampling = make_resampling("holdout", random_state=args.seed)
                if method == "pfi":
                    est = PFI(learner=learner, resampling=resampling,
                              n_repeats=args.n_repeats, random_state=args.seed,
                              n_threads=args.threads)
                elif method == "cfi":
                    est = CFI(learner=learner, resampling=resampling,
                              n_repeats=args.n_repeats, random_state=args.seed,
                              n_threads=args.threads)
                elif method == "sage_marginal":
                    est = MarginalSAGE(learner=learner, resampling=resampling,
                                       n_permutations=args.n_permutations,
                                       n_samples=args.n_samples,
                                       min_permutations=min(args.min_permutations,
                                                            args.n_permutations),
                                       early_stopping=False,
                                       random_state=args.seed, n_threads=args.threads)
                else:
                    est = ConditionalSAGE(learner=learner, resampling=resampling,
                                          n_permutations=args.n_permutations,
                                          n_samples=args.n_samples,
                                          min_permutations=min(args.min_permutations,
                                                               args.n_permutations),
                                          early_stopping=False,
                                          random_state=args.seed,
                                          n_threads=args.threads)
                t0 = time.perf_counter()
                est.fit(task)
                seconds = time.perf_counter() - t0
                coalitions = est.scores_.meta.get("coalitions_evaluated", "")
                rows.append([method, p, str(rep), repr(seconds), str(coalitions)])
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "p", "replication", "seconds", "coalitions"])
        w.writerows(rows)
        for method in methods:
            for p in p_grid:
                secs = np.array([float(r[3]) for r in rows
                                 if r[0] == method and r[1] == p])
                for label, q in (("q25", 0.25), ("median", 0.5), ("q75", 0.75)):
                    w.writerow([method, p, label, repr(float(np.quantile(secs, q))), ""])
    return 0


# ---------------------------------------------------------------------------
# argument parsing and entry point
# ---------------------------------------------------------------------------

def _env_threads():
    raw = os.environ.get("FI_ENGINE_THREADS", "")
    try:
        return int(raw) if raw else None
    except ValueError:
        return None


def build_parser():
    parser = argparse.ArgumentParser(prog="featimp",
                                     description="loss-based feature importance engine")
    sub = parser.add_subparsers(dest="command", required=True)

    pi = sub.add_parser("importance", help="run one importance computation")
    pi.add_argument("--config", help="INI config file; flags override file values")
    pi.add_argument("--sim", choices=sorted(SIMULATORS))
    pi.add_argument("--csv", help="CSV dataset path")
    pi.add_argument("--target", help="target column for --csv")
    pi.add_argument("--n", type=int)
    pi.add_argument("--r", type=float)
    pi.add_argument("--d", type=int)
    pi.add_argument("--p", type=int)
    pi.add_argument("--coefficients")
    pi.add_argument("--noise-sd", dest="noise_sd", type=float)
    pi.add_argument("--learner", choices=sorted(LEARNERS))
    pi.add_argument("--n-trees", dest="n_trees", type=int)
    pi.add_argument("--max-depth", dest="max_depth", type=int)
    pi.add_argument("--measure", choices=["mse", "mae", "rmse", "rsq"])
    pi.add_argument("--method", choices=METHODS)
    pi.add_argument("--sampler", choices=sorted(SAMPLERS))
    pi.add_argument("--resampling", choices=["holdout", "cv", "subsampling", "bootstrap"])
    pi.add_argument("--folds", type=int)
    pi.add_argument("--repeats", type=int)
    pi.add_argument("--ratio", type=float)
    pi.add_argument("--n-repeats", dest="n_repeats", type=int)
    pi.add_argument("--groups", help="name=f1,f2;name2=f3,...")
    pi.add_argument("--features", help="comma-separated features of interest")
    pi.add_argument("--conditioning-set", dest="conditioning_set",
                    help="comma-separated conditioning features (rfi)")
    pi.add_argument("--direction", choices=["leave-out", "leave-in"])
    pi.add_argument("--n-permutations", dest="n_permutations", type=int)
    pi.add_argument("--n-samples", dest="n_samples", type=int)
    pi.add_argument("--min-permutations", dest="min_permutations", type=int)
    pi.add_argument("--no-early-stopping", dest="no_early_stopping",
                    action="store_true")
    pi.add_argument("--ci", choices=CI_METHODS)
    pi.add_argument("--test", choices=["t", "wilcox"])
    pi.add_argument("--alternative", choices=["two.sided", "greater", "less"])
    pi.add_argument("--alpha", type=float)
    pi.add_argument("--p-adjust", dest="p_adjust",
                    choices=["none", "bonferroni", "holm", "BH", "BY"])
    pi.add_argument("--seed", type=int)
    pi.add_argument("--threads", type=int, default=_env_threads())
    pi.add_argument("--out", help="result JSON path")
    pi.add_argument("--out-csv", dest="out_csv", help="per-feature table CSV path")
    pi.add_argument("--svg", help="bar-chart SVG path")
    pi.set_defaults(func=cmd_importance)

    pb = sub.add_parser("benchmark", help="runtime grid over feature counts")
    pb.add_argument("--methods", default="pfi,cfi,sage_marginal,sage_conditional")
    pb.add_argument("--p-grid", dest="p_grid", default="5,10,20")
    pb.add_argument("--n", type=int, default=5000)
    pb.add_argument("--replications", type=int, default=5)
    pb.add_argument("--n-repeats", dest="n_repeats", type=int, default=50)
    pb.add_argument("--n-permutations", dest="n_permutations", type=int, default=10)
    pb.add_argument("--n-samples", dest="n_samples", type=int, default=10)
    pb.add_argument("--min-permutations", dest="min_permutations", type=int, default=5)
    pb.add_argument("--seed", type=int, default=1)
    pb.add_argument("--threads", type=int, default=_env_threads() or 1)
    pb.add_argument("--out", required=True, help="timing CSV path")
    pb.set_defaults(func=cmd_benchmark)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        json.dump({"error": str(err), "kind": "config"}, sys.stderr)
        sys.stderr.write("\n")
        return 2
    except (ValueError, OSError) as err:
        json.dump({"error": str(err), "kind": "runtime"}, sys.stderr)
        sys.stderr.write("\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
