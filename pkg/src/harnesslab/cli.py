"""Experiment runner.

``harnesslab --config CONFIG.json [--seed N] [--out DIR] [--sequential]``

The config ``kind`` selects the suite.  ``report.json`` is always written to
``--out``; plot-ready CSVs are written as ``<kind>_<label>.csv``.

Exit status: 0 every suite passed, 1 some suite failed, 2 configuration
error, 3 numerical error (the failing operation is named on stderr).
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import math
import os
import sys
from importlib import resources

import jsonschema
import numpy as np

from . import bridges, density, harnesses, kernels, pfm
from .errors import ConfigError, HarnessLabError, NotNested, NumericalError, PinNotOnGrid, SpecError
from .levy_models import (TimeGrid, brownian, center, is_centered, is_standard_brownian, mean_rate,
                          parallel_workers, sample_paths, spec_from_dict, variance_rate)
from .mcstats import (OrthogonalityReport, ReportSet, as_seed, familywise_threshold, mean_and_se,
                      variance_and_se, z_score)

KINDS = ("simulate", "harness-check", "bridge-check", "pfm-check", "identity-check")
EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3
CI_Z = 1.959963984540054

DEFAULTS = {
    "common": {"label": "default", "seed": 0, "reduction": "sequential"},
    "simulate": {"n_paths": 100_000, "horizon": 1.0, "steps": 64, "start": 0.0, "csv_paths": 0},
    "harness-check": {"n_paths": 200_000, "triples": [list(t) for t in harnesses.DEFAULT_TRIPLES],
                      "quads": [], "horizon_factor": 2.0, "planted_bias": 0.0, "alpha": 0.01,
                      "binned_check": False},
    "bridge-check": {"n_paths": 100_000, "density": "auto", "sde_steps": 4096},
    "pfm-check": {"n_paths": 200_000, "C": 1.0, "exp_variant": "derived", "alpha": 0.01},
    "identity-check": {"method": "auto", "rel_tol": 5e-3},
}


def load_schema():
    return json.loads(resources.files("harnesslab").joinpath("config.schema.json").read_text())


# ------------------------------------------------------------- validation

def _field(path):
    out = ""
    for p in path:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out or "config"


def _schema_check(cfg, kind, schema, prefix=()):
    sub = dict(schema["$defs"][kind])
    sub["$defs"] = schema["$defs"]
    if kind == "all":
        sub["properties"] = dict(sub["properties"])
        sub["properties"]["suites"] = {"type": "array", "minItems": 1, "items": {"type": "object"}}
    cls = jsonschema.validators.validator_for(schema)
    errors = sorted(cls(sub).iter_errors(cfg), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        e = errors[0]
        path = list(prefix) + list(e.absolute_path)
        if e.validator == "additionalProperties":
            extra = sorted(set(e.instance) - set(e.schema.get("properties", {})))
            raise ConfigError("unknown field", _field(path + extra[:1]))
        raise ConfigError(e.message, _field(path))


def validate(cfg, schema=None):
    """Schema validation; raises :class:`ConfigError` naming the offending field."""
    schema = schema or load_schema()
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object", "config")
    kind = cfg.get("kind")
    if kind not in KINDS + ("all",):
        raise ConfigError(f"unknown kind {kind!r}; expected one of {KINDS + ('all',)}", "kind")
    _schema_check(cfg, kind, schema)
    if kind == "all":
        for i, sub in enumerate(cfg["suites"]):
            k = sub.get("kind")
            if k not in KINDS:
                raise ConfigError(f"suite kind must be one of {KINDS}", f"suites[{i}].kind")
            _schema_check(sub, k, schema, ("suites", i))


def normalize(cfg, seed=None, sequential=False):
    """Fill defaults and apply overrides; the result reproduces itself."""
    cfg = copy.deepcopy(cfg)
    out = dict(DEFAULTS["common"])
    if cfg["kind"] != "all":
        out.update(DEFAULTS[cfg["kind"]])
    out.update(cfg)
    if seed is not None:
        out["seed"] = int(seed)
    if sequential:
        out["reduction"] = "sequential"
    if out["kind"] == "all":
        subs = []
        for i, sub in enumerate(out["suites"]):
            s = {k: out[k] for k in ("seed", "reduction", "n_paths", "workers") if k in out}
            s["label"] = f"suite{i}"
            s.update(sub)
            if seed is not None:
                s["seed"] = int(seed)
            subs.append(normalize(s, sequential=sequential))
        out["suites"] = subs
    return out


def _spec(d, field="spec"):
    if d is None:
        raise ConfigError("a process spec is required", field)
    d = dict(d)
    centered = d.pop("centered", False)
    try:
        spec = spec_from_dict(d)
    except SpecError as e:
        raise ConfigError(str(e), field) from None
    return center(spec) if centered else spec


def _fn(d, field):
    try:
        return pfm.DeterministicFn.from_dict(d)
    except SpecError as e:
        raise ConfigError(str(e), field) from None


# ------------------------------------------------------------------ suites

def _report(label, estimate, stderr, threshold):
    z = z_score(estimate, stderr)
    return OrthogonalityReport(label, float(estimate), float(stderr), z, 0, float(threshold),
                               abs(z) <= threshold)


def _result(cfg, reports, plots=(), extra=None):
    rs = reports if isinstance(reports, ReportSet) else ReportSet(list(reports))
    out = {"kind": cfg["kind"], "label": cfg["label"], "pass": rs.passed, "summary": rs.summary(),
           "reports": [r.to_dict() for r in rs.reports], "plots": list(plots)}
    if extra:
        out.update(extra)
    return out


def _plot(cfg, columns, rows, suffix=""):
    name = f"{cfg['kind']}_{cfg['label']}{suffix}"
    return {"name": name, "columns": list(columns), "rows": [[float(v) for v in r] for r in rows]}


def prepare_simulate(cfg):
    spec = _spec(cfg.get("spec"))
    grid = TimeGrid(horizon=cfg["horizon"], steps=cfg["steps"])

    def run():
        seed = as_seed(cfg["seed"])
        v = sample_paths(spec, grid, cfg["start"], seed, cfg["n_paths"])
        H = cfg["horizon"]
        m, sm = mean_and_se(v[:, -1])
        var, sv = variance_and_se(v[:, -1])
        reports = [_report("mean[horizon]", m - (cfg["start"] + mean_rate(spec) * H), sm, 4.0),
                   _report("variance[horizon]", var - variance_rate(spec) * H, sv, 4.0)]
        for r in reports:
            r.n = cfg["n_paths"]
        mu = v.mean(axis=0)
        half = CI_Z * v.std(axis=0, ddof=1) / math.sqrt(v.shape[0])
        plots = [_plot(cfg, ("t", "mean", "ci_low", "ci_high"),
                       zip(grid.times, mu, mu - half, mu + half))]
        k = min(cfg["csv_paths"], v.shape[0])
        if k:
            plots.append(_plot(cfg, ["t"] + [f"path_{i}" for i in range(k)],
                               np.column_stack([grid.times, v[:k].T]), "_paths"))
        return _result(cfg, reports, plots)

    return run


def prepare_harness(cfg):
    if "specs" in cfg:
        specs = [_spec(d, f"specs[{i}]") for i, d in enumerate(cfg["specs"])]
    else:
        specs = [_spec(cfg.get("spec"))]
    for i, (s, t, u) in enumerate(cfg["triples"]):
        if not 0 < s < t < u:
            raise ConfigError("need 0 < s < t < u", f"triples[{i}]")
    for i, q in enumerate(cfg["quads"]):
        if not 0 < q[0] < q[1] < q[2] < q[3]:
            raise ConfigError("need 0 < a < b < c < d", f"quads[{i}]")
    n_tests = len(specs) * (len(cfg["triples"]) + len(cfg["quads"])) * 11
    threshold = familywise_threshold(n_tests, cfg["alpha"])

    def run():
        seed = as_seed(cfg["seed"])
        out = ReportSet(threshold=threshold)
        extra = {"binned": []}
        for i, spec in enumerate(specs):
            out.extend(harnesses.harness_test(
                spec, cfg["triples"], cfg["n_paths"], seed.child(f"spec{i}"), quads=cfg["quads"],
                horizon_factor=cfg["horizon_factor"], threshold=threshold,
                planted_bias=cfg["planted_bias"], label=f"spec{i}:").reports)
            if cfg["binned_check"]:
                for s, t, u in cfg["triples"]:
                    grid = TimeGrid.covering([s, t, u], u)
                    v = sample_paths(spec, grid, 0.0, seed.child(f"binned{i}"), cfg["n_paths"])
                    est = harnesses.conditional_mean_estimate(v, s, t, u, grid=grid)
                    extra["binned"].append({"spec": i, "triple": [s, t, u],
                                            "max_abs_z": est.max_abs_z, "dropped": est.dropped,
                                            "pass": est.passed(4.0)})
        res = _result(cfg, out, extra=extra)
        res["pass"] = res["pass"] and all(b["pass"] for b in extra["binned"])
        return res

    return run


def prepare_bridge(cfg):
    spec = _spec(cfg.get("spec"))
    T, x, y = cfg["T"], cfg["x"], cfg["y"]
    step = T / 64
    for i, t in enumerate(cfg["t_points"]):
        if not 0 <= t <= T - step + 1e-12:
            raise ConfigError(f"t must lie in [0, T - T/64] = [0, {T - step}]", f"t_points[{i}]")
    brown = is_standard_brownian(spec)
    if brown:
        sde_grid = TimeGrid(horizon=T, steps=cfg["sde_steps"])
        for i, t in enumerate(cfg["t_points"]):
            try:
                sde_grid.index(t)
            except PinNotOnGrid:
                raise ConfigError("not a node of the SDE grid", f"t_points[{i}]") from None
    kw = {k: cfg[k] for k in ("tail_tol", "x_halfwidth", "n_points") if k in cfg}
    dens = bridges.density_source(spec, cfg["density"], **kw)

    def run():
        seed = as_seed(cfg["seed"])
        n = cfg["n_paths"]
        reports, rows, moments = [], [], {}
        for t in cfg["t_points"]:
            m1, m2 = bridges.weighted_moments(spec, T, x, y, t, n, seed.child(f"is{t}"), dens)
            lin = x + (t / T) * (y - x)
            r = _report(f"is_mean_linear[t={t}]", m1.estimate - lin, m1.stderr, 3.0)
            r.n, r.discarded = m1.n, m1.discarded
            reports.append(r)
            rows.append((t, m1.estimate, m1.estimate - CI_Z * m1.stderr, m1.estimate + CI_Z * m1.stderr))
            moments[t] = {"is": (m1.estimate, m1.stderr, m2.estimate, m2.stderr)}
        if brown:
            ts = list(cfg["t_points"])
            cgrid = TimeGrid.covering(ts + [T], T)
            ex = bridges.brownian_bridge_values(x, y, T, cgrid, seed.child("exact"), n)
            sde = bridges.bridge_sde_values(x, y, T, sde_grid, seed.child("sde"), n,
                                            columns=[sde_grid.index(t) for t in ts])
            for j, t in enumerate(ts):
                a = ex[:, cgrid.index(t)]
                b = sde[:, j]
                ma, sa, va, sva = bridges.marginal_moments(a)
                mb, sb, vb, svb = bridges.marginal_moments(b)
                moments[t]["exact"] = (ma, sa, va, sva)
                moments[t]["sde"] = (mb, sb, vb, svb)
                for p, q in (("exact", "sde"), ("exact", "is"), ("sde", "is")):
                    P, Q = moments[t][p], moments[t][q]
                    budget = 5e-3 if "sde" in (p, q) else 0.0
                    for k, what in ((0, "mean"), (2, "var")):
                        se = math.hypot(P[k + 1], Q[k + 1])
                        thr = 3.0 + (budget / se if se > 0 else 0.0)
                        reports.append(_report(f"{p}-{q}:{what}[t={t}]", P[k] - Q[k], se, thr))
        extra = {"moments": {repr(float(t)): {k: list(v) for k, v in d.items()}
                             for t, d in moments.items()}}
        plots = [_plot(cfg, ("t", "mean", "ci_low", "ci_high"), rows)]
        return _result(cfg, reports, plots, extra)

    return run


def prepare_pfm(cfg):
    kind = cfg["construction"]
    U = cfg["U"]
    pairs = []
    for i, pr in enumerate(cfg["pairs"]):
        try:
            (p,) = pfm.check_nested([pr])
        except NotNested as e:
            raise ConfigError(str(e), f"pairs[{i}]") from None
        if not p[1][1] < U:
            raise ConfigError("u must be < U", f"pairs[{i}]")
        pairs.append(p)
    if kind == "levy":
        spec = _spec(cfg.get("spec"))
        if "f" not in cfg:
            raise ConfigError("the levy construction needs f", "f")
        constructions = [(pfm.LevyConstruction(_fn(cfg["f"], "f"), U, spec), True)]
    else:
        spec = _spec(cfg["spec"]) if "spec" in cfg else brownian()
        if not is_standard_brownian(spec):
            raise ConfigError("linear and exponential constructions need standard Brownian motion",
                              "spec")
        fm = _fn(cfg["f_minus"], "f_minus") if "f_minus" in cfg else pfm.DeterministicFn.zero(U)
        fp = _fn(cfg["f_plus"], "f_plus") if "f_plus" in cfg else pfm.DeterministicFn.zero(U)
        if kind == "linear":
            constructions = [(pfm.LinearConstruction(fm, fp, cfg["C"], U, spec), True)]
        else:
            chosen = cfg["exp_variant"]
            constructions = [(pfm.ExponentialConstruction(fm, fp, cfg["C"], U, spec, variant=chosen),
                              True)]
            if chosen == "derived":
                constructions.append((pfm.ExponentialConstruction(fm, fp, cfg["C"], U, spec,
                                                                  variant="as_printed"), False))
    if kind == "levy":
        if not is_centered(spec, 1e-12):
            raise ConfigError("the levy construction is tested on centered specs", "spec")
    n_tests = len(pairs) * 11
    threshold = familywise_threshold(n_tests, cfg["alpha"])

    def run():
        seed = as_seed(cfg["seed"])
        asserted, recorded = None, []
        for c, is_asserted in constructions:
            rs = pfm.pfm_tower_test(c, pairs, cfg["n_paths"], seed, threshold=threshold)
            if is_asserted:
                asserted = rs
            else:
                variant = getattr(c, "variant", c.name)
                recorded.append({"variant": variant, "asserted": False, "summary": rs.summary(),
                                 "max_abs_z": rs.max_abs_z()})
        return _result(cfg, asserted, extra={"recorded": recorded})

    return run


def prepare_identity(cfg):
    spec = _spec(cfg.get("spec"))
    us = cfg["u"] if isinstance(cfg["u"], list) else [cfg["u"]]
    method = cfg["method"]
    if "xs" in cfg:
        xs = np.linspace(cfg["xs"]["start"], cfg["xs"]["stop"], cfg["xs"]["num"])
    else:
        xs = None
    window = tuple(cfg["window"]) if "window" in cfg else None
    kw = {k: cfg[k] for k in ("x_halfwidth", "n_points", "tail_tol") if k in cfg}

    def run():
        reports, plots, details = [], [], []
        for u in us:
            pts = xs
            if pts is None:
                sd = math.sqrt(variance_rate(spec) * u)
                c = mean_rate(spec) * u
                pts = np.linspace(c - 6 * sd, c + 6 * sd, 241)
            rep = density.check_identity(spec, u, pts, method, window=window, **kw)
            ok = rep.max_rel_err_on_bulk <= cfg["rel_tol"]
            if "abs_tol" in cfg:
                ok = ok and rep.max_abs_err <= cfg["abs_tol"]
            details.append({"u": float(u), "method": rep.method, "max_abs_err": rep.max_abs_err,
                            "max_rel_err_on_bulk": rep.max_rel_err_on_bulk, "pass": ok})
            reports.append(OrthogonalityReport(f"identity[u={u}]", rep.max_rel_err_on_bulk, 0.0,
                                               0.0 if ok else math.inf, int(rep.xs.size),
                                               cfg["rel_tol"], ok))
            suffix = "" if len(us) == 1 else f"_u{u}"
            plots.append(_plot(cfg, ("x", "lhs", "rhs", "abs_err"),
                               zip(rep.xs, rep.lhs, rep.rhs, np.abs(rep.lhs - rep.rhs)), suffix))
        return _result(cfg, reports, plots, {"identity": details})

    return run


PREPARE = {"simulate": prepare_simulate, "harness-check": prepare_harness,
           "bridge-check": prepare_bridge, "pfm-check": prepare_pfm,
           "identity-check": prepare_identity}


# ----------------------------------------------------------------- running

def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o)}")


def dumps(report):
    return json.dumps(report, sort_keys=True, indent=2, default=_json_default) + "\n"


def run(config, seed=None, sequential=False):
    """Validate, run and return ``(exit_status, report)``."""
    report = {"config": config, "rng": kernels.RNG_VERSION, "pass": False, "suites": []}
    try:
        validate(config)
        cfg = normalize(config, seed, sequential)
        report["config"] = cfg
        subs = cfg["suites"] if cfg["kind"] == "all" else [cfg]
        runners = []
        for i, sub in enumerate(subs):
            try:
                runners.append(PREPARE[sub["kind"]](sub))
            except ConfigError as e:
                if cfg["kind"] != "all":
                    raise
                raise ConfigError(str(e), f"suites[{i}]") from None
        workers = cfg.get("workers", os.cpu_count() or 1) if cfg["reduction"] == "parallel" else 1
        with parallel_workers(workers):
            report["suites"] = [r() for r in runners]
    except ConfigError as e:
        report["error"] = {"type": "ConfigError", "message": str(e), "field": e.field}
        return EXIT_CONFIG, report
    except (SpecError, HarnessLabError) as e:
        if isinstance(e, NumericalError):
            report["error"] = {"type": type(e).__name__, "message": str(e),
                               "operation": e.operation}
            return EXIT_NUMERICAL, report
        report["error"] = {"type": type(e).__name__, "message": str(e), "field": None}
        return EXIT_CONFIG, report
    report["pass"] = all(s["pass"] for s in report["suites"])
    return (EXIT_PASS if report["pass"] else EXIT_FAIL), report


def emit_plot_data(report, out_dir):
    """Write every plot table of ``report`` as CSV; returns the paths written."""
    paths = []
    for suite in report.get("suites", []):
        for plot in suite.get("plots", []):
            path = os.path.join(out_dir, plot["name"] + ".csv")
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(plot["columns"])
                for row in plot["rows"]:
                    w.writerow([repr(float(v)) for v in row])
            paths.append(path)
    return paths


def build_parser():
    p = argparse.ArgumentParser(prog="harnesslab", description=__doc__.split("\n\n")[0])
    p.add_argument("--config", help="experiment config JSON")
    p.add_argument("--seed", type=int, help="root seed; overrides the config")
    p.add_argument("--out", default=".", help="output directory (default: .)")
    p.add_argument("--sequential", action="store_true",
                   help="sequential reduction mode (bit-exact reports)")
    p.add_argument("--print-schema", action="store_true", help="print the config schema and exit")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.print_schema:
        sys.stdout.write(json.dumps(load_schema(), indent=2, sort_keys=True) + "\n")
        return EXIT_PASS
    if not args.config:
        sys.stderr.write("harnesslab: --config is required\n")
        return EXIT_CONFIG
    os.makedirs(args.out, exist_ok=True)
    try:
        with open(args.config) as fh:
            config = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        status, report = EXIT_CONFIG, {"config": None, "pass": False, "suites": [],
                                       "error": {"type": "ConfigError", "message": str(e),
                                                 "field": "config"}}
    else:
        if args.seed is not None and not 0 <= args.seed < 2**64:
            status, report = EXIT_CONFIG, {"config": config, "pass": False, "suites": [],
                                           "error": {"type": "ConfigError", "field": "seed",
                                                     "message": "seed must be a 64-bit unsigned integer"}}
        else:
            status, report = run(config, args.seed, args.sequential)
    report["exit_status"] = status
    with open(os.path.join(args.out, "report.json"), "w") as fh:
        fh.write(dumps(report))
    emit_plot_data(report, args.out)
    err = report.get("error")
    if err:
        if err.get("operation"):
            sys.stderr.write(f"harnesslab: {err['type']} in {err['operation']}: {err['message']}\n")
        else:
            sys.stderr.write(f"harnesslab: {err['type']}: {err['message']}\n")
    else:
        for s in report["suites"]:
            sm = s["summary"]
            sys.stdout.write(f"{s['kind']}[{s['label']}]: {'PASS' if s['pass'] else 'FAIL'} "
                             f"({sm['n_fail']}/{sm['n_tests']} failed)\n")
    return status


if __name__ == "__main__":
    sys.exit(main())
