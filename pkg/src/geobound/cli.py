"""Command-line front end.

Every command writes one JSON document to stdout (or ``--output``) and a short
human summary to stderr. Exit codes: 0 ok, 2 configuration error,
3 verification failure, 4 numerical halt at a caustic.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from datetime import datetime, timezone

import numpy as np

from . import __version__, bounds, catalog, flow, jacobi
from .curvature import DirectionField
from .errors import BadParams, CausticEncountered, GeoboundError, UnknownMetric
from .metric import normalize

EXIT_OK, EXIT_CONFIG, EXIT_FAIL, EXIT_CAUSTIC = 0, 2, 3, 4


class ConfigError(Exception):
    pass


# ------------------------------------------------------------------ config


def _parse_params(pairs):
    out = {}
    for item in pairs or []:
        if "=" not in item:
            raise ConfigError(f"--param expects k=v, got {item!r}")
        k, v = item.split("=", 1)
        try:
            out[k.strip()] = float(v)
        except ValueError:
            raise ConfigError(f"parameter {k} must be numeric") from None
    return out


def _load_config(args):
    """Merge ``--config`` JSON over the parsed flags; file values win."""
    cfg = vars(args).copy()
    cfg["params"] = _parse_params(args.param) if hasattr(args, "param") else {}
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                extra = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        if not isinstance(extra, dict):
            raise ConfigError("config file must hold a JSON object")
        params = extra.pop("params", {})
        for k, v in extra.items():
            cfg[k.replace("-", "_")] = v
        cfg["params"] = {**cfg["params"], **params}
    for key in ("t0", "dt", "t_end", "t_burn", "refine_tol"):
        v = cfg.get(key)
        if v is not None and not (isinstance(v, (int, float)) and v > 0):
            raise ConfigError(f"{key} must be positive")
    return cfg


def _entry(cfg):
    return catalog.get(cfg["metric"], cfg["params"])


DEFAULTS = {"t0": flow.DEFAULT_T0, "dt": flow.DEFAULT_DT, "t_burn": "5/R_max",
            "t_end": "50/R_max", "n": "64*d^2"}


def _header(cfg, entry=None, **resolved):
    head = {"tool": "geobound", "version": __version__, "command": cfg["command"]}
    if not cfg.get("no_timestamp"):
        head["timestamp"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
    if entry is not None:
        head["metric"] = entry.name
        head["params"] = entry.params
        head["dim"] = entry.dim
    head["defaults"] = DEFAULTS
    head["resolved"] = resolved
    return head


def _finite(x):
    """Strict JSON has no NaN or Infinity; those become null."""
    if isinstance(x, dict):
        return {k: _finite(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_finite(v) for v in x]
    if isinstance(x, np.ndarray):
        return _finite(x.tolist())
    if isinstance(x, (float, np.floating)):
        return float(x) if math.isfinite(x) else None
    return x


def _emit(doc, cfg):
    text = json.dumps(_finite(doc), indent=2, sort_keys=True, default=_jsonable, allow_nan=False)
    if cfg.get("output"):
        with open(cfg["output"], "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.bool_):
        return bool(x)
    raise TypeError(f"cannot serialize {type(x)}")


def _say(cfg, *lines):
    if not cfg.get("quiet"):
        for ln in lines:
            print(ln, file=sys.stderr)


def _r_max(entry):
    return math.sqrt(max(DirectionField(entry.spec).r2_extrema()[0][0], 1e-300))


def _default_direction(entry):
    return "diag" if "diag" in entry.directions else "e0"


def _direction(entry, what, report=None):
    if what == "scan":
        report = report or bounds.bound_report(entry.spec)
        g = entry.spec.components(entry.spec.base_point)
        return normalize(g, report.argmax_direction.comps)
    return entry.direction(what)


# ---------------------------------------------------------------- commands


def cmd_bounds(cfg):
    entry = _entry(cfg)
    d = entry.dim
    n = cfg.get("n") or 64 * d * d
    rep = bounds.bound_report(entry.spec, n=n, refine_tol=cfg.get("refine_tol") or 1e-12)
    out = rep.to_json()
    out["bg_rate"] = math.sqrt(max(rep.bg_rate2, 0.0))
    out["new_rate"] = math.sqrt(max(rep.new_rate2, 0.0))
    out["refined_rate"] = math.sqrt(max(rep.refined_rate2, 0.0))
    out["symmetric_rate2"] = rep.symmetric_rate ** 2
    out["scan"] = rep.scan.to_json()
    doc = {"header": _header(cfg, entry, n=n, refine_tol=rep.scan.refine_tol), "report": out}
    _emit(doc, cfg)
    _say(cfg, f"{'bg_rate2':>14} {'new_rate2':>14} {'refined_rate2':>14} {'symmetric2':>14}",
         f"{rep.bg_rate2:14.10g} {rep.new_rate2:14.10g} {rep.refined_rate2:14.10g} "
         f"{rep.symmetric_rate ** 2:14.10g}",
         "argmax direction: " + " ".join(f"{x:.6g}" for x in rep.argmax_direction.comps))
    return EXIT_OK


def _flow_defaults(cfg, entry):
    r_max = _r_max(entry)
    return dict(
        t0=cfg.get("t0") or flow.DEFAULT_T0,
        dt=cfg.get("dt") or flow.DEFAULT_DT,
        t_burn=cfg.get("t_burn") or 5.0 / r_max,
        t_end=cfg.get("t_end") or 50.0 / r_max,
    ), r_max


def cmd_simulate(cfg):
    entry = _entry(cfg)
    dflt, r_max = _flow_defaults(cfg, entry)
    X = _direction(entry, cfg.get("direction") or _default_direction(entry))
    try:
        series = flow.integrate_flow(entry.spec, X, t0=dflt["t0"], t_end=dflt["t_end"], dt=dflt["dt"])
    except CausticEncountered as exc:
        _emit({"header": _header(cfg, entry, **dflt), "halted_at": exc.t}, cfg)
        _say(cfg, f"caustic at t = {exc.t:.6g}")
        return EXIT_CAUSTIC
    rep = flow.averaged_identity_residual(series, t_burn=dflt["t_burn"], r2_max=r_max ** 2,
                                          min_window=0.0)
    if cfg.get("csv"):
        flow.write_csv(series, cfg["csv"], every=max(1, int(cfg.get("csv_every") or 1)))
    out = rep.to_json()
    # the long-time average is the limit of theta; a finite window mean carries a 1/t transient
    out["mean_theta_sq"] = rep.late_theta ** 2
    out["window_mean_theta_sq"] = rep.mean_theta ** 2
    out["sigma2_max"] = float(np.max(series.sigma2))
    out["direction"] = X.tolist()
    _emit({"header": _header(cfg, entry, **dflt), "averages": out}, cfg)
    _say(cfg, f"<theta>^2 = {out['mean_theta_sq']:.8g}   window mean^2 = {out['mean_theta_sq']:.8g}",
         f"<sigma^2> = {rep.mean_sigma2:.6g}   identity residual = {rep.identity_residual:.3g}")
    return EXIT_OK


# ---------------------------------------------------------------- verify


def _suite_raychaudhuri(cfg, rng):
    entry = _entry(cfg)
    t_end = cfg.get("t_end") or 10.0
    dt = cfg.get("dt") or flow.DEFAULT_DT
    dirs = [_direction(entry, _default_direction(entry))]
    g = entry.spec.components(entry.spec.base_point)
    for _ in range(max(0, (cfg.get("trials") or 1) - 1)):
        dirs.append(normalize(g, rng.normal(size=entry.dim)))
    worst = [0.0, 0.0, 0.0]
    for X in dirs:
        s = flow.integrate_flow(entry.spec, X, t_end=t_end, dt=dt)
        r1, r2 = flow.raychaudhuri_residuals(s)
        r3 = flow.sigma2_evolution_residual(s)
        worst = [max(a, b) for a, b in zip(worst, (r1, r2, r3))]
    ok = max(worst) < 1e-5
    return ok, {"residual1_max": worst[0], "residual2_max": worst[1], "sigma2_residual_max": worst[2],
                "directions": len(dirs), "tolerance": 1e-5}


def _random_traceless(rng, n):
    A = rng.normal(size=(n, n))
    A = 0.5 * (A + A.T)
    return A - np.trace(A) / n * np.eye(n)


def _suite_traces(cfg, rng):
    trials = cfg.get("trials") or 10000
    worst = [np.inf, np.inf, np.inf]
    sat = 0.0
    for d in range(3, 9):
        n = d - 1
        for _ in range(trials):
            m = flow.shear_trace_margins(_random_traceless(rng, n))
            worst[1] = min(worst[1], m[1])
            worst[2] = min(worst[2], m[2])
            B = rng.normal(size=(n, n))
            M = B @ B.T
            theta = float(np.trace(M))
            m0 = flow.shear_trace_margins(M - theta / n * np.eye(n), theta)
            worst[0] = min(worst[0], m0[0])
        ev = np.full(n, -1.0)
        ev[0] = d - 2
        m = flow.shear_trace_margins(np.diag(ev))
        sat = max(sat, abs(m[1]), abs(m[2]))
    ok = min(worst) >= -1e-12 and sat < 1e-9
    return ok, {"min_margin_positive_M": worst[0], "min_margin_cubic": worst[1],
                "min_margin_quartic": worst[2], "saturation_gap": sat, "trials_per_d": trials}


def _suite_shuffle(cfg, rng):
    trials = cfg.get("trials") or 1000
    t_end = cfg.get("t_end") or 3.0
    A = jacobi.FourierBatch(rng, trials)
    B = jacobi.FourierBatch(rng, trials)
    rm, pm, events = jacobi.lemma_margins_batch(A, B, t_end)
    fit, pred = jacobi.taylor_coefficient(jacobi.constant(4.0), jacobi.constant(0.0))
    deltas = [1e-1, 1e-2, 1e-3]
    errs, slope, _ = jacobi.shuffle_convergence(jacobi.constant(4.0), jacobi.constant(0.0), deltas, 2.0)
    ok = rm.min() >= -1e-10 and pm.min() >= -1e-10 and abs(fit / pred - 1) < 0.05
    return ok, {"ratio_margin_min": float(rm.min()), "product_margin_min": float(pm.min()),
                "stuck_average_events": events, "taylor_fit": fit, "taylor_predicted": pred,
                "shuffle_errors": errs.tolist(), "shuffle_deltas": deltas,
                "shuffle_loglog_slope": slope, "trials": trials}


def _suite_positivity(cfg, rng):
    entry = _entry(cfg)
    trials = cfg.get("trials") or 20
    t_end = cfg.get("t_end") or 50.0
    dt = cfg.get("dt") or 1e-2
    g = entry.spec.components(entry.spec.base_point)
    dirs = [normalize(g, rng.normal(size=entry.dim)) for _ in range(trials)]
    mins = [flow.positivity_monitor(s, 0.1) for s in flow.integrate_many(entry.spec, dirs, t_end=t_end, dt=dt)]
    return min(mins) > 0, {"min_eigenvalue": min(mins), "directions": trials, "t_end": t_end, "dt": dt}


def _suite_identity(cfg, rng):
    entry = _entry(cfg)
    r_max = _r_max(entry)
    t_burn = cfg.get("t_burn") or 10.0 / r_max
    window = 50.0 / r_max
    X = _direction(entry, cfg.get("direction") or _default_direction(entry))
    s = flow.integrate_flow(entry.spec, X, t_end=t_burn + 2 * window, dt=cfg.get("dt") or 1e-3)
    a = flow.averaged_identity_residual(s, t_burn=t_burn, t_end=t_burn + window, r2_max=r_max ** 2)
    b = flow.averaged_identity_residual(s, t_burn=t_burn, t_end=t_burn + 2 * window, r2_max=r_max ** 2)
    ok = a.identity_residual < 1e-2 and b.identity_residual < a.identity_residual
    return ok, {"residual_window": a.identity_residual, "residual_double_window": b.identity_residual,
                "t_burn": t_burn, "window": window}


SUITES = {
    "raychaudhuri": _suite_raychaudhuri,
    "traces": _suite_traces,
    "shuffle": _suite_shuffle,
    "positivity": _suite_positivity,
    "identity": _suite_identity,
}


def cmd_verify(cfg):
    rng = np.random.default_rng(cfg.get("seed", 0))
    names = list(SUITES) if cfg["suite"] == "all" else [cfg["suite"]]
    results = {}
    for name in names:
        try:
            ok, detail = SUITES[name](cfg, rng)
        except CausticEncountered as exc:
            _emit({"header": _header(cfg), "halted_at": exc.t, "suite": name}, cfg)
            return EXIT_CAUSTIC
        results[name] = {"pass": bool(ok), **detail}
        _say(cfg, f"{name:>14}: {'PASS' if ok else 'FAIL'}")
    all_ok = all(r["pass"] for r in results.values())
    _emit({"header": _header(cfg, seed=cfg.get("seed", 0)), "pass": all_ok, "suites": results}, cfg)
    return EXIT_OK if all_ok else EXIT_FAIL


def _schedule(text):
    text = str(text).strip()
    if text.startswith("fourier:"):
        seed = int(text.split(":", 1)[1])
        return jacobi.FourierBatch(np.random.default_rng(seed), 1).schedule(0)
    try:
        return jacobi.constant(float(text))
    except ValueError:
        raise ConfigError(f"schedule must be a number or fourier:SEED, got {text!r}") from None


def cmd_shuffle(cfg):
    k1, k2 = _schedule(cfg["k1"]), _schedule(cfg["k2"])
    t_end = cfg.get("t_end") or 2.0
    dt = cfg.get("dt") or 1e-3
    deltas = [float(x) for x in (cfg.get("deltas") or [1e-1, 1e-2, 1e-3, 1e-4])]
    errs, slope, ref = jacobi.shuffle_convergence(k1, k2, deltas, t_end, dt)
    s1, s2 = jacobi.solve_jacobi(k1, t_end, dt), jacobi.solve_jacobi(k2, t_end, dt)
    sav = jacobi.solve_jacobi(jacobi.average_pair(k1, k2), t_end, dt)
    events = {lbl: s.stuck_at for lbl, s in (("j1", s1), ("j2", s2), ("j_av", sav)) if s.stuck_at is not None}
    if cfg.get("csv"):
        shuf = jacobi.shuffle_evolve(k1, k2, min(deltas), t_end, dt)
        js = np.interp(s1.t, shuf.t, shuf.j)
        with open(cfg["csv"], "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "j1", "j2", "j_av", "j_shuffled", "product_margin"])
            for i in range(len(s1.t)):
                m = sav.j[i] ** 2 - s1.j[i] * s2.j[i]
                w.writerow([repr(float(v)) for v in (s1.t[i], s1.j[i], s2.j[i], sav.j[i], js[i], m)])
    table = [{"delta": dl, "error": float(e)} for dl, e in zip(deltas, errs)]
    _emit({"header": _header(cfg, t_end=t_end, dt=dt), "k1": k1.label, "k2": k2.label,
           "j_av_end": ref, "convergence": table, "loglog_slope": slope, "stuck_at": events}, cfg)
    _say(cfg, *(f"delta={r['delta']:<8g} error={r['error']:.3e}" for r in table), f"slope={slope:.3f}")
    for lbl, t in events.items():
        _say(cfg, f"{lbl} stuck at zero at t = {t:.10g}")
    return EXIT_OK


def cmd_list_metrics(cfg):
    _emit({"header": _header(cfg), "metrics": catalog.list_metrics()}, cfg)
    return EXIT_OK


# ------------------------------------------------------------------ parser


def build_parser():
    p = argparse.ArgumentParser(prog="geobound", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file; its values override flags")
    common.add_argument("--output", "-o", help="write JSON here instead of stdout")
    common.add_argument("--no-timestamp", action="store_true", help="omit the timestamp field")
    common.add_argument("--quiet", "-q", action="store_true", help="no summary on stderr")
    common.add_argument("--seed", type=int, default=0)
    metric = argparse.ArgumentParser(add_help=False)
    metric.add_argument("--metric", default="h2xh2", help="catalog name (see list-metrics)")
    metric.add_argument("--param", action="append", metavar="K=V", help="metric parameter")
    flowopts = argparse.ArgumentParser(add_help=False)
    flowopts.add_argument("--t0", type=float)
    flowopts.add_argument("--dt", type=float)
    flowopts.add_argument("--t-end", type=float, dest="t_end")
    flowopts.add_argument("--t-burn", type=float, dest="t_burn")
    flowopts.add_argument("--direction", help="named direction, e<i>, comma list, angles, or 'scan'")

    sub = p.add_subparsers(dest="command", required=True)
    b = sub.add_parser("bounds", parents=[common, metric], help="curvature scan and rate bounds")
    b.add_argument("--n", type=int, help="sphere resolution (default 64 d^2)")
    b.add_argument("--refine-tol", type=float, dest="refine_tol")
    b.set_defaults(func=cmd_bounds)

    s = sub.add_parser("simulate", parents=[common, metric, flowopts], help="integrate one geodesic ball")
    s.add_argument("--csv", help="write the time series here")
    s.add_argument("--csv-every", type=int, dest="csv_every", default=1)
    s.set_defaults(func=cmd_simulate)

    v = sub.add_parser("verify", parents=[common, metric, flowopts], help="run a verification suite")
    v.add_argument("--suite", choices=sorted(SUITES) + ["all"], default="all")
    v.add_argument("--trials", type=int)
    v.set_defaults(func=cmd_verify)

    sh = sub.add_parser("shuffle", parents=[common], help="alternating-schedule Jacobi study")
    sh.add_argument("--k1", default="4", help="number or fourier:SEED")
    sh.add_argument("--k2", default="0")
    sh.add_argument("--deltas", type=float, nargs="+")
    sh.add_argument("--t-end", type=float, dest="t_end")
    sh.add_argument("--dt", type=float)
    sh.add_argument("--csv")
    sh.set_defaults(func=cmd_shuffle)

    lm = sub.add_parser("list-metrics", parents=[common], help="catalog entries as JSON")
    lm.set_defaults(func=cmd_list_metrics)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load_config(args)
        return args.func(cfg)
    except (ConfigError, UnknownMetric, BadParams) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CausticEncountered as exc:
        print(f"halted: {exc}", file=sys.stderr)
        return EXIT_CAUSTIC
    except (GeoboundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
