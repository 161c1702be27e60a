"""Command-line experiment runner.

    deltanls <command> --config cfg.json --out results/ [--seed N] [--threads N] [--strict]

Commands: propagate, evolve, scatter, virial, decay, profiles, xval, report.
Every run writes ``summary.json`` (the run record) into --out; the exit
status is 0 when every enabled check passes, 1 when one fails, 2 for a bad
configuration and 3 when a run aborts (mass drift, boundary mass).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import warnings
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path

import numpy as np

from .config import ConfigError, build_initial, config_hash, load_config, validate_config
from .grid import h1_norm, l2_norm, make_grid, save_field, wavefield
from .solver import EvolutionAborted, NLSParams

COMMANDS = ("propagate", "evolve", "scatter", "virial", "decay", "profiles", "xval", "report")


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


class Run:
    """Collects outputs and checks of one command, then writes the run record."""

    def __init__(self, command: str, cfg: dict, out: Path, seed: int):
        self.command, self.cfg, self.out, self.seed = command, cfg, out, seed
        self.started = _now()
        self.outputs: dict = {}
        self.checks: dict = {}
        self.results: dict = {}
        out.mkdir(parents=True, exist_ok=True)

    def check(self, name: str, value, threshold: str, passed: bool):
        self.checks[name] = {"value": value, "threshold": threshold, "passed": bool(passed)}

    def path(self, key: str, filename: str) -> Path:
        p = self.out / filename
        self.outputs[key] = str(p)
        return p

    def record(self) -> dict:
        return {
            "command": self.command,
            "config_hash": config_hash(self.cfg),
            "seed": self.seed,
            "started": self.started,
            "finished": _now(),
            "outputs": self.outputs,
            "checks": self.checks,
            "results": self.results,
            "passed": all(c["passed"] for c in self.checks.values()),
        }


def _params(cfg) -> NLSParams:
    return NLSParams(q=float(cfg["physics"]["q"]), alpha=float(cfg["physics"]["alpha"]))


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])


def _evolve(run: Run, phi, params, t_final, jsonl_name="records.jsonl", scalars=True):
    from .solver import evolve

    rc = run.cfg["run"]
    fh = open(run.path("records", jsonl_name), "w") if scalars else None
    try:
        return evolve(phi, params, t_final, rc["dt"], stride=rc["stride"], method=rc["method"],
                      mass_tol=rc["mass_tol"], boundary_tol=rc["boundary_tol"], scalars=scalars,
                      on_record=(lambda r: fh.write(json.dumps(r) + "\n")) if fh else None)
    finally:
        if fh:
            fh.close()


# --------------------------------------------------------------------------- commands

def cmd_propagate(run: Run):
    from .propagators import PropagatorMethod, linear_propagate

    cfg = run.cfg
    phi = build_initial(cfg)
    rc = cfg["run"]
    m = rc["method"]
    u = linear_propagate(phi, cfg["physics"]["q"], rc["t_final"], PropagatorMethod(m, rc["sub_steps"]))
    save_field(u, run.path("field", "field.json"))
    drift = abs(l2_norm(u) / l2_norm(phi) - 1.0)
    run.results.update({"t": rc["t_final"], "method": m, "l2_drift": drift, "h1": h1_norm(u)})
    run.check("l2_drift", drift, f"<= {rc['mass_tol']:g}", drift <= rc["mass_tol"])


def cmd_evolve(run: Run):
    params = _params(run.cfg)
    tr = _evolve(run, build_initial(run.cfg), params, run.cfg["run"]["t_final"])
    save_field(tr.states[-1], run.path("field", "final_field.json"))
    m = tr.scalars["mass"]
    e = tr.scalars["energy"]
    drift = float(np.max(np.abs(m - m[0])) / m[0])
    run.results.update({"snapshots": len(tr), "mass_drift": drift,
                        "energy_drift": float(np.max(np.abs(e - e[0])))})
    run.check("mass_drift", drift, "<= 1e-10", drift <= 1e-10)


def cmd_scatter(run: Run):
    from .scattering import dyadic_cauchy_defects, extract_scattering_state

    cfg = run.cfg
    params = _params(cfg)
    tr = _evolve(run, build_initial(cfg), params, cfg["run"]["t_final"])
    method = cfg["run"]["method"]
    sc = cfg.get("scatter", {})
    tol = sc.get("tolerance")
    rep = extract_scattering_state(tr, params.q, method=method, tolerance=tol)
    t_list = sc.get("t_list") or [t for t in (1, 2, 4, 8, 16, 32, 64) if 2 * t <= tr.times[-1]]
    pairs = dyadic_cauchy_defects(tr, params.q, t_list, method=method)
    _write_csv(run.path("cauchy", "cauchy.csv"), ["t1", "t2", "defect", "majorant"],
               [(p["t1"], p["t2"], p["defect"], p["majorant"]) for p in pairs])
    _write_csv(run.path("residuals", "residuals.csv"), ["t", "residual"], rep.residuals)
    save_field(rep.phi_plus, run.path("phi_plus", "phi_plus.json"))
    run.results.update({"horizon": rep.horizon, "cauchy": pairs, "tail_alpha": rep.tail_alpha})
    if tol is not None:
        last = rep.cauchy_pairs[-1][2] if rep.cauchy_pairs else float("nan")
        run.check("cauchy_converged", last, f"<= {tol:g}", rep.converged)


def cmd_virial(run: Run):
    from .diagnostics import make_weight, virial_refinement, virial_series

    cfg = run.cfg
    params = _params(cfg)
    phi = build_initial(cfg)
    vc = cfg.get("virial", {})
    kind = vc.get("weight", "quadratic-cutoff")
    R = vc.get("R", 10.0) if kind == "quadratic-cutoff" else None
    tr = _evolve(run, phi, params, cfg["run"]["t_final"], scalars=False)
    vs = virial_series(tr, make_weight(phi.grid, kind, R), params)
    with open(run.path("virial", "virial.jsonl"), "w") as fh:
        for k in range(vs.times.size):
            fh.write(json.dumps({"t": float(vs.times[k]), "M": float(vs.M[k]), "M_dot": float(vs.M_dot[k]),
                                 "rhs": float(vs.rhs[k]), "residual": float(vs.residual[k])}) + "\n")
    run.results["max_residual"] = float(np.max(vs.residual[1:-1])) if vs.times.size > 2 else None
    if "spacings" in vc:
        grids = None
        if vc.get("grids"):
            grids = [make_grid(n, cfg["grid"]["half_width"]) for n in vc["grids"]]

        def data(g):
            c = dict(cfg, grid={"n": g.n, "half_width": g.half_width})
            return build_initial(c)

        ref = virial_refinement(data if grids else phi, params,
                                (lambda g: make_weight(g, kind, R)) if grids else make_weight(phi.grid, kind, R),
                                vc["spacings"], method=cfg["run"]["method"], grids=grids)
        _write_csv(run.path("refinement", "refinement.csv"), ["spacing", "residual"],
                   zip(ref["spacings"], ref["residuals"]))
        run.results["refinement"] = ref
        run.check("refinement_order", ref["order"], ">= 1", ref["order"] >= 1.0)


def cmd_decay(run: Run):
    from .diagnostics import dispersion_decay_fit

    cfg = run.cfg
    dc = cfg.get("decay", {})
    t_grid = dc.get("t_grid") or list(np.geomspace(5.0, 50.0, 8))
    fit = dispersion_decay_fit(build_initial(cfg), cfg["physics"]["q"], t_grid,
                               method=dc.get("method", "exact-kernel"), boundary_tol=dc.get("boundary_tol", 1e-6))
    _write_csv(run.path("fit", "decay.csv"), ["t", "sup"], zip(fit.times, fit.sup_norms))
    run.results.update({"slope": fit.fitted_slope, "fit_residual": fit.fit_residual})
    run.check("decay_slope", fit.fitted_slope, "-0.50 +- 0.05", abs(fit.fitted_slope + 0.5) <= 0.05)


def cmd_profiles(run: Run):
    from .profiles import ProfileTerm, greedy_extract, pythagorean_defects, synth_family

    cfg = run.cfg
    g = make_grid(cfg["grid"]["n"], cfg["grid"]["half_width"])
    q = cfg["physics"]["q"]
    pc = cfg.get("profiles", {})
    n_list = np.array(pc.get("n_list", [1, 2, 3, 4, 5, 6]), dtype=float)
    specs = pc.get("terms") or [{"amplitude": 1.0, "width": 0.7, "x_rate": -5.0},
                                {"amplitude": 0.6, "width": 0.7, "phase": 1.0, "x_rate": 5.0}]
    terms = []
    for s in specs:
        psi = wavefield(g, s["amplitude"] * np.exp(-g.x**2 / (2 * s["width"] ** 2)) * np.exp(1j * s.get("phase", 0.0) * g.x))
        t_seq = s.get("t_rate", 0.0) * n_list ** s.get("t_power", 1.0)
        terms.append(ProfileTerm(psi, t_seq, s.get("x_rate", 0.0) * n_list))
    rem = pc.get("remainder", {"kind": "zero"})
    rem_spec = None if rem.get("kind", "zero") == "zero" else dict(rem, kind="noise")
    fam = synth_family(terms, rem_spec, [int(n) for n in n_list], q, seed=run.seed)
    rows = pythagorean_defects(fam, q, tuple(pc.get("p_list", [4.0, cfg["physics"]["alpha"] + 2])),
                               cfg["physics"]["alpha"])
    _write_csv(run.path("defects", "defects.csv"), ["n", "identity", "defect"],
               [(r["n"], r["identity"], r["defect"]) for r in rows])
    ex = {"time_window": (-2.0, 2.0, 21), "stop_threshold": 0.05}
    ex.update(pc.get("extract", {}))
    dec = greedy_extract(fam, q, ex)
    report = {"window": dec.window, "scan_sups": dec.scan_sups, "remainder_sup": dec.remainder_sup,
              "terms": [{"x_seq": t.x_seq.tolist(), "t_seq": t.t_seq.tolist(),
                         "psi_l2": l2_norm(t.psi)} for t in dec.terms]}
    errs = []
    for tr_ in terms:
        if dec.terms:
            k = int(np.argmin([np.max(np.abs(t.x_seq - tr_.x_seq)) + np.max(np.abs(t.t_seq - tr_.t_seq))
                               for t in dec.terms]))
            errs.append({"matched": k, "x_err": float(np.max(np.abs(dec.terms[k].x_seq - tr_.x_seq))),
                         "psi_rel_l2": l2_norm(dec.terms[k].psi - tr_.psi) / l2_norm(tr_.psi)})
    report["ground_truth_errors"] = errs
    with open(run.path("extraction", "extraction.json"), "w") as fh:
        json.dump(report, fh, indent=2)
    run.results["remainder_sup"] = dec.remainder_sup
    run.check("remainder_sup", dec.remainder_sup, f"<= {ex['stop_threshold']:g}",
              dec.remainder_sup <= ex["stop_threshold"])


def cmd_xval(run: Run):
    from .propagators import cn_propagate, delta_propagate

    cfg = run.cfg
    phi = build_initial(cfg)
    q = cfg["physics"]["q"]
    xc = cfg.get("xval", {})
    t = xc.get("t", 1.0)
    ladder = xc.get("sub_steps", [1024, 2048, 4096])
    exact = delta_propagate(phi, q, t)
    d = [h1_norm(cn_propagate(phi, q, t, s) - exact) for s in ladder]
    ratios = [None] + [d[k - 1] / d[k] for k in range(1, len(d))]
    _write_csv(run.path("table", "xval.csv"), ["sub_steps", "h1_discrepancy", "ratio"],
               [(s, e, "" if r is None else r) for s, e, r in zip(ladder, d, ratios)])
    run.results.update({"discrepancy": d, "ratios": ratios[1:]})
    ok = all(3.5 <= r <= 4.5 for r in ratios[1:])
    run.check("cn_order_ratio", ratios[1:], "in [3.5, 4.5]", ok)


def cmd_report(run: Run, records: list[str], criteria):
    from .acceptance import run_criteria

    lines = ["# Acceptance report", ""]
    rows = []
    for path in records:
        try:
            rec = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            lines.append(f"- missing or unreadable record: {path} ({exc})")
            continue
        for name, c in rec.get("checks", {}).items():
            rows.append((f"{rec.get('command')}:{name}", c["value"], c["threshold"], c["passed"]))
    results = run_criteria(criteria, on_result=lambda r: print(r.line(), flush=True)) if criteria else []
    for r in results:
        rows.append((f"{r.number}. {r.name}", r.measured, r.threshold, r.passed))
        run.check(f"criterion_{r.number}", r.to_json()["measured"], r.threshold, r.passed)
    for name, value, thr, ok in rows[: len(rows) - len(results)]:
        run.check(name, value, thr, ok)
    if not rows:
        lines.append("no runs")
    else:
        lines += ["| check | measured | threshold | verdict |", "|---|---|---|---|"]
        for name, value, thr, ok in rows:
            lines.append(f"| {name} | {json.dumps(value, default=float)} | {thr} | {'pass' if ok else 'FAIL'} |")
        lines += ["", f"overall: {'pass' if all(r[3] for r in rows) else 'FAIL'}"]
    Path(run.path("report", "report.md")).write_text("\n".join(lines) + "\n")
    run.results["criteria"] = [r.to_json() for r in results]


# --------------------------------------------------------------------------- entry point

def example_config_path() -> Path:
    return Path(str(resources.files("deltanls") / "data" / "example_config.json"))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="deltanls", description=__doc__.split("\n")[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="experiment JSON (default: the bundled example)")
    p.add_argument("--out", default="results", help="output directory")
    p.add_argument("--seed", type=int, help="64-bit seed, overrides the config")
    p.add_argument("--threads", type=int, help="BLAS/FFT worker threads")
    p.add_argument("--strict", action="store_true", help="treat warnings as failed checks")
    p.add_argument("--records", nargs="*", default=[], help="report: run records to aggregate")
    p.add_argument("--criteria", help="report: comma-separated criterion numbers, or 'all'")
    return p


def _criteria_arg(text, cfg):
    if text is None:
        return cfg.get("report", {}).get("criteria")
    if text.strip() == "all":
        return list(range(1, 17))
    return [int(k) for k in text.split(",") if k.strip()]


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cfg_path = Path(args.config) if args.config else example_config_path()
    try:
        cfg = load_config(cfg_path)
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ConfigError("seed", "must be an unsigned 64-bit integer")
            cfg["seed"] = args.seed
            cfg = validate_config(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    run = Run(args.command, cfg, Path(args.out), int(cfg["seed"]))
    if args.threads:
        from threadpoolctl import threadpool_limits
        limiter = threadpool_limits(limits=args.threads)
    else:
        limiter = None
    status = 0
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            if args.command == "report":
                records = args.records or cfg.get("report", {}).get("records", [])
                cmd_report(run, records, _criteria_arg(args.criteria, cfg))
            else:
                globals()[f"cmd_{args.command}"](run)
        except EvolutionAborted as exc:
            print(f"run aborted: {exc}", file=sys.stderr)
            run.results["aborted"] = str(exc)
            if exc.trajectory is not None and len(exc.trajectory):
                run.results["last_time"] = float(exc.trajectory.times[-1])
            status = 3
        except (ConfigError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            run.results["error"] = str(exc)
            status = 2
    if limiter is not None:
        limiter.restore_original_limits()
    msgs = sorted({str(w.message) for w in caught})
    if msgs:
        run.results["warnings"] = msgs
        for m in msgs:
            print(f"warning: {m}", file=sys.stderr)
        if args.strict:
            run.check("warnings", len(msgs), "none (--strict)", False)
    rec = run.record()
    (run.out / "summary.json").write_text(json.dumps(rec, indent=2, default=float) + "\n")
    for name, c in rec["checks"].items():
        print(f"{'PASS' if c['passed'] else 'FAIL'} {name}: {c['value']} ({c['threshold']})")
    if status:
        return status
    return 0 if rec["passed"] else 1


if __name__ == "__main__":
    sys.exit(main())
