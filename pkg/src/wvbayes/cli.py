"""``wvbayes`` command line.

Exit codes: 0 success, 2 usage error, 3 tolerance/consistency failure, 4 I/O error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from pathlib import Path

from . import __version__
from .errors import ConfigError, DegenerateDenominator, InsufficientSamples, OrthogonalPostSelection, WeakValueError
from .estimators import (
    complex_wv,
    consistency_check,
    counterfactual_wv,
    eta,
    expected_shifts,
    prior_from_shifts,
    state_from_ratio,
    tomography,
    combined_tomography,
    fidelity,
    uncertainty_inequality_check,
    wv_from_shift,
    wv_ratio_across_arms,
    xi_from_runs,
)
from .mc import MODES, RunConfig, ShiftAccumulator, run_experiment
from .mzi import (
    ARMS,
    PORTS,
    GlassPlacement,
    MziState,
    arm_ket,
    arm_projector,
    port_ket,
    port_probability,
    port_projector,
    theoretical_weak_value,
)
from .probe import GaussianProbe
from .weakvalues import bayes_decompose, geometric_phase, uncertainty_bound_check

log = logging.getLogger("wvbayes")

EXIT_OK, EXIT_USAGE, EXIT_TOLERANCE, EXIT_IO = 0, 2, 3, 4
SUMMARY_SCHEMA = "wvbayes.summary/1"

EXAMPLE_BETA = math.sqrt(1 / 5)
EXAMPLE_GAMMA = -math.sqrt(4 / 5)


class UsageError(Exception):
    pass


# -- config --------------------------------------------------------------------


def state_from_args(args) -> MziState:
    beta = complex(args.beta_re, args.beta_im)
    gamma = complex(args.gamma_re, args.gamma_im)
    norm = math.sqrt(abs(beta) ** 2 + abs(gamma) ** 2)
    if norm == 0:
        raise UsageError("beta and gamma cannot both be zero")
    if abs(norm - 1.0) > 1e-6:
        log.warning("input state norm %.9g differs from 1; normalizing", norm)
    return MziState.normalized(beta, gamma)


def config_echo(args, state: MziState) -> dict:
    echo = {
        "beta": [state.beta.real, state.beta.imag],
        "gamma": [state.gamma.real, state.gamma.imag],
    }
    for key in ("g", "sigma", "photons", "seed", "shards"):
        if hasattr(args, key):
            echo[key] = getattr(args, key)
    return echo


def provenance(command: str, config: dict) -> dict:
    return {"command": command, "config": config, "seed": config.get("seed"), "version": __version__}


def _c(z: complex) -> list:
    return [z.real, z.imag]


# -- analytic ------------------------------------------------------------------------


def analytic_report(state: MziState) -> dict:
    psi = state.ket()
    weak_values = {}
    bayes = {}
    phases = {}
    bounds = {}
    for arm in ARMS:
        for port in PORTS:
            key = f"{arm},{port}"
            try:
                weak_values[key] = _c(theoretical_weak_value(state, arm, port))
            except OrthogonalPostSelection:
                weak_values[key] = "undefined (dark port)"
            try:
                d = bayes_decompose(arm_ket(arm), psi, port_ket(port))
                bayes[key] = {
                    "forward_wv": _c(d.forward_wv),
                    "reverse_wv": _c(d.reverse_wv),
                    "p_arm": d.p_a,
                    "p_port": d.p_z,
                }
            except OrthogonalPostSelection:
                bayes[key] = "undefined (vanishing overlap)"
            try:
                phases[key] = geometric_phase(psi, arm_ket(arm), port_ket(port))
            except WeakValueError:
                phases[key] = "undefined (degenerate loop)"
            try:
                lhs, rhs = uncertainty_bound_check(arm_projector(arm), port_projector(port), psi)
                bounds[key] = {"abs_imag_wv": lhs, "bound": rhs}
            except OrthogonalPostSelection:
                bounds[key] = "undefined (dark port)"
    return {
        "weak_values": weak_values,
        "port_probabilities": {port: port_probability(state, port) for port in PORTS},
        "arm_probabilities": {arm: abs(state.amplitude(arm)) ** 2 for arm in ARMS},
        "bayes": bayes,
        "geometric_phase": phases,
        "uncertainty": bounds,
    }


# -- simulation --------------------------------------------------------------------


def simulate_runs(state, probe, g, photons, seed, shards, records_dir=None) -> dict:
    accs = {}
    for mode in MODES:
        for arm in ARMS:
            cfg = RunConfig(state, GlassPlacement(arm, g), probe, photons, mode, seed, shards)
            path = None
            if records_dir is not None:
                path = Path(records_dir) / f"records_{arm}_{mode}.csv"
            accs[arm, mode] = run_experiment(cfg, records_path=path)
    return accs


def summary_dict(accs: dict, config: dict, command: str = "simulate") -> dict:
    runs = []
    for (arm, mode), acc in accs.items():
        runs.append({"arm": arm, "mode": mode, "ports": acc.to_dict()})
    return {"schema": SUMMARY_SCHEMA, "provenance": provenance(command, config), "config": config, "runs": runs}


def accumulators_from_summary(summary: dict):
    if summary.get("schema") != SUMMARY_SCHEMA:
        raise UsageError(f"not a {SUMMARY_SCHEMA} document")
    cfg = summary["config"]
    state = MziState.normalized(complex(*cfg["beta"]), complex(*cfg["gamma"]))
    probe = GaussianProbe(cfg["sigma"])
    accs = {}
    for run in summary["runs"]:
        rc = RunConfig(state, GlassPlacement(run["arm"], cfg["g"]), probe, cfg["photons"], run["mode"], cfg["seed"], cfg["shards"])
        accs[run["arm"], run["mode"]] = ShiftAccumulator.from_dict(rc, run["ports"])
    return state, probe, cfg, accs


# -- estimation -----------------------------------------------------------------------


def _entry(fn, truth):
    try:
        rep = fn()
    except (DegenerateDenominator, InsufficientSamples) as exc:
        return {"status": "skipped (degenerate)", "reason": str(exc), "truth": _c(complex(truth)) if truth is not None else None}
    out = rep.to_dict()
    out["status"] = "ok"
    out["truth"] = _c(complex(truth)) if truth is not None else None
    return out


def _safe_truth(fn):
    try:
        return fn()
    except OrthogonalPostSelection:
        return None


def estimate_report(state: MziState, probe: GaussianProbe, accs: dict, k: float = 3.0) -> dict:
    xi = {arm: xi_from_runs(accs[arm, "position"], accs[arm, "momentum"], probe) for arm in ARMS}
    psi = state.ket()
    out = {}
    for arm in ARMS:
        for port in PORTS:
            truth = _safe_truth(lambda: theoretical_weak_value(state, arm, port).real)
            out[f"shift[{arm},{port}]"] = _entry(lambda: wv_from_shift(accs[arm, "position"], port), truth)
        reverse = _safe_truth(lambda: bayes_decompose(arm_ket(arm), psi, port_ket("D")).reverse_wv)
        out[f"counterfactual[{arm}]"] = _entry(
            lambda: counterfactual_wv(accs[arm, "position"]), None if reverse is None else reverse.real
        )
        out[f"eta[{arm}]"] = _entry(lambda: eta(xi[arm]), None if reverse is None else reverse.conjugate())
        out[f"prior[{arm}]"] = _entry(lambda: prior_from_shifts(xi[arm]), abs(state.amplitude(arm)) ** 2)
    for port in PORTS:
        wv = _safe_truth(lambda: theoretical_weak_value(state, "B", port))
        out[f"ratio_across_arms[{port}]"] = _entry(
            lambda: wv_ratio_across_arms(accs["B", "position"], accs["C", "position"], port),
            None if wv is None else wv.real,
        )
        out[f"complex_wv[{port}]"] = _entry(lambda: complex_wv(xi["B"], xi["C"], port), wv)
        ratio_truth = state.gamma / state.beta if abs(state.beta) > 0 else None
        out[f"tomography[{port}]"] = _entry(lambda: tomography(xi["B"], xi["C"], port), ratio_truth)
    try:
        cons = consistency_check(xi["B"], xi["C"], k)
        out["consistency"] = {
            "status": "ok",
            "residual": cons.residual,
            "std_error": cons.std_error,
            "k": k,
            "passed": cons.passed,
        }
    except DegenerateDenominator as exc:
        out["consistency"] = {"status": "skipped (degenerate)", "reason": str(exc), "passed": None}
    ineq = uncertainty_inequality_check(accs["B", "momentum"])
    out["uncertainty_inequality[B,D]"] = {
        "lhs": ineq.lhs,
        "rhs": ineq.rhs,
        "std_error": ineq.std_error,
        "passed": ineq.passed,
    }
    return out


# -- output helpers ---------------------------------------------------------------------


def _flatten(prefix: str, obj, rows: list) -> None:
    if isinstance(obj, dict):
        for key, val in obj.items():
            _flatten(f"{prefix}.{key}" if prefix else str(key), val, rows)
    elif isinstance(obj, list) and all(not isinstance(v, (dict, list)) for v in obj):
        rows.append((prefix, " ".join(repr(v) for v in obj)))
    else:
        rows.append((prefix, obj))


def render(doc: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"
    rows = []
    _flatten("", doc, rows)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("key", "value"))
    for key, val in rows:
        w.writerow((key, val))
    return buf.getvalue()


def emit(text: str, out) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    try:
        Path(out).write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write {out}: {exc.strerror or exc}") from exc


# -- subcommands -------------------------------------------------------------------------


def cmd_analytic(args) -> int:
    state = state_from_args(args)
    doc = {"provenance": provenance("analytic", config_echo(args, state)), **analytic_report(state)}
    emit(render(doc, args.format), args.out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    state = state_from_args(args)
    probe = GaussianProbe(args.sigma)
    if args.records is not None:
        Path(args.records).mkdir(parents=True, exist_ok=True)
    accs = simulate_runs(state, probe, args.g, args.photons, args.seed, args.shards, args.records)
    doc = summary_dict(accs, config_echo(args, state))
    emit(render(doc, args.format), args.out)
    return EXIT_OK


def _load_or_run(args):
    if args.summary is not None:
        try:
            summary = json.loads(Path(args.summary).read_text())
        except OSError as exc:
            raise OSError(f"cannot read {args.summary}: {exc.strerror or exc}") from exc
        except json.JSONDecodeError as exc:
            raise UsageError(f"{args.summary}: invalid JSON ({exc})") from exc
        state, probe, cfg, accs = accumulators_from_summary(summary)
        return state, probe, cfg, accs
    state = state_from_args(args)
    probe = GaussianProbe(args.sigma)
    accs = simulate_runs(state, probe, args.g, args.photons, args.seed, args.shards)
    return state, probe, config_echo(args, state), accs


def cmd_estimate(args) -> int:
    state, probe, cfg, accs = _load_or_run(args)
    estimates = estimate_report(state, probe, accs, args.k)
    doc = {"provenance": provenance("estimate", cfg), "estimates": estimates}
    emit(render(doc, args.format), args.out)
    if estimates["consistency"].get("passed") is False:
        log.error("consistency relation violated: residual %.4g > %g x %.4g",
                  estimates["consistency"]["residual"], args.k, estimates["consistency"]["std_error"])
        return EXIT_TOLERANCE
    return EXIT_OK


def cmd_tomography(args) -> int:
    state, probe, cfg, accs = _load_or_run(args)
    xi = {arm: xi_from_runs(accs[arm, "position"], accs[arm, "momentum"], probe) for arm in ARMS}
    doc = {"provenance": provenance("tomography", cfg)}
    for port in PORTS:
        doc[f"ratio[{port}]"] = _entry(lambda: tomography(xi["B"], xi["C"], port), state.gamma / state.beta)
    try:
        combined = combined_tomography(xi["B"], xi["C"])
    except DegenerateDenominator as exc:
        doc["reconstructed"] = {"status": "skipped (degenerate)", "reason": str(exc)}
    else:
        rec = state_from_ratio(combined.point)
        doc["ratio[combined]"] = combined.to_dict()
        doc["reconstructed"] = {
            "beta": _c(rec.beta),
            "gamma": _c(rec.gamma),
            "fidelity_vs_input": fidelity(rec, state),
        }
    emit(render(doc, args.format), args.out)
    return EXIT_OK


SWEEP_FIELDS = (
    "sweep", "value", "estimator", "point_re", "point_im", "std_error",
    "truth_re", "truth_im", "bias_re", "bias_im", "model_bias_re", "model_bias_im",
)


def _parse_list(text: str, kind):
    try:
        vals = [kind(float(v)) if kind is int else kind(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"bad sweep list {text!r}") from exc
    if len(vals) < 2:
        raise UsageError("a sweep needs at least 2 points")
    return vals


def sweep_rows(state, probe, points, g_fixed, photons, seed, shards, over: str) -> list:
    rows = []
    wv = theoretical_weak_value(state, "B", "D")
    ratio = state.gamma / state.beta
    for value in points:
        g = value if over == "g" else g_fixed
        n = photons if over == "g" else int(value)
        accs = simulate_runs(state, probe, g, n, seed, shards)
        xi = {arm: xi_from_runs(accs[arm, "position"], accs[arm, "momentum"], probe) for arm in ARMS}
        ex = {arm: expected_shifts(state, probe, g, n, arm) for arm in ARMS}
        ex_acc_shift = ex["B"]["D"] / (g * ex["B"].n_port["D"])
        cases = [
            ("shift[B,D]", lambda: wv_from_shift(accs["B", "position"], "D"), complex(wv.real), complex(ex_acc_shift.real)),
            ("complex_wv[D]", lambda: complex_wv(xi["B"], xi["C"], "D"), wv, ex["B"]["D"] / (ex["B"]["D"] + ex["C"]["D"])),
            ("tomography[D]", lambda: tomography(xi["B"], xi["C"], "D"), ratio, ex["C"]["D"] / ex["B"]["D"]),
        ]
        for name, fn, truth, noise_free in cases:
            row = {"sweep": over, "value": value, "estimator": name}
            try:
                rep = fn()
                p = complex(rep.point)
                row.update(point_re=p.real, point_im=p.imag, std_error=rep.std_error,
                           bias_re=(p - truth).real, bias_im=(p - truth).imag)
            except DegenerateDenominator:
                row.update(point_re="skipped (degenerate)")
            row.update(truth_re=truth.real, truth_im=truth.imag,
                       model_bias_re=(noise_free - truth).real, model_bias_im=(noise_free - truth).imag)
            rows.append(row)
    return rows


def cmd_sweep(args) -> int:
    state = state_from_args(args)
    probe = GaussianProbe(args.sigma)
    if (args.g_list is None) == (args.n_list is None):
        raise UsageError("give exactly one of --g-list or --n-list")
    if args.g_list is not None:
        points, over = _parse_list(args.g_list, float), "g"
    else:
        points, over = _parse_list(args.n_list, int), "photons"
    rows = sweep_rows(state, probe, points, args.g, args.photons, args.seed, args.shards, over)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=SWEEP_FIELDS, lineterminator="\n", restval="")
    w.writeheader()
    w.writerows(rows)
    emit(buf.getvalue(), args.out)
    return EXIT_OK


def paper_example_checks(estimates: dict, k: float = 3.0) -> dict:
    """Pass/fail of the worked example's tolerances given an ``estimate_report``."""
    checks = {}
    cw = estimates["complex_wv[D]"]
    if cw["status"] == "ok":
        err = abs(complex(cw["point_re"], cw["point_im"]) - (-1))
        checks["complex_wv_D"] = err <= max(0.05, 3 * cw["std_error"])
    else:
        checks["complex_wv_D"] = False
    tm = estimates["tomography[D]"]
    if tm["status"] == "ok":
        checks["tomography_ratio"] = abs(complex(tm["point_re"], tm["point_im"]) - (-2)) <= 3 * tm["std_error"]
    else:
        checks["tomography_ratio"] = False
    checks["consistency"] = bool(estimates["consistency"].get("passed"))
    return checks


def cmd_paper_example(args) -> int:
    state = MziState(EXAMPLE_BETA, EXAMPLE_GAMMA)
    probe = GaussianProbe(args.sigma)
    accs = simulate_runs(state, probe, args.g, args.photons, args.seed, args.shards)
    estimates = estimate_report(state, probe, accs)
    z_b = accs["B", "position"].ports["D"].z_sum
    z_c = accs["C", "position"].ports["D"].z_sum
    checks = paper_example_checks(estimates)
    cfg = {
        "beta": [EXAMPLE_BETA, 0.0],
        "gamma": [EXAMPLE_GAMMA, 0.0],
        "g": args.g,
        "sigma": args.sigma,
        "photons": args.photons,
        "seed": args.seed,
        "shards": args.shards,
    }
    doc = {
        "provenance": provenance("paper-example", cfg),
        "analytic_wv_BD": _c(theoretical_weak_value(state, "B", "D")),
        "complex_wv_D": estimates["complex_wv[D]"],
        "z_ratio_BD_over_CD": z_b / z_c,
        "z_sums_D": {"B": z_b, "C": z_c, "scaled_to_B=-1": [-1.0, -z_c / z_b]},
        "tomography_ratio_D": estimates["tomography[D]"],
        "consistency": estimates["consistency"],
        "checks": checks,
        "passed": all(checks.values()),
    }
    emit(render(doc, args.format), args.out)
    return EXIT_OK if doc["passed"] else EXIT_TOLERANCE


# -- parser ---------------------------------------------------------------------------------


def _state_flags(p):
    p.add_argument("--beta-re", type=float, default=1 / math.sqrt(2))
    p.add_argument("--beta-im", type=float, default=0.0)
    p.add_argument("--gamma-re", type=float, default=1 / math.sqrt(2))
    p.add_argument("--gamma-im", type=float, default=0.0)


def _run_flags(p, photons=1_000_000):
    p.add_argument("--g", type=float, default=0.05, help="coupling in units of the probe width")
    p.add_argument("--sigma", type=float, default=1.0, help="probe position width")
    p.add_argument("--photons", type=int, default=photons, help="photons per run (per arm and mode)")
    p.add_argument("--seed", type=int, default=20240601)
    p.add_argument("--shards", type=int, default=1)


def _out_flags(p):
    p.add_argument("--out", default=None, help="output file (default: stdout)")
    p.add_argument("--format", choices=("json", "csv"), default="json")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wvbayes", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analytic", help="closed-form weak values, Bayes duals, phases, bounds")
    _state_flags(p)
    _out_flags(p)
    p.set_defaults(func=cmd_analytic)

    p = sub.add_parser("simulate", help="run both glass placements in both probe modes")
    _state_flags(p)
    _run_flags(p)
    _out_flags(p)
    p.add_argument("--records", default=None, metavar="DIR", help="write per-photon CSVs into DIR")
    p.set_defaults(func=cmd_simulate)

    for name, func, help_ in (
        ("estimate", cmd_estimate, "all estimators with error bars and analytic truth"),
        ("tomography", cmd_tomography, "reconstruct (beta, gamma) from complex shifts"),
    ):
        p = sub.add_parser(name, help=help_)
        _state_flags(p)
        _run_flags(p)
        _out_flags(p)
        p.add_argument("--summary", default=None, help="reuse a saved simulate summary instead of running")
        p.add_argument("--k", type=float, default=3.0, help="consistency threshold in standard errors")
        p.set_defaults(func=func)

    p = sub.add_parser("sweep", help="estimator bias and error bars versus g or N (CSV)")
    _state_flags(p)
    _run_flags(p, photons=100_000)
    p.add_argument("--g-list", default=None, help="comma-separated couplings")
    p.add_argument("--n-list", default=None, help="comma-separated photon counts")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("paper-example", help="full pipeline on beta=sqrt(1/5), gamma=-sqrt(4/5)")
    _run_flags(p)
    _out_flags(p)
    p.set_defaults(func=cmd_paper_example)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        parser.print_usage(sys.stderr)
        print(f"wvbayes: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"wvbayes: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except WeakValueError as exc:
        print(f"wvbayes: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
