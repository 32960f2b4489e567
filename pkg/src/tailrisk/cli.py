"""Command-line front door: model/sample ingestion, run configuration,
dispatch into the measure, allocation, reinsurance, and portfolio layers,
deterministic machine-readable output.

Output contract: identical config plus seed produces identical bytes. JSON
carries the full result envelope (tool version, config echo, records,
wall time, warnings); CSV carries the records table alone. Files are
written atomically (temp file in the target directory, then rename), and
nothing is written on a nonzero exit. Wall time is null unless --timing is
passed, so timing never breaks byte-level golden comparisons.

Exit codes: 0 success, 2 malformed flags/config/CSV, 3 well-formed but
mathematically rejected inputs (domain, mgf, feasibility, discrepancy).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
import time

import numpy as np

from . import measures, reinsurance, symmetric
from .allocation import JointSample, allocation_gap, contribution
from .errors import DiscrepancyError, TailRiskError, UsageError
from .measures import RiskReport
from .portfolio import (EllipticalModel, brute_force_min, min_risk_weights,
                        portfolio_tcerm)
from .samples import SampleSet, read_matrix_csv, read_sample_csv
from .selftest import run_selftest
from .serialize import dumps_json, format_float
from .symmetric import SymmetricModel
from .utilities import UtilityFunction

TOOL = "tailrisk 0.1.0"

WARN_ENTROPIC_SIGN = ("entropic closed forms add (1/gamma) log of the survival "
                      "ratio with a plus sign; see README section 'Sign conventions'")
WARN_TAYLOR_SIGN = ("the second-order expansion subtracts half the Arrow-Pratt "
                    "coefficient times the tail variance, so exp:gamma gives "
                    "cte + (gamma/2)*tv; see README section 'Sign conventions'")

_CONFIG_KEYS = ("model", "input", "alpha", "gamma", "utility", "theta",
                "budget", "seed", "paths", "format")


# -- configuration -----------------------------------------------------------

def _load_config_file(path: str) -> dict:
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path!r}: {exc}") from exc
    try:
        import tomllib  # Python >= 3.11
    except ModuleNotFoundError:
        import tomli as tomllib
    try:
        return tomllib.loads(raw.decode("utf-8"))
    except Exception:
        pass
    try:
        out = json.loads(raw.decode("utf-8"))
    except Exception as exc:
        raise UsageError(f"config file {path!r} is neither valid TOML nor JSON") from exc
    if not isinstance(out, dict):
        raise UsageError(f"config file {path!r} must hold a table/object at top level")
    return out


def _as_float_list(value, flag: str) -> list:
    if value is None:
        return []
    items = []
    if isinstance(value, (int, float)):
        items = [value]
    elif isinstance(value, str):
        items = [p for p in value.split(",") if p.strip() != ""]
    elif isinstance(value, (list, tuple)):
        for v in value:
            items.extend(_as_float_list(v, flag))
        return items
    else:
        raise UsageError(f"{flag} must be a number, comma list, or array, got {value!r}")
    out = []
    for p in items:
        try:
            out.append(float(p))
        except (TypeError, ValueError) as exc:
            raise UsageError(f"bad numeric literal for {flag}: {p!r}") from exc
    return out


def _as_str_list(value, flag: str) -> list:
    if value is None:
        return []
    if isinstance(value, str):
        return [p.strip() for p in value.split(",") if p.strip() != ""]
    if isinstance(value, (list, tuple)):
        out = []
        for v in value:
            out.extend(_as_str_list(v, flag))
        return out
    raise UsageError(f"{flag} must be a string or array of strings, got {value!r}")


def _merge_config(args: argparse.Namespace) -> dict:
    base = _load_config_file(args.config) if args.config else {}
    unknown = set(base) - set(_CONFIG_KEYS) - {"out", "timing", "mu", "sigma"}
    if unknown:
        raise UsageError(f"unknown config file keys: {sorted(unknown)!r}")

    def pick(name, flag_value):
        return flag_value if flag_value not in (None, []) else base.get(name)

    cfg = {
        "command": args.command,
        "model": pick("model", args.model),
        "input": pick("input", args.input),
        "alpha": _as_float_list(pick("alpha", args.alpha), "--alpha"),
        "gamma": _as_float_list(pick("gamma", args.gamma), "--gamma"),
        "utility": _as_str_list(pick("utility", args.utility), "--utility"),
        "theta": pick("theta", args.theta),
        "budget": pick("budget", args.budget),
        "seed": int(pick("seed", args.seed) or 0),
        "paths": pick("paths", args.paths),
        "format": pick("format", args.format),
        "out": args.out,
        "timing": bool(args.timing),
        "mu": base.get("mu"),
        "sigma": base.get("sigma"),
    }
    if cfg["paths"] is not None:
        cfg["paths"] = int(cfg["paths"])
        if cfg["paths"] < 1:
            raise UsageError(f"--paths must be >= 1, got {cfg['paths']!r}")
    for a in cfg["alpha"]:
        if not 0.0 < a < 1.0:
            raise UsageError(f"--alpha values must lie in (0,1), got {a!r}")
    if cfg["format"] is None:
        cfg["format"] = "csv" if args.command == "sweep" else "json"
    if cfg["format"] not in ("json", "csv"):
        raise UsageError(f"--format must be json or csv, got {cfg['format']!r}")
    return cfg


def _config_echo(cfg: dict) -> dict:
    # --out is a destination, not an input: excluded so the same analysis
    # written to different paths compares byte-identical
    echo = {}
    for k in _CONFIG_KEYS:
        v = cfg.get(k)
        if k in ("alpha", "gamma") and not v:
            v = None
        if k == "utility" and not v:
            v = None
        echo[k] = v
    return echo


# -- output ------------------------------------------------------------------

def _envelope(cfg: dict, records: list, warnings: list, wall: float | None) -> dict:
    return {
        "tool": TOOL,
        "command": cfg["command"],
        "config": _config_echo(cfg),
        "records": records,
        "wall_time_s": wall,
        "warnings": warnings,
    }


def _records_csv(records: list) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if not records:
        return ""
    cols = list(records[0].keys())
    w.writerow(cols)
    for rec in records:
        row = []
        for c in cols:
            v = rec.get(c)
            if v is None:
                row.append("")
            elif isinstance(v, float):
                row.append(format_float(v))
            else:
                row.append(str(v))
        w.writerow(row)
    return buf.getvalue()


def _render(cfg: dict, records: list, warnings: list, wall: float | None) -> str:
    if cfg["format"] == "csv":
        return _records_csv(records)
    return dumps_json(_envelope(cfg, records, warnings, wall))


def _write_output(text: str, out_path: str | None) -> None:
    if out_path is None:
        sys.stdout.write(text)
        return
    target = os.path.abspath(out_path)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(target), prefix=".tailrisk-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# -- shared ingestion ----------------------------------------------------------

def _resolve_loss(cfg: dict):
    """Returns (source_label, SampleSet or SymmetricModel)."""
    if cfg.get("input"):
        try:
            return "empirical", read_sample_csv(cfg["input"])
        except OSError as exc:
            raise UsageError(f"cannot read sample CSV {cfg['input']!r}: {exc}") from exc
    if cfg.get("model"):
        model = SymmetricModel.parse(cfg["model"])
        if cfg.get("paths"):
            return "empirical", symmetric.sample(model, cfg["paths"], cfg["seed"])
        return "analytic", model
    raise UsageError("need --model or --input to define the loss")


def _single(values: list, flag: str):
    if len(values) != 1:
        raise UsageError(f"{flag} needs exactly one value here, got {len(values)}")
    return values[0]


# -- measure -------------------------------------------------------------------

def _warn(warnings: list, msg: str) -> None:
    if msg not in warnings:
        warnings.append(msg)


def _measure_block(source: str, obj, alpha: float) -> tuple:
    """(var, cte, tv, base records) for one alpha; tv may be None when the
    generator cannot support it and no utility requires it."""
    if source == "empirical":
        v = measures.var_empirical(obj, alpha)
        cte = measures.cte_empirical(obj, alpha)
        tv = measures.tail_variance_empirical(obj, alpha)
        se = {
            "var": measures.standard_error(obj, lambda ss: measures.var_empirical(ss, alpha)),
            "cte": measures.standard_error(obj, lambda ss: measures.cte_empirical(ss, alpha)),
            "tv": measures.standard_error(
                obj, lambda ss: measures.tail_variance_empirical(ss, alpha)),
        }
    else:
        v = measures.var_analytic(obj, alpha)
        cte = measures.cte_analytic(obj, alpha)
        tv = measures.tail_variance_analytic(obj, alpha)
        se = {"var": None, "cte": None, "tv": None}
    recs = [
        RiskReport(alpha, "var", "", v, se["var"], source).to_dict(),
        RiskReport(alpha, "cte", "", cte, se["cte"], source).to_dict(),
        RiskReport(alpha, "tail_variance", "", tv, se["tv"], source).to_dict(),
    ]
    return v, cte, tv, recs


def _tqlm_value(source: str, obj, alpha: float, u: UtilityFunction):
    if source == "empirical":
        value = measures.tqlm_empirical(obj, alpha, u)
        se = measures.standard_error(obj, lambda ss: measures.tqlm_empirical(ss, alpha, u))
        return value, se
    return measures.tqlm_analytic(obj, alpha, u), None


def _tcerm_record(source: str, obj, alpha: float, gamma: float, warnings: list) -> dict:
    uspec = UtilityFunction.exponential(gamma).spec_string()
    if source == "empirical":
        value = measures.tcerm_empirical(obj, alpha, gamma)
        se = measures.standard_error(obj, lambda ss: measures.tcerm_empirical(ss, alpha, gamma))
        return RiskReport(alpha, "tcerm", uspec, value, se, source).to_dict()
    _warn(warnings, WARN_ENTROPIC_SIGN)
    if obj.generator == "normal":
        value = measures.tcerm_normal(obj.mu, obj.sigma, alpha, gamma)
        return RiskReport(alpha, "tcerm", uspec, value, None, "closed_form").to_dict()
    value = measures.tcerm_analytic(obj, alpha, gamma)
    return RiskReport(alpha, "tcerm", uspec, value, None, "structured").to_dict()


def _sandwich_note(u: UtilityFunction, margin: float) -> str:
    kind = u.curvature()
    if kind == "linear":
        holds = abs(margin) <= 1e-9
        want = "tqlm equals cte"
    elif kind == "concave":
        holds = margin <= 1e-9
        want = "tqlm <= cte"
    else:
        holds = margin >= -1e-9
        want = "tqlm >= cte"
    status = "holds" if holds else "VIOLATED"
    return f"{kind} utility: expected {want}; {status}"


def cmd_measure(cfg: dict) -> tuple:
    alphas = cfg["alpha"]
    if not alphas:
        raise UsageError("measure needs at least one --alpha")
    specs = cfg["utility"] or ["linear"]
    utils = [UtilityFunction.parse(s) for s in specs]
    source, obj = _resolve_loss(cfg)
    warnings, records = [], []
    for alpha in alphas:
        _, cte, tv, recs = _measure_block(source, obj, alpha)
        records.extend(recs)
        for u in utils:
            uspec = u.spec_string()
            value, se = _tqlm_value(source, obj, alpha, u)
            records.append(RiskReport(alpha, "tqlm", uspec, value, se, source).to_dict())
            if u.kind == "exponential":
                records.append(_tcerm_record(source, obj, alpha, u.gamma, warnings))
                _warn(warnings, WARN_TAYLOR_SIGN)
                taylor = measures.taylor_tqlm(cte, tv, u, cte)
                records.append(
                    RiskReport(alpha, "taylor", uspec, taylor, None, source).to_dict())
                margin = value - cte
                records.append(RiskReport(alpha, "sandwich_margin", uspec, margin,
                                          None, source,
                                          note=_sandwich_note(u, margin)).to_dict())
    return records, warnings


# -- sweep ---------------------------------------------------------------------

def cmd_sweep(cfg: dict) -> tuple:
    alphas = sorted(cfg["alpha"])
    gammas = sorted(cfg["gamma"])
    if not alphas or not gammas:
        raise UsageError("sweep needs a nonempty --alpha x --gamma grid")
    source, obj = _resolve_loss(cfg)
    warnings, records = [], []
    for alpha in alphas:
        if source == "empirical":
            v = measures.var_empirical(obj, alpha)
            cte = measures.cte_empirical(obj, alpha)
            tv = measures.tail_variance_empirical(obj, alpha)
        else:
            v = measures.var_analytic(obj, alpha)
            cte = measures.cte_analytic(obj, alpha)
            tv = measures.tail_variance_analytic(obj, alpha)
        for gamma in gammas:
            if source == "empirical":
                tq = measures.tcerm_empirical(obj, alpha, gamma)
            else:
                _warn(warnings, WARN_ENTROPIC_SIGN)
                if obj.generator == "normal":
                    tq = measures.tcerm_normal(obj.mu, obj.sigma, alpha, gamma)
                else:
                    tq = measures.tcerm_analytic(obj, alpha, gamma)
            records.append({"alpha": alpha, "gamma": gamma, "var": v, "cte": cte,
                            "tail_variance": tv, "tqlm": tq})
    return records, warnings


# -- allocate --------------------------------------------------------------------

def cmd_allocate(cfg: dict) -> tuple:
    if not cfg.get("input"):
        raise UsageError("allocate needs --input with columns-as-components scenarios")
    alpha = _single(cfg["alpha"], "--alpha")
    uspec = _single(cfg["utility"] or ["linear"], "--utility")
    u = UtilityFunction.parse(uspec)
    try:
        names, matrix = read_matrix_csv(cfg["input"])
    except OSError as exc:
        raise UsageError(f"cannot read scenario CSV {cfg['input']!r}: {exc}") from exc
    j = JointSample(matrix.T, names=names)
    records = []
    total = measures.tqlm_empirical(SampleSet(j.sum_row), alpha, u)
    spec = u.spec_string()
    for i in range(j.n_components):
        c = contribution(j, i, alpha, u)
        records.append(RiskReport(alpha, "contribution", spec, c, None,
                                  "empirical", note=j.names[i]).to_dict())
    gap = allocation_gap(j, alpha, u)
    records.append(RiskReport(alpha, "measure_of_sum", spec, total, None,
                              "empirical").to_dict())
    records.append(RiskReport(alpha, "allocation_gap", spec, gap, None,
                              "empirical").to_dict())
    return records, []


# -- reinsure --------------------------------------------------------------------

def cmd_reinsure(cfg: dict) -> tuple:
    alpha = _single(cfg["alpha"], "--alpha")
    if cfg.get("theta") is None or cfg.get("budget") is None:
        raise UsageError("reinsure needs --theta and --budget")
    uspec = _single(cfg["utility"] or ["exp:1.0"], "--utility")
    u = UtilityFunction.parse(uspec)
    source, loss = _resolve_loss(cfg)
    problem = reinsurance.ReinsuranceProblem(
        loss=loss, theta=float(cfg["theta"]), budget=float(cfg["budget"]), alpha=alpha)
    warnings, records = [], []
    a_star = reinsurance.solve_retention(problem)
    bound = reinsurance.feasibility_bound(problem)
    residual = reinsurance.premium(loss, reinsurance.Treaty.stop_loss(a_star),
                                   problem.theta) - problem.budget
    records.append(RiskReport(alpha, "retention", "", a_star, None, source).to_dict())
    records.append(RiskReport(alpha, "feasibility_bound", "", bound, None, source).to_dict())
    records.append(RiskReport(alpha, "premium_residual", "", residual, None, source).to_dict())
    if u.kind == "exponential":
        _warn(warnings, WARN_ENTROPIC_SIGN)
    if u.curvature() == "convex":
        report = reinsurance.verify_optimality(problem, u)
        records.append(RiskReport(alpha, "retained_optimal", u.spec_string(),
                                  report.optimal_value, None, source).to_dict())
        for cand in report.candidates:
            records.append(RiskReport(alpha, "candidate_margin", u.spec_string(),
                                      cand.margin, None, source,
                                      note=cand.treaty_label).to_dict())
    else:
        base = reinsurance.retained_risk(loss, reinsurance.Treaty.stop_loss(a_star),
                                         alpha, u)
        records.append(RiskReport(alpha, "retained_optimal", u.spec_string(),
                                  base, None, source).to_dict())
        _warn(warnings, "optimality comparison skipped: the stop-loss optimality "
                        "argument needs a strictly convex utility")
    return records, warnings


# -- portfolio --------------------------------------------------------------------

def _resolve_elliptical(cfg: dict) -> tuple:
    gen = cfg.get("model") or "normal"
    if gen not in ("normal", "logistic"):
        raise UsageError(
            f"portfolio --model takes a bare generator kind (normal|logistic), got {gen!r}")
    if cfg.get("input"):
        try:
            names, matrix = read_matrix_csv(cfg["input"])
        except OSError as exc:
            raise UsageError(f"cannot read portfolio CSV {cfg['input']!r}: {exc}") from exc
        n = len(names)
        if matrix.shape != (n + 1, n):
            raise UsageError(
                f"portfolio CSV needs 1 location row plus {n} scale rows for "
                f"{n} columns, got {matrix.shape[0]} rows")
        mu, sigma = matrix[0], matrix[1:]
    elif cfg.get("mu") is not None and cfg.get("sigma") is not None:
        mu = np.asarray(cfg["mu"], dtype=float)
        sigma = np.asarray(cfg["sigma"], dtype=float)
        names = [f"x{i + 1}" for i in range(mu.size)]
    else:
        raise UsageError("portfolio needs --input or config arrays mu and sigma")
    return names, EllipticalModel(mu=mu, sigma=sigma, generator=gen)


def cmd_portfolio(cfg: dict) -> tuple:
    alpha = _single(cfg["alpha"], "--alpha")
    gamma = _single(cfg["gamma"], "--gamma")
    names, model = _resolve_elliptical(cfg)
    warnings = [WARN_ENTROPIC_SIGN]
    result = min_risk_weights(model, alpha, gamma, cross_check=False)
    oracle = brute_force_min(model, alpha, gamma)
    margin = float(np.max(np.abs(result.weights.pi - oracle.pi)))
    if margin > 1e-3:
        raise DiscrepancyError(
            f"structured weights differ from the direct-search oracle by {margin!r} "
            f"(tolerance 1e-3)",
            result={"structured": result.weights.pi.tolist(),
                    "direct_search": oracle.pi.tolist()})
    objective = portfolio_tcerm(model, result.weights, alpha, gamma)
    uspec = UtilityFunction.exponential(gamma).spec_string()
    records = []
    for name, w in zip(names, result.weights.pi):
        records.append(RiskReport(alpha, "weight", "", float(w), None,
                                  "structured", note=name).to_dict())
    records.append(RiskReport(alpha, "r_star", "", result.r_star, None,
                              "structured").to_dict())
    records.append(RiskReport(alpha, "objective", uspec, objective, None,
                              "structured").to_dict())
    records.append(RiskReport(alpha, "oracle_margin", "", margin, None,
                              "direct_search").to_dict())
    return records, warnings


# -- selftest --------------------------------------------------------------------

def cmd_selftest(cfg: dict) -> tuple:
    records = []
    for name, ok in run_selftest():
        records.append({"check": name, "status": "pass" if ok else "fail"})
    return records, []


_COMMANDS = {
    "measure": cmd_measure,
    "sweep": cmd_sweep,
    "allocate": cmd_allocate,
    "reinsure": cmd_reinsure,
    "portfolio": cmd_portfolio,
    "selftest": cmd_selftest,
}


# -- entry point -------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tailrisk",
        description="Tail quasi-linear means, entropic tail measures, capital "
                    "allocation, reinsurance retentions, and minimal-risk "
                    "portfolio weights.")
    sub = parser.add_subparsers(dest="command", required=True)
    descriptions = {
        "measure": "VaR, CTE, tail variance, and tail certainty equivalents",
        "sweep": "alpha x gamma grid of tail measures (plot-ready CSV)",
        "allocate": "per-component contributions on the tail of the sum",
        "reinsure": "optimal stop-loss retention under a premium budget",
        "portfolio": "minimal-risk weights for an elliptical return vector",
        "selftest": "run the built-in invariant checks",
    }
    for name, desc in descriptions.items():
        sp = sub.add_parser(name, help=desc, description=desc)
        sp.add_argument("--config", help="TOML or JSON config file; flags override it")
        sp.add_argument("--model", help="model spec like normal(0,1), t(5,0,1), "
                                        "logistic(0,1); bare kind for portfolio")
        sp.add_argument("--input", help="input CSV path (samples, scenarios, or mu/Sigma)")
        sp.add_argument("--alpha", action="append",
                        help="tail level(s) in (0,1); repeatable or comma separated")
        sp.add_argument("--gamma", action="append",
                        help="entropic parameter(s); repeatable or comma separated")
        sp.add_argument("--utility", action="append",
                        help="utility spec(s): linear | exp:<g> | pow:<g> | log | cap:<c>")
        sp.add_argument("--theta", type=float, help="premium loading > 0")
        sp.add_argument("--budget", type=float, help="reinsurance premium budget > 0")
        sp.add_argument("--seed", type=int, help="RNG seed (default 0)")
        sp.add_argument("--paths", type=int,
                        help="Monte-Carlo path count; switches --model runs to empirical")
        sp.add_argument("--format", choices=("json", "csv"),
                        help="output format (default json; sweep defaults to csv)")
        sp.add_argument("--out", help="output path (atomic write); default stdout")
        sp.add_argument("--timing", action="store_true",
                        help="fill wall_time_s (breaks byte determinism)")
    return parser


def run(argv: list | None = None) -> int:
    args = _build_parser().parse_args(argv)
    cfg = _merge_config(args)
    started = time.perf_counter()
    records, warnings = _COMMANDS[cfg["command"]](cfg)
    wall = round(time.perf_counter() - started, 6) if cfg["timing"] else None
    text = _render(cfg, records, warnings, wall)
    _write_output(text, cfg["out"])
    if cfg["command"] == "selftest" and any(r["status"] == "fail" for r in records):
        return 3
    return 0


def main(argv: list | None = None) -> int:
    try:
        return run(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except TailRiskError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
