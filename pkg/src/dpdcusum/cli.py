"""Command-line interface: fit, test, segment, critval, simulate, forecast.

Every command writes a human-readable report (stdout or ``--output``) and,
with ``--json PATH``, a machine-readable one.  Machine output is
byte-identical across reruns with the same arguments and seed, independent
of ``--threads``.  Exit codes: 0 success, 1 analysis error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import critical
from .binseg import default_min_len, segment
from .cusum import dpd_test, residual_cusum_test
from .errors import AnalysisError
from .fit import FitOptions, fit
from .forecast import one_step_forecasts, select_alpha
from .models import make_model
from .series import Series, load_series, log_returns
from .simulate import ScenarioSpec, size_power_experiment


def _positive_int(text: str) -> int:
    value = int(text)
    if value <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _level(text: str) -> float:
    value = float(text)
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(f"level must be in (0, 1), got {text}")
    return value


def _alpha_list(text: str) -> tuple[float, ...]:
    try:
        values = tuple(float(v) for v in text.replace(",", " ").split())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad alpha list: {text!r}")
    if not values or any(a < 0 for a in values):
        raise argparse.ArgumentTypeError("alphas must be nonnegative numbers")
    return values


def _add_input_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", required=True, help="delimited text file of observations")
    p.add_argument("--column", default=None, help="value column (name or 0-based index)")
    p.add_argument("--date-column", default=None, help="label column attached to reports")
    p.add_argument(
        "--returns-from-prices",
        action="store_true",
        help="transform prices to log returns (scale 100) before analysis",
    )
    p.add_argument("--scale", type=float, default=100.0, help="log-return scale factor")


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", choices=("normal", "garch"), default="normal")
    p.add_argument("--p", type=_positive_int, default=1, help="GARCH arch order")
    p.add_argument("--q", type=int, default=1, help="GARCH garch order")


def _add_fit_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--alpha", type=float, default=None, help="DPD exponent (default 0.1)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-iter", type=_positive_int, default=500)
    p.add_argument("--tol", type=float, default=1e-8, help="relative gradient tolerance")
    p.add_argument("--starts", type=_positive_int, default=3, help="multi-start count")


def _add_crit_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--cache-dir", default=None, help=f"overrides ${critical.CACHE_ENV_VAR}")
    p.add_argument("--crit-grid", type=_positive_int, default=critical.DEFAULT_GRID_STEPS)
    p.add_argument("--crit-reps", type=_positive_int, default=critical.DEFAULT_REPLICATIONS)
    p.add_argument("--crit-seed", type=int, default=critical.DEFAULT_SEED)
    p.add_argument("--no-cache", action="store_true", help="do not read or write the cache")
    p.add_argument("--threads", type=_positive_int, default=1, help="worker cap (results unchanged)")


def _add_output_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--output", default=None, help="write the text report here instead of stdout")
    p.add_argument("--json", default=None, metavar="PATH", help="write JSON report ('-' = stdout)")


def _fit_options(args) -> FitOptions:
    return FitOptions(max_iter=args.max_iter, tol_rel=args.tol, starts=args.starts, seed=args.seed)


def _load_input(args) -> Series:
    series = load_series(args.input, column=_maybe_index(args.column),
                         date_column=_maybe_index(args.date_column))
    if args.returns_from_prices:
        series = log_returns(series, scale=args.scale)
    return series


def _maybe_index(col):
    if col is None:
        return None
    try:
        return int(col)
    except ValueError:
        return col


def _model(args):
    return make_model(args.model, args.p, args.q)


def _get_table(args, dim: int, statistic: str = critical.SUP_NORM_SQ) -> critical.CritTable:
    return critical.get_table(
        dim,
        statistic=statistic,
        grid_steps=args.crit_grid,
        replications=args.crit_reps,
        seed=args.crit_seed,
        directory=args.cache_dir,
        threads=args.threads,
        use_cache=not args.no_cache,
    )


def _emit(args, text: str, payload: dict) -> None:
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if args.json:
        blob = json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n"
        if args.json == "-":
            sys.stdout.write(blob)
        else:
            with open(args.json, "w", encoding="utf-8") as fh:
                fh.write(blob)


def _fmt(value) -> str:
    if isinstance(value, float):
        return format(value, ".6g")
    return str(value)


def _kv_text(pairs) -> str:
    return "".join(f"{k}: {_fmt(v)}\n" for k, v in pairs)


# -- commands ----------------------------------------------------------------


def cmd_fit(args) -> int:
    series = _load_input(args)
    model = _model(args)
    alpha = 0.1 if args.alpha is None else args.alpha
    result = fit(model, series, alpha, _fit_options(args))
    payload = {
        "command": "fit",
        "model": model.name,
        "alpha": alpha,
        "n": series.n,
        "theta_hat": model.describe(result.theta_hat),
        "objective": result.objective,
        "grad_norm": result.grad_norm,
        "iterations": result.iterations,
        "converged": result.converged,
        "starts_tried": result.starts_tried,
    }
    pairs = [("model", model.name), ("alpha", alpha), ("n", series.n)]
    pairs += sorted(model.describe(result.theta_hat).items())
    pairs += [
        ("objective", result.objective),
        ("grad_norm", result.grad_norm),
        ("converged", result.converged),
    ]
    _emit(args, _kv_text(pairs), payload)
    return 0


def cmd_test(args) -> int:
    series = _load_input(args)
    model = _model(args)
    if args.method == "residual":
        if model.name != "garch":
            raise AnalysisError("the residual CUSUM test is defined for GARCH models")
        alpha = 0.0 if args.alpha is None else args.alpha
        fit_result = fit(model, series, alpha, _fit_options(args))
        table = _get_table(args, 1, statistic=critical.SUP_ABS)
        outcome = residual_cusum_test(series, fit_result.theta_hat, table, level=args.level)
    else:
        alpha = 0.1 if args.alpha is None else args.alpha
        table = _get_table(args, model.dim)
        outcome = dpd_test(model, series, alpha, table, level=args.level,
                           fit_options=_fit_options(args))
        fit_result = outcome.fit
    payload = outcome.to_dict(include_process=True)
    payload["command"] = "test"
    payload["model"] = model.name
    payload["theta_hat"] = model.describe(fit_result.theta_hat)
    change_stamp = None
    if series.timestamps is not None and outcome.rejected:
        change_stamp = series.timestamps[outcome.change_point - 1]
        payload["change_timestamp"] = change_stamp
    pairs = [
        ("method", outcome.method),
        ("model", model.name),
        ("alpha", outcome.alpha),
        ("n", outcome.n),
        ("statistic", outcome.statistic),
        ("critical_value", outcome.critical_value),
        ("p_value", outcome.p_value),
        ("level", outcome.level),
        ("rejected", outcome.rejected),
        ("change_point", outcome.change_point if outcome.rejected else "none"),
    ]
    if change_stamp:
        pairs.append(("change_timestamp", change_stamp))
    pairs += sorted(model.describe(fit_result.theta_hat).items())
    _emit(args, _kv_text(pairs), payload)
    return 0


def cmd_segment(args) -> int:
    series = _load_input(args)
    model = _model(args)
    alpha = 0.1 if args.alpha is None else args.alpha
    table = _get_table(args, model.dim)
    result = segment(
        model,
        series,
        alpha,
        table,
        level=args.level,
        min_len=args.min_len,
        fit_options=_fit_options(args),
    )
    payload = result.to_dict(timestamps=series.timestamps)
    payload["command"] = "segment"
    payload["model"] = model.name
    payload["alpha"] = alpha
    payload["level"] = args.level
    payload["n"] = series.n
    lines = [f"model: {model.name}", f"alpha: {_fmt(alpha)}", f"n: {series.n}",
             f"change_points: {len(result.change_points)}"]
    for cp in result.change_points:
        stamp = f" ({series.timestamps[cp - 1]})" if series.timestamps else ""
        lines.append(f"  change at {cp}{stamp}")
    for start, end, fr in result.segments:
        desc = "fit failed" if fr is None else " ".join(
            f"{k}={_fmt(v)}" for k, v in sorted(model.describe(fr.theta_hat).items())
        )
        span = f"{start}..{end}"
        if series.timestamps:
            span += f" ({series.timestamps[start - 1]} .. {series.timestamps[end - 1]})"
        lines.append(f"segment {span}: {desc}")
    _emit(args, "\n".join(lines) + "\n", payload)
    return 0


def cmd_critval(args) -> int:
    table = _get_table(args, args.dim, statistic=args.statistic)
    levels = args.levels
    quantiles = {format(lv, "g"): critical.quantile(table, lv) for lv in levels}
    payload = {
        "command": "critval",
        "dim": table.dim,
        "statistic": table.statistic,
        "grid_steps": table.grid_steps,
        "replications": table.replications,
        "seed": table.seed,
        "quantiles": quantiles,
    }
    pairs = [("dim", table.dim), ("statistic", table.statistic),
             ("grid_steps", table.grid_steps), ("replications", table.replications)]
    pairs += [(f"q{lv}", q) for lv, q in sorted(quantiles.items())]
    _emit(args, _kv_text(pairs), payload)
    return 0


def cmd_simulate(args) -> int:
    spec = ScenarioSpec.from_file(args.scenario)
    if args.seed is not None:
        spec = ScenarioSpec(**{**spec.__dict__, "seed": args.seed})
    if args.replications is not None:
        spec = ScenarioSpec(**{**spec.__dict__, "replications": args.replications})
    table = _get_table(args, spec.model.dim)
    result = size_power_experiment(spec, table, threads=args.threads)
    payload = result.to_dict()
    payload["command"] = "simulate"
    payload["scenario"] = spec.name
    payload["seed"] = spec.seed
    _emit(args, result.to_text(), payload)
    return 0


def cmd_forecast(args) -> int:
    series = _load_input(args)
    model = make_model("garch", args.p, args.q)
    window = (args.window[0], args.window[1])
    options = _fit_options(args)
    if args.select_alpha:
        table = _get_table(args, model.dim)
        alphas = args.alphas if args.alphas else (0.0, 0.1, 0.2, 0.3, 0.5)
        best, reports = select_alpha(
            series, alphas, window, table, level=args.level,
            min_len=args.min_len, refit_every=args.refit_every, model=model,
            fit_options=options,
        )
        payload = {
            "command": "forecast",
            "selected_alpha": best,
            "reports": {format(a, "g"): r.to_dict() for a, r in sorted(reports.items())},
        }
        lines = ["alpha,t_c,rmse"]
        for a, r in sorted(reports.items()):
            lines.append(f"{a:g},{r.t_c},{_fmt(r.rmse)}")
        lines.append(f"selected_alpha,{best:g}")
        _emit(args, "\n".join(lines) + "\n", payload)
        return 0
    alpha = 0.1 if args.alpha is None else args.alpha
    report = one_step_forecasts(
        series, alpha, args.t_c, window, refit_every=args.refit_every,
        model=model, fit_options=options,
    )
    payload = report.to_dict()
    payload["command"] = "forecast"
    lines = ["t,forecast,proxy"]
    start, end = report.window
    for pos, t in enumerate(range(start, end + 1)):
        proxy = series.values[t] ** 2
        value = report.forecasts[pos]
        lines.append(f"{t},{_fmt(float(value)) if np.isfinite(value) else 'missing'},{_fmt(proxy)}")
    lines.append(f"rmse,{_fmt(report.rmse)}")
    _emit(args, "\n".join(lines) + "\n", payload)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dpdcusum",
        description="Robust parameter-change detection via DPD score-CUSUM tests.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="estimate model parameters by minimum DPD")
    for add in (_add_input_flags, _add_model_flags, _add_fit_flags, _add_output_flags):
        add(p_fit)
    p_fit.set_defaults(func=cmd_fit)

    p_test = sub.add_parser("test", help="test for a parameter change")
    for add in (_add_input_flags, _add_model_flags, _add_fit_flags, _add_crit_flags,
                _add_output_flags):
        add(p_test)
    p_test.add_argument("--level", type=_level, default=0.05)
    p_test.add_argument("--method", choices=("dpd", "residual"), default="dpd")
    p_test.set_defaults(func=cmd_test)

    p_seg = sub.add_parser("segment", help="locate multiple change points")
    for add in (_add_input_flags, _add_model_flags, _add_fit_flags, _add_crit_flags,
                _add_output_flags):
        add(p_seg)
    p_seg.add_argument("--level", type=_level, default=0.05)
    p_seg.add_argument("--min-len", type=_positive_int, default=None,
                       help=f"minimum segment length (default {default_min_len(2)}+ by model)")
    p_seg.set_defaults(func=cmd_segment)

    p_crit = sub.add_parser("critval", help="Monte Carlo critical values")
    _add_crit_flags(p_crit)
    _add_output_flags(p_crit)
    p_crit.add_argument("--dim", type=_positive_int, required=True)
    p_crit.add_argument("--levels", type=_alpha_list, default=(0.90, 0.95, 0.99))
    p_crit.add_argument("--statistic", choices=(critical.SUP_NORM_SQ, critical.SUP_ABS),
                        default=critical.SUP_NORM_SQ)
    p_crit.set_defaults(func=cmd_critval)

    p_sim = sub.add_parser("simulate", help="size/power experiment from a scenario file")
    _add_crit_flags(p_sim)
    _add_output_flags(p_sim)
    p_sim.add_argument("--scenario", required=True)
    p_sim.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p_sim.add_argument("--replications", type=_positive_int, default=None,
                       help="override the scenario replication count")
    p_sim.set_defaults(func=cmd_simulate)

    p_fc = sub.add_parser("forecast", help="rolling one-step variance forecasts")
    for add in (_add_input_flags, _add_fit_flags, _add_crit_flags, _add_output_flags):
        add(p_fc)
    p_fc.add_argument("--p", type=_positive_int, default=1)
    p_fc.add_argument("--q", type=int, default=1)
    p_fc.add_argument("--window", type=_positive_int, nargs=2, required=True,
                      metavar=("START", "END"), help="1-based forecast origin range")
    p_fc.add_argument("--t-c", type=int, default=0, help="last change point (0 = none)")
    p_fc.add_argument("--refit-every", type=_positive_int, default=1)
    p_fc.add_argument("--select-alpha", action="store_true",
                      help="segment per candidate alpha and pick the smallest RMSE")
    p_fc.add_argument("--alphas", type=_alpha_list, default=None)
    p_fc.add_argument("--level", type=_level, default=0.05)
    p_fc.add_argument("--min-len", type=_positive_int, default=None)
    p_fc.set_defaults(func=cmd_forecast)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except AnalysisError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
