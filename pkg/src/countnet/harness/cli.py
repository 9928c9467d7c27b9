"""Command-line interface.

Subcommands
-----------
simulate      simulate a GNARI, NGNAR or PNAR(1) process to a series CSV
fit           fit a model to a series CSV and write fit JSON
forecast      mean forecasts from a fit JSON to a forecast CSV
eval          score forecast CSVs against held-out data
select-order  backward-deletion BIC order selection
study         run table1 | table2 | table3 | pipeline

Every subcommand accepts ``--config FILE`` with ``key = value`` lines whose
keys are the flag names; explicit flags override the file. Exit status is
0 on success, 1 on invalid input and 2 on numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from ..baselines import PnarModel, simulate_pnar
from ..design import CountSeries, ModelOrder
from ..gnari import GnariModel, simulate_gnari
from ..network import fig1_network
from ..ngnar import NgnarModel, ResponseFunction, simulate_ngnar
from .config import ConfigError, StudyConfig, config_from_mapping, parse_config_text
from .evaluation import EvalReport
from .io import (
    read_fit_json,
    read_forecast_csv,
    read_network,
    read_series_csv,
    split_train_test,
    write_fit_json,
    write_forecast_csv,
    write_rows_csv,
    write_series_csv,
)
from .models import fit_model, predict
from .selection import backward_bic_path

logger = logging.getLogger("countnet")

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 1, 2


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _floats(text):
    return [float(x) for x in str(text).split(",") if x.strip()]


def _ints(text):
    return [int(x) for x in str(text).split(",") if x.strip()]


def _beta(text):
    """``"0.4"`` or ``"0.2,0.1;0.1"``: lags separated by ``;``, stages by ``,``."""
    return [_floats(part) for part in str(text).split(";")]


def load_network(spec):
    if spec in (None, "fig1"):
        return fig1_network()
    if spec == "bundled":
        from .fixtures import load_covid_fixture

        return load_covid_fixture()[0]
    return read_network(spec)


def load_series(spec) -> CountSeries:
    if spec == "bundled":
        from .fixtures import load_covid_fixture

        return load_covid_fixture()[1]
    return read_series_csv(spec)


def _align(series: CountSeries, net) -> CountSeries:
    """Reorder series rows to the network's node order."""
    if list(series.node_ids) == list(net.node_ids):
        return series
    if sorted(series.node_ids) != sorted(net.node_ids):
        if series.n_nodes == net.node_count and all(i.isdigit() for i in net.node_ids):
            return CountSeries(series.data, node_ids=net.node_ids)
        raise ConfigError("series node ids do not match the network node ids")
    pos = {nid: k for k, nid in enumerate(series.node_ids)}
    return CountSeries(series.data[[pos[n] for n in net.node_ids]], node_ids=net.node_ids)


def _data(args):
    net = load_network(args.net)
    series = _align(load_series(args.data), net)
    if getattr(args, "train", None):
        series = series.window(0, int(args.train))
    return net, series


def _order(args, kind):
    if getattr(args, "order", None):
        with open(args.order) as fh:
            doc = json.load(fh)
        return ModelOrder.from_dict(doc.get("order", doc))
    if kind == "pnar":
        return None
    mode = "innovation" if kind == "gnari" else "intercept"
    p = int(args.p)
    stages = _ints(args.stages) if args.stages else [1] * p
    if len(stages) == 1:
        stages = stages * p
    return ModelOrder(p=p, s=tuple(stages), intercept_mode=mode, local_intercept=bool(args.local_intercept))


def cmd_simulate(args):
    net = load_network(args.net)
    rng = np.random.default_rng(int(args.seed))
    T, burn = int(args.T), int(args.burn_in)
    if args.model == "pnar":
        model = PnarModel(net, beta0=float(args.beta0), alpha1=_floats(args.alpha)[0], beta1=_beta(args.beta)[0][0])
        series = simulate_pnar(model, T, burn, rng)
    elif args.model == "gnari":
        if args.lam is None:
            raise ConfigError("--lambda is required for GNARI")
        model = GnariModel.from_coefficients(net, _floats(args.alpha), _beta(args.beta), float(args.lam))
        series = simulate_gnari(model, T, burn, rng)
    elif args.model == "ngnar":
        model = NgnarModel.from_coefficients(
            net, _floats(args.alpha), _beta(args.beta), float(args.alpha0), ResponseFunction.parse(args.response)
        )
        series = simulate_ngnar(model, T, burn, rng)
    else:
        raise ConfigError(f"cannot simulate model {args.model!r}")
    write_series_csv(series, args.out)
    print(f"wrote {series.length} x {series.n_nodes} series to {args.out}")
    return EXIT_OK


def cmd_fit(args):
    net, series = _data(args)
    order = _order(args, args.model)
    fit = fit_model(args.model, series, net, order, args.method, args.response)
    write_fit_json(fit, args.out)
    print(f"{fit.kind} ({fit.method}) converged={fit.converged} -> {args.out}")
    for name, v in fit.params.as_dict().items():
        logger.info("%s = %.6g", name, v)
    if not fit.converged:
        print("fit did not converge", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_forecast(args):
    net, series = _data(args)
    fit = read_fit_json(args.fit)
    fc = predict(fit, series.data, int(args.horizon), net)
    write_forecast_csv(fc, net.node_ids, args.out)
    print(f"wrote {fc.shape[1]}-step forecast to {args.out}")
    return EXIT_OK


def cmd_eval(args):
    net = load_network(args.net)
    series = _align(load_series(args.data), net)
    _, test = split_train_test(series, int(args.train))
    forecasts = {}
    for item in args.forecast:
        name, sep, path = item.partition("=")
        if not sep:
            name, path = Path(item).stem, item
        fc, ids = read_forecast_csv(path)
        if ids != list(net.node_ids):
            raise ConfigError(f"{path}: forecast node ids do not match the network")
        forecasts[name] = fc
    H = min(fc.shape[1] for fc in forecasts.values())
    H = min(H, test.length)
    horizons = _ints(args.horizons) if args.horizons else [H]
    if max(horizons) > H:
        raise ConfigError(f"horizon {max(horizons)} exceeds the {H} available forecast/test steps")
    report = EvalReport(horizons)
    full = EvalReport(list(range(1, H + 1)))
    for name, fc in forecasts.items():
        report.add(name, fc, test.data)
        full.add(name, fc, test.data)
    write_rows_csv(report.rows(args.process), ("model", "process", "horizon", "mspe", "mape"), args.out)
    if args.plot:
        write_rows_csv(full.plot_rows(), ("horizon", "model", "mape"), args.plot)
    for row in report.rows(args.process):
        print("{:<12} h={:<4} mspe={:.4f} mape={:.4f}".format(row[0], row[2], row[3], row[4]))
    return EXIT_OK


def cmd_select_order(args):
    net, series = _data(args)
    path = backward_bic_path(
        series,
        net,
        int(args.max_p),
        args.model,
        method=args.method,
        response=ResponseFunction.parse(args.response),
        local_intercept=bool(args.local_intercept),
    )
    doc = {"model": args.model, "order": path.order.to_dict(), "bic": path.bic, "steps": path.steps}
    with open(args.out, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    o = path.order
    print(f"selected p={o.effective_lag()} alpha_mask={list(o.alpha_mask)} s={list(o.s)} BIC={path.bic:.3f}")
    if args.fit_out:
        write_fit_json(path.fit, args.fit_out)
    return EXIT_OK


def cmd_study(args):
    from .studies import format_table3, pipeline_config, run_study

    values = {}
    if args.config:
        values.update(parse_config_text(Path(args.config).read_text(), args.config))
    values["study"] = args.name
    for key in ("reps", "seed", "workers", "out", "lengths", "train", "test", "horizons", "max_p", "processes", "models"):
        v = getattr(args, key)
        if v is not None:
            values["replications" if key == "reps" else key] = str(v)
    if args.quick:
        values["quick"] = "true"
    base = pipeline_config() if args.name == "pipeline" else StudyConfig(study=args.name)
    cfg = config_from_mapping(values, base)
    report = run_study(cfg)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    if cfg.study != "pipeline":
        path = report.write(out)
        print(f"wrote {path}")
    if cfg.study == "table3":
        print(format_table3(report))
    elif cfg.study == "pipeline":
        print(f"wrote report.csv, plot.csv, selection.csv, fits/ and forecasts/ to {out}")
        for row in report.rows:
            print("{:<6} h={:<4} mspe={:.4f} mape={:.4f}".format(row[0], row[2], row[3], row[4]))
    else:
        for row in report.rows:
            print("  ".join(f"{x:.4g}" if isinstance(x, float) else str(x) for x in row))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="countnet", description="Count network time series: GNARI, NGNAR, GNAR and PNAR(1).")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, data=True):
        p.add_argument("--config", help="key = value file; flags override it")
        p.add_argument("--net", default="fig1", help="adjacency or edge-list CSV, 'fig1' or 'bundled'")
        if data:
            p.add_argument("--data", default="bundled", help="series CSV or 'bundled'")

    def model_args(p, methods=True):
        p.add_argument("--model", help="gnari, ngnar, gnar or pnar (required)")
        if methods:
            p.add_argument("--method", help="cls, cmle or qmle")
        p.add_argument("--response", default="softplus", help="NGNAR response, e.g. softplus, softplus:2, exp, relu")

    p = sub.add_parser("simulate", help="simulate a process to a series CSV")
    common(p, data=False)
    model_args(p, methods=False)
    p.add_argument("--alpha", default="0.5", help="own-lag coefficients, comma separated by lag")
    p.add_argument("--beta", default="0.4", help="stage coefficients: lags split by ';', stages by ','")
    p.add_argument("--lambda", dest="lam", help="GNARI innovation mean")
    p.add_argument("--alpha0", default="10", help="NGNAR intercept")
    p.add_argument("--beta0", default="10", help="PNAR intercept")
    p.add_argument("--T", default="500")
    p.add_argument("--burn-in", default="100")
    p.add_argument("--seed", default="0")
    p.add_argument("--out", help="output path (required)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit a model and write fit JSON")
    common(p)
    model_args(p)
    p.add_argument("--train", help="fit on the first TRAIN time steps")
    p.add_argument("--p", default="1", help="lag order")
    p.add_argument("--stages", help="stage depth per lag, comma separated")
    p.add_argument("--order", help="order JSON written by select-order")
    p.add_argument("--local-intercept", action="store_true")
    p.add_argument("--out", help="output path (required)")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("forecast", help="recursive mean forecasts from a fit JSON")
    common(p)
    p.add_argument("--fit", help="fit JSON (required)")
    p.add_argument("--train", help="forecast from the end of the first TRAIN steps")
    p.add_argument("--horizon", default="1")
    p.add_argument("--out", help="output path (required)")
    p.set_defaults(func=cmd_forecast)

    p = sub.add_parser("eval", help="MSPE/MAPE of forecasts against the test window")
    common(p)
    p.add_argument("--forecast", action="append", help="NAME=PATH or PATH (repeatable, required)")
    p.add_argument("--train", help="the test window starts after TRAIN steps (required)")
    p.add_argument("--horizons", help="comma-separated report horizons (default: full length)")
    p.add_argument("--process", default="data", help="value of the report's process column")
    p.add_argument("--out", help="report CSV: model, process, horizon, mspe, mape (required)")
    p.add_argument("--plot", help="plot CSV: horizon, model, mape for every horizon")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("select-order", help="backward-deletion BIC order selection")
    common(p)
    model_args(p)
    p.add_argument("--train")
    p.add_argument("--max-p", default="14")
    p.add_argument("--local-intercept", action="store_true")
    p.add_argument("--out", help="order JSON (required)")
    p.add_argument("--fit-out", help="also write the selected fit JSON")
    p.set_defaults(func=cmd_select_order)

    p = sub.add_parser("study", help="simulation studies and the forecasting pipeline")
    p.add_argument("name", choices=("table1", "table2", "table3", "pipeline"))
    p.add_argument("--config")
    p.add_argument("--reps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--quick", action="store_true", help="50/20/50 replications")
    p.add_argument("--out")
    p.add_argument("--lengths")
    p.add_argument("--train", type=int)
    p.add_argument("--test", type=int)
    p.add_argument("--horizons")
    p.add_argument("--max-p", type=int)
    p.add_argument("--processes")
    p.add_argument("--models")
    p.set_defaults(func=cmd_study)
    return parser


# Checked after config-file values are merged, so a file may supply them.
REQUIRED = {
    "simulate": ("model", "out"),
    "fit": ("model", "out"),
    "forecast": ("fit", "out"),
    "eval": ("forecast", "train", "out"),
    "select-order": ("model", "out"),
}
CHOICES = {"model": ("gnari", "ngnar", "gnar", "pnar"), "method": ("cls", "cmle", "qmle")}


def _check_args(args):
    missing = [k for k in REQUIRED.get(args.command, ()) if getattr(args, k, None) in (None, "", [])]
    if missing:
        flags = ", ".join("--" + k.replace("_", "-") for k in missing)
        raise UsageError(f"countnet {args.command}: the following arguments are required: {flags}")
    for key, allowed in CHOICES.items():
        value = getattr(args, key, None)
        if value is not None and value not in allowed:
            raise UsageError(f"countnet {args.command}: --{key} must be one of {', '.join(allowed)}, got {value!r}")
    if isinstance(getattr(args, "forecast", None), str):
        args.forecast = [x.strip() for x in args.forecast.split(",") if x.strip()]
    return args


def _apply_config(parser, argv):
    """Re-parse with ``--config`` values installed as subcommand defaults."""
    args = parser.parse_args(argv)
    if args.command == "study" or not getattr(args, "config", None):
        return _check_args(args)
    path = Path(args.config)
    if not path.exists():
        raise FileNotFoundError(f"no such config file: {path}")
    values = {k.replace("-", "_"): v for k, v in parse_config_text(path.read_text(), str(path)).items()}
    known = vars(args)
    unknown = sorted(set(values) - set(known))
    if unknown:
        raise ConfigError(f"{path}: unknown keys {unknown}")
    for k in ("local_intercept",):
        if k in values:
            values[k] = values[k].lower() in ("1", "true", "yes")
    subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    subparsers.choices[args.command].set_defaults(**values)
    return _check_args(parser.parse_args(argv))


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
        return args.func(args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
