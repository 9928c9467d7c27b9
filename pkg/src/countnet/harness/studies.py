"""Simulation studies and the end-to-end forecasting pipeline.

Every replication ``k`` draws from ``numpy.random.default_rng(seed + k)``
and reports are assembled in replication order. A run is therefore
bit-reproducible given its configuration, whether or not a worker pool
is used.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..baselines import PnarModel, simulate_pnar
from ..design import CountSeries
from ..gnari import GnariModel, simulate_gnari
from ..network import fig1_network
from ..ngnar import SOFTPLUS, NgnarModel, simulate_ngnar
from .config import StudyConfig
from .evaluation import EvalReport, prefix_errors
from .io import split_train_test, write_fit_json, write_forecast_csv, write_rows_csv
from .models import fit_model, predict
from .selection import backward_bic_path

logger = logging.getLogger(__name__)

PARAM_NAMES = ("alpha_1", "beta_1_1", "intercept")

TABLE1_TRUTH = (0.5, 0.4, 10.0)
# Published mean (sd) over 1000 replications per length.
TABLE1_REFERENCE = {
    50: ((0.482, 0.053), (0.370, 0.061), (14.8, 6.57)),
    200: ((0.496, 0.025), (0.392, 0.031), (11.3, 2.96)),
    500: ((0.497, 0.015), (0.397, 0.019), (10.6, 1.73)),
}

TABLE2_TRUTH = (0.5, -0.4, 10.0)
TABLE2_REFERENCE = {
    (50, "cls"): ((0.493, 0.058), (-0.407, 0.067), (10.2, 1.14)),
    (50, "cmle"): ((0.493, 0.053), (-0.404, 0.065), (10.2, 1.05)),
    (200, "cls"): ((0.504, 0.029), (-0.399, 0.039), (9.92, 0.639)),
    (200, "cmle"): ((0.503, 0.027), (-0.400, 0.037), (9.96, 0.622)),
    (500, "cls"): ((0.500, 0.018), (-0.397, 0.024), (9.96, 0.382)),
    (500, "cmle"): ((0.500, 0.018), (-0.397, 0.021), (9.97, 0.365)),
}

TABLE3_MODELS = {"A": "gnari", "B": "ngnar-cls", "C": "ngnar-cmle", "D": "pnar"}
# Published average MSPE by horizon, model and process.
TABLE3_REFERENCE = {
    1: {"A": (68.6, 100.2, 9.1, 98.2), "B": (68.6, 100.2, 5.9, 98.2), "C": (68.7, 100.2, 5.9, 98.2), "D": (68.8, 100.2, 9.01, 98.3)},
    10: {"A": (119.3, 173.6, 9.1, 166.9), "B": (119.3, 173.6, 8.5, 167.0), "C": (119.3, 173.6, 8.5, 166.9), "D": (119.9, 173.8, 9.7, 167.4)},
    50: {"A": (145.0, 209.5, 9.08, 211.0), "B": (145.0, 209.5, 8.96, 211.0), "C": (145.1, 209.4, 8.96, 211.0), "D": (145.2, 209.7, 9.08, 211.8)},
}
PROCESSES = ("P1", "P2", "P3", "P4")

PIPELINE_MODELS = ("gnar", "gnari", "ngnar", "pnar")


@dataclass
class StudyReport:
    """Tabular study output plus raw per-replication arrays in ``extra``."""

    study: str
    header: tuple
    rows: list
    extra: dict = field(default_factory=dict)

    def column(self, name):
        k = self.header.index(name)
        return [r[k] for r in self.rows]

    def lookup(self, **keys):
        """Rows whose named columns equal the given values."""
        idx = {self.header.index(k): v for k, v in keys.items()}
        return [r for r in self.rows if all(r[k] == v for k, v in idx.items())]

    def write(self, directory, name: str = None) -> Path:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        path = d / (name or f"{self.study}_report.csv")
        write_rows_csv(self.rows, self.header, path)
        return path


def _map(fn, tasks, workers: int):
    if workers <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(workers, os.cpu_count() or 1)) as pool:
        return list(pool.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * workers))))


def _summarise(estimates, ses, truth):
    """Per-parameter (mean, sd, median |error|, mean se) over successful replications."""
    est = np.asarray(estimates, dtype=float)
    se = np.asarray(ses, dtype=float)
    out = []
    for k in range(len(truth)):
        col = est[:, k] if est.size else np.array([])
        if col.size == 0:
            out.append((np.nan, np.nan, np.nan, np.nan))
            continue
        sd = float(np.std(col, ddof=1)) if col.size > 1 else np.nan
        out.append(
            (
                float(col.mean()),
                sd,
                float(np.median(np.abs(col - truth[k]))),
                float(np.nanmean(se[:, k])) if se.size else np.nan,
            )
        )
    return out


def _table1_rep(task):
    T, seed, burn_in = task
    net = fig1_network()
    model = GnariModel.from_coefficients(net, [TABLE1_TRUTH[0]], [[TABLE1_TRUTH[1]]], TABLE1_TRUTH[2])
    try:
        series = simulate_gnari(model, T, burn_in, np.random.default_rng(seed))
        fit = fit_model("gnari", series, net)
        return fit.values, fit.standard_errors(), None
    except (ArithmeticError, ValueError) as exc:
        return None, None, f"{type(exc).__name__}: {exc}"


def run_table1(cfg: StudyConfig) -> StudyReport:
    """Simulate GNARI(1,[1]) on the five-node network and fit by constrained CLS."""
    reps = cfg.reps()
    header = ("T", "parameter", "mean", "sd", "median_abs_error", "mean_se", "truth", "reference_mean", "reference_sd", "n_ok", "n_failed")
    rows, extra = [], {}
    for T in cfg.lengths:
        results = _map(_table1_rep, [(T, cfg.seed + k, cfg.burn_in) for k in range(reps)], cfg.workers)
        ok = [r for r in results if r[2] is None]
        est = np.array([r[0] for r in ok])
        se = np.array([r[1] for r in ok])
        extra[T] = {"estimates": est, "se": se, "errors": [r[2] for r in results if r[2] is not None]}
        ref = TABLE1_REFERENCE.get(T, ((np.nan, np.nan),) * 3)
        for k, stats in enumerate(_summarise(est, se, TABLE1_TRUTH)):
            rows.append((T, PARAM_NAMES[k], *stats, TABLE1_TRUTH[k], *ref[k], len(ok), reps - len(ok)))
    return StudyReport("table1", header, rows, extra)


def _table2_rep(task):
    T, seed, burn_in = task
    net = fig1_network()
    model = NgnarModel.from_coefficients(net, [TABLE2_TRUTH[0]], [[TABLE2_TRUTH[1]]], TABLE2_TRUTH[2], SOFTPLUS)
    out = {}
    try:
        series = simulate_ngnar(model, T, burn_in, np.random.default_rng(seed))
    except (ArithmeticError, ValueError) as exc:
        return {m: (None, None, f"{type(exc).__name__}: {exc}") for m in ("cls", "cmle")}
    init = None
    for method in ("cls", "cmle"):
        try:
            fit = fit_model("ngnar", series, net, method=method, init=init if method == "cmle" else None)
            if method == "cls":
                init = fit.values
            out[method] = (fit.values, fit.standard_errors(), None if fit.converged else "not converged")
        except (ArithmeticError, ValueError) as exc:
            out[method] = (None, None, f"{type(exc).__name__}: {exc}")
    return out


def run_table2(cfg: StudyConfig) -> StudyReport:
    """Simulate softplus NGNAR(1,[1]) and fit by both CLS and conditional MLE."""
    reps = cfg.reps()
    header = ("T", "method", "parameter", "mean", "sd", "median_abs_error", "mean_se", "truth", "reference_mean", "reference_sd", "n_ok", "n_failed")
    rows, extra = [], {}
    for T in cfg.lengths:
        results = _map(_table2_rep, [(T, cfg.seed + k, cfg.burn_in) for k in range(reps)], cfg.workers)
        for method in ("cls", "cmle"):
            ok = [r[method] for r in results if r[method][2] is None]
            est = np.array([r[0] for r in ok])
            se = np.array([r[1] for r in ok])
            extra[(T, method)] = {"estimates": est, "se": se, "errors": [r[method][2] for r in results if r[method][2]]}
            ref = TABLE2_REFERENCE.get((T, method), ((np.nan, np.nan),) * 3)
            for k, stats in enumerate(_summarise(est, se, TABLE2_TRUTH)):
                rows.append((T, method, PARAM_NAMES[k], *stats, TABLE2_TRUTH[k], *ref[k], len(ok), reps - len(ok)))
    return StudyReport("table2", header, rows, extra)


def make_process(name: str, net=None):
    """Data-generating model of comparison process ``P1``..``P4`` on the five-node network."""
    net = net or fig1_network()
    if name == "P1":
        return GnariModel.from_coefficients(net, [0.5], [[0.4]], 10.0)
    if name == "P2":
        return NgnarModel.from_coefficients(net, [0.5], [[0.4]], 10.0, SOFTPLUS)
    if name == "P3":
        return NgnarModel.from_coefficients(net, [0.1], [[-0.8]], 10.0, SOFTPLUS)
    if name == "P4":
        return PnarModel(net, beta0=10.0, alpha1=0.5, beta1=0.4)
    raise ValueError(f"unknown process {name!r}; expected one of {PROCESSES}")


def simulate_process(model, T: int, burn_in: int, rng) -> CountSeries:
    if isinstance(model, GnariModel):
        return simulate_gnari(model, T, burn_in, rng)
    if isinstance(model, NgnarModel):
        return simulate_ngnar(model, T, burn_in, rng)
    return simulate_pnar(model, T, burn_in, rng)


def _fit_named(name, series, net, init=None):
    kind, _, method = name.partition("-")
    return fit_model(kind, series, net, method=method or None, init=init)


def _table3_rep(task):
    process, seed, train, test, horizons, burn_in, models = task
    net = fig1_network()
    H = max(horizons)
    try:
        series = simulate_process(make_process(process, net), train + test, burn_in, np.random.default_rng(seed))
    except (ArithmeticError, ValueError) as exc:
        return {m: f"{type(exc).__name__}: {exc}" for m in models}
    tr, te = split_train_test(series, train)
    out = {}
    cls_values = None
    for name in models:
        try:
            init = cls_values if name == "ngnar-cmle" else None
            fit = _fit_named(name, tr, net, init=init)
            if name == "ngnar-cls":
                cls_values = fit.values
            fc = predict(fit, tr.data, H, net)
            sq, ab = prefix_errors(fc, te.data[:, :H])
            out[name] = (np.array([sq[h - 1] for h in horizons]), np.array([ab[h - 1] for h in horizons]))
        except (ArithmeticError, ValueError) as exc:
            out[name] = f"{type(exc).__name__}: {exc}"
    return out


def run_table3(cfg: StudyConfig) -> StudyReport:
    """Predictive comparison: fit models A-D on each process and score forecasts.

    Every (model, process, horizon) cell is present; a cell whose
    replications all failed carries NaN errors and the failure count.
    """
    reps = cfg.reps()
    horizons = tuple(cfg.horizons)
    models = tuple(cfg.models)
    header = ("model", "process", "horizon", "mspe", "mape", "n_ok", "n_failed", "reference_mspe")
    rows = []
    extra = {"mspe": {}, "mape": {}, "errors": {}}
    labels = {v: k for k, v in TABLE3_MODELS.items()}
    for process in cfg.processes:
        tasks = [(process, cfg.seed + k, cfg.train, cfg.test, horizons, cfg.burn_in, models) for k in range(reps)]
        results = _map(_table3_rep, tasks, cfg.workers)
        for name in models:
            sq = np.full((reps, len(horizons)), np.nan)
            ab = np.full((reps, len(horizons)), np.nan)
            errors = []
            for k, r in enumerate(results):
                if isinstance(r[name], str):
                    errors.append((k, r[name]))
                else:
                    sq[k], ab[k] = r[name]
            extra["mspe"][(name, process)] = sq
            extra["mape"][(name, process)] = ab
            extra["errors"][(name, process)] = errors
            n_ok = reps - len(errors)
            for i, h in enumerate(horizons):
                ref = np.nan
                lab = labels.get(name)
                if lab and h in TABLE3_REFERENCE and process in PROCESSES:
                    ref = TABLE3_REFERENCE[h][lab][PROCESSES.index(process)]
                m = float(np.nanmean(sq[:, i])) if n_ok else np.nan
                a = float(np.nanmean(ab[:, i])) if n_ok else np.nan
                rows.append((name, process, h, m, a, n_ok, len(errors), ref))
    return StudyReport("table3", header, rows, extra)


def format_table3(report: StudyReport) -> str:
    """Text grid of average MSPE: one block per horizon, models by processes."""
    horizons = sorted(set(report.column("horizon")))
    processes = list(dict.fromkeys(report.column("process")))
    models = list(dict.fromkeys(report.column("model")))
    lines = []
    for h in horizons:
        lines.append(f"horizon {h}")
        lines.append("model".ljust(12) + "".join(p.rjust(10) for p in processes))
        for m in models:
            cells = []
            for p in processes:
                (row,) = report.lookup(model=m, process=p, horizon=h)
                cells.append("failed".rjust(10) if row[5] == 0 else f"{row[3]:10.2f}")
            lines.append(m.ljust(12) + "".join(cells))
        lines.append("")
    return "\n".join(lines)


def pipeline_config(**changes) -> StudyConfig:
    """Defaults for the forecasting pipeline: 700/83 split, max lag 14."""
    base = dict(study="pipeline", train=700, test=83, horizons=(1, 5, 10, 25, 50, 83), max_p=14, network="bundled")
    base.update(changes)
    return StudyConfig(**base)


PIPELINE_SPECS = {
    "gnar": dict(kind="gnar", local_intercept=False),
    "gnari": dict(kind="gnari", local_intercept=True),
    "ngnar": dict(kind="ngnar", local_intercept=True),
    "pnar": dict(kind="pnar", local_intercept=False),
}


def run_pipeline(cfg: StudyConfig, net=None, series=None, models=PIPELINE_MODELS) -> StudyReport:
    """Select orders by backward BIC, fit, forecast the test window and score.

    Writes per-model fit JSON and forecast CSV, ``selection.csv``,
    ``report.csv`` (model, process, horizon, mspe, mape) and ``plot.csv``
    (horizon, model, mape for every horizon up to the test length) into
    ``cfg.out``. Uses the bundled synthetic fixture unless ``net`` and
    ``series`` are given.
    """
    if net is None or series is None:
        from .fixtures import load_covid_fixture

        net, series = load_covid_fixture()
    if cfg.total_length != series.length:
        raise ValueError(f"train + test = {cfg.total_length} does not match series length {series.length}")
    out = Path(cfg.out)
    (out / "fits").mkdir(parents=True, exist_ok=True)
    (out / "forecasts").mkdir(parents=True, exist_ok=True)
    train, test = split_train_test(series, cfg.train)
    full = EvalReport(list(range(1, cfg.test + 1)))
    report = EvalReport(list(cfg.horizons))
    selection_rows = []
    for name in models:
        spec = PIPELINE_SPECS[name]
        path = backward_bic_path(train, net, cfg.max_p, spec["kind"], local_intercept=spec["local_intercept"])
        fit = path.fit
        o = path.order
        selection_rows.append(
            (name, o.p, " ".join(map(str, o.alpha_mask)), " ".join(map(str, o.s)), path.bic, fit.n_params, len(path.steps) - 1, fit.converged)
        )
        write_fit_json(fit, out / "fits" / f"{name}.json", extra={"selection_steps": path.steps})
        fc = predict(fit, train.data, cfg.test, net)
        write_forecast_csv(fc, net.node_ids, out / "forecasts" / f"{name}.csv")
        full.add(name, fc, test.data)
        report.add(name, fc, test.data)
    write_rows_csv(selection_rows, ("model", "p", "alpha_mask", "s", "bic", "n_params", "deletions", "converged"), out / "selection.csv")
    rows = report.rows("data")
    write_rows_csv(rows, ("model", "process", "horizon", "mspe", "mape"), out / "report.csv")
    write_rows_csv(full.plot_rows(), ("horizon", "model", "mape"), out / "plot.csv")
    return StudyReport("pipeline", ("model", "process", "horizon", "mspe", "mape"), rows, {"selection": selection_rows, "full": full})


def run_study(cfg: StudyConfig) -> StudyReport:
    runners = {"table1": run_table1, "table2": run_table2, "table3": run_table3, "pipeline": run_pipeline}
    if cfg.study not in runners:
        raise ValueError(f"{cfg.study!r} is not a study")
    return runners[cfg.study](cfg)
