"""Command-line front end: ``windsynth <command> [options]``.

Exit codes: 0 success, 1 usage error, 2 data or model error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from . import baseline, features, grid, ingest, pipeline, quality
from .errors import ConfigError, WindSynthError

DEFAULTS = pipeline.ExperimentConfig()
CONFIG_PATH_KEYS = ("wind", "plants", "obs", "capacity", "curve", "out")
STRATEGY_OF = {
    "mlm1": grid.Strategy.ALL,
    "mlm2": grid.Strategy.K_NEAREST,
    "mlm3": grid.Strategy.CAPACITY_QUARTILE,
}


class UsageError(Exception):
    """Bad or missing command-line settings (exit code 1)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


class _HelpFormatter(argparse.ArgumentDefaultsHelpFormatter):
    # flags that fall back to a config file carry their default in the help text
    def _get_help_string(self, action):
        text = action.help or ""
        if "(default:" in text or action.required or not action.option_strings:
            return text
        if action.default is None:
            return text + " (default: none)"
        return super()._get_help_string(action)


def _fmt_default(value):
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value) if len(set(value)) > 1 else str(value[0])
    return str(value)


def _add_experiment_flags(p, years_help="modelling period FIRST-LAST"):
    d = DEFAULTS
    p.add_argument("--config", help="experiment config file of 'key = value' lines; flags override it")
    p.add_argument("--variant", choices=pipeline.VARIANTS, help=f"grid subsetting variant (default: {d.variant})")
    p.add_argument("--hidden", help=f"hidden layer size: 60, 80 or a custom N or A,B,C (default: {_fmt_default(d.hidden_sizes)})")
    p.add_argument("--seed", help=f"random seed (default: {d.seed})")
    p.add_argument("--years", help=f"{years_help} (default: {d.years[0]}-{d.years[1]})")
    p.add_argument("--k", help=f"nearest grid points per plant for mlm2 (default: {d.k})")
    p.add_argument("--epochs", help=f"training epochs (default: {d.epochs})")
    p.add_argument("--learning-rate", dest="learning_rate", help=f"gradient step size (default: {d.learning_rate})")
    p.add_argument("--batch-size", dest="batch_size", help=f"minibatch size or 'full' (default: {d.batch_size})")
    p.add_argument("--momentum", help=f"heavy-ball momentum, 0 for plain descent (default: {d.momentum})")
    p.add_argument("--wind", help="wind CSV (timestamp + U/V columns per grid point) (default: none)")
    p.add_argument("--plants", help="plant registry CSV lon,lat,capacity_mw (default: none)")
    p.add_argument("--obs", help="observed series: timestamp,cf or timestamp,generation_mwh CSV (default: none)")
    p.add_argument("--capacity", help="daily capacity CSV date,capacity_mw, needed for generation input (default: none)")


def build_parser():
    top = _Parser(prog="windsynth", description=__doc__.splitlines()[0],
                  formatter_class=_HelpFormatter)
    top.add_argument("--version", action="version", version=f"windsynth {__version__}")
    sub = top.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True
    fmt = _HelpFormatter

    p = sub.add_parser("synth", help="write a seeded synthetic scenario", formatter_class=fmt)
    p.add_argument("--seed", type=int, default=0, help="scenario seed")
    p.add_argument("--years", type=int, default=3, help="number of calendar years")
    p.add_argument("--start-year", type=int, default=2010, help="first calendar year")
    p.add_argument("--nlon", type=int, default=6, help="grid columns")
    p.add_argument("--nlat", type=int, default=6, help="grid rows")
    p.add_argument("--n-plants", type=int, default=24, help="number of wind plants")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("subset", help="list the grid points a variant uses", formatter_class=fmt)
    p.add_argument("--variant", choices=pipeline.VARIANTS, default=DEFAULTS.variant, help="subsetting variant")
    p.add_argument("--wind", required=True, help="wind CSV (only its header is read)")
    p.add_argument("--plants", default=None, help="plant registry CSV (mlm2, mlm3)")
    p.add_argument("--k", type=int, default=DEFAULTS.k, help="nearest grid points per plant (mlm2)")
    p.add_argument("--out", default=None, help="output CSV index,lon,lat (stdout summary only if omitted)")

    p = sub.add_parser("dump-features", help="write the unscaled predictor matrix", formatter_class=fmt)
    p.add_argument("--variant", choices=pipeline.VARIANTS, default=DEFAULTS.variant, help="subsetting variant")
    p.add_argument("--wind", required=True, help="wind CSV")
    p.add_argument("--plants", default=None, help="plant registry CSV (mlm2, mlm3)")
    p.add_argument("--k", type=int, default=DEFAULTS.k, help="nearest grid points per plant (mlm2)")
    p.add_argument("--out", required=True, help="output CSV")

    p = sub.add_parser("train", help="train one network on a range of years", formatter_class=fmt)
    _add_experiment_flags(p, "training years FIRST-LAST")
    p.add_argument("--out", help="model file to write (default: model.bin)")

    p = sub.add_parser("predict", help="predict capacity factors with a trained model", formatter_class=fmt)
    p.add_argument("--model", required=True, help="model file written by 'train'")
    p.add_argument("--wind", required=True, help="wind CSV")
    p.add_argument("--years", default=None, help="restrict to years FIRST-LAST (default: whole wind file)")
    p.add_argument("--out", required=True, help="prediction CSV timestamp,cf")

    p = sub.add_parser("evaluate", help="score one or more series against observations", formatter_class=fmt)
    p.add_argument("--obs", required=True, help="observed series CSV (cf or generation)")
    p.add_argument("--capacity", default=None, help="daily capacity CSV for generation input")
    p.add_argument("--pred", required=True, action="append", help="modelled series CSV; repeat to compare several")
    p.add_argument("--label", action="append", default=None, help="label per --pred (default: file stem)")
    p.add_argument("--out", default=None, help="directory for report.json, tables and plot data")

    p = sub.add_parser("report", help="render tables and plot data from report JSON files", formatter_class=fmt)
    p.add_argument("--input", required=True, action="append", help="report JSON written by evaluate/run; repeatable")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("run", help="full experiment: subset, folds, train, predict, evaluate", formatter_class=fmt)
    _add_experiment_flags(p)
    p.add_argument("--block", help=f"predict window length in years (default: {DEFAULTS.block})")
    p.add_argument("--curve", help="power-curve CSV speed_ms,power_fraction; adds a mean-matched "
                                   "power-curve comparator to the report (default: none)")
    p.add_argument("--compare-sizes", dest="compare_sizes", default=None,
                   help="comma-separated hidden sizes to run and select between, e.g. 60,80 (default: none)")
    p.add_argument("--jobs", type=int, default=1, help="folds trained in parallel")
    p.add_argument("--out", help="output directory (default: run)")
    return top


# -- helpers -----------------------------------------------------------------

def _settings(args, keys):
    """Merge config file values (paths resolved against its folder) with flags."""
    values = {}
    cfg_path = getattr(args, "config", None)
    if cfg_path:
        values = pipeline.parse_config_file(cfg_path)
        unknown = sorted(set(values) - set(CONFIG_KEYS))
        if unknown:
            raise ConfigError(f"{cfg_path}: unknown setting(s) {', '.join(unknown)}")
        base = Path(cfg_path).parent
        for key in CONFIG_PATH_KEYS:
            if key in values and not Path(values[key]).is_absolute():
                values[key] = str(base / values[key])
    for key in keys:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    if "hidden" in values:
        values["hidden_sizes"] = values.pop("hidden")
    return values


def load_observations(path, capacity=None):
    """CF series from a cf CSV, or from generation plus daily capacity."""
    header = _header(path)
    if header == ingest.CF_HEADER:
        return ingest.parse_cf_csv(path, label="observations")
    if header == ingest.GENERATION_HEADER:
        if capacity is None:
            raise UsageError(f"{path} holds generation; --capacity is required to form capacity factors")
        gen = ingest.parse_generation_csv(path)
        cap = ingest.parse_capacity_csv(capacity)
        cf = ingest.to_capacity_factors(gen, cap)
        return ingest.CapacityFactorSeries(cf.axis, cf.values, "observations")
    raise UsageError(f"{path}: unrecognised header {','.join(header)}")


def _header(path):
    with open(path, encoding="utf-8") as fh:
        return [h.strip() for h in fh.readline().strip().split(",")]


def _require(values, *keys):
    missing = [k for k in keys if not values.get(k)]
    if missing:
        raise UsageError("missing required setting(s): " + ", ".join("--" + k for k in missing))


def _bundle(values, need_plants):
    _require(values, "wind", "obs")
    if need_plants:
        _require(values, "plants")
    wind = grid.load_wind_csv(values["wind"])
    plants = ingest.parse_plants_csv(values["plants"]) if values.get("plants") else None
    obs = load_observations(values["obs"], values.get("capacity"))
    return pipeline.DataBundle(wind, obs, plants)


def _print_summary(label, rep, out=None):
    out = out or sys.stdout
    print(f"{label}: correlation={rep.correlation:.4f} nmae={rep.nmae:.4f} nrmse={rep.nrmse:.4f} "
          f"variance(obs/pred)={rep.variance['obs']:.4f}/{rep.variance['pred']:.4f}", file=out)


def _write_report_json(path, reports):
    doc = {"reports": [r.to_dict(plot_data=True) for r in reports.values()]}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


# -- commands ----------------------------------------------------------------

def cmd_synth(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    g = baseline.default_synth_grid(args.nlon, args.nlat)
    wind, plants, obs = baseline.synth_scenario(args.seed, args.years, g, args.n_plants, args.start_year)
    total = float(plants.capacity.sum())
    cap = ingest.CapacitySeries.constant(obs.axis, total)
    gen = ingest.GenerationSeries(obs.axis, obs.values * total)
    grid.write_wind_csv(out / "wind.csv", wind)
    ingest.write_plants_csv(out / "plants.csv", plants)
    ingest.write_capacity_csv(out / "capacity.csv", cap)
    ingest.write_generation_csv(out / "generation.csv", gen)
    ingest.write_cf_csv(out / "obs_cf.csv", obs)
    baseline.write_curve_csv(out / "power_curve.csv", baseline.default_power_curve())
    last = args.start_year + args.years - 1
    block = 1 if args.years <= 3 else DEFAULTS.block
    cfg_text = "\n".join([
        "# synthetic scenario written by windsynth synth",
        "variant = mlm2",
        f"hidden = {DEFAULTS.hidden_sizes[0]}",
        f"seed = {args.seed}",
        f"years = {args.start_year}-{last}",
        f"block = {block}",
        "wind = wind.csv",
        "plants = plants.csv",
        "obs = obs_cf.csv",
        "capacity = capacity.csv",
        "curve = power_curve.csv",
        "out = run",
        "",
    ])
    (out / "experiment.cfg").write_text(cfg_text, encoding="utf-8")
    print(f"wrote scenario: {obs.axis.n_hours} hours, {g.size} grid points, {len(plants)} plants -> {out}")
    return 0


def cmd_subset(args):
    g = grid.infer_grid(grid.read_wind_header(args.wind)[1:])
    plants = ingest.parse_plants_csv(args.plants) if args.plants else None
    if args.variant != "mlm1" and plants is None:
        raise UsageError(f"--plants is required for {args.variant}")
    sel = grid.select(args.variant, g, plants, args.k)
    if args.out:
        lon, lat = sel.coordinates()
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write("index,lon,lat\n")
            for i, x, y in zip(sel.indices, lon, lat):
                fh.write(f"{i},{x:.3f},{y:.3f}\n")
    print(f"{args.variant}: {len(sel)} of {g.size} grid points ({sel.strategy.value})")
    return 0


def cmd_dump_features(args):
    wind = grid.load_wind_csv(args.wind)
    plants = ingest.parse_plants_csv(args.plants) if args.plants else None
    if args.variant != "mlm1" and plants is None:
        raise UsageError(f"--plants is required for {args.variant}")
    sel = grid.select(args.variant, wind.grid, plants, args.k)
    fm = features.assemble(wind, sel)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("timestamp," + ",".join(fm.columns) + "\n")
        for t, row in zip(fm.axis.timestamps(), fm.data):
            fh.write(ingest.format_hour(t) + "," + ",".join(f"{v:.10g}" for v in row) + "\n")
    print(f"wrote {fm.axis.n_hours} x {fm.n_columns} feature matrix -> {args.out}")
    return 0


_EXPERIMENT_KEYS = ("variant", "hidden", "seed", "years", "k", "epochs", "learning_rate",
                    "batch_size", "momentum", "wind", "plants", "obs", "capacity", "out", "block", "curve")
CONFIG_KEYS = _EXPERIMENT_KEYS + ("shuffle",)


def cmd_train(args):
    values = _settings(args, _EXPERIMENT_KEYS)
    cfg = pipeline.config_from_mapping(values)
    bundle = _bundle(values, cfg.variant != "mlm1")
    sel = pipeline.select_for(cfg, bundle)
    axis = pipeline.experiment_axis(cfg)
    fm = features.assemble(bundle.wind, sel, axis)
    target = bundle.obs.window(axis)
    est = cfg.estimator().fit(fm.data, target.values)
    out = values.get("out") or "model.bin"
    est.save(out, extra={"variant": cfg.variant, "selection": list(sel.indices),
                         "grid": [sel.grid.lon0, sel.grid.lat0, sel.grid.dlon, sel.grid.dlat,
                                  sel.grid.nlon, sel.grid.nlat],
                         "years": list(cfg.years)})
    rep = est.train_report_
    print(f"trained {cfg.label} on {axis.n_hours} hours: loss {rep.initial_loss:.6f} -> {rep.final_loss:.6f} -> {out}")
    return 0


def cmd_predict(args):
    est = pipeline.MLMRegressor.load(args.model)
    extra = est.extra_
    wind = grid.load_wind_csv(args.wind)
    g = grid.GridSpec(*extra["grid"][:4], int(extra["grid"][4]), int(extra["grid"][5]))
    if g != wind.grid:
        raise ConfigError("wind grid differs from the grid the model was trained on")
    sel = grid.SubsetSelection(STRATEGY_OF[extra["variant"]], tuple(extra["selection"]), g)
    axis = wind.axis
    if args.years:
        years = pipeline.parse_years(args.years)
        axis = ingest.TimeAxis.from_years(years[0], years[-1])
    fm = features.assemble(wind, sel, axis)
    values = est.predict(fm.data)
    ingest.write_cf_csv(args.out, ingest.CapacityFactorSeries(axis, values))
    print(f"predicted {axis.n_hours} hours -> {args.out}")
    return 0


def _reports_for(obs, preds):
    reports = {}
    for label, series in preds:
        window = obs.window(series.axis) if obs.axis != series.axis else obs
        reports[label] = quality.full_report(window, series, label=label)
    return reports


def cmd_evaluate(args):
    obs = load_observations(args.obs, args.capacity)
    labels = args.label or []
    if labels and len(labels) != len(args.pred):
        raise UsageError("give one --label per --pred")
    preds = []
    for i, path in enumerate(args.pred):
        series = load_observations(path, args.capacity)
        label = labels[i] if labels else Path(path).stem
        preds.append((label, series))
    reports = _reports_for(obs, preds)
    for label, rep in reports.items():
        _print_summary(label, rep)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _write_report_json(out / "report.json", reports)
        quality.write_tables(reports, out)
    return 0


def cmd_report(args):
    reports = {}
    for path in args.input:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        for d in doc.get("reports", [doc]):
            rep = quality.QualityReport.from_dict(d)
            reports[rep.label] = rep
    if not reports:
        raise ConfigError("no reports found in the input files")
    quality.write_tables(reports, args.out)
    for label, rep in reports.items():
        _print_summary(label, rep)
    print(f"wrote tables -> {args.out}")
    return 0


def cmd_run(args):
    keys = _EXPERIMENT_KEYS
    values = _settings(args, keys)
    cfg = pipeline.config_from_mapping(values)
    bundle = _bundle(values, cfg.variant != "mlm1")
    out = Path(values.get("out") or "run")
    out.mkdir(parents=True, exist_ok=True)
    sizes = [cfg.hidden_sizes]
    if args.compare_sizes:
        sizes = [pipeline.parse_hidden(s) for s in args.compare_sizes.split(",") if s.strip()]
    sel = pipeline.select_for(cfg, bundle)
    runs = {}
    for hs in sizes:
        c = replace(cfg, hidden_sizes=hs)
        result = pipeline.run_experiment(c, bundle, jobs=args.jobs, selection=sel)
        runs[c.label] = (c, result)
    obs = bundle.obs.window(next(iter(runs.values()))[1].axis)
    candidates = [pipeline.candidate_metrics(label, r, obs) for label, (_, r) in runs.items()]
    best = pipeline.select_model(candidates)
    for label, (c, result) in runs.items():
        ingest.write_cf_csv(out / f"predictions_{label}.csv", result.series)
    best_cfg, best_result = runs[best]
    ingest.write_cf_csv(out / "predictions.csv", best_result.series)
    for fr in best_result.folds:
        fr.estimator.save(out / f"model_fold{fr.fold.index}.bin",
                          extra={"variant": best_cfg.variant, "selection": list(sel.indices),
                                 "grid": [sel.grid.lon0, sel.grid.lat0, sel.grid.dlon, sel.grid.dlat,
                                          sel.grid.nlon, sel.grid.nlat],
                                 "years": list(fr.fold.train_years)})
    with open(out / "folds.csv", "w", encoding="utf-8") as fh:
        fh.write("fold,predict_years,train_years,train_hours,predict_hours,initial_loss,final_loss\n")
        for fr in best_result.folds:
            fh.write(f"{fr.fold.index},{'|'.join(map(str, fr.fold.predict_years))},"
                     f"{'|'.join(map(str, fr.fold.train_years))},{len(fr.train_rows)},"
                     f"{len(fr.predict_rows)},{fr.estimator.train_report_.initial_loss!r},"
                     f"{fr.estimator.train_report_.final_loss!r}\n")
    reports = {best: quality.full_report(obs, best_result.series, label=best)}
    if values.get("curve") and bundle.plants is not None:
        curve = baseline.parse_curve_csv(values["curve"])
        cfg_b = baseline.BaselineConfig(curve=curve, bias_mode=baseline.BiasMode.MEAN_MATCH)
        ref = baseline.simulate_fleet(bundle.wind.window(obs.axis), bundle.plants, cfg_b, obs=obs)
        reports["power-curve"] = quality.full_report(obs, ref, label="power-curve")
    _write_report_json(out / "report.json", reports)
    quality.write_tables(reports, out, candidates=candidates)
    (out / "selection.txt").write_text(
        f"selected {best} from {', '.join(runs)}; {len(sel)} grid points ({sel.strategy.value})\n",
        encoding="utf-8")
    for label, rep in reports.items():
        _print_summary(label, rep)
    print(f"selected {best}; outputs -> {out}")
    return 0


COMMANDS = {
    "synth": cmd_synth,
    "subset": cmd_subset,
    "dump-features": cmd_dump_features,
    "train": cmd_train,
    "predict": cmd_predict,
    "evaluate": cmd_evaluate,
    "report": cmd_report,
    "run": cmd_run,
}


def run_cli(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"windsynth {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except (WindSynthError, ValueError, KeyError, OSError) as exc:
        print(f"windsynth {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
