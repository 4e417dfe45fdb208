"""``biomass-uq`` command line.

Subcommands: ingest, fit, predict, evaluate, uncertainty, stand-eval.

Every run writes ``manifest.json`` next to its outputs, echoing the resolved
configuration and SHA-256 digests of inputs and outputs.  Outputs are built
in memory and written only after the whole command succeeded.

Exit codes: 0 success, 2 bad input or usage, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import io
import json
import logging
import os
import sys
from dataclasses import asdict, replace

import numpy as np

from . import __version__
from .data_model import FilterRules, Schema, filter_with_reasons, parse_dataset, parse_inputs, split_train_test
from .errors import BiomassError, InputError, NumericalError
from .evaluation import binned_residuals, evaluate, stand_report
from .forest import ForestConfig
from .gpr import DEFAULT_SIGMA, GprModel, SearchConfig, TransformSpec
from .models import FitOptions, fit_model, normalize_kind
from .persistence import dumps_model, load_labelled
from .plots import error_band_svg, uncertainty_chart_svg
from .uncertainty import DEFAULT_BINS, fitting_uncertainty, model_uncertainty

log = logging.getLogger("biomass_uq")

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3


# --- helpers ---------------------------------------------------------------

def _sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _read_text(path):
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            return fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None


def _load_schema(path):
    if not path:
        return Schema()
    with open(path, encoding="utf-8") as fh:
        return Schema.from_mapping(json.load(fh))


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in r])
    return buf.getvalue()


def _json_text(obj):
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _safe(label):
    return "".join(c if c.isalnum() or c in "-_" else "_" for c in label)


class Run:
    """Collects outputs in memory and writes them, plus the manifest, at the end."""

    def __init__(self, args):
        self.args = args
        self.outputs = {}
        self.inputs = {}
        self.input(args.config)

    def input(self, path):
        if path:
            self.inputs[str(path)] = _sha256_file(path)
        return path

    def add(self, name, text):
        self.outputs[name] = text

    def commit(self):
        out_dir = self.args.out_dir
        os.makedirs(out_dir, exist_ok=True)
        digests = {}
        for name in sorted(self.outputs):
            data = self.outputs[name].encode("utf-8")
            with open(os.path.join(out_dir, name), "wb") as fh:
                fh.write(data)
            digests[name] = hashlib.sha256(data).hexdigest()
        config = {k: v for k, v in sorted(vars(self.args).items()) if k not in ("func", "_required")}
        manifest = {
            "tool": "biomass-uq",
            "version": __version__,
            "command": self.args.command,
            "config": config,
            "inputs": self.inputs,
            "outputs": digests,
            "created_utc": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        }
        with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
            fh.write(_json_text(manifest))


def _transform(args):
    return TransformSpec() if args.log_transform == "on" else TransformSpec.raw()


def _load_models(paths):
    out = []
    for p in paths:
        try:
            model, label = load_labelled(p)
        except OSError as exc:
            raise InputError(f"cannot read model {p}: {exc.strerror}") from None
        out.append((label, model))
    return out


def _read_dataset(run, path, schema_path):
    return parse_dataset(_read_text(run.input(path)), _load_schema(run.input(schema_path)),
                         provenance=str(path))


# --- commands --------------------------------------------------------------

def cmd_ingest(args):
    run = Run(args)
    schema = _load_schema(run.input(args.schema))
    ds = parse_dataset(_read_text(run.input(args.input)), schema, provenance=str(args.input))
    rules = FilterRules(min_diameter_cm=args.min_diameter, min_biomass_kg=args.min_biomass,
                        require_diameter=args.require_diameter,
                        require_crown_diameter=args.require_crown_diameter,
                        require_location=args.require_location)
    kept, reasons = filter_with_reasons(ds, rules)
    per_biome = {}
    by_biome = {}
    for r in kept:
        by_biome.setdefault(r.biome.value, []).append(r)
    for biome, recs in sorted(by_biome.items()):
        d = [r.diameter_cm for r in recs if r.diameter_cm is not None]
        per_biome[biome] = {
            "count": len(recs),
            "median_height_m": float(np.median([r.height_m for r in recs])),
            "median_diameter_cm": float(np.median(d)) if d else None,
            "median_biomass_kg": float(np.median([r.biomass_kg for r in recs])),
        }
    text = kept.to_csv()
    run.add("dataset.csv", text)
    run.add("ingest_summary.json", _json_text({
        "input_records": len(ds),
        "kept": len(kept),
        "dropped": len(ds) - len(kept),
        "dropped_reasons": dict(sorted(reasons.items())),
        "rules": asdict(rules),
        "per_biome": per_biome,
        "dataset_digest": hashlib.sha256(text.encode("utf-8")).hexdigest(),
    }))
    run.commit()
    print(f"kept {len(kept)} of {len(ds)} records -> {os.path.join(args.out_dir, 'dataset.csv')}")


def _fit_options(args):
    search = SearchConfig(jitter=args.jitter)
    forest = ForestConfig(n_trees=args.n_trees, max_depth=args.max_depth, min_leaf=args.min_leaf,
                          seed=args.seed, features=tuple(args.rf_features.split(",")))
    return FitOptions(sigma=args.sigma, transform=_transform(args), search=search, forest=forest)


def cmd_fit(args):
    run = Run(args)
    ds = _read_dataset(run, args.dataset, args.schema)
    kind = normalize_kind(args.kind)
    if args.test_fraction > 0:
        train, test = split_train_test(ds, args.test_fraction, args.seed)
    else:
        train, test = ds, None
    model = fit_model(kind, train, _fit_options(args))
    text = dumps_model(model, args.label)
    label = args.label or json.loads(text)["label"]
    run.add("model.json", text)
    report = {"kind": kind, "label": label, "n_train": len(train), "seed": args.seed,
              "test_fraction": args.test_fraction}
    if isinstance(model, GprModel):
        report["hyperparameters"] = {"length_scale": model.hyper.length_scale,
                                     "mean_offset": model.hyper.mean_offset,
                                     "noise_sigma": model.hyper.noise_sigma,
                                     "jitter": model.jitter,
                                     "transform": vars(model.transform)}
    elif hasattr(model, "labelled"):
        report["coefficients"] = model.labelled()
        report["residual_sigma"] = model.residual_sigma
    if test is not None and len(test) > 0:
        y = test.column("biomass_kg")
        rep = evaluate(y, model.predict_biomass(list(test)), scale=args.outlier_scale)
        report["test"] = rep.to_dict() | {"n_test": len(test)}
        run.add("test.csv", test.to_csv())
        run.add("train.csv", train.to_csv())
    run.add("fit_report.json", _json_text(report))
    run.commit()
    print(f"fitted {label} on {len(train)} trees -> {os.path.join(args.out_dir, 'model.json')}")


def cmd_predict(args):
    run = Run(args)
    (label, model), = _load_models([run.input(args.model)])
    rows = parse_inputs(_read_text(run.input(args.input)), _load_schema(run.input(args.schema)))
    if not rows:
        raise InputError("no rows to predict")
    biomass = model.predict_biomass(rows)
    header = ["row", "h_m", "d_cm", "cd_m", "plot_id", "biomass_kg"]
    extra = None
    if isinstance(model, GprModel):
        pred = model.predict([r.height_m for r in rows])
        header += ["log_mean", "log_std"]
        extra = list(zip(pred.latent_mean.tolist(), pred.latent_std.tolist()))
    out = []
    for i, r in enumerate(rows):
        line = [i + 1, r.height_m, r.diameter_cm, r.crown_diameter_m, r.plot_id or "", float(biomass[i])]
        line = ["" if v is None else v for v in line]
        if extra is not None:
            line += list(extra[i])
        out.append(line)
    run.add("predictions.csv", _csv_text(header, out))
    run.commit()
    print(f"{len(rows)} predictions from {label} -> {os.path.join(args.out_dir, 'predictions.csv')}")


def cmd_evaluate(args):
    run = Run(args)
    models = _load_models([run.input(p) for p in args.model])
    test = _read_dataset(run, args.test, args.schema)
    recs = list(test)
    y = test.column("biomass_kg")
    axis_attr = {"h": "height_m", "d": "diameter_cm", "cd": "crown_diameter_m"}[args.bin_axis]
    axis = test.column(axis_attr)
    metrics, summary = [], {}
    for label, model in models:
        yhat = model.predict_biomass(recs)
        rep = evaluate(y, yhat, scale=args.outlier_scale)
        metrics.append([label, rep.r2, rep.rmse_kg, rep.bias, rep.n_used, rep.n_outliers_excluded])
        binned = binned_residuals(axis, y - yhat, args.bins, axis=args.bin_axis)
        summary[label] = {"metrics": rep.to_dict(), "binned_residuals": list(binned.rows())}
        name = _safe(label)
        run.add(f"binned_{name}.csv", _csv_text(
            ["bin", "bin_low", "bin_high", "mean_residual", "half_std", "count"],
            [list(r.values()) for r in binned.rows()]))
        run.add(f"binned_{name}.svg", error_band_svg(binned, title=f"{label}: residuals by {args.bin_axis}",
                                                     label=label))
    run.add("metrics.csv", _csv_text(["model", "r2", "rmse_kg", "bias", "n_used", "n_outliers_excluded"],
                                     metrics))
    run.add("evaluation.json", _json_text({"outlier_scale": args.outlier_scale, "bins": args.bins,
                                           "bin_axis": args.bin_axis, "models": summary}))
    run.commit()
    for m in metrics:
        print(f"{m[0]:>6}  R2={m[1]:.4f}  RMSE={m[2]:.1f} kg  Bias={m[3]:+.4f}")


def cmd_uncertainty(args):
    run = Run(args)
    ds = _read_dataset(run, args.dataset, args.schema)
    recs = list(ds)
    keys = [k for k in args.model_keys.split(",") if k]
    mu_reports, summary = [], {"bins": args.bins, "model_uncertainty": {}, "fitting_uncertainty": {},
                               "fitting_sort_key": args.sort_key}
    mu_rows, fu_rows = [], []
    for key in keys:
        rep = model_uncertainty(recs, key, args.bins)
        rep = replace(rep, label=key)
        mu_reports.append(rep)
        summary["model_uncertainty"][key] = rep.overall
        mu_rows += [[key] + list(r.values()) for r in rep.rows()]
    fu_reports = []
    for label, model in _load_models([run.input(p) for p in args.model]):
        rep = fitting_uncertainty(recs, model.predict_biomass(recs), args.sort_key, args.bins, label=label)
        fu_reports.append(rep)
        summary["fitting_uncertainty"][label] = rep.overall
        fu_rows += [[label] + list(r.values()) for r in rep.rows()]
    header = ["series", "bin", "bin_low", "bin_high", "count", "ratio"]
    if mu_reports:
        run.add("model_uncertainty.csv", _csv_text(header, mu_rows))
        run.add("model_uncertainty.svg", uncertainty_chart_svg(
            mu_reports, title=f"Model uncertainty ({args.bins} buckets)"))
    if fu_reports:
        run.add("fitting_uncertainty.csv", _csv_text(header, fu_rows))
        run.add("fitting_uncertainty.svg", uncertainty_chart_svg(
            fu_reports, title=f"Fitting uncertainty by {args.sort_key} ({args.bins} pockets)"))
    run.add("uncertainty_summary.json", _json_text(summary))
    run.commit()
    for k, v in summary["model_uncertainty"].items():
        print(f"model uncertainty [{k}]: {100 * v:.2f}%")
    for k, v in summary["fitting_uncertainty"].items():
        print(f"fitting uncertainty [{k}]: {100 * v:.2f}%")


def cmd_stand_eval(args):
    run = Run(args)
    trees = parse_inputs(_read_text(run.input(args.plots)), _load_schema(run.input(args.schema)))
    if not trees:
        raise InputError("plot file has no trees")
    plots = {}
    for t in trees:
        plots.setdefault(t.plot_id, []).append(t)
    (_, lr3), = _load_models([run.input(args.lr3)])
    rows, summary = [], {}
    for label, model in _load_models([run.input(p) for p in args.candidate]):
        rep = stand_report(plots, model, lr3, args.pct_rmse_denominator, args.min_trees)
        summary[label] = rep.to_dict()
        rows += [[label, p, re] for p, re in rep.per_plot_re]
        rows.append([label, "ALL", rep.overall_re])
    run.add("stand_re.csv", _csv_text(["model", "plot_id", "re"], rows))
    run.add("stand_report.json", _json_text(summary))
    run.commit()
    for label, s in summary.items():
        print(f"{label:>6}  RE={s['overall_re']:+.4f}  %RMSE={100 * s['pct_rmse']:.2f}%")


# --- parser ----------------------------------------------------------------

def _shared_parser():
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("shared options")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out-dir", default="out")
    g.add_argument("--config", help="JSON file of option defaults (keys use underscores)")
    g.add_argument("--log-transform", choices=("on", "off"), default="on")
    g.add_argument("--sigma", type=float, default=DEFAULT_SIGMA, help="GP noise level (target units)")
    g.add_argument("--bins", type=int, default=DEFAULT_BINS)
    g.add_argument("--outlier-scale", choices=("log", "raw"), default="log")
    g.add_argument("--pct-rmse-denominator", choices=("mean", "sum"), default="mean")
    g.add_argument("--schema", help="JSON column mapping {\"columns\": {...}, \"required\": [...]}")
    g.add_argument("-v", "--verbose", action="store_true")
    return p


def _required(p, *flags, **kw):
    # checked after --config is merged, so a config file may supply it
    kw["help"] = (kw.get("help", "") + " (required)").strip()
    action = p.add_argument(*flags, **kw)
    p.set_defaults(_required=(p.get_default("_required") or ()) + (action.dest,))


def build_parser():
    shared = _shared_parser()
    parser = argparse.ArgumentParser(prog="biomass-uq", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[shared], help="parse and filter a tree CSV")
    _required(p, "--input")
    p.add_argument("--min-diameter", type=float, default=5.0)
    p.add_argument("--min-biomass", type=float, default=2.0)
    p.add_argument("--require-diameter", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--require-crown-diameter", action=argparse.BooleanOptionalAction, default=False)
    p.add_argument("--require-location", action=argparse.BooleanOptionalAction, default=False)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("fit", parents=[shared], help="fit one model on a seeded split")
    _required(p, "--dataset")
    _required(p, "--kind", help="lr_hcd | lr2_h | lr3_hd | lr_d | rf | gpr")
    p.add_argument("--label")
    p.add_argument("--test-fraction", type=float, default=0.1, help="0 trains on everything")
    p.add_argument("--jitter", type=float, default=1e-8)
    p.add_argument("--n-trees", type=int, default=100)
    p.add_argument("--max-depth", type=int, default=12)
    p.add_argument("--min-leaf", type=int, default=5)
    p.add_argument("--rf-features", default="h", help="comma list from h,d,cd")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", parents=[shared], help="predict biomass for a CSV of trees")
    _required(p, "--model")
    _required(p, "--input")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", parents=[shared], help="tree-level metrics and binned residuals")
    _required(p, "--model", action="append")
    _required(p, "--test")
    p.add_argument("--bin-axis", choices=("h", "d", "cd"), default="h")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("uncertainty", parents=[shared], help="model and fitting uncertainty indices")
    _required(p, "--dataset")
    p.add_argument("--model", action="append", default=[])
    p.add_argument("--sort-key", default="h", help="pocket axis for fitting uncertainty")
    p.add_argument("--model-keys", default="h,d,cd,h_cd", help="sort keys for model uncertainty")
    p.set_defaults(func=cmd_uncertainty)

    p = sub.add_parser("stand-eval", parents=[shared], help="plot-level RE and %%RMSE against LR3")
    _required(p, "--plots")
    _required(p, "--candidate", action="append")
    _required(p, "--lr3")
    p.add_argument("--min-trees", type=int, default=None)
    p.set_defaults(func=cmd_stand_eval)
    return parser


def parse_args(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            cfg = json.load(fh)
        # config supplies defaults; explicit flags still win
        sub = parser._subparsers._group_actions[0].choices[args.command]
        unknown = set(cfg) - {a.dest for a in sub._actions}
        if unknown:
            parser.error(f"unknown keys in --config: {sorted(unknown)}")
        sub.set_defaults(**cfg)
        args = parser.parse_args(argv)
    missing = ["--" + d.replace("_", "-") for d in getattr(args, "_required", ()) if getattr(args, d) is None]
    if missing:
        parser.error(f"{args.command}: missing required option(s) {', '.join(missing)}")
    return args


def main(argv=None):
    try:
        args = parse_args(argv)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot load config: {exc}", file=sys.stderr)
        return EXIT_INPUT
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (BiomassError, ValueError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
