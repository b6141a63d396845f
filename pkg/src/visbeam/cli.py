"""Command-line front end: gen | fit | train | eval | curve.

Every subcommand writes its outputs plus ``manifest.json`` (resolved config,
input/output digests, timestamp) into ``--out``. Exit codes: 0 success,
1 runtime failure, 2 invalid configuration or arguments.
"""

import argparse
import csv
import datetime
import hashlib
import json
import os
import sys

import numpy as np

from . import __version__, dataset, evaluation, pipeline, scene, txid
from . import config as cfgmod
from .errors import ConfigError, VisbeamError

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(out, command, args, cfg, inputs, outputs):
    manifest = {
        "command": command,
        "args": {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "set")},
        "overrides": list(args.set or []),
        "config": cfg.to_dict(),
        "config_digest": cfg.digest(),
        "inputs": {p: _sha256(p) for p in inputs},
        "outputs": {n: _sha256(os.path.join(out, n)) for n in sorted(outputs)},
        "version": __version__,
        "created_utc": datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds"),
    }
    with open(os.path.join(out, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1)
        fh.write("\n")


def _resolve(args):
    overrides = [cfgmod.parse_override(s) for s in args.set or []]
    if args.seed is not None:
        overrides.append({"seeds": {"master": args.seed}})
    if getattr(args, "epochs", None) is not None:
        overrides.append({"train": {"epochs": args.epochs}})
    return cfgmod.load(args.config, overrides)


def _dataset_path(path):
    return os.path.join(path, "dataset.jsonl") if os.path.isdir(path) else path


def _load_dataset(args):
    path = _dataset_path(args.dataset)
    if not os.path.exists(path):
        raise ConfigError(f"no such dataset {path}", "--dataset")
    return path, dataset.load(path)


def _load_regression(args, required):
    if not args.regression:
        if required:
            raise ConfigError("a regression model is required for the multi pipeline", "--regression")
        return None, None
    if not os.path.exists(args.regression):
        raise ConfigError(f"no such file {args.regression}", "--regression")
    return args.regression, txid.RegressionModel.load(args.regression)


def _fmt(v):
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def cmd_gen(args, cfg):
    samples = scene.generate_dataset(cfg.scene, args.n, args.mode, seed=cfg.seed, workers=args.workers)
    os.makedirs(args.out, exist_ok=True)
    dataset.save(samples, os.path.join(args.out, "dataset.jsonl"))
    hist = np.bincount([s.beam for s in samples], minlength=cfgmod.NUM_BEAMS)
    with open(os.path.join(args.out, "histogram.csv"), "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("beam", "count"))
        w.writerows(enumerate(hist.tolist()))
    print(f"samples: {len(samples)}")
    print("beam histogram: " + " ".join(f"{b}:{c}" for b, c in enumerate(hist) if c))
    return [], ["dataset.jsonl", "histogram.csv"]


def cmd_fit(args, cfg):
    path, samples = _load_dataset(args)
    train, val = dataset.split(samples, cfg.split)
    pairs = [(s.gps, s.tx_center) for s in train if s.true_tx_row is not None]
    if not pairs:
        raise VisbeamError("no training frame has a labelled transmitter box")
    model = txid.fit_regression(
        [p[0] for p in pairs], [p[1] for p in pairs], include_bias=cfg.include_bias, lam=cfg.ridge
    )
    held = [s for s in val if s.true_tx_row is not None]
    os.makedirs(args.out, exist_ok=True)
    model.save(os.path.join(args.out, "regression.json"))
    print(f"training rmse: {model.train_rmse:.6f}")
    if held:
        pred = txid.predict_center(model, np.array([s.gps for s in held]))
        err = np.linalg.norm(pred - np.array([s.tx_center for s in held]), axis=1)
        print(f"holdout centre error: mean {err.mean():.6f} median {np.median(err):.6f} (n={len(held)})")
    return [path], ["regression.json"]


def _write_history(path, history):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("epoch", "lr", "train_loss", "val_top1"))
        for r in history:
            w.writerow((r.epoch, _fmt(r.lr), _fmt(r.train_loss), _fmt(r.val_top1)))


def cmd_train(args, cfg):
    reg_path, reg = _load_regression(args, args.pipeline == "multi")
    path, samples = _load_dataset(args)
    train, val = dataset.split(samples, cfg.split)
    model, result = pipeline.train_model(train, val, cfg.train_config, args.pipeline, reg)
    os.makedirs(args.out, exist_ok=True)
    model.save(os.path.join(args.out, "model.json"))
    _write_history(os.path.join(args.out, "history.csv"), result.history)
    if result.history:
        best = result.history[result.best_epoch - 1]
        print(f"best epoch {result.best_epoch}: val top-1 {best.val_top1:.4f}")
    else:
        print("no epochs run; model holds its initial parameters")
    return [path] + ([reg_path] if reg_path else []), ["model.json", "history.csv"]


def _evaluate(samples, model, reg, cfg, metadata, curve=None):
    x, selections = pipeline.inference_inputs(samples, model.pipeline, reg)
    ranked = model.rank(x)
    truths = np.array([s.beam for s in samples], dtype=int)
    powers = np.array([s.power32 for s in samples])
    tx = None
    if model.pipeline == "multi":
        tx = txid.txid_metrics(selections, [s.true_tx_row for s in samples]).as_dict()
    report = evaluation.build_report(
        ranked, truths, powers, cfgmod.NUM_BEAMS, txid=tx, metadata=metadata, ks=cfg.topk
    )
    report.curve = curve
    return report


def _print_report(report):
    for k, acc in sorted(report.topk.items()):
        print(f"top-{k}: {acc:.4f}")
    if report.txid:
        print(f"txid accuracy: {report.txid['txid_accuracy']:.4f}")


def cmd_eval(args, cfg):
    model_path = args.model
    if not os.path.exists(model_path):
        raise ConfigError(f"no such file {model_path}", "--model")
    model = pipeline.BeamModel.load(model_path)
    reg_path, reg = _load_regression(args, model.pipeline == "multi")
    path, samples = _load_dataset(args)
    if args.split == "val":
        samples = dataset.split(samples, cfg.split)[1]
    meta = {"seed": cfg.seed, "config_digest": cfg.digest(), "pipeline": model.pipeline, "split": args.split}
    report = _evaluate(samples, model, reg, cfg, meta)
    emitted = evaluation.emit_report(report, args.out, figures=not args.no_figures)
    _print_report(report)
    return [path, model_path] + ([reg_path] if reg_path else []), emitted


def cmd_curve(args, cfg):
    reg_path, reg = _load_regression(args, args.pipeline == "multi")
    path, samples = _load_dataset(args)
    train, val = dataset.split(samples, cfg.split)
    if args.pipeline == "single":
        x_tr, y_tr = pipeline.single_inputs(train, training=True)
    else:
        x_tr, y_tr = pipeline.labelled_tx_inputs(train)
    x_val, _ = pipeline.inference_inputs(val, args.pipeline, reg)
    y_val = np.array([s.beam for s in val], dtype=int)
    scaler = pipeline.InputScaler.fit(x_tr)
    tc = cfg.train_config
    rows = evaluation.learning_curve(
        scaler(x_tr), y_tr, scaler(x_val), y_val, cfg.fractions, tc, seed=cfg.seed
    )
    curve = [(f, n, t1, t5) for f, n, t1, t5, _ in rows]
    full = pipeline.BeamModel(rows[-1][4].params, scaler, tc, args.pipeline)
    meta = {"seed": cfg.seed, "config_digest": cfg.digest(), "pipeline": args.pipeline, "split": "val"}
    report = _evaluate(val, full, reg, cfg, meta, curve=curve)
    emitted = evaluation.emit_report(report, args.out, figures=not args.no_figures)
    for f, n, t1, t5 in curve:
        print(f"fraction {f:g} (n={n}): top-1 {t1:.4f} top-5 {t5:.4f}")
    return [path] + ([reg_path] if reg_path else []), emitted


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON experiment config (defaults apply to absent fields)")
    common.add_argument("--seed", type=int, help="master seed; overrides seeds.master")
    common.add_argument(
        "--set",
        action="append",
        metavar="BLOCK.FIELD=VALUE",
        help="override one config field (JSON value); repeatable, applied after --config",
    )
    common.add_argument("--out", required=True, help="output directory")

    p = _Parser(prog="visbeam", description="Vision-aided mmWave beam prediction experiments.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", parents=[common], help="generate a synthetic dataset")
    g.add_argument("--mode", choices=(scene.SINGLE, scene.MULTI), default=scene.SINGLE)
    g.add_argument("--n", type=int, default=5000, help="number of samples")
    g.add_argument("--workers", type=int, default=1, help="generation processes (output unchanged)")
    g.set_defaults(func=cmd_gen)

    f = sub.add_parser("fit", parents=[common], help="fit the GPS-to-image regression")
    f.add_argument("--dataset", required=True, help="dataset.jsonl or a gen output directory")
    f.set_defaults(func=cmd_fit)

    t = sub.add_parser("train", parents=[common], help="train the beam predictor")
    t.add_argument("--dataset", required=True)
    t.add_argument("--pipeline", choices=("single", "multi"), default="single")
    t.add_argument("--regression", help="regression.json from `fit` (multi pipeline)")
    t.add_argument("--epochs", type=int, help="overrides train.epochs (0 keeps the random init)")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", parents=[common], help="evaluate a trained model")
    e.add_argument("--dataset", required=True)
    e.add_argument("--model", required=True, help="model.json from `train`")
    e.add_argument("--regression", help="regression.json (multi pipeline)")
    e.add_argument("--split", choices=("val", "all"), default="val")
    e.add_argument("--no-figures", action="store_true", help="skip the SVG figures")
    e.set_defaults(func=cmd_eval)

    c = sub.add_parser("curve", parents=[common], help="accuracy versus training-set fraction")
    c.add_argument("--dataset", required=True)
    c.add_argument("--pipeline", choices=("single", "multi"), default="single")
    c.add_argument("--regression")
    c.add_argument("--no-figures", action="store_true")
    c.set_defaults(func=cmd_curve)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if getattr(args, "n", 1) < 1:
            raise ConfigError("must be >= 1", "--n")
        if getattr(args, "workers", 1) < 1:
            raise ConfigError("must be >= 1", "--workers")
        cfg = _resolve(args)
        inputs, outputs = args.func(args, cfg)
        _write_manifest(args.out, args.command, args, cfg, inputs, outputs)
    except ConfigError as exc:
        print(f"visbeam {args.command}: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (VisbeamError, OSError, ValueError, ArithmeticError) as exc:
        print(f"visbeam {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
