"""Beam-prediction metrics, learning curves and report emission."""

import csv
import io
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateGroundTruth,
    EmptyFraction,
    IndexOutOfRange,
    LengthMismatch,
)

TOPK = (1, 2, 3, 5)
DEFAULT_FRACTIONS = (0.1, 0.2, 0.3, 0.5, 0.7, 1.0)


def topk_accuracy(ranked, truths, k):
    """Fraction of samples whose true beam is among the first ``k`` ranked beams."""
    ranked = np.asarray(ranked)
    truths = np.asarray(truths)
    if len(ranked) != len(truths):
        raise LengthMismatch(f"{len(ranked)} rankings vs {len(truths)} labels")
    if len(truths) == 0:
        return 0.0
    if ranked.shape[1] < k:
        raise LengthMismatch(f"ranked lists hold {ranked.shape[1]} beams, k={k}")
    return float(np.mean(np.any(ranked[:, :k] == truths[:, None], axis=1)))


def confusion(preds, truths, num_classes):
    """Counts indexed ``[truth, prediction]``."""
    preds = np.asarray(preds, dtype=int)
    truths = np.asarray(truths, dtype=int)
    if len(preds) != len(truths):
        raise LengthMismatch(f"{len(preds)} predictions vs {len(truths)} labels")
    for arr in (preds, truths):
        if arr.size and (arr.min() < 0 or arr.max() >= num_classes):
            raise IndexOutOfRange(f"beam index outside [0, {num_classes})")
    counts = np.zeros((num_classes, num_classes), dtype=int)
    np.add.at(counts, (truths, preds), 1)
    return counts


def r2_power(top1_power, gt_power):
    pred = np.asarray(top1_power, dtype=float)
    gt = np.asarray(gt_power, dtype=float)
    if pred.shape != gt.shape or gt.size == 0:
        raise LengthMismatch("power series must be nonempty and of equal length")
    ss_tot = float(np.sum((gt - gt.mean()) ** 2))
    if ss_tot == 0:
        raise DegenerateGroundTruth("ground-truth powers are all identical")
    return 1.0 - float(np.sum((gt - pred) ** 2)) / ss_tot


def power_pairs(ranked, powers):
    """(top-1 power, best power) per sample, scaled by the set's global maximum."""
    powers = np.asarray(powers, dtype=float)
    ranked = np.asarray(ranked)
    if len(ranked) != len(powers):
        raise LengthMismatch(f"{len(ranked)} rankings vs {len(powers)} power vectors")
    scale = float(np.max(powers)) if powers.size and np.max(powers) > 0 else 1.0
    top1 = powers[np.arange(len(powers)), ranked[:, 0]] / scale
    best = powers.max(axis=1) / scale
    return top1, best


def hybrid_sweep_power(ranked, powers, k):
    """Mean ratio of the best power within the top-k beams to the best overall.

    Models a short beam sweep restricted to the ``k`` predicted beams.
    """
    powers = np.asarray(powers, dtype=float)
    ranked = np.asarray(ranked)
    if len(ranked) != len(powers):
        raise LengthMismatch(f"{len(ranked)} rankings vs {len(powers)} power vectors")
    if len(powers) == 0:
        return 0.0
    sub = np.take_along_axis(powers, ranked[:, :k], axis=1)
    best = powers.max(axis=1)
    ratio = np.divide(sub.max(axis=1), best, out=np.ones(len(best)), where=best > 0)
    return float(np.mean(ratio))


def learning_curve(train_x, train_y, val_x, val_y, fractions, config, seed=0):
    """Train one fresh model per fraction of a seeded shuffle of the training set.

    Returns ``(fraction, n_samples, top1, top5, result)`` rows; the fraction-1.0
    row uses the full training set in its original order, so it equals a
    standalone :func:`beamnet.train` run with the same config.
    """
    from . import beamnet

    fractions = list(fractions)
    if any(not 0 < f <= 1 for f in fractions):
        raise EmptyFraction("fractions must lie in (0, 1]")
    if fractions != sorted(fractions):
        raise ValueError("fractions must be sorted ascending")
    train_x = np.asarray(train_x, dtype=float).reshape(-1, 2)
    train_y = np.asarray(train_y, dtype=int)
    order = np.random.default_rng(seed).permutation(len(train_y))
    rows = []
    for frac in fractions:
        n = int(np.ceil(round(frac * len(train_y), 9)))
        if n < 1:
            raise EmptyFraction(f"fraction {frac} selects no samples")
        idx = np.arange(len(train_y)) if frac == 1.0 else order[:n]
        result = beamnet.train(train_x[idx], train_y[idx], val_x, val_y, config)
        ranked = beamnet.rank_beams(beamnet.logits_batch(result.params, val_x))
        rows.append(
            (frac, n, topk_accuracy(ranked, val_y, 1), topk_accuracy(ranked, val_y, 5), result)
        )
    return rows


@dataclass
class EvalReport:
    topk: dict
    confusion: np.ndarray
    r2: object  # float, or None when the ground truth is degenerate
    power_pairs: tuple  # (top1_power, gt_power) arrays
    hybrid: dict = field(default_factory=dict)
    txid: dict = None
    curve: list = None  # (fraction, n, top1, top5)
    metadata: dict = field(default_factory=dict)

    @property
    def num_classes(self):
        return self.confusion.shape[0]


def build_report(ranked, truths, powers, num_classes=32, txid=None, metadata=None, ks=TOPK):
    ranked = np.asarray(ranked)
    truths = np.asarray(truths)
    top1, gt = power_pairs(ranked, powers)
    try:
        r2 = r2_power(top1, gt)
    except DegenerateGroundTruth:
        r2 = None
    return EvalReport(
        topk={k: topk_accuracy(ranked, truths, k) for k in ks},
        confusion=confusion(ranked[:, 0], truths, num_classes),
        r2=r2,
        power_pairs=(top1, gt),
        hybrid={k: hybrid_sweep_power(ranked, powers, k) for k in ks},
        txid=txid,
        metadata=dict(metadata or {}),
    )


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_text(path, text):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _csv_text(rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerows(rows)
    return buf.getvalue()


def metrics_rows(report):
    rows = [("key", "value")]
    for k, v in sorted(report.metadata.items()):
        rows.append((f"meta_{k}", _fmt(v)))
    for k, acc in sorted(report.topk.items()):
        rows.append((f"top{k}", _fmt(acc)))
    for k, ratio in sorted(report.hybrid.items()):
        rows.append((f"hybrid_power_top{k}", _fmt(ratio)))
    rows.append(("r2", "" if report.r2 is None else _fmt(report.r2)))
    rows.append(("num_samples", str(int(report.confusion.sum()))))
    if report.txid:
        for k, v in report.txid.items():
            rows.append((k, _fmt(v)))
    return rows


def read_confusion(path):
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    return np.array([[int(v) for v in r] for r in rows], dtype=int)


def emit_report(report, out_dir, figures=True):
    """Write the report files and return the list of emitted file names.

    ``metrics.csv``, ``confusion.csv`` and ``scatter.csv`` are always written;
    ``curve.csv`` only when a learning curve is present. Figures are SVG and
    byte-deterministic for a given report.
    """
    os.makedirs(out_dir, exist_ok=True)
    emitted = []

    def put(name, text):
        _write_text(os.path.join(out_dir, name), text)
        emitted.append(name)

    put("metrics.csv", _csv_text(metrics_rows(report)))
    put("confusion.csv", _csv_text(report.confusion.tolist()))
    top1, gt = report.power_pairs
    put(
        "scatter.csv",
        _csv_text([("top1_power", "gt_power")] + [(_fmt(a), _fmt(b)) for a, b in zip(top1, gt)]),
    )
    if report.curve:
        put(
            "curve.csv",
            _csv_text(
                [("fraction", "n_samples", "top1", "top5")]
                + [(_fmt(f), str(n), _fmt(t1), _fmt(t5)) for f, n, t1, t5 in report.curve]
            ),
        )
    if figures:
        from . import plotting

        emitted += plotting.render_report(report, out_dir)
    manifest = {"files": sorted(emitted)}
    put("report_manifest.json", json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return emitted
