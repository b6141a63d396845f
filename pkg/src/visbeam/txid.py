"""Transmitter identification from GPS and detected box centres.

A bivariate cubic regression maps the (z-scored) GPS position of the
transmitter to an estimate of its box centre in the image; the detected box
nearest to that estimate is taken to be the transmitter.
"""

import json
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDesign, LengthMismatch, NonFinite

RIDGE = 1e-8
COND_LIMIT = 1e15


@dataclass(frozen=True)
class Normalizer:
    mean: np.ndarray
    std: np.ndarray
    degenerate: tuple = (False, False)

    @classmethod
    def fit(cls, g):
        g = np.asarray(g, dtype=float).reshape(-1, 2)
        mean = g.mean(axis=0)
        std = g.std(axis=0)
        flags = tuple(bool(s <= 0 or not np.isfinite(s)) for s in std)
        std = np.where(np.array(flags), 1.0, std)
        return cls(mean=mean, std=std, degenerate=flags)

    def __call__(self, g):
        return (np.asarray(g, dtype=float) - self.mean) / self.std


def poly_expand(g, include_bias=True):
    """Cubic monomials ``[1, a, b, a^2, ab, b^2, a^3, a^2 b, a b^2, b^3]``.

    Accepts one point ``(2,)`` or a batch ``(n, 2)``; the constant is dropped
    when ``include_bias`` is false.
    """
    g = np.asarray(g, dtype=float)
    if not np.all(np.isfinite(g)):
        raise NonFinite("GPS input contains non-finite values")
    a, b = g[..., 0], g[..., 1]
    cols = [np.ones_like(a), a, b, a * a, a * b, b * b, a**3, a * a * b, a * b * b, b**3]
    if not include_bias:
        cols = cols[1:]
    return np.stack(cols, axis=-1)


@dataclass(frozen=True)
class RegressionModel:
    W: np.ndarray  # (A, 2)
    normalizer: Normalizer
    include_bias: bool = True
    train_rmse: float = float("nan")

    @property
    def num_features(self):
        return self.W.shape[0]

    def to_dict(self):
        return {
            "A": int(self.num_features),
            "include_bias": bool(self.include_bias),
            "W": [float(v) for v in self.W.ravel()],  # row-major (A, 2)
            "normalizer": {
                "mean": [float(v) for v in self.normalizer.mean],
                "std": [float(v) for v in self.normalizer.std],
                "degenerate": list(self.normalizer.degenerate),
            },
            "train_rmse": float(self.train_rmse),
        }

    @classmethod
    def from_dict(cls, d):
        A = int(d["A"])
        W = np.array(d["W"], dtype=float).reshape(A, 2)
        n = d["normalizer"]
        norm = Normalizer(
            np.array(n["mean"], dtype=float),
            np.array(n["std"], dtype=float),
            tuple(bool(x) for x in n.get("degenerate", (False, False))),
        )
        return cls(W, norm, bool(d["include_bias"]), float(d.get("train_rmse", "nan")))

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=1)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def regularized_loss(W, phi, targets, lam=RIDGE):
    r = phi @ W - targets
    return float(np.sum(r * r) + lam * np.sum(W * W))


def fit_regression(gps, centers, include_bias=True, lam=RIDGE):
    """Ridge least squares on the regularized normal equations."""
    gps = np.asarray(gps, dtype=float).reshape(-1, 2)
    centers = np.asarray(centers, dtype=float).reshape(-1, 2)
    if len(gps) != len(centers):
        raise LengthMismatch(f"{len(gps)} GPS points but {len(centers)} centres")
    if len(gps) == 0:
        raise DegenerateDesign("no training pairs")
    norm = Normalizer.fit(gps)
    phi = poly_expand(norm(gps), include_bias)
    gram = phi.T @ phi + lam * np.eye(phi.shape[1])
    if not np.all(np.isfinite(gram)) or np.linalg.cond(gram) > COND_LIMIT:
        raise DegenerateDesign("regularized normal matrix is numerically singular")
    W = np.linalg.solve(gram, phi.T @ centers)
    rmse = float(np.sqrt(np.mean(np.sum((phi @ W - centers) ** 2, axis=1))))
    return RegressionModel(W=W, normalizer=norm, include_bias=include_bias, train_rmse=rmse)


def predict_center(model, g):
    """Estimated transmitter box centre; not clipped to the image."""
    return poly_expand(model.normalizer(g), model.include_bias) @ model.W


@dataclass(frozen=True)
class Fallback:
    """No box was detected; carries the regression estimate clipped to the image."""

    center: np.ndarray


def select_tx(boxes, b_hat):
    """Row of ``boxes`` nearest to ``b_hat`` (lowest index on ties), or a Fallback."""
    boxes = np.asarray(boxes, dtype=float).reshape(-1, 2)
    b_hat = np.asarray(b_hat, dtype=float)
    if len(boxes) == 0:
        return Fallback(np.clip(b_hat, 0.0, 1.0))
    d2 = np.sum((boxes - b_hat) ** 2, axis=1)
    return int(np.argmin(d2))


@dataclass
class TxidMetrics:
    """Frame-level identification outcome counts.

    ``tp``: transmitter detected and selected; ``fp``: transmitter detected
    but another box selected; ``fn``: transmitter missed by the detector;
    ``tn``: frame without a transmitter and nothing selected.
    """

    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self):
        return self.tp + self.fp + self.fn + self.tn

    @property
    def accuracy(self):
        return (self.tp + self.tn) / self.total if self.total else 0.0

    @property
    def precision(self):
        d = self.tp + self.fp
        return self.tp / d if d else 0.0

    @property
    def recall(self):
        d = self.tp + self.fn
        return self.tp / d if d else 0.0

    def confusion(self):
        """2x2 counts, rows = truth (Tx present, absent), cols = (correct, incorrect)."""
        return np.array([[self.tp, self.fp + self.fn], [0, self.tn]])

    def as_dict(self):
        return {
            "txid_accuracy": self.accuracy,
            "txid_precision": self.precision,
            "txid_recall": self.recall,
            "txid_tp": self.tp,
            "txid_fp": self.fp,
            "txid_fn": self.fn,
            "txid_tn": self.tn,
        }


def txid_metrics(selections, tx_rows, has_tx=None):
    """Score per-frame selections against detector provenance.

    ``selections`` holds a row index or :class:`Fallback` per frame and
    ``tx_rows`` the row of the true transmitter (None when it was missed).
    ``has_tx`` flags frames that contain a transmitter at all (default: all).
    """
    if len(selections) != len(tx_rows):
        raise LengthMismatch(f"{len(selections)} selections vs {len(tx_rows)} frames")
    if has_tx is None:
        has_tx = [True] * len(tx_rows)
    elif len(has_tx) != len(tx_rows):
        raise LengthMismatch("has_tx length differs")
    tp = fp = fn = tn = 0
    for sel, row, present in zip(selections, tx_rows, has_tx):
        if not present:
            if isinstance(sel, Fallback):
                tn += 1
            else:
                fp += 1
        elif row is None:
            fn += 1
        elif not isinstance(sel, Fallback) and sel == row:
            tp += 1
        else:
            fp += 1
    return TxidMetrics(tp, fp, fn, tn)
