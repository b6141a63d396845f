"""Glue between scene samples, transmitter identification and the beam MLP."""

import json
from dataclasses import dataclass

import numpy as np

from . import beamnet, txid
from .errors import EmptyDataset

IMAGE_CENTER = np.array([0.5, 0.5])


@dataclass(frozen=True)
class InputScaler:
    """Per-coordinate z-score of box centres, fit on the training inputs."""

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, x):
        x = np.asarray(x, dtype=float).reshape(-1, 2)
        std = x.std(axis=0)
        return cls(x.mean(axis=0), np.where(std > 0, std, 1.0))

    def __call__(self, x):
        return (np.asarray(x, dtype=float) - self.mean) / self.std


@dataclass
class BeamModel:
    params: beamnet.MlpParams
    scaler: InputScaler
    config: beamnet.TrainConfig
    pipeline: str = "single"

    def logits(self, centers):
        return beamnet.logits_batch(self.params, self.scaler(np.asarray(centers).reshape(-1, 2)))

    def rank(self, centers):
        return beamnet.rank_beams(self.logits(centers))

    def to_dict(self):
        block = beamnet.params_to_dict(self.params, self.config)
        block["pipeline"] = self.pipeline
        block["scaler"] = {
            "mean": [float(v) for v in self.scaler.mean],
            "std": [float(v) for v in self.scaler.std],
        }
        return block

    @classmethod
    def from_dict(cls, block):
        scaler = InputScaler(np.array(block["scaler"]["mean"]), np.array(block["scaler"]["std"]))
        return cls(
            params=beamnet.params_from_dict(block),
            scaler=scaler,
            config=beamnet.config_from_dict(block.get("config", {})),
            pipeline=block.get("pipeline", "single"),
        )

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def single_center(sample):
    """Single-candidate input: the first detected box, or the image centre if none."""
    return sample.boxes[0] if len(sample.boxes) else IMAGE_CENTER


def single_inputs(samples, training=False):
    """Box centres and labels; frames with no detection are dropped when ``training``."""
    keep = [s for s in samples if len(s.boxes) or not training]
    x = np.array([single_center(s) for s in keep], dtype=float).reshape(-1, 2)
    y = np.array([s.beam for s in keep], dtype=int)
    return x, y


def labelled_tx_inputs(samples):
    """Centres of the labelled transmitter boxes (frames where it was detected)."""
    keep = [s for s in samples if s.true_tx_row is not None]
    x = np.array([s.tx_center for s in keep], dtype=float).reshape(-1, 2)
    y = np.array([s.beam for s in keep], dtype=int)
    return x, y


def identify(samples, regression):
    """Run transmitter selection on every frame; returns (centres, selections)."""
    centers, selections = [], []
    for s in samples:
        b_hat = txid.predict_center(regression, s.gps)
        sel = txid.select_tx(s.boxes, b_hat)
        selections.append(sel)
        centers.append(sel.center if isinstance(sel, txid.Fallback) else s.boxes[sel])
    return np.array(centers, dtype=float).reshape(-1, 2), selections


def fit_tx_regression(samples, include_bias=True):
    pairs = [(s.gps, s.tx_center) for s in samples if s.true_tx_row is not None]
    if not pairs:
        raise EmptyDataset("no frame has a labelled transmitter box")
    g = np.array([p[0] for p in pairs])
    c = np.array([p[1] for p in pairs])
    return txid.fit_regression(g, c, include_bias=include_bias)


def inference_inputs(samples, pipeline, regression=None):
    if pipeline == "single":
        return single_inputs(samples)[0], None
    return identify(samples, regression)


def train_model(train_samples, val_samples, config, pipeline="single", regression=None):
    """Train the beam MLP for either pipeline.

    Multi-candidate training uses the labelled transmitter boxes; validation
    (and hence checkpoint selection) runs the full identification pipeline.
    """
    if pipeline == "single":
        x_tr, y_tr = single_inputs(train_samples, training=True)
    else:
        x_tr, y_tr = labelled_tx_inputs(train_samples)
    x_val, _ = inference_inputs(val_samples, pipeline, regression)
    y_val = np.array([s.beam for s in val_samples], dtype=int)
    scaler = InputScaler.fit(x_tr)
    result = beamnet.train(scaler(x_tr), y_tr, scaler(x_val), y_val, config)
    return BeamModel(result.params, scaler, config, pipeline), result
