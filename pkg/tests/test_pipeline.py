import numpy as np
import pytest

from visbeam import beamnet as bn
from visbeam import dataset, pipeline, scene, txid
from visbeam.dataset import SceneSample
from visbeam.errors import EmptyDataset


def sample(boxes, tx, beam=3):
    return SceneSample(0, "t", (1.0, 2.0), np.array(boxes, dtype=float).reshape(-1, 2), tx, np.eye(32)[beam], beam)


def test_scaler_z_scores():
    x = np.array([[0.1, 0.5], [0.3, 0.5], [0.5, 0.5]])
    sc = pipeline.InputScaler.fit(x)
    z = sc(x)
    np.testing.assert_allclose(z.mean(axis=0), 0, atol=1e-15)
    assert sc.std[1] == 1.0  # constant column left unscaled


def test_single_inputs():
    samples = [sample([[0.2, 0.3], [0.9, 0.9]], 0), sample([], None, 5)]
    x, y = pipeline.single_inputs(samples)
    np.testing.assert_array_equal(x, [[0.2, 0.3], [0.5, 0.5]])
    x, y = pipeline.single_inputs(samples, training=True)
    assert len(x) == 1 and y.tolist() == [3]


def test_labelled_and_identify():
    samples = [sample([[0.2, 0.3], [0.8, 0.3]], 1), sample([], None)]
    x, _ = pipeline.labelled_tx_inputs(samples)
    np.testing.assert_array_equal(x, [[0.8, 0.3]])
    reg = txid.RegressionModel(np.vstack([[0.75, 0.3], np.zeros((9, 2))]), txid.Normalizer(np.zeros(2), np.ones(2)))
    centers, sel = pipeline.identify(samples, reg)
    assert sel[0] == 1 and isinstance(sel[1], txid.Fallback)
    np.testing.assert_allclose(centers, [[0.8, 0.3], [0.75, 0.3]])


def test_fit_requires_labelled_box():
    with pytest.raises(EmptyDataset):
        pipeline.fit_tx_regression([sample([], None)])


def test_model_round_trip(tmp_path):
    data = scene.generate_dataset(scene.SceneConfig(), 200, scene.SINGLE, seed=0)
    tr, va = dataset.split(data)
    cfg = bn.TrainConfig(epochs=2, seed=1)
    model, result = pipeline.train_model(tr, va, cfg)
    model.save(tmp_path / "m.json")
    back = pipeline.BeamModel.load(tmp_path / "m.json")
    x, _ = pipeline.inference_inputs(va, "single")
    np.testing.assert_array_equal(back.logits(x), model.logits(x))
    assert back.config == cfg and back.pipeline == "single" and len(result.history) == 2


def test_multi_training_uses_identification_for_validation():
    data = scene.generate_dataset(scene.SceneConfig(), 300, scene.MULTI, seed=1)
    tr, va = dataset.split(data)
    reg = pipeline.fit_tx_regression(tr)
    model, result = pipeline.train_model(tr, va, bn.TrainConfig(epochs=2), "multi", reg)
    x, _ = pipeline.inference_inputs(va, "multi", reg)
    y = np.array([s.beam for s in va])
    acc = np.mean(model.rank(x)[:, 0] == y)
    assert acc == result.history[result.best_epoch - 1].val_top1
