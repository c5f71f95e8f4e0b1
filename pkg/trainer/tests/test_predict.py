import numpy as np
import pytest

from satkerr_trainer.model import ModelConfig
from satkerr_trainer.predict import predict
from satkerr_trainer.train import TrainConfig, train


@pytest.fixture(scope="module")
def checkpoint(toy_dataset, tmp_path_factory):
    out = tmp_path_factory.mktemp("predict_run")
    summary = train(
        toy_dataset, ModelConfig.micro(),
        TrainConfig(max_epochs=2, patience=5, lr=3e-4, effective_batch=32,
                    device_batch=16, plateau_patience=5, batch_floor=16, seed=1),
        out_dir=out, log=lambda *_: None)
    return summary["checkpoint"]


def test_row_count_matches_split(toy_dataset, checkpoint, tmp_path):
    out_csv = tmp_path / "test.csv"
    rows = predict(toy_dataset, "test", checkpoint, out_csv)
    assert rows == 12
    assert len(out_csv.read_text().splitlines()) == 13  # header + rows


def test_truths_match_dataset_labels(toy_dataset, checkpoint, tmp_path):
    from satkerr import Dataset as ReferenceDataset
    from satkerr.regression import read_predictions_csv

    out_csv = tmp_path / "test.csv"
    predict(toy_dataset, "test", checkpoint, out_csv)
    indices, preds, truths = read_predictions_csv(out_csv)
    reference = ReferenceDataset(toy_dataset)
    expected = reference.labels_normalized()[indices]
    assert np.max(np.abs(truths - expected)) < 1e-9
    assert np.all((preds > 0) & (preds < 1))  # sigmoid range
    assert np.array_equal(indices, reference.manifest.splits["test"])


def test_predict_is_deterministic(toy_dataset, checkpoint, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    predict(toy_dataset, "test", checkpoint, a)
    predict(toy_dataset, "test", checkpoint, b)
    assert a.read_bytes() == b.read_bytes()


def test_evaluator_accepts_trainer_output(toy_dataset, checkpoint, tmp_path):
    # end-to-end over the exchange boundary: trainer CSV -> primary evaluator
    import json

    from satkerr.cli import main

    out_csv = tmp_path / "val.csv"
    predict(toy_dataset, "validation", checkpoint, out_csv)
    metrics_json = tmp_path / "metrics.json"
    assert main(["eval", "--pred", str(out_csv), "--dataset",
                 str(toy_dataset), "--out", str(metrics_json)]) == 0
    payload = json.loads(metrics_json.read_text())
    assert payload["sample_count"] == 12
    assert payload["aggregate_mae_percent"] >= 0.0


def test_unknown_split_rejected(toy_dataset, checkpoint, tmp_path):
    with pytest.raises(KeyError):
        predict(toy_dataset, "holdout", checkpoint, tmp_path / "x.csv")
