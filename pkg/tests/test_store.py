import json

import numpy as np
import pytest

from app.adversarial.models import Balance, Perturbation, PerturbationSet
from app.classifiers.models import CnnSpec, MlpSpec
from app.classifiers.trainer import train
from app.dataset.processing import standardize
from app.errors import ArtifactError, DatasetError
from app.store.manifestDB import ManifestDB
from app.store.modelfiles import load_model, save_model
from app.store.perturbations import read_perturbations, write_perturbations
from app.store.traces import HEADER, read_dataset, write_dataset
from app.template.attack import fit_templates


def test_trace_file_round_trip(tmp_path, make_dataset):
    dataset = make_dataset(12, n=10, key=bytes(range(16)))
    path = write_dataset(tmp_path / "capture" / "attack.sct", dataset)
    loaded = read_dataset(path)
    assert HEADER.unpack_from(path.read_bytes())[1:3] == (12, 10)
    np.testing.assert_array_equal(loaded.traces, dataset.traces)
    np.testing.assert_array_equal(loaded.plaintexts, dataset.plaintexts)
    np.testing.assert_array_equal(loaded.labels, dataset.labels)
    assert loaded.leakage_model == dataset.leakage_model
    assert loaded.key_policy == "fixed"
    assert loaded.fixed_key == bytes(range(16))


def test_corrupted_trace_files(tmp_path, make_dataset):
    path = write_dataset(tmp_path / "a.sct", make_dataset(3))
    data = path.read_bytes()
    (tmp_path / "magic.sct").write_bytes(b"XXXX" + data[4:])
    (tmp_path / "short.sct").write_bytes(data[:-1])
    for name in ("magic.sct", "short.sct"):
        with pytest.raises(DatasetError):
            read_dataset(tmp_path / name)


def test_manifest(tmp_path):
    manifest = ManifestDB(tmp_path)
    first = tmp_path / "capture" / "a.txt"
    first.parent.mkdir()
    first.write_text("a")
    second = tmp_path / "train" / "b.txt"
    second.parent.mkdir()
    second.write_text("b")
    manifest.record(second, "train", 2**63 + 5)
    artifact = manifest.record(first, "capture", 1)
    assert artifact.path == "capture/a.txt"
    assert len(artifact.sha256) == 64

    manifest.mark_stage("train", "partial")
    exported = json.loads(manifest.export().read_text())
    assert [a["path"] for a in exported] == ["capture/a.txt", "train/b.txt"]
    assert exported[1]["status"] == "partial"
    assert exported[1]["seed"] == 2**63 + 5
    assert "created" not in exported[0]
    assert [a.path for a in manifest.get_by_stage("capture")] == ["capture/a.txt"]


def trained_models(make_dataset):
    standardized, _ = standardize(make_dataset(60, n=16))
    mlp = train(standardized, MlpSpec(hidden_widths=[8], epochs=2, batch_size=16, seed=1))
    cnn = train(
        standardized,
        CnnSpec.uniform([2, 4], 3, 2, dense_widths=[8], epochs=1, batch_size=16, seed=2),
    )
    return standardized, [mlp, cnn, fit_templates(standardized)]


def test_model_files_are_reproducible(tmp_path, make_dataset):
    standardized, models = trained_models(make_dataset)
    for model in models:
        first = save_model(tmp_path / f"{model.kind}_1.npz", model)
        second = save_model(tmp_path / f"{model.kind}_2.npz", model)
        assert first.read_bytes() == second.read_bytes()

        loaded = load_model(first)
        assert loaded.kind == model.kind
        np.testing.assert_allclose(loaded.stats.mean, model.stats.mean)
        np.testing.assert_allclose(
            loaded.predict_proba(standardized.traces), model.predict_proba(standardized.traces), rtol=1e-6
        )


def test_missing_model_file(tmp_path):
    with pytest.raises(ArtifactError, match="missing model file"):
        load_model(tmp_path / "mlp_LSB.npz")


def test_perturbation_file_round_trip(tmp_path):
    perturbations = PerturbationSet(
        [
            Perturbation(trace_id=0, position=12, amplitude=-5.125, success=True, target_class=1,
                         achieved_confidence=0.97),
            Perturbation(trace_id=3, position=40, amplitude=4.5, success=False, target_class=None,
                         achieved_confidence=0.5),
        ],
        Balance(),
    )
    path = write_perturbations(tmp_path / "mine" / "perturbations.csv", perturbations)
    assert path.read_text().splitlines()[0] == (
        "trace_id,position,amplitude,success,confidence_target_class,achieved_confidence"
    )
    loaded = read_perturbations(path)
    assert [(p.trace_id, p.position, p.success, p.target_class) for p in loaded] == [
        (0, 12, True, 1),
        (3, 40, False, None),
    ]
    np.testing.assert_allclose(loaded.amplitudes, [-5.125, 4.5])


def test_missing_perturbation_file(tmp_path):
    with pytest.raises(ArtifactError):
        read_perturbations(tmp_path / "absent.csv")
