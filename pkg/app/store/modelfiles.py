"""
Model files: numpy `.npz` archives holding a trained attacker.

Keys:
    format_version   int, currently 1
    kind             "mlp" | "cnn" | "template"
    spec_json        JSON of the training spec (classifiers) or of the template hyper-parameters
    stats_mean/sd    standardization statistics, absent when the model was fitted on raw traces
    weight_###       network weights, in layer order (classifiers)
    training_log     mean loss per epoch (classifiers)
    means, covariances, priors   regularized templates; the Cholesky factors are recomputed on load
"""

import json
import logging
from pathlib import Path
import zipfile

import numpy as np
from pydantic import TypeAdapter

from app.classifiers.models import ClassifierModel, ClassifierSpec
from app.classifiers.trainer import initialize
from app.dataset.models import StandardizationStats
from app.errors import ArtifactError
from app.template.attack import fit_factors
from app.template.models import TemplateModel

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
SPEC_ADAPTER = TypeAdapter(ClassifierSpec)
ENTRY_DATE = (1980, 1, 1, 0, 0, 0)


def save_model(path: str | Path, model: ClassifierModel | TemplateModel) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arrays: dict[str, np.ndarray] = {"format_version": np.array(FORMAT_VERSION), "kind": np.array(model.kind)}
    if model.stats is not None:
        arrays["stats_mean"] = model.stats.mean
        arrays["stats_sd"] = model.stats.sd

    if isinstance(model, TemplateModel):
        arrays["spec_json"] = np.array(json.dumps({"regularization": model.regularization, "ridge": model.ridge}))
        arrays["means"] = model.means
        arrays["covariances"] = model.covariances
        arrays["priors"] = model.priors
    else:
        arrays["spec_json"] = np.array(model.spec.model_dump_json())
        arrays["input_length"] = np.array(model.input_length)
        arrays["training_log"] = np.asarray(model.training_log, dtype=np.float64)
        for i, weight in enumerate(model.network.get_weights()):
            arrays[f"weight_{i:03d}"] = weight

    # Same layout as np.savez, with fixed entry dates so reruns write identical bytes
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_STORED) as archive:
        for key, array in arrays.items():
            with archive.open(zipfile.ZipInfo(f"{key}.npy", date_time=ENTRY_DATE), "w", force_zip64=True) as f:
                np.lib.format.write_array(f, np.asanyarray(array), allow_pickle=False)
    logger.debug(f"Saved {model.kind} model to {path}")
    return path


def load_model(path: str | Path) -> ClassifierModel | TemplateModel:
    """Load a model file.

    Raises:
        ArtifactError: Missing file, unknown format version or kind.
    """
    path = Path(path)
    if not path.exists():
        raise ArtifactError(f"missing model file {path}")
    with np.load(path, allow_pickle=False) as archive:
        data = {key: archive[key] for key in archive.files}

    version = int(data["format_version"])
    if version != FORMAT_VERSION:
        raise ArtifactError(f"{path}: unsupported model format version {version}")
    kind = str(data["kind"])
    stats = StandardizationStats(data["stats_mean"], data["stats_sd"]) if "stats_mean" in data else None
    spec = json.loads(str(data["spec_json"]))

    if kind == "template":
        factors, log_dets = fit_factors(data["covariances"])
        return TemplateModel(
            means=data["means"],
            covariances=data["covariances"],
            cholesky=factors,
            log_dets=log_dets,
            priors=data["priors"],
            regularization=spec["regularization"],
            ridge=spec["ridge"],
            stats=stats,
        )
    if kind not in ("mlp", "cnn"):
        raise ArtifactError(f"{path}: unknown model kind `{kind}`")

    model = initialize(SPEC_ADAPTER.validate_python(spec), int(data["input_length"]))
    weights = [data[key] for key in sorted(k for k in data if k.startswith("weight_"))]
    model.network.set_weights(weights)
    model.stats = stats
    model.training_log = data["training_log"].tolist()
    return model
