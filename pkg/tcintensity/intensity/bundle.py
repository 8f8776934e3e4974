"""Model files: one JSON document per fitted model.

A document carries the model type, the covariate set and order, the scaler
(with its hash), the ingest conventions the model was fitted under and the
parameters. A land decay model is either its own document
(``model_type: "land"``) or embedded under ``land`` in an intensity model
document.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from tcintensity.core.exceptions import SchemaError
from tcintensity.core.exceptions import ValidationError
from tcintensity.core.outputs import atomic_write_text
from tcintensity.core.outputs import canonical_json
from tcintensity.core.outputs import content_hash
from tcintensity.intensity.hmm import MehimModel
from tcintensity.intensity.landdecay import LandModel
from tcintensity.intensity.linear import OlsModel
from tcintensity.intensity.mixture import FmrModel
from tcintensity.intensity.stats import LinearFit
from tcintensity.intensity.stats import MnlFit
from tcintensity.storms.domain import INITIAL_COVARIATE_NAMES
from tcintensity.storms.domain import Scaler
from tcintensity.storms.domain import covariate_names_for
from tcintensity.storms.ingest import IngestConfig

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
MODEL_TYPES = ("ols", "fmr", "mehim", "land")

IntensityModel = OlsModel | FmrModel | MehimModel


@dataclass(frozen=True, eq=False)
class ModelBundle:
    model: IntensityModel | None = None
    land: LandModel | None = None
    conventions: dict[str, Any] = dataclasses.field(default_factory=dict)

    @property
    def model_type(self) -> str:
        return "land" if self.model is None else self.model.model_type

    def ingest_config(self) -> IngestConfig:
        """The ingest settings the model was fitted under."""
        names = {f.name for f in dataclasses.fields(IngestConfig)}
        values = {key: value for key, value in self.conventions.items() if key in names}
        if self.model is not None:
            values["covariate_set"] = self.model.covariate_set
        return IngestConfig(**values)

    def to_document(self) -> dict[str, Any]:
        return bundle_to_document(self)

    @property
    def hash(self) -> str:
        return content_hash(self.to_document())

    @property
    def model_id(self) -> str:
        return f"{self.model_type}-{self.hash[:12]}"


def _plain(value: Any) -> Any:
    """JSON-safe copy: numpy scalars and arrays to Python, NaN to None."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, list | tuple | np.ndarray):
        return [_plain(v) for v in value]
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, float | np.floating):
        return None if math.isnan(value) or math.isinf(value) else float(value)
    return value


def _model_parameters(model: IntensityModel) -> dict[str, Any]:
    if isinstance(model, OlsModel):
        return model.fit.to_dict()
    if isinstance(model, FmrModel):
        if model.classifier is None:
            msg = "FMR model has no classifier"
            raise ValidationError(msg)
        return {
            "k": model.k,
            "components": [
                {"weight": float(w), **c.to_dict()} for w, c in zip(model.weights, model.components, strict=True)
            ],
            "classifier": model.classifier.to_dict(),
        }
    return {
        "k": model.k,
        "emissions": [e.to_dict() for e in model.emissions],
        "transition_blocks": [block.to_dict() for block in model.transitions],
        "initial_block": model.initial.to_dict(),
        "initial_columns": list(model.initial_columns),
        "initial_covariates": [model.covariate_names[i] for i in model.initial_columns],
    }


def bundle_to_document(bundle: ModelBundle) -> dict[str, Any]:
    document: dict[str, Any] = {
        "schema_version": SCHEMA_VERSION,
        "model_type": bundle.model_type,
        "conventions": _plain(bundle.conventions),
    }
    if bundle.model is not None:
        model = bundle.model
        if model.scaler is None:
            msg = f"{model.model_type} model has no scaler"
            raise ValidationError(msg)
        scaler = model.scaler.to_dict()
        document.update(
            {
                "covariate_set": model.covariate_set,
                "covariate_names": list(model.covariate_names),
                "scaler": scaler,
                "scaler_hash": content_hash(scaler),
                "parameters": _model_parameters(model),
                "metadata": _plain(model.metadata),
            },
        )
    if bundle.land is not None:
        document["land"] = _plain(bundle.land.to_dict())
    return document


def _linear(data: dict[str, Any], p: int, where: str) -> LinearFit:
    fit = LinearFit.from_dict(data)
    if fit.p != p:
        msg = f"{where}: {fit.p} coefficient(s), expected {p}"
        raise SchemaError(msg)
    return fit


def _mnl(data: dict[str, Any], k: int, p: int, where: str) -> MnlFit:
    fit = MnlFit.from_dict(data)
    if fit.k != k or fit.p != p:
        msg = f"{where}: {fit.k} row(s) of {fit.p} coefficient(s), expected {k} of {p}"
        raise SchemaError(msg)
    if fit.intercepts[-1] != 0 or np.any(fit.coefficients[-1] != 0):
        msg = f"{where}: baseline (last) row must be all zeros"
        raise SchemaError(msg)
    return fit


def _model_from_document(document: dict[str, Any]) -> IntensityModel:
    model_type = document["model_type"]
    covariate_set = document["covariate_set"]
    try:
        names = covariate_names_for(covariate_set)
    except ValidationError as e:
        raise SchemaError(str(e)) from e
    if list(document["covariate_names"]) != list(names):
        msg = f"covariate_names {document['covariate_names']} do not match covariate set {covariate_set!r}"
        raise SchemaError(msg)
    scaler_data = document["scaler"]
    if content_hash(scaler_data) != document["scaler_hash"]:
        msg = "scaler does not match scaler_hash"
        raise SchemaError(msg)
    scaler = Scaler.from_dict(scaler_data)
    if scaler.covariate_names != names:
        msg = f"scaler covariates {scaler.covariate_names} do not match {names}"
        raise SchemaError(msg)
    p = len(names)
    parameters = document["parameters"]
    metadata = document.get("metadata", {})

    if model_type == "ols":
        return OlsModel(
            fit=_linear(parameters, p, "ols"),
            scaler=scaler,
            covariate_set=covariate_set,
            metadata=metadata,
        )
    k = int(parameters["k"])
    if model_type == "fmr":
        components = parameters["components"]
        if len(components) != k:
            msg = f"fmr: {len(components)} component(s) for k={k}"
            raise SchemaError(msg)
        return FmrModel(
            weights=np.array([c["weight"] for c in components], dtype=float),
            components=tuple(_linear(c, p, f"fmr component {r + 1}") for r, c in enumerate(components)),
            classifier=_mnl(parameters["classifier"], k, p, "fmr classifier"),
            scaler=scaler,
            covariate_set=covariate_set,
            metadata=metadata,
        )
    default_columns = [names.index(n) for n in INITIAL_COVARIATE_NAMES]
    columns = tuple(int(i) for i in parameters.get("initial_columns", default_columns))
    blocks = parameters["transition_blocks"]
    if len(parameters["emissions"]) != k or len(blocks) != k:
        msg = f"mehim: emissions and transition_blocks must both have k={k} entries"
        raise SchemaError(msg)
    return MehimModel(
        emissions=tuple(_linear(e, p, f"mehim emission {i + 1}") for i, e in enumerate(parameters["emissions"])),
        transitions=tuple(_mnl(b, k, p, f"mehim transition block {i + 1}") for i, b in enumerate(blocks)),
        initial=_mnl(parameters["initial_block"], k, len(columns), "mehim initial block"),
        scaler=scaler,
        covariate_set=covariate_set,
        initial_columns=columns,
        metadata=metadata,
    )


def bundle_from_document(document: dict[str, Any]) -> ModelBundle:
    if not isinstance(document, dict):
        msg = "model file must hold a JSON object"
        raise SchemaError(msg)
    version = document.get("schema_version")
    if version != SCHEMA_VERSION:
        msg = f"unsupported schema_version {version!r} (expected {SCHEMA_VERSION})"
        raise SchemaError(msg)
    model_type = document.get("model_type")
    if model_type not in MODEL_TYPES:
        msg = f"unknown model_type {model_type!r} (expected one of {', '.join(MODEL_TYPES)})"
        raise SchemaError(msg)
    try:
        model = None if model_type == "land" else _model_from_document(document)
        land = LandModel.from_dict(document["land"]) if "land" in document else None
    except KeyError as e:
        msg = f"model file is missing key {e.args[0]!r}"
        raise SchemaError(msg) from e
    except (TypeError, ValueError) as e:
        msg = f"model file is malformed: {e}"
        raise SchemaError(msg) from e
    except ValidationError as e:
        if isinstance(e, SchemaError):
            raise
        raise SchemaError(str(e)) from e
    if model_type == "land" and land is None:
        msg = "land model file is missing key 'land'"
        raise SchemaError(msg)
    return ModelBundle(model=model, land=land, conventions=document.get("conventions", {}))


def save_bundle(path: Path | str, bundle: ModelBundle) -> str:
    """Write the model file atomically and return its content hash."""
    document = bundle.to_document()
    canonical_json(document)  # rejects NaN before anything touches the disk
    atomic_write_text(Path(path), json.dumps(document, indent=2, sort_keys=True) + "\n")
    digest = content_hash(document)
    logger.info("Wrote %s model to %s (sha256 %s)", bundle.model_type, path, digest[:12])
    return digest


def load_bundle(path: Path | str) -> ModelBundle:
    path = Path(path)
    if not path.exists():
        msg = f"Model file not found: {path}"
        raise ValidationError(msg)
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        msg = f"{path}: invalid JSON ({e})"
        raise SchemaError(msg) from e
    return bundle_from_document(document)
