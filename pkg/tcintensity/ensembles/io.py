"""Ensemble CSV files: write them from ``simulate`` and read them back for ``evaluate``."""

from __future__ import annotations

import datetime
import json
import logging
from pathlib import Path

import numpy as np
import pandas as pd
from slugify import slugify

from tcintensity.core.exceptions import SchemaError
from tcintensity.core.exceptions import ValidationError
from tcintensity.core.outputs import atomic_write_text
from tcintensity.ensembles.simulate import EnsembleResult
from tcintensity.ensembles.simulate import Realization

logger = logging.getLogger(__name__)

ENSEMBLE_COLUMNS = ("realization", "step_index", "time", "v_kt", "dv_kt", "state", "over_land", "lat", "lon")
FLOAT_FORMAT = "%.6f"


def ensemble_filename(storm_id: str) -> str:
    return f"ensemble_{slugify(storm_id, separator='-')}.csv"


def ensemble_frame(result: EnsembleResult) -> pd.DataFrame:
    frames = []
    for realization in result.realizations:
        length = len(realization)
        frames.append(
            pd.DataFrame(
                {
                    "realization": realization.index + 1,
                    "step_index": np.arange(length),
                    "time": [t.isoformat() for t in result.times[:length]],
                    "v_kt": realization.v,
                    "dv_kt": realization.dv,
                    "state": realization.states + 1,
                    "over_land": result.over_land[:length].astype(int),
                    "lat": result.lat[:length],
                    "lon": result.lon[:length],
                },
            ),
        )
    return pd.concat(frames, ignore_index=True)


def write_ensemble(result: EnsembleResult, out_dir: Path) -> Path:
    """One CSV per storm; ``state`` is 1-based with 0 for models without states."""
    path = out_dir / ensemble_filename(result.storm_id)
    text = ensemble_frame(result).to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    atomic_write_text(path, text)
    return path


def read_ensemble(path: Path, storm_id: str, *, model_id: str = "", model_hash: str = "") -> EnsembleResult:
    try:
        frame = pd.read_csv(path)
    except (pd.errors.EmptyDataError, pd.errors.ParserError) as e:
        msg = f"{path}: unreadable ensemble file ({e})"
        raise SchemaError(msg) from e
    missing = [c for c in ENSEMBLE_COLUMNS if c not in frame.columns]
    if missing:
        msg = f"{path}: missing column(s) {', '.join(missing)}"
        raise SchemaError(msg)

    longest = frame.loc[frame["step_index"].idxmax(), "realization"]
    track = frame[frame["realization"] == longest].sort_values("step_index")
    realizations = []
    for number, rows in frame.groupby("realization", sort=True):
        rows = rows.sort_values("step_index")
        stopped = len(rows) < len(track)
        realizations.append(
            Realization(
                index=int(number) - 1,
                seed=0,
                v=rows["v_kt"].to_numpy(dtype=float),
                dv=rows["dv_kt"].to_numpy(dtype=float),
                states=rows["state"].to_numpy(dtype=int) - 1,
                stopped_at=len(rows) - 1 if stopped else None,
            ),
        )
    return EnsembleResult(
        storm_id=storm_id,
        model_id=model_id,
        model_hash=model_hash,
        times=tuple(datetime.datetime.fromisoformat(t) for t in track["time"]),
        lat=track["lat"].to_numpy(dtype=float),
        lon=track["lon"].to_numpy(dtype=float),
        over_land=track["over_land"].to_numpy(dtype=bool),
        realizations=tuple(realizations),
    )


def read_ensembles(ensemble_dir: Path) -> list[EnsembleResult]:
    """Every ensemble listed in the directory's manifest, in manifest order."""
    manifest_path = ensemble_dir / "manifest.json"
    if not manifest_path.exists():
        msg = f"No manifest.json in ensemble directory {ensemble_dir}"
        raise ValidationError(msg)
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        storms = manifest["storms"]
        model_id, model_hash = manifest["model_id"], manifest["model_hashes"].get("model", "")
    except (json.JSONDecodeError, KeyError, AttributeError) as e:
        msg = f"{manifest_path}: not an ensemble manifest ({e})"
        raise SchemaError(msg) from e
    results = [
        read_ensemble(ensemble_dir / entry["file"], entry["storm_id"], model_id=model_id, model_hash=model_hash)
        for entry in storms
    ]
    logger.info("Read %d ensemble(s) of model %s from %s", len(results), model_id, ensemble_dir)
    return results
