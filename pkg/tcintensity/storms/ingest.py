"""Read track/environment CSV files and turn storms into training data.

The pipeline is parse → derive (translation speed, background-removed
intensity) → covariates (including OCN) → segment into ocean sequences and
land segments → fit the scaler → standardize.
"""

from __future__ import annotations

import datetime
import itertools
import logging
import math
import re
from dataclasses import asdict
from dataclasses import dataclass
from dataclasses import field
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd
from django.conf import settings

from tcintensity.core.exceptions import DomainError
from tcintensity.core.exceptions import FitError
from tcintensity.core.exceptions import ParseError
from tcintensity.core.exceptions import ValidationError
from tcintensity.storms.domain import KT_PER_MS
from tcintensity.storms.domain import RESPONSE_NAME
from tcintensity.storms.domain import EnvRecord
from tcintensity.storms.domain import LandSegment
from tcintensity.storms.domain import OceanSequence
from tcintensity.storms.domain import Scaler
from tcintensity.storms.domain import StormRecord
from tcintensity.storms.domain import TrackPoint
from tcintensity.storms.domain import covariate_names_for

logger = logging.getLogger(__name__)

EARTH_RADIUS_KM = 6371.0
OCEAN_COLUMNS = ("hm_m", "gamma_k_per_100m")
REQUIRED_COLUMNS = (
    "storm_id",
    "time",
    "lat",
    "lon",
    "wind_kt",
    "over_land",
    "mpi_kt",
    "shr_ms",
    "rh_pct",
    *OCEAN_COLUMNS,
)
OPTIONAL_COLUMNS = ("name",)
OCN_UNITS = {"h_m": "m", "u_t": "m/s", "gamma": "K per 100 m", "pi_over_v": "ratio"}

_PANDAS_LINE = re.compile(r"line (\d+)")


@dataclass(frozen=True)
class ParseOptions:
    """``require_ocean`` False lets hm_m / gamma be absent or blank."""

    require_ocean: bool = True


@dataclass(frozen=True)
class IngestConfig:
    bg_fraction: float = 0.55
    gamma_floor: float = 0.01
    v_floor: float = 5.0
    min_ocean_len: int = 12
    min_land_len: int = 2
    min_land_v0: float = 20.0
    covariate_set: str = "full"

    def __post_init__(self) -> None:
        if not 0.0 <= self.bg_fraction <= 1.0:
            msg = f"bg_fraction must lie in [0, 1], got {self.bg_fraction}"
            raise ValidationError(msg)
        covariate_names_for(self.covariate_set)

    @classmethod
    def from_settings(cls, **overrides: Any) -> IngestConfig:
        values = {
            "bg_fraction": settings.TC_BG_FRACTION,
            "gamma_floor": settings.TC_GAMMA_FLOOR,
            "v_floor": settings.TC_V_FLOOR,
            "min_ocean_len": settings.TC_MIN_OCEAN_LEN,
            "min_land_len": settings.TC_MIN_LAND_LEN,
            "min_land_v0": settings.TC_MIN_LAND_V0,
        }
        values.update({key: value for key, value in overrides.items() if value is not None})
        return cls(**values)

    @property
    def uses_ocn(self) -> bool:
        return "ocn" in covariate_names_for(self.covariate_set)

    def conventions(self) -> dict[str, Any]:
        """What a model file records so simulation derives covariates the same way."""
        return {**asdict(self), "ocn_units": OCN_UNITS, "dv_convention": "forward"}


# Parsing
# ------------------------------------------------------------------------------


def _to_float(raw: str, column: str, line: int, *, required: bool = True) -> float:
    if raw == "":
        if required:
            msg = f"missing value in column {column!r}"
            raise ParseError(msg, line=line)
        return math.nan
    try:
        return float(raw)
    except ValueError:
        msg = f"invalid number {raw!r} in column {column!r}"
        raise ParseError(msg, line=line) from None


def _to_time(raw: str, line: int) -> datetime.datetime:
    if raw == "":
        msg = "missing value in column 'time'"
        raise ParseError(msg, line=line)
    try:
        value = datetime.datetime.fromisoformat(raw)
    except ValueError:
        msg = f"invalid ISO-8601 time {raw!r}"
        raise ParseError(msg, line=line) from None
    if value.tzinfo is None:
        value = value.replace(tzinfo=datetime.timezone.utc)
    return value


def _to_flag(raw: str, line: int) -> bool:
    if raw not in {"0", "1"}:
        msg = f"over_land must be 0 or 1, got {raw!r}"
        raise ParseError(msg, line=line)
    return raw == "1"


def parse_tracks(path: Path | str, options: ParseOptions | None = None) -> list[StormRecord]:
    """Read a tracks CSV into storms, grouped by storm_id in order of appearance."""
    options = options or ParseOptions()
    path = Path(path)
    if not path.exists():
        msg = f"Tracks file not found: {path}"
        raise ValidationError(msg)

    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except pd.errors.EmptyDataError:
        msg = "file has no header row"
        raise ParseError(msg, line=1) from None
    except pd.errors.ParserError as e:
        match = _PANDAS_LINE.search(str(e))
        raise ParseError(str(e), line=int(match.group(1)) if match else None) from e

    required = [c for c in REQUIRED_COLUMNS if options.require_ocean or c not in OCEAN_COLUMNS]
    missing = [c for c in required if c not in frame.columns]
    if missing:
        msg = f"missing required column(s): {', '.join(missing)}"
        raise ParseError(msg, line=1)
    unknown = [c for c in frame.columns if c not in REQUIRED_COLUMNS and c not in OPTIONAL_COLUMNS]
    if unknown:
        logger.warning("Ignoring unknown column(s) in %s: %s", path, ", ".join(unknown))

    grouped: dict[str, list[tuple[TrackPoint, EnvRecord]]] = {}
    names: dict[str, str] = {}
    for offset, row in enumerate(frame.to_dict("records")):
        line = offset + 2  # header is line 1
        storm_id = row["storm_id"].strip()
        if not storm_id:
            msg = "missing value in column 'storm_id'"
            raise ParseError(msg, line=line)
        try:
            point = TrackPoint(
                time=_to_time(row["time"].strip(), line),
                lat=_to_float(row["lat"], "lat", line),
                lon=_to_float(row["lon"], "lon", line),
                observed_wind=_to_float(row["wind_kt"], "wind_kt", line),
                over_land=_to_flag(row["over_land"].strip(), line),
            )
            env = EnvRecord(
                mpi=_to_float(row["mpi_kt"], "mpi_kt", line),
                shr=_to_float(row["shr_ms"], "shr_ms", line),
                rh=_to_float(row["rh_pct"], "rh_pct", line),
                h_m=_to_float(row.get("hm_m", ""), "hm_m", line, required=options.require_ocean),
                gamma=_to_float(
                    row.get("gamma_k_per_100m", ""),
                    "gamma_k_per_100m",
                    line,
                    required=options.require_ocean,
                ),
            )
        except ParseError:
            raise
        except ValidationError as e:
            raise ParseError(str(e), line=line) from e
        grouped.setdefault(storm_id, []).append((point, env))
        if row.get("name"):
            names.setdefault(storm_id, row["name"].strip())

    storms = [
        StormRecord(storm_id=storm_id, points=tuple(points), name=names.get(storm_id, ""))
        for storm_id, points in grouped.items()
    ]
    logger.info("Parsed %d storm(s) from %s", len(storms), path)
    return storms


# Derivation
# ------------------------------------------------------------------------------


def haversine_km(lat1: Any, lon1: Any, lat2: Any, lon2: Any) -> Any:
    """Great-circle distance in km."""
    phi1, phi2 = np.radians(lat1), np.radians(lat2)
    dphi = phi2 - phi1
    dlmb = np.radians(np.asarray(lon2) - np.asarray(lon1))
    a = np.sin(dphi / 2) ** 2 + np.cos(phi1) * np.cos(phi2) * np.sin(dlmb / 2) ** 2
    return 2 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.clip(a, 0.0, 1.0)))


def compute_translation(storm: StormRecord) -> np.ndarray:
    """Translation speed (m/s) per point.

    Interior points use a centered difference, the endpoints one-sided ones,
    always over the actual elapsed time.
    """
    seconds = np.array([t.timestamp() for t in storm.times])
    if np.any(np.diff(seconds) <= 0):
        msg = f"storm {storm.storm_id}: zero elapsed time between consecutive points"
        raise ValidationError(msg)
    lat, lon = storm.lat, storm.lon
    n = len(storm)
    prev_idx = np.maximum(np.arange(n) - 1, 0)
    next_idx = np.minimum(np.arange(n) + 1, n - 1)
    distance_m = haversine_km(lat[prev_idx], lon[prev_idx], lat[next_idx], lon[next_idx]) * 1000.0
    return distance_m / (seconds[next_idx] - seconds[prev_idx])


def remove_background_wind(observed_wind: Any, translation: Any, fraction: float) -> Any:
    """Subtract ``fraction`` of the translation speed (m/s → kt), clamped at 0."""
    if not 0.0 <= fraction <= 1.0:
        msg = f"background-wind fraction must lie in [0, 1], got {fraction}"
        raise ValidationError(msg)
    return np.maximum(np.asarray(observed_wind, dtype=float) - fraction * KT_PER_MS * np.asarray(translation), 0.0)


def compute_ocn(gamma: Any, h_m: Any, u_t: Any, pi: Any, v: Any) -> Any:
    """Ocean feedback parameter: ``1 - 0.87 exp(-z)``, ``z = 0.01 gamma^-0.4 h_m u_t pi / v``.

    Units: gamma in K per 100 m, h_m in m, u_t in m/s, pi and v in the same
    wind unit. Returns a float for scalar input.
    """
    gamma, v = np.asarray(gamma, dtype=float), np.asarray(v, dtype=float)
    if np.any(gamma <= 0) or np.any(v <= 0):
        msg = "compute_ocn requires gamma > 0 and v > 0"
        raise DomainError(msg)
    z = 0.01 * gamma**-0.4 * np.asarray(h_m) * np.asarray(u_t) * (np.asarray(pi) / v)
    ocn = 1.0 - 0.87 * np.exp(-z)
    return float(ocn) if np.ndim(ocn) == 0 else ocn


def ocn_with_floors(
    gamma: Any,
    h_m: Any,
    u_t: Any,
    pi: Any,
    v: Any,
    *,
    gamma_floor: float,
    v_floor: float,
    context: str = "",
) -> Any:
    """:func:`compute_ocn` with non-positive gamma / v replaced by their floors."""
    gamma, v = np.asarray(gamma, dtype=float), np.asarray(v, dtype=float)
    low_gamma, low_v = gamma <= 0, v <= 0
    if np.any(low_gamma) or np.any(low_v):
        logger.warning(
            "OCN floors applied%s: %d gamma value(s) -> %s, %d v value(s) -> %s",
            f" ({context})" if context else "",
            int(np.sum(low_gamma)),
            gamma_floor,
            int(np.sum(low_v)),
            v_floor,
        )
        gamma = np.where(low_gamma, gamma_floor, gamma)
        v = np.where(low_v, v_floor, v)
    return compute_ocn(gamma, h_m, u_t, pi, v)


def derive_storm(storm: StormRecord, config: IngestConfig) -> StormRecord:
    translation = compute_translation(storm)
    v = remove_background_wind(storm.observed_wind, translation, config.bg_fraction)
    return storm.with_derived(translation, v)


def raw_covariates(storm: StormRecord, config: IngestConfig) -> np.ndarray:
    """Raw covariates for every point, columns in the order of the covariate set.

    ``dv_p`` at the first point of the record is 0.
    """
    if not storm.is_derived:
        storm = derive_storm(storm, config)
    assert storm.v is not None  # noqa: S101
    assert storm.translation_speed is not None  # noqa: S101
    dv_p = np.concatenate([[0.0], storm.dv])
    columns = {
        "dv_p": dv_p,
        "v": storm.v,
        "mpi": storm.env("mpi"),
        "shr": storm.env("shr"),
        "rh": storm.env("rh"),
    }
    if config.uses_ocn:
        gamma, h_m = storm.env("gamma"), storm.env("h_m")
        if np.any(np.isnan(gamma)) or np.any(np.isnan(h_m)):
            msg = f"storm {storm.storm_id}: h_m and gamma are required for covariate set 'full'"
            raise ValidationError(msg)
        columns["ocn"] = ocn_with_floors(
            gamma,
            h_m,
            storm.translation_speed,
            columns["mpi"],
            storm.v,
            gamma_floor=config.gamma_floor,
            v_floor=config.v_floor,
            context=f"storm {storm.storm_id}",
        )
    names = covariate_names_for(config.covariate_set)
    return np.column_stack([columns[name] for name in names])


def _runs(flags: np.ndarray) -> list[tuple[bool, int, int]]:
    """Maximal runs of equal flags as (flag, start, stop)."""
    runs, start = [], 0
    for flag, group in itertools.groupby(flags.tolist()):
        length = len(list(group))
        runs.append((bool(flag), start, start + length))
        start += length
    return runs


def segment_storm(
    storm: StormRecord,
    config: IngestConfig,
) -> tuple[list[OceanSequence], list[LandSegment]]:
    """Split a derived storm into raw ocean sequences and land segments.

    An ocean run keeps a response for its last point when the record continues
    after it. Runs with fewer than ``min_ocean_len`` responses are dropped;
    land runs shorter than ``min_land_len`` or entering below ``min_land_v0``
    likewise.
    """
    if not storm.is_derived:
        storm = derive_storm(storm, config)
    assert storm.v is not None  # noqa: S101
    covariates = raw_covariates(storm, config)
    dv = storm.dv
    n = len(storm)
    names = covariate_names_for(config.covariate_set)
    sequences: list[OceanSequence] = []
    segments: list[LandSegment] = []
    for over_land, start, stop in _runs(storm.over_land):
        if over_land:
            if stop - start >= config.min_land_len and storm.v[start] >= config.min_land_v0:
                segments.append(
                    LandSegment(
                        storm_id=storm.storm_id,
                        start_index=start,
                        v0=float(storm.v[start]),
                        intensities=storm.v[start:stop].copy(),
                    ),
                )
            continue
        last = min(stop, n - 1)
        if last - start >= config.min_ocean_len:
            sequences.append(
                OceanSequence(
                    storm_id=storm.storm_id,
                    start_index=start,
                    responses=dv[start:last].copy(),
                    covariates=covariates[start:last].copy(),
                    covariate_names=names,
                ),
            )
    return sequences, segments


# Scaling
# ------------------------------------------------------------------------------


def fit_scaler(sequences: list[OceanSequence]) -> Scaler:
    """Sample mean and sample (n-1) standard deviation of every variable."""
    if not sequences:
        msg = "cannot fit a scaler without sequences"
        raise FitError(msg)
    names = sequences[0].covariate_names
    covariates = np.vstack([s.covariates for s in sequences])
    responses = np.concatenate([s.responses for s in sequences])
    if len(responses) < 2:  # noqa: PLR2004
        msg = "cannot fit a scaler on fewer than 2 observations"
        raise FitError(msg)
    covariate_sd = covariates.std(axis=0, ddof=1)
    response_sd = float(responses.std(ddof=1))
    for name, sd in [*zip(names, covariate_sd, strict=True), (RESPONSE_NAME, response_sd)]:
        if not sd > 0:
            msg = f"variable {name!r} has zero variance; cannot standardize"
            raise FitError(msg)
    return Scaler(
        covariate_names=names,
        covariate_mean=covariates.mean(axis=0),
        covariate_sd=covariate_sd,
        response_mean=float(responses.mean()),
        response_sd=response_sd,
    )


def apply_scaler(scaler: Scaler, sequences: list[OceanSequence]) -> list[OceanSequence]:
    return [scaler.standardize_sequence(s) for s in sequences]


def invert_scaler(scaler: Scaler, sequence: OceanSequence) -> OceanSequence:
    if not sequence.standardized:
        return sequence
    return OceanSequence(
        storm_id=sequence.storm_id,
        start_index=sequence.start_index,
        responses=scaler.unstandardize_response(sequence.responses),
        covariates=scaler.unstandardize_covariates(sequence.covariates),
        standardized=False,
        covariate_names=sequence.covariate_names,
    )


# Dataset
# ------------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Dataset:
    storms: list[StormRecord]
    sequences: list[OceanSequence]
    land_segments: list[LandSegment]
    scaler: Scaler
    config: IngestConfig = field(default_factory=IngestConfig)

    @property
    def counts(self) -> dict[str, int]:
        return {
            "n_storms": len(self.storms),
            "n_sequences": len(self.sequences),
            "n_observations": sum(len(s) for s in self.sequences),
            "n_land_segments": len(self.land_segments),
        }

    def pooled(self) -> tuple[np.ndarray, np.ndarray]:
        """All standardized (X, y) rows, sequence by sequence."""
        return (
            np.vstack([s.covariates for s in self.sequences]),
            np.concatenate([s.responses for s in self.sequences]),
        )

    def summary(self) -> dict[str, Any]:
        return {**self.counts, "scaler": self.scaler.to_dict(), "config": asdict(self.config)}


def build_dataset(storms: list[StormRecord], config: IngestConfig) -> Dataset:
    derived = [derive_storm(storm, config) for storm in storms]
    raw_sequences: list[OceanSequence] = []
    land_segments: list[LandSegment] = []
    for storm in derived:
        sequences, segments = segment_storm(storm, config)
        raw_sequences.extend(sequences)
        land_segments.extend(segments)
    scaler = fit_scaler(raw_sequences)
    dataset = Dataset(
        storms=derived,
        sequences=apply_scaler(scaler, raw_sequences),
        land_segments=land_segments,
        scaler=scaler,
        config=config,
    )
    logger.info(
        "Dataset: %(n_storms)d storms, %(n_sequences)d sequences, "
        "%(n_observations)d observations, %(n_land_segments)d land segments",
        dataset.counts,
    )
    return dataset


def load_dataset(path: Path | str, config: IngestConfig) -> Dataset:
    options = ParseOptions(require_ocean=config.uses_ocn)
    return build_dataset(parse_tracks(path, options), config)
