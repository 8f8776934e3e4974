"""Core data types shared by every other module.

Nothing here performs I/O or fitting. All types are frozen and safe to share
read-only between workers.
"""

from __future__ import annotations

import datetime
import math
from dataclasses import dataclass
from dataclasses import field
from dataclasses import replace
from functools import cached_property
from typing import Any

import numpy as np

from tcintensity.core.exceptions import ValidationError

# Fixed covariate order used by model files, fitting and simulation.
COVARIATE_NAMES: tuple[str, ...] = ("dv_p", "v", "mpi", "shr", "rh", "ocn")
COVARIATE_SETS: dict[str, tuple[str, ...]] = {
    "full": COVARIATE_NAMES,
    "no_ocn": COVARIATE_NAMES[:5],
}
INITIAL_COVARIATE_NAMES: tuple[str, ...] = ("mpi", "shr", "rh")
RESPONSE_NAME = "dv"

# 1 m/s in knots (1 kt = 1852 m per hour).
KT_PER_MS = 3600.0 / 1852.0
STEP_HOURS = 6


def covariate_names_for(covariate_set: str) -> tuple[str, ...]:
    try:
        return COVARIATE_SETS[covariate_set]
    except KeyError:
        msg = f"Unknown covariate set {covariate_set!r} (expected one of {sorted(COVARIATE_SETS)})"
        raise ValidationError(msg) from None


@dataclass(frozen=True)
class TrackPoint:
    """One 6-hourly fix: position, reported wind (kt) and the land flag."""

    time: datetime.datetime
    lat: float
    lon: float
    observed_wind: float
    over_land: bool

    def __post_init__(self) -> None:
        if not -90.0 <= self.lat <= 90.0:  # noqa: PLR2004
            msg = f"latitude {self.lat} outside [-90, 90] at {self.time}"
            raise ValidationError(msg)
        if self.observed_wind < 0:
            msg = f"negative observed wind {self.observed_wind} at {self.time}"
            raise ValidationError(msg)


@dataclass(frozen=True)
class EnvRecord:
    """Environment at one fix. h_m and gamma may be NaN when OCN is not used."""

    mpi: float
    shr: float
    rh: float
    h_m: float = math.nan
    gamma: float = math.nan

    def __post_init__(self) -> None:
        for name in ("mpi", "shr", "h_m", "gamma"):
            value = getattr(self, name)
            if value < 0:
                msg = f"{name} must be >= 0, got {value}"
                raise ValidationError(msg)
        if not 0.0 <= self.rh <= 100.0 and not math.isnan(self.rh):  # noqa: PLR2004
            msg = f"rh must lie in [0, 100], got {self.rh}"
            raise ValidationError(msg)

    @property
    def has_ocean(self) -> bool:
        return not (math.isnan(self.h_m) or math.isnan(self.gamma))


@dataclass(frozen=True, eq=False)
class StormRecord:
    """A storm's track and environment, plus the per-point derived series.

    ``translation_speed`` (m/s) and ``v`` (kt, background removed) are filled
    in by :func:`tcintensity.storms.ingest.derive_storm`.
    """

    storm_id: str
    points: tuple[tuple[TrackPoint, EnvRecord], ...]
    name: str = ""
    translation_speed: np.ndarray | None = field(default=None, repr=False)
    v: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if len(self.points) < 2:  # noqa: PLR2004
            msg = f"storm {self.storm_id} has {len(self.points)} point(s); at least 2 required"
            raise ValidationError(msg)
        times = [point.time for point, _ in self.points]
        for earlier, later in zip(times, times[1:], strict=False):
            if later <= earlier:
                msg = (
                    f"storm {self.storm_id}: time {later.isoformat()} is not after "
                    f"{earlier.isoformat()} (duplicate or out-of-order timestamp)"
                )
                raise ValidationError(msg)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def is_derived(self) -> bool:
        return self.v is not None and self.translation_speed is not None

    def with_derived(self, translation_speed: np.ndarray, v: np.ndarray) -> StormRecord:
        return replace(self, translation_speed=translation_speed, v=v)

    @cached_property
    def times(self) -> list[datetime.datetime]:
        return [point.time for point, _ in self.points]

    @cached_property
    def lat(self) -> np.ndarray:
        return np.array([point.lat for point, _ in self.points], dtype=float)

    @cached_property
    def lon(self) -> np.ndarray:
        return np.array([point.lon for point, _ in self.points], dtype=float)

    @cached_property
    def observed_wind(self) -> np.ndarray:
        return np.array([point.observed_wind for point, _ in self.points], dtype=float)

    @cached_property
    def over_land(self) -> np.ndarray:
        return np.array([point.over_land for point, _ in self.points], dtype=bool)

    def env(self, name: str) -> np.ndarray:
        return np.array([getattr(env, name) for _, env in self.points], dtype=float)

    @property
    def dv(self) -> np.ndarray:
        """Forward difference: ``dv[t] = v[t+1] - v[t]``, one shorter than ``v``."""
        if self.v is None:
            msg = f"storm {self.storm_id} has no derived intensity"
            raise ValidationError(msg)
        return np.diff(self.v)


@dataclass(frozen=True, eq=False)
class CovariateVector:
    """The fixed-order covariates for one time step, raw or standardized."""

    values: np.ndarray
    standardized: bool
    names: tuple[str, ...] = COVARIATE_NAMES

    def __post_init__(self) -> None:
        if len(self.values) != len(self.names):
            msg = f"{len(self.values)} covariate values for {len(self.names)} names"
            raise ValidationError(msg)

    def require(self, *, standardized: bool) -> np.ndarray:
        if self.standardized != standardized:
            expected = "standardized" if standardized else "raw"
            msg = f"covariates must be {expected}"
            raise ValidationError(msg)
        return self.values


@dataclass(frozen=True, eq=False)
class OceanSequence:
    """A contiguous over-ocean run: responses ``dv`` and their covariates."""

    storm_id: str
    start_index: int
    responses: np.ndarray
    covariates: np.ndarray
    standardized: bool = False
    covariate_names: tuple[str, ...] = COVARIATE_NAMES

    def __len__(self) -> int:
        return len(self.responses)

    @property
    def stop_index(self) -> int:
        return self.start_index + len(self.responses)

    @property
    def initial_covariates(self) -> np.ndarray:
        """MPI, SHR and RH at the first step of the sequence."""
        columns = [self.covariate_names.index(name) for name in INITIAL_COVARIATE_NAMES]
        return self.covariates[0, columns]


@dataclass(frozen=True, eq=False)
class LandSegment:
    """A maximal over-land run; ``intensities[0] == v0`` at the first land point."""

    storm_id: str
    start_index: int
    v0: float
    intensities: np.ndarray

    def __len__(self) -> int:
        return len(self.intensities)


@dataclass(frozen=True, eq=False)
class Scaler:
    """Training-set mean and standard deviation of every covariate and of dv."""

    covariate_names: tuple[str, ...]
    covariate_mean: np.ndarray
    covariate_sd: np.ndarray
    response_mean: float
    response_sd: float
    ddof: int = 1

    def __post_init__(self) -> None:
        sds = {**dict(zip(self.covariate_names, self.covariate_sd, strict=True)), RESPONSE_NAME: self.response_sd}
        for name, sd in sds.items():
            if not sd > 0:
                msg = f"scaler standard deviation for {name} must be > 0, got {sd}"
                raise ValidationError(msg)

    def standardize_covariates(self, values: np.ndarray) -> np.ndarray:
        return (np.asarray(values, dtype=float) - self.covariate_mean) / self.covariate_sd

    def unstandardize_covariates(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values, dtype=float) * self.covariate_sd + self.covariate_mean

    def standardize_response(self, values: Any) -> Any:
        return (values - self.response_mean) / self.response_sd

    def unstandardize_response(self, values: Any) -> Any:
        return values * self.response_sd + self.response_mean

    def standardize_sequence(self, sequence: OceanSequence) -> OceanSequence:
        if sequence.standardized:
            return sequence
        if sequence.covariate_names != self.covariate_names:
            msg = f"sequence covariates {sequence.covariate_names} do not match scaler {self.covariate_names}"
            raise ValidationError(msg)
        return replace(
            sequence,
            responses=self.standardize_response(sequence.responses),
            covariates=self.standardize_covariates(sequence.covariates),
            standardized=True,
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "covariate_names": list(self.covariate_names),
            "covariate_mean": [float(x) for x in self.covariate_mean],
            "covariate_sd": [float(x) for x in self.covariate_sd],
            "response_mean": float(self.response_mean),
            "response_sd": float(self.response_sd),
            "ddof": self.ddof,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> Scaler:
        return cls(
            covariate_names=tuple(data["covariate_names"]),
            covariate_mean=np.asarray(data["covariate_mean"], dtype=float),
            covariate_sd=np.asarray(data["covariate_sd"], dtype=float),
            response_mean=float(data["response_mean"]),
            response_sd=float(data["response_sd"]),
            ddof=int(data.get("ddof", 1)),
        )
