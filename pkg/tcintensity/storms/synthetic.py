"""Seeded synthetic storms with a known intensity process.

Tracks drift north-west and recurve; some cross a land strip and come back
out. Over the ocean the background-removed intensity follows a raw-unit
linear process in the same covariates ingest derives (so fitting the output
recovers the process); over land it follows the exponential decay model.
"""

from __future__ import annotations

import datetime
import logging
from dataclasses import dataclass
from dataclasses import field
from pathlib import Path

import numpy as np
import pandas as pd

from tcintensity.core.outputs import atomic_write_text
from tcintensity.intensity.landdecay import LandModel
from tcintensity.intensity.landdecay import land_apply
from tcintensity.storms.domain import COVARIATE_NAMES
from tcintensity.storms.domain import KT_PER_MS
from tcintensity.storms.domain import EnvRecord
from tcintensity.storms.domain import StormRecord
from tcintensity.storms.domain import TrackPoint
from tcintensity.storms.ingest import IngestConfig
from tcintensity.storms.ingest import compute_translation
from tcintensity.storms.ingest import ocn_with_floors

logger = logging.getLogger(__name__)

EPOCH = datetime.datetime(2001, 8, 1, tzinfo=datetime.timezone.utc)
METERS_PER_DEGREE = 111_195.0


def _default_coefficients() -> dict[str, float]:
    return {"dv_p": 0.45, "v": -0.08, "mpi": 0.06, "shr": -0.35, "rh": 0.08, "ocn": 4.0}


@dataclass(frozen=True)
class LinearProcess:
    """``dv = intercept + sum(coefficients[name] * covariate) + N(0, sigma)`` in kt per 6 h."""

    intercept: float = -8.0
    coefficients: dict[str, float] = field(default_factory=_default_coefficients)
    sigma: float = 4.0

    def mean(self, covariates: dict[str, float]) -> float:
        return self.intercept + sum(self.coefficients[name] * covariates[name] for name in COVARIATE_NAMES)


@dataclass(frozen=True)
class SyntheticSpec:
    n_storms: int = 20
    min_length: int = 28
    max_length: int = 48
    land_probability: float = 0.5
    stop_threshold: float = 10.0
    process: LinearProcess = field(default_factory=LinearProcess)
    land_model: LandModel = field(default_factory=lambda: LandModel(alpha=0.049, v_b=18.82))


def _track(rng: np.random.Generator, n: int) -> tuple[np.ndarray, np.ndarray]:
    lat, lon = np.empty(n), np.empty(n)
    lat[0], lon[0] = rng.uniform(10.0, 20.0), rng.uniform(-60.0, -35.0)
    speed = rng.uniform(3.0, 7.0)
    heading = np.radians(rng.uniform(290.0, 310.0))
    for t in range(1, n):
        step_m = speed * 6 * 3600
        lat[t] = lat[t - 1] + step_m * np.cos(heading) / METERS_PER_DEGREE
        lon[t] = lon[t - 1] + step_m * np.sin(heading) / (METERS_PER_DEGREE * np.cos(np.radians(lat[t - 1])))
        heading += np.radians(rng.uniform(1.0, 5.0))
        speed = float(np.clip(speed + rng.normal(0.0, 0.3), 1.5, 10.0))
    return lat, lon


def _environment(rng: np.random.Generator, lat: np.ndarray) -> list[EnvRecord]:
    h_m, gamma = rng.uniform(20.0, 80.0), rng.uniform(0.5, 2.0)
    records = []
    for value in lat:
        above = value - 15.0
        records.append(
            EnvRecord(
                mpi=float(max(170.0 - 2.5 * above + rng.normal(0.0, 5.0), 20.0)),
                shr=float(max(6.0 + 0.3 * above + rng.normal(0.0, 2.0), 0.0)),
                rh=float(np.clip(65.0 - 0.5 * above + rng.normal(0.0, 5.0), 5.0, 95.0)),
                h_m=float(h_m + rng.normal(0.0, 2.0)),
                gamma=float(max(gamma + rng.normal(0.0, 0.05), 0.1)),
            ),
        )
    return records


def _land_flags(rng: np.random.Generator, n: int, probability: float) -> np.ndarray:
    flags = np.zeros(n, dtype=bool)
    if rng.random() < probability and n > 25:  # noqa: PLR2004
        start = int(rng.integers(14, n - 10))
        flags[start : start + int(rng.integers(2, 7))] = True
    return flags


def generate_storm(
    rng: np.random.Generator,
    storm_id: str,
    spec: SyntheticSpec,
    config: IngestConfig,
    start: datetime.datetime,
) -> StormRecord:
    n = int(rng.integers(spec.min_length, spec.max_length + 1))
    lat, lon = _track(rng, n)
    envs = _environment(rng, lat)
    over_land = _land_flags(rng, n, spec.land_probability)
    times = [start + datetime.timedelta(hours=6 * t) for t in range(n)]
    skeleton = StormRecord(
        storm_id=storm_id,
        points=tuple(
            (
                TrackPoint(
                    time=times[t],
                    lat=float(lat[t]),
                    lon=float(lon[t]),
                    observed_wind=0.0,
                    over_land=bool(over_land[t]),
                ),
                envs[t],
            )
            for t in range(n)
        ),
    )
    u_t = compute_translation(skeleton)

    v = np.empty(n)
    v[0] = rng.uniform(20.0, 35.0)
    dv_p, entry, length = 0.0, None, n
    for t in range(n - 1):
        if over_land[t]:
            entry = t if entry is None else entry
            v[t + 1] = land_apply(spec.land_model, float(v[entry]), t + 1 - entry)
        else:
            entry = None
            env = envs[t]
            ocn = ocn_with_floors(
                env.gamma,
                env.h_m,
                u_t[t],
                env.mpi,
                v[t],
                gamma_floor=config.gamma_floor,
                v_floor=config.v_floor,
            )
            covariates = {"dv_p": dv_p, "v": v[t], "mpi": env.mpi, "shr": env.shr, "rh": env.rh, "ocn": ocn}
            change = spec.process.mean(covariates) + spec.process.sigma * rng.standard_normal()
            v[t + 1] = max(v[t] + change, 0.0)
        dv_p = v[t + 1] - v[t]
        if v[t + 1] < spec.stop_threshold and t >= 1:
            length = t + 2
            break

    # The endpoint speed of a truncated track is one-sided, as ingest will see it.
    u_final = compute_translation(StormRecord(storm_id=storm_id, points=skeleton.points[:length]))
    observed = v[:length] + config.bg_fraction * KT_PER_MS * u_final
    points = tuple(
        (
            TrackPoint(
                time=times[t],
                lat=float(lat[t]),
                lon=float(lon[t]),
                observed_wind=float(observed[t]),
                over_land=bool(over_land[t]),
            ),
            envs[t],
        )
        for t in range(length)
    )
    return StormRecord(storm_id=storm_id, points=points, name=f"SYNTH-{storm_id}")


def generate_storms(spec: SyntheticSpec, config: IngestConfig, seed: int) -> list[StormRecord]:
    """``spec.n_storms`` storms, one independent generator stream each."""
    streams = np.random.SeedSequence(seed).spawn(spec.n_storms)
    storms = []
    for index, stream in enumerate(streams):
        start = EPOCH + datetime.timedelta(days=10 * index)
        storms.append(generate_storm(np.random.default_rng(stream), f"S{index + 1:03d}", spec, config, start))
    logger.info("Generated %d synthetic storm(s) with seed %d", len(storms), seed)
    return storms


def tracks_frame(storms: list[StormRecord]) -> pd.DataFrame:
    rows = [
        {
            "storm_id": storm.storm_id,
            "name": storm.name,
            "time": point.time.isoformat(),
            "lat": point.lat,
            "lon": point.lon,
            "wind_kt": point.observed_wind,
            "over_land": int(point.over_land),
            "mpi_kt": env.mpi,
            "shr_ms": env.shr,
            "rh_pct": env.rh,
            "hm_m": env.h_m,
            "gamma_k_per_100m": env.gamma,
        }
        for storm in storms
        for point, env in storm.points
    ]
    return pd.DataFrame(rows)


def write_tracks(storms: list[StormRecord], path: Path) -> None:
    """Write storms in the tracks CSV format (full float precision)."""
    atomic_write_text(path, tracks_frame(storms).to_csv(index=False, lineterminator="\n"))
