"""Monte Carlo intensity ensembles along prescribed tracks.

A realization copies the first two observed intensities, then steps the
intensity forward six hours at a time. Over the ocean the intensity model
draws a standardized ΔV from the covariates at the current point, with OCN
recomputed from the simulated intensity. Over land the decay model takes
over from the intensity at the first land point, while ΔV_p and the hidden
state stay frozen. A realization stops at the end of the track or right
after it records an intensity below the stop threshold.

State bookkeeping follows the fitted model: ``states[t]`` generated the change
from ``t`` to ``t + 1``. One initial draw covers indices 0 and 1, and
transitions use the covariates at the time they lead into.
"""

from __future__ import annotations

import datetime
import hashlib
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from dataclasses import field
from typing import TYPE_CHECKING
from typing import Any
from typing import Protocol

import numpy as np
from django.conf import settings

from tcintensity.core.exceptions import SimulationError
from tcintensity.core.exceptions import ValidationError
from tcintensity.intensity.hmm import MehimModel
from tcintensity.intensity.landdecay import land_apply
from tcintensity.intensity.linear import NO_STATE
from tcintensity.storms.ingest import IngestConfig
from tcintensity.storms.ingest import derive_storm
from tcintensity.storms.ingest import ocn_with_floors

if TYPE_CHECKING:
    from collections.abc import Sequence

    from tcintensity.intensity.landdecay import LandModel
    from tcintensity.storms.domain import Scaler
    from tcintensity.storms.domain import StormRecord

logger = logging.getLogger(__name__)

RI_THRESHOLD_KT = 30.0
RI_WINDOW_STEPS = 4
RI_CORRECTION_STEPS = 4


class IntensityModel(Protocol):
    model_type: str
    scaler: Scaler | None
    covariate_set: str

    @property
    def k(self) -> int: ...

    @property
    def covariate_names(self) -> tuple[str, ...]: ...

    def draw_initial_state(self, x_init: np.ndarray, rng: np.random.Generator) -> int: ...

    def draw_transition(self, state: int, x: np.ndarray, rng: np.random.Generator) -> int: ...

    def draw_change(self, state: int, x: np.ndarray, rng: np.random.Generator) -> float: ...


@dataclass(frozen=True)
class SimConfig:
    n_realizations: int = 100
    master_seed: int = 42
    stop_threshold: float = 10.0
    ri_corrections: tuple[tuple[datetime.datetime, int], ...] = ()
    workers: int = 1

    def __post_init__(self) -> None:
        if self.n_realizations < 1:
            msg = f"n_realizations must be >= 1, got {self.n_realizations}"
            raise ValidationError(msg)
        if not self.stop_threshold > 0:
            msg = f"stop_threshold must be > 0, got {self.stop_threshold}"
            raise ValidationError(msg)

    @classmethod
    def from_settings(cls, **overrides: Any) -> SimConfig:
        values = {
            "n_realizations": settings.TC_N_REALIZATIONS,
            "master_seed": settings.TC_SEED,
            "stop_threshold": settings.TC_STOP_THRESHOLD,
            "workers": settings.TC_WORKERS,
        }
        values.update({key: value for key, value in overrides.items() if value is not None})
        return cls(**values)

    def echo(self) -> dict[str, Any]:
        return {
            "n_realizations": self.n_realizations,
            "master_seed": self.master_seed,
            "stop_threshold": self.stop_threshold,
            "ri_corrections": [[start.isoformat(), steps] for start, steps in self.ri_corrections],
        }


@dataclass(frozen=True, eq=False)
class Realization:
    """One simulated intensity series, truncated where the realization stopped."""

    index: int
    seed: int
    v: np.ndarray
    dv: np.ndarray
    states: np.ndarray
    stopped_at: int | None = None

    def __len__(self) -> int:
        return len(self.v)


@dataclass(frozen=True, eq=False)
class EnsembleResult:
    storm_id: str
    model_id: str
    model_hash: str
    times: tuple[datetime.datetime, ...]
    lat: np.ndarray
    lon: np.ndarray
    over_land: np.ndarray
    realizations: tuple[Realization, ...]
    config: dict[str, Any] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.realizations)


@dataclass(frozen=True, eq=False)
class PreparedTrack:
    """Everything a realization reads from the track, computed once per storm."""

    storm: StormRecord
    observed_v: np.ndarray
    translation: np.ndarray
    mpi: np.ndarray
    shr: np.ndarray
    rh: np.ndarray
    h_m: np.ndarray
    gamma: np.ndarray
    forced_steps: frozenset[int] = frozenset()


def realization_seed(master_seed: int, storm_id: str, index: int) -> int:
    """64-bit seed from SHA-256 of ``(master_seed, storm_id, index)``."""
    digest = hashlib.sha256(f"{master_seed}:{storm_id}:{index}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def ri_onsets(v: np.ndarray, over_land: np.ndarray) -> list[int]:
    """First index of every run of steps whose ocean-only 24-h rise reaches the RI threshold."""
    n = len(v)
    qualifying = np.zeros(n, dtype=bool)
    for t in range(n - RI_WINDOW_STEPS):
        window = slice(t, t + RI_WINDOW_STEPS + 1)
        qualifying[t] = not over_land[window].any() and v[t + RI_WINDOW_STEPS] - v[t] >= RI_THRESHOLD_KT
    return [t for t in range(n) if qualifying[t] and (t == 0 or not qualifying[t - 1])]


def ri_correct_schedule(
    storm: StormRecord,
    config: IngestConfig | None = None,
) -> list[tuple[datetime.datetime, int]]:
    """Correction windows ``(onset time, 4)`` at each observed RI onset."""
    if not storm.is_derived:
        storm = derive_storm(storm, config or IngestConfig())
    assert storm.v is not None  # noqa: S101
    return [(storm.times[t], RI_CORRECTION_STEPS) for t in ri_onsets(storm.v, storm.over_land)]


def _forced_steps(storm: StormRecord, windows: Sequence[tuple[datetime.datetime, int]]) -> frozenset[int]:
    index = {time: t for t, time in enumerate(storm.times)}
    steps: set[int] = set()
    for start, length in windows:
        if start not in index:
            logger.debug("RI correction at %s is not on the track of storm %s", start.isoformat(), storm.storm_id)
            continue
        steps.update(range(index[start], index[start] + length))
    return frozenset(steps)


def prepare_track(
    storm: StormRecord,
    ingest_config: IngestConfig,
    ri_corrections: Sequence[tuple[datetime.datetime, int]] = (),
) -> PreparedTrack:
    if len(storm) < 3:  # noqa: PLR2004
        msg = f"storm {storm.storm_id} has {len(storm)} point(s); simulation needs at least 3"
        raise SimulationError(msg)
    derived = derive_storm(storm, ingest_config)
    assert derived.v is not None  # noqa: S101
    assert derived.translation_speed is not None  # noqa: S101
    return PreparedTrack(
        storm=derived,
        observed_v=derived.v,
        translation=derived.translation_speed,
        mpi=derived.env("mpi"),
        shr=derived.env("shr"),
        rh=derived.env("rh"),
        h_m=derived.env("h_m"),
        gamma=derived.env("gamma"),
        forced_steps=_forced_steps(derived, ri_corrections),
    )


def _raw_covariates(
    track: PreparedTrack,
    t: int,
    v: float,
    dv_p: float,
    names: tuple[str, ...],
    ingest_config: IngestConfig,
) -> np.ndarray:
    values = {"dv_p": dv_p, "v": v, "mpi": track.mpi[t], "shr": track.shr[t], "rh": track.rh[t]}
    missing = [name for name in ("mpi", "shr", "rh") if np.isnan(values[name])]
    if "ocn" in names:
        if np.isnan(track.gamma[t]) or np.isnan(track.h_m[t]):
            missing += ["h_m/gamma"]
        else:
            values["ocn"] = ocn_with_floors(
                track.gamma[t],
                track.h_m[t],
                track.translation[t],
                track.mpi[t],
                v,
                gamma_floor=ingest_config.gamma_floor,
                v_floor=ingest_config.v_floor,
                context=f"storm {track.storm.storm_id} step {t}",
            )
    if missing:
        time = track.storm.times[t].isoformat()
        msg = f"storm {track.storm.storm_id}: missing environment ({', '.join(missing)}) at {time}"
        raise SimulationError(msg)
    return np.array([values[name] for name in names], dtype=float)


def simulate_prepared(  # noqa: C901, PLR0913
    model: IntensityModel,
    track: PreparedTrack,
    land_model: LandModel | None,
    config: SimConfig,
    realization_index: int,
    ingest_config: IngestConfig,
) -> Realization:
    scaler = model.scaler
    if scaler is None:
        msg = f"{model.model_type} model has no scaler"
        raise SimulationError(msg)
    names = model.covariate_names
    storm = track.storm
    n = len(storm)
    seed = realization_seed(config.master_seed, storm.storm_id, realization_index)
    rng = np.random.default_rng(seed)
    forced_state = model.k - 1 if isinstance(model, MehimModel) else None

    v = np.full(n, np.nan)
    dv = np.full(n, np.nan)
    states = np.full(n, NO_STATE, dtype=int)
    v[:2] = track.observed_v[:2]
    dv[0] = v[1] - v[0]
    dv_p = dv[0]

    raw = _raw_covariates(track, 0, v[0], 0.0, names, ingest_config)
    x_init = scaler.standardize_covariates(raw)[list(getattr(model, "initial_columns", ()))]
    state = model.draw_initial_state(x_init, rng)
    for t in (0, 1):
        if forced_state is not None and t in track.forced_steps:
            state = forced_state
        states[t] = state

    entry: int | None = None
    stopped_at: int | None = None
    last = n - 1
    for t in range(1, n - 1):
        if storm.over_land[t]:
            if land_model is None:
                when = storm.times[t].isoformat()
                msg = f"storm {storm.storm_id} crosses land at {when} but no land model was given"
                raise SimulationError(msg)
            entry = t if entry is None else entry
            v[t + 1] = land_apply(land_model, v[entry], t + 1 - entry)
        else:
            entry = None
            x = scaler.standardize_covariates(_raw_covariates(track, t, v[t], dv_p, names, ingest_config))
            if t >= 2:  # noqa: PLR2004
                state = model.draw_transition(state, x, rng)
            if forced_state is not None and t in track.forced_steps:
                state = forced_state
            change = float(scaler.unstandardize_response(model.draw_change(state, x, rng)))
            v[t + 1] = max(v[t] + change, 0.0)
            dv_p = v[t + 1] - v[t]
        states[t] = state
        dv[t] = v[t + 1] - v[t]
        if v[t + 1] < config.stop_threshold:
            stopped_at = last = t + 1
            break
    states[last] = state
    return Realization(
        index=realization_index,
        seed=seed,
        v=v[: last + 1],
        dv=dv[: last + 1],
        states=states[: last + 1],
        stopped_at=stopped_at,
    )


def simulate_storm(  # noqa: PLR0913
    model: IntensityModel,
    storm: StormRecord,
    land_model: LandModel | None,
    config: SimConfig,
    realization_index: int,
    ingest_config: IngestConfig | None = None,
) -> Realization:
    ingest_config = ingest_config or IngestConfig(covariate_set=model.covariate_set)
    track = prepare_track(storm, ingest_config, config.ri_corrections)
    return simulate_prepared(model, track, land_model, config, realization_index, ingest_config)


def simulate_ensemble(  # noqa: PLR0913
    model: IntensityModel,
    storm: StormRecord,
    land_model: LandModel | None,
    config: SimConfig,
    ingest_config: IngestConfig | None = None,
    *,
    model_id: str = "",
    model_hash: str = "",
) -> EnsembleResult:
    """``n_realizations`` independent runs, returned in index order."""
    ingest_config = ingest_config or IngestConfig(covariate_set=model.covariate_set)
    if config.ri_corrections and not isinstance(model, MehimModel):
        logger.warning("RI state correction only applies to MeHiM models; ignoring it for %s", model.model_type)
    track = prepare_track(storm, ingest_config, config.ri_corrections)

    def run(index: int) -> Realization:
        return simulate_prepared(model, track, land_model, config, index, ingest_config)

    with ThreadPoolExecutor(max_workers=max(config.workers, 1)) as pool:
        realizations = tuple(pool.map(run, range(config.n_realizations)))
    stopped = sum(r.stopped_at is not None for r in realizations)
    logger.info(
        "Simulated %d realization(s) of storm %s (%d stopped below %s kt)",
        len(realizations),
        storm.storm_id,
        stopped,
        config.stop_threshold,
    )
    return EnsembleResult(
        storm_id=storm.storm_id,
        model_id=model_id or model.model_type,
        model_hash=model_hash,
        times=tuple(track.storm.times),
        lat=track.storm.lat,
        lon=track.storm.lon,
        over_land=track.storm.over_land,
        realizations=realizations,
        config=config.echo(),
    )
