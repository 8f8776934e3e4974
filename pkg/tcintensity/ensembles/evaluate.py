"""Intensity-climatology metrics for observations and simulated ensembles.

Every metric takes a list of :class:`IntensitySeries`. Observations contribute
one series per storm. Ensembles contribute one per storm and realization.
Percentiles use linear interpolation between closest ranks throughout.
"""

from __future__ import annotations

import datetime
import json
import logging
import math
from dataclasses import dataclass
from functools import cached_property
from itertools import groupby
from pathlib import Path
from typing import TYPE_CHECKING
from typing import Any

import numpy as np
import pandas as pd
from scipy import stats as sps
from shapely.geometry import Point
from shapely.geometry import Polygon

from tcintensity.core.exceptions import SchemaError
from tcintensity.core.exceptions import ValidationError
from tcintensity.ensembles.simulate import RI_THRESHOLD_KT
from tcintensity.ensembles.simulate import RI_WINDOW_STEPS

if TYPE_CHECKING:
    from collections.abc import Sequence

    from tcintensity.ensembles.simulate import EnsembleResult
    from tcintensity.storms.domain import StormRecord

logger = logging.getLogger(__name__)

OTHER_REGION = "other"
ENVELOPE_PERCENTILES = tuple(range(10, 100, 10))
LANDFALL_BANDS = (15, 50, 85)
MIN_ENVELOPE_REALIZATIONS = 10


@dataclass(frozen=True, eq=False)
class IntensitySeries:
    """One intensity history along a track; ``realization`` is None for observations."""

    storm_id: str
    realization: int | None
    times: tuple[datetime.datetime, ...]
    lat: np.ndarray
    lon: np.ndarray
    v: np.ndarray
    over_land: np.ndarray

    def __len__(self) -> int:
        return len(self.v)


def observed_series(storms: Sequence[StormRecord]) -> list[IntensitySeries]:
    series = []
    for storm in storms:
        if storm.v is None:
            msg = f"storm {storm.storm_id} has no derived intensity"
            raise ValidationError(msg)
        series.append(
            IntensitySeries(
                storm_id=storm.storm_id,
                realization=None,
                times=tuple(storm.times),
                lat=storm.lat,
                lon=storm.lon,
                v=storm.v,
                over_land=storm.over_land,
            ),
        )
    return series


def ensemble_series(result: EnsembleResult) -> list[IntensitySeries]:
    series = []
    for realization in result.realizations:
        n = len(realization)
        series.append(
            IntensitySeries(
                storm_id=result.storm_id,
                realization=realization.index,
                times=result.times[:n],
                lat=result.lat[:n],
                lon=result.lon[:n],
                v=realization.v,
                over_land=result.over_land[:n],
            ),
        )
    return series


def _by_realization(series: Sequence[IntensitySeries]) -> list[list[IntensitySeries]]:
    def key(s: IntensitySeries) -> int:
        return -1 if s.realization is None else s.realization

    return [list(group) for _, group in groupby(sorted(series, key=key), key=key)]


# Intensity change histograms
# ------------------------------------------------------------------------------


@dataclass(frozen=True)
class HistogramSpec:
    window: str = "6h"
    bin_width: float = 10.0
    density: bool = True

    def __post_init__(self) -> None:
        if self.window not in {"6h", "24h"}:
            msg = f"histogram window must be '6h' or '24h', got {self.window!r}"
            raise ValidationError(msg)
        if not self.bin_width > 0:
            msg = f"bin_width must be > 0, got {self.bin_width}"
            raise ValidationError(msg)

    @property
    def steps(self) -> int:
        return 1 if self.window == "6h" else RI_WINDOW_STEPS


@dataclass(frozen=True, eq=False)
class Histogram:
    edges: np.ndarray
    counts: np.ndarray

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    @cached_property
    def density(self) -> np.ndarray:
        if self.n == 0:
            return np.zeros(len(self.counts))
        return self.counts / (self.n * np.diff(self.edges))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "bin_left": self.edges[:-1],
                "bin_right": self.edges[1:],
                "count": self.counts,
                "density": self.density,
            },
        )


def histogram(values: np.ndarray, bin_width: float) -> Histogram:
    """Counts in ``[j w, (j + 1) w)`` bins aligned to zero and spanning the data."""
    values = np.asarray(values, dtype=float)
    if len(values) == 0:
        return Histogram(edges=np.zeros(0), counts=np.zeros(0, dtype=int))
    first = math.floor(values.min() / bin_width)
    last = math.floor(values.max() / bin_width)
    edges = np.arange(first, last + 2) * bin_width
    index = np.floor(values / bin_width).astype(int) - first
    return Histogram(edges=edges, counts=np.bincount(index, minlength=len(edges) - 1))


def intensity_changes(series: IntensitySeries, steps: int) -> np.ndarray:
    """``v[t + steps] - v[t]`` over windows that stay over the ocean."""
    n = len(series)
    if n <= steps:
        return np.zeros(0)
    changes = series.v[steps:] - series.v[:-steps]
    land = np.array([series.over_land[t : t + steps + 1].any() for t in range(n - steps)])
    return changes[~land]


def dv_histogram(series: Sequence[IntensitySeries], spec: HistogramSpec) -> Histogram:
    values = [intensity_changes(s, spec.steps) for s in series]
    return histogram(np.concatenate(values) if values else np.zeros(0), spec.bin_width)


# Lifetime maximum intensity
# ------------------------------------------------------------------------------


def max_rise(series: IntensitySeries, steps: int = RI_WINDOW_STEPS) -> float:
    """Largest ocean-only rise over exactly ``steps`` steps (24 h by default)."""
    changes = intensity_changes(series, steps)
    return float(changes.max()) if len(changes) else -np.inf


def is_rapid(series: IntensitySeries) -> bool:
    return max_rise(series) >= RI_THRESHOLD_KT


@dataclass(frozen=True, eq=False)
class LmiStats:
    table: pd.DataFrame
    density: pd.DataFrame

    @property
    def ri_fraction(self) -> float:
        return float(self.table["ri"].mean()) if len(self.table) else float("nan")


def _kde(values: np.ndarray, grid: np.ndarray) -> np.ndarray:
    if len(values) < 2 or np.ptp(values) == 0:  # noqa: PLR2004
        return np.full(len(grid), np.nan)
    return sps.gaussian_kde(values, bw_method="silverman")(grid)


def lmi_stats(series: Sequence[IntensitySeries], *, split_by_ri: bool = True) -> LmiStats:
    """LMI and RI flag per series, with Gaussian KDEs (Silverman bandwidth) on a 1-kt grid."""
    table = pd.DataFrame(
        {
            "storm_id": [s.storm_id for s in series],
            "realization": [0 if s.realization is None else s.realization + 1 for s in series],
            "lmi": [float(np.max(s.v)) for s in series],
            "ri": [is_rapid(s) for s in series],
        },
    )
    top = float(table["lmi"].max()) if len(table) else 0.0
    grid = np.arange(0.0, math.ceil(top / 10.0) * 10.0 + 21.0, 1.0)
    values = table["lmi"].to_numpy()
    density = pd.DataFrame({"v": grid, "all": _kde(values, grid)})
    if split_by_ri:
        flags = table["ri"].to_numpy(dtype=bool)
        density["ri"] = _kde(values[flags], grid)
        density["non_ri"] = _kde(values[~flags], grid)
    return LmiStats(table=table, density=density)


# Landfall
# ------------------------------------------------------------------------------


@dataclass(frozen=True)
class RegionSpec:
    """A coastline region; vertices are ``(lat, lon)`` and the polygon is closed."""

    name: str
    polygon: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        if len(self.polygon) < 3:  # noqa: PLR2004
            msg = f"region {self.name!r} needs at least 3 vertices"
            raise ValidationError(msg)
        if not self.shape.is_valid:
            msg = f"region {self.name!r} is not a simple polygon"
            raise ValidationError(msg)

    @property
    def shape(self) -> Polygon:
        return Polygon([(lon, lat) for lat, lon in self.polygon])

    def contains(self, lat: float, lon: float) -> bool:
        return bool(self.shape.covers(Point(lon, lat)))


def load_regions(path: Path | str) -> list[RegionSpec]:
    path = Path(path)
    if not path.exists():
        msg = f"Regions file not found: {path}"
        raise ValidationError(msg)
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
        return [
            RegionSpec(name=str(r["name"]), polygon=tuple((float(a), float(b)) for a, b in r["polygon"]))
            for r in document["regions"]
        ]
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        msg = f"{path}: malformed regions file ({e})"
        raise SchemaError(msg) from e


@dataclass(frozen=True)
class LandfallEvent:
    storm_id: str
    realization: int | None
    region: str
    time: datetime.datetime
    lat: float
    lon: float
    v: float


def landfall_events(series: Sequence[IntensitySeries], regions: Sequence[RegionSpec]) -> list[LandfallEvent]:
    """Ocean-to-land transitions: position of the first land point, v at the last ocean point."""
    events = []
    for s in series:
        for t in range(1, len(s)):
            if not s.over_land[t] or s.over_land[t - 1]:
                continue
            lat, lon = float(s.lat[t]), float(s.lon[t])
            region = next((r.name for r in regions if r.contains(lat, lon)), None)
            if region is None:
                logger.warning(
                    "Landfall of storm %s at (%.2f, %.2f) lies in no region; counted as %r",
                    s.storm_id,
                    lat,
                    lon,
                    OTHER_REGION,
                )
                region = OTHER_REGION
            events.append(
                LandfallEvent(
                    storm_id=s.storm_id,
                    realization=s.realization,
                    region=region,
                    time=s.times[t],
                    lat=lat,
                    lon=lon,
                    v=float(s.v[t - 1]),
                ),
            )
    return events


def landfall_intensities(
    series: Sequence[IntensitySeries],
    regions: Sequence[RegionSpec],
    bin_width: float = 10.0,
) -> tuple[pd.DataFrame, pd.DataFrame]:
    """Landfall events, and per region and bin the pooled density plus 15/50/85 bands over realizations."""
    events = landfall_events(series, regions)
    event_frame = pd.DataFrame(
        {
            "storm_id": [e.storm_id for e in events],
            "realization": [0 if e.realization is None else e.realization + 1 for e in events],
            "region": [e.region for e in events],
            "time": [e.time.isoformat() for e in events],
            "lat": [e.lat for e in events],
            "lon": [e.lon for e in events],
            "v_kt": [e.v for e in events],
        },
    )
    realizations = sorted({0 if s.realization is None else s.realization + 1 for s in series})
    rows = []
    for region in sorted(set(event_frame["region"])):
        in_region = event_frame[event_frame["region"] == region]
        pooled = histogram(in_region["v_kt"].to_numpy(), bin_width)
        per_realization = []
        for number in realizations:
            values = in_region.loc[in_region["realization"] == number, "v_kt"].to_numpy()
            counts = np.zeros(len(pooled.counts))
            if len(values):
                index = np.floor(values / bin_width).astype(int) - int(round(pooled.edges[0] / bin_width))
                counts = np.bincount(index, minlength=len(pooled.counts)) / (len(values) * bin_width)
            per_realization.append(counts)
        bands = np.percentile(np.vstack(per_realization), LANDFALL_BANDS, axis=0)
        for j in range(len(pooled.counts)):
            rows.append(
                {
                    "region": region,
                    "bin_left": pooled.edges[j],
                    "bin_right": pooled.edges[j + 1],
                    "count": int(pooled.counts[j]),
                    "density": pooled.density[j],
                    **{f"p{q}": bands[i, j] for i, q in enumerate(LANDFALL_BANDS)},
                },
            )
    columns = ["region", "bin_left", "bin_right", "count", "density", *(f"p{q}" for q in LANDFALL_BANDS)]
    return event_frame, pd.DataFrame(rows, columns=columns)


# Spatial percentiles
# ------------------------------------------------------------------------------


def spatial_percentiles(
    series: Sequence[IntensitySeries],
    grid: float = 2.0,
    percentile: float = 90.0,
) -> pd.DataFrame:
    """Per grid cell, the p-th percentile of v; for ensembles the median over realizations.

    Cells of the bounding grid that no point falls in are NaN.
    """
    if not 0 < percentile < 100:  # noqa: PLR2004
        msg = f"percentile must lie in (0, 100), got {percentile}"
        raise ValidationError(msg)
    columns = ["lat_min", "lat_max", "lon_min", "lon_max", "n", "value"]
    if not series:
        return pd.DataFrame(columns=columns)
    per_group: list[dict[tuple[int, int], float]] = []
    counts: dict[tuple[int, int], int] = {}
    for group in _by_realization(series):
        lat = np.concatenate([s.lat for s in group])
        lon = np.concatenate([s.lon for s in group])
        v = np.concatenate([s.v for s in group])
        cells = list(zip(np.floor(lat / grid).astype(int), np.floor(lon / grid).astype(int), strict=True))
        frame = pd.DataFrame({"cell": cells, "v": v})
        values = {}
        for cell, rows in frame.groupby("cell", sort=True):
            values[cell] = float(np.percentile(rows["v"].to_numpy(), percentile))
            counts[cell] = counts.get(cell, 0) + len(rows)
        per_group.append(values)
    rows_i = [cell[0] for cell in counts]
    cols_j = [cell[1] for cell in counts]
    records = []
    for i in range(min(rows_i), max(rows_i) + 1):
        for j in range(min(cols_j), max(cols_j) + 1):
            found = [values[(i, j)] for values in per_group if (i, j) in values]
            records.append(
                {
                    "lat_min": i * grid,
                    "lat_max": (i + 1) * grid,
                    "lon_min": j * grid,
                    "lon_max": (j + 1) * grid,
                    "n": counts.get((i, j), 0),
                    "value": float(np.median(found)) if found else np.nan,
                },
            )
    return pd.DataFrame(records, columns=columns)


# Per-storm envelopes
# ------------------------------------------------------------------------------


def storm_envelope(result: EnsembleResult) -> pd.DataFrame:
    """Mean and deciles of v across realizations at every step still being simulated."""
    if len(result) < MIN_ENVELOPE_REALIZATIONS:
        logger.warning(
            "Envelope of storm %s from %d realization(s); deciles need at least %d",
            result.storm_id,
            len(result),
            MIN_ENVELOPE_REALIZATIONS,
        )
    n = len(result.times)
    v = np.full((len(result), n), np.nan)
    for row, realization in enumerate(result.realizations):
        v[row, : len(realization)] = realization.v
    alive = ~np.isnan(v)
    frame = pd.DataFrame(
        {
            "step_index": np.arange(n),
            "time": [t.isoformat() for t in result.times],
            "n": alive.sum(axis=0),
        },
    )
    steps = alive.any(axis=0)
    mean = np.full(n, np.nan)
    mean[steps] = np.nanmean(v[:, steps], axis=0)
    frame["mean"] = mean
    deciles = np.full((len(ENVELOPE_PERCENTILES), n), np.nan)
    deciles[:, steps] = np.nanpercentile(v[:, steps], ENVELOPE_PERCENTILES, axis=0)
    for index, q in enumerate(ENVELOPE_PERCENTILES):
        frame[f"p{q}"] = deciles[index]
    return frame


# Bundled evaluation
# ------------------------------------------------------------------------------


@dataclass(frozen=True)
class EvaluationSpec:
    six_hour: HistogramSpec = HistogramSpec("6h", 10.0)
    twenty_four_hour: HistogramSpec = HistogramSpec("24h", 15.0)
    grid: float = 2.0
    percentiles: tuple[float, ...] = (75.0, 90.0)
    landfall_bin_width: float = 10.0
    regions: tuple[RegionSpec, ...] = ()


@dataclass(frozen=True, eq=False)
class MetricTable:
    metric: str
    frame: pd.DataFrame
    meta: dict[str, Any]


def evaluate_series(series: Sequence[IntensitySeries], spec: EvaluationSpec) -> list[MetricTable]:
    """Every metric of one source (observations, or all storms of one ensemble)."""
    tables = []
    for hist_spec in (spec.six_hour, spec.twenty_four_hour):
        result = dv_histogram(series, hist_spec)
        tables.append(MetricTable(f"dv-{hist_spec.window}", result.to_frame(), {"n": result.n}))
    lmi = lmi_stats(series, split_by_ri=True)
    ri_fraction = None if math.isnan(lmi.ri_fraction) else lmi.ri_fraction
    tables.append(MetricTable("lmi", lmi.table, {"ri_fraction": ri_fraction, "n": len(lmi.table)}))
    tables.append(MetricTable("lmi-density", lmi.density, {"bandwidth": "silverman"}))
    events, bands = landfall_intensities(series, spec.regions, spec.landfall_bin_width)
    tables.append(MetricTable("landfall-events", events, {"n": len(events)}))
    tables.append(MetricTable("landfall", bands, {"bands": list(LANDFALL_BANDS)}))
    for percentile in spec.percentiles:
        frame = spatial_percentiles(series, spec.grid, percentile)
        tables.append(MetricTable(f"spatial-p{percentile:g}", frame, {"grid": spec.grid, "percentile": percentile}))
    return tables
