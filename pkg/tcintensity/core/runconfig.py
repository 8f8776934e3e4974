"""Run configuration: settings defaults, then a JSON file, then command-line flags."""

from __future__ import annotations

import dataclasses
import datetime
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from django.conf import settings

from tcintensity.core.exceptions import SchemaError
from tcintensity.core.exceptions import ValidationError

logger = logging.getLogger(__name__)

PATH_FIELDS = ("tracks", "model", "land", "ensembles", "regions", "out")
RI_CORRECT_MODES = ("off", "observed")
DEFAULT_OUT = "output"


@dataclass(frozen=True)
class RunConfig:
    """Everything one command run needs; echoed verbatim into its manifest."""

    # paths
    tracks: Path | None = None
    model: Path | None = None
    land: Path | None = None
    ensembles: Path | None = None
    regions: Path | None = None
    out: Path = Path(DEFAULT_OUT)
    # ingest
    covariate_set: str = "full"
    bg_fraction: float = 0.55
    min_seq_len: int = 12
    # fitting
    k: int = 3
    restarts: int = 10
    tol: float = 1e-8
    mnl_tol: float = 1e-8
    ridge: float = 0.0
    sigma_floor: float = 1e-4
    init_from_fmr: bool = True
    seed: int = 42
    workers: int = 1
    # simulation
    n: int = 100
    stop_threshold: float = 10.0
    ri_correct: str = "off"
    # evaluation
    grid: float = 2.0
    percentiles: tuple[float, ...] = (75.0, 90.0)
    bin_6h: float = 10.0
    bin_24h: float = 15.0

    @classmethod
    def defaults(cls) -> dict[str, Any]:
        return {
            "bg_fraction": settings.TC_BG_FRACTION,
            "min_seq_len": settings.TC_MIN_OCEAN_LEN,
            "restarts": settings.TC_FIT_RESTARTS,
            "tol": settings.TC_FIT_TOL,
            "mnl_tol": settings.TC_MNL_TOL,
            "sigma_floor": settings.TC_SIGMA_FLOOR,
            "seed": settings.TC_SEED,
            "workers": settings.TC_WORKERS,
            "n": settings.TC_N_REALIZATIONS,
            "stop_threshold": settings.TC_STOP_THRESHOLD,
        }

    @classmethod
    def build(cls, config_file: Path | str | None = None, **flags: Any) -> RunConfig:
        """Merge settings, the JSON file and the flags that were given (non-None)."""
        values = cls.defaults()
        if config_file is not None:
            values.update(read_config_file(Path(config_file)))
        values.update({key: value for key, value in flags.items() if value is not None})
        unknown = sorted(set(values) - {f.name for f in dataclasses.fields(cls)})
        if unknown:
            msg = f"unknown configuration key(s): {', '.join(unknown)}"
            raise ValidationError(msg)
        for name in PATH_FIELDS:
            if values.get(name) is not None:
                values[name] = Path(values[name])
        if "percentiles" in values:
            values["percentiles"] = tuple(float(p) for p in values["percentiles"])
        return cls(**values)

    def __post_init__(self) -> None:
        parse_ri_correct(self.ri_correct)
        if self.n < 1:
            msg = f"n must be >= 1, got {self.n}"
            raise ValidationError(msg)
        if self.k < 1:
            msg = f"k must be >= 1, got {self.k}"
            raise ValidationError(msg)
        if not self.grid > 0:
            msg = f"grid must be > 0, got {self.grid}"
            raise ValidationError(msg)

    def require(self, *names: str) -> None:
        """Every named input path is set and exists."""
        for name in names:
            path = getattr(self, name)
            if path is None:
                msg = f"--{name} is required"
                raise ValidationError(msg)
            if not path.exists():
                msg = f"{name} not found: {path}"
                raise ValidationError(msg)

    def echo(self) -> dict[str, Any]:
        document = dataclasses.asdict(self)
        for name in PATH_FIELDS:
            if document[name] is not None:
                document[name] = str(document[name])
        document["percentiles"] = list(self.percentiles)
        return document


def read_config_file(path: Path) -> dict[str, Any]:
    if not path.exists():
        msg = f"Config file not found: {path}"
        raise ValidationError(msg)
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        msg = f"{path}: invalid JSON ({e})"
        raise SchemaError(msg) from e
    if not isinstance(document, dict):
        msg = f"{path}: config must be a JSON object"
        raise SchemaError(msg)
    logger.info("Read configuration from %s", path)
    return document


def parse_ri_correct(value: str) -> str | tuple[datetime.datetime, ...]:
    """``off``, ``observed`` or a comma-separated list of ISO times (UTC when naive)."""
    if value in RI_CORRECT_MODES:
        return value
    times = []
    for raw in value.split(","):
        try:
            time = datetime.datetime.fromisoformat(raw.strip())
        except ValueError:
            msg = f"--ri-correct must be 'off', 'observed' or ISO times, got {raw.strip()!r}"
            raise ValidationError(msg) from None
        times.append(time if time.tzinfo is not None else time.replace(tzinfo=datetime.timezone.utc))
    return tuple(times)
