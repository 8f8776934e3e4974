"""Over-land intensity decay toward a background wind."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING
from typing import Any

import numpy as np

from tcintensity.core.exceptions import FitError
from tcintensity.core.exceptions import ValidationError
from tcintensity.intensity.stats import decay_curve
from tcintensity.intensity.stats import nls_exp_decay_fit

if TYPE_CHECKING:
    from collections.abc import Sequence

    from tcintensity.storms.domain import LandSegment

logger = logging.getLogger(__name__)

LAND_FIT_INIT = (0.05, 20.0)


@dataclass(frozen=True)
class LandModel:
    """``v(t) = v_b + (reduction * v0 - v_b) exp(-alpha t)``, t in 6-h steps."""

    alpha: float
    v_b: float
    n_segments: int = 0
    reduction: float = 1.0
    rmse: float = float("nan")

    def __post_init__(self) -> None:
        if not self.alpha > 0:
            msg = f"land decay rate alpha must be > 0, got {self.alpha}"
            raise ValidationError(msg)
        if self.v_b < 0:
            msg = f"land background wind v_b must be >= 0, got {self.v_b}"
            raise ValidationError(msg)

    def to_dict(self) -> dict[str, Any]:
        return {
            "alpha": float(self.alpha),
            "v_b": float(self.v_b),
            "reduction": float(self.reduction),
            "n_segments": self.n_segments,
            "rmse": None if np.isnan(self.rmse) else float(self.rmse),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> LandModel:
        rmse = data.get("rmse")
        return cls(
            alpha=float(data["alpha"]),
            v_b=float(data["v_b"]),
            n_segments=int(data.get("n_segments", 0)),
            reduction=float(data.get("reduction", 1.0)),
            rmse=float("nan") if rmse is None else float(rmse),
        )


def land_fit(segments: Sequence[LandSegment], reduction: float = 1.0) -> LandModel:
    if not segments:
        msg = "land_fit needs at least one land segment"
        raise FitError(msg)
    fit = nls_exp_decay_fit(segments, init=LAND_FIT_INIT)
    logger.info(
        "Land decay fit on %d segment(s): alpha=%.6g per 6 h, v_b=%.6g kt, rmse=%.4g kt",
        len(segments),
        fit.alpha,
        fit.v_b,
        fit.rmse,
    )
    return LandModel(alpha=fit.alpha, v_b=fit.v_b, n_segments=len(segments), reduction=reduction, rmse=fit.rmse)


def land_apply(model: LandModel, v0: Any, t: Any) -> Any:
    """Intensity ``t`` steps after land entry at ``v0``.

    Entries at or below the background wind keep their intensity.
    """
    v0 = np.asarray(v0, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        msg = "land_apply requires t >= 0"
        raise ValidationError(msg)
    decayed = decay_curve(model.alpha, model.v_b, model.reduction * v0, t)
    result = np.where(v0 <= model.v_b, v0 * np.ones_like(t), decayed)
    return float(result) if np.ndim(result) == 0 else result


def segment_residuals(model: LandModel, segments: Sequence[LandSegment]) -> list[dict[str, Any]]:
    """Observed against fitted over-land series, per segment."""
    rows = []
    for segment in segments:
        fitted = land_apply(model, segment.v0, np.arange(len(segment)))
        errors = np.asarray(fitted) - segment.intensities
        rows.append(
            {
                "storm_id": segment.storm_id,
                "start_index": segment.start_index,
                "v0": float(segment.v0),
                "observed": [float(v) for v in segment.intensities],
                "fitted": [float(v) for v in np.atleast_1d(fitted)],
                "rmse": float(np.sqrt(np.mean(errors**2))),
            },
        )
    return rows
