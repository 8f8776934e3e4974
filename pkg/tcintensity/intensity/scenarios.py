"""Environment scenarios for reading fitted classifiers and transitions.

Every covariate sits at its median, or at the 95th percentile in the
direction that favors (or works against) larger ΔV. The direction of each
covariate is the sign of its OLS coefficient on the same data.
"""

from __future__ import annotations

from typing import TYPE_CHECKING
from typing import Any

import numpy as np

from tcintensity.intensity.hmm import MehimModel
from tcintensity.intensity.hmm import initial_probs
from tcintensity.intensity.hmm import transition_probs
from tcintensity.intensity.mixture import FmrModel
from tcintensity.intensity.stats import mnl_probs
from tcintensity.intensity.stats import ols_fit

if TYPE_CHECKING:
    from tcintensity.storms.domain import Scaler

SCENARIO_NAMES = ("unfavorable", "median", "favorable")


def covariate_scenarios(
    X: np.ndarray,  # noqa: N803
    signs: np.ndarray,
    percentile: float = 95.0,
) -> dict[str, np.ndarray]:
    high = np.percentile(X, percentile, axis=0)
    low = np.percentile(X, 100.0 - percentile, axis=0)
    favorable = np.where(signs >= 0, high, low)
    unfavorable = np.where(signs >= 0, low, high)
    return {"unfavorable": unfavorable, "median": np.median(X, axis=0), "favorable": favorable}


def scenario_report(
    model: FmrModel | MehimModel,
    X: np.ndarray,  # noqa: N803
    y: np.ndarray,
    scaler: Scaler | None = None,
) -> list[dict[str, Any]]:
    """Group probabilities (FMR) or the transition matrix (MeHiM) per scenario."""
    signs = np.sign(ols_fit(X, y).coefficients)
    rows = []
    for name, x in covariate_scenarios(X, signs).items():
        row: dict[str, Any] = {
            "scenario": name,
            "covariates": dict(zip(model.covariate_names, (float(v) for v in x), strict=True)),
        }
        if scaler is not None:
            raw = scaler.unstandardize_covariates(x)
            row["raw_covariates"] = dict(zip(model.covariate_names, (float(v) for v in raw), strict=True))
        if isinstance(model, FmrModel) and model.classifier is not None:
            row["group_probabilities"] = [float(p) for p in mnl_probs(model.classifier, x)]
        elif isinstance(model, MehimModel):
            row["transition_matrix"] = [[float(p) for p in transition_probs(model, i, x)] for i in range(model.k)]
            row["initial_probabilities"] = [float(p) for p in initial_probs(model, model.initial_covariates(x))]
        rows.append(row)
    return rows
