"""Single-regime linear model of standardized ΔV."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from dataclasses import field
from typing import TYPE_CHECKING
from typing import Any
from typing import ClassVar

import numpy as np
from scipy import stats as sps

from tcintensity.intensity.stats import LinearFit
from tcintensity.intensity.stats import ols_fit
from tcintensity.storms.domain import covariate_names_for

if TYPE_CHECKING:
    from tcintensity.storms.domain import Scaler

logger = logging.getLogger(__name__)

# State recorded for models without hidden states.
NO_STATE = -1


@dataclass(frozen=True, eq=False)
class OlsModel:
    fit: LinearFit
    scaler: Scaler | None = None
    covariate_set: str = "full"
    metadata: dict[str, Any] = field(default_factory=dict)

    model_type: ClassVar[str] = "ols"
    k: ClassVar[int] = 1

    @property
    def covariate_names(self) -> tuple[str, ...]:
        return covariate_names_for(self.covariate_set)

    def log_likelihood(self, X: np.ndarray, y: np.ndarray) -> float:  # noqa: N803
        return float(np.sum(sps.norm.logpdf(y, self.fit.mean(X), self.fit.sigma)))

    def draw_initial_state(self, x_init: np.ndarray, rng: np.random.Generator) -> int:
        return NO_STATE

    def draw_transition(self, state: int, x: np.ndarray, rng: np.random.Generator) -> int:
        return NO_STATE

    def draw_change(self, state: int, x: np.ndarray, rng: np.random.Generator) -> float:
        return ols_sample_dv(self, x, rng)


def ols_model_fit(
    X: np.ndarray,  # noqa: N803
    y: np.ndarray,
    covariate_set: str = "full",
) -> OlsModel:
    fit = ols_fit(X, y, names=covariate_names_for(covariate_set))
    log_likelihood = OlsModel(fit=fit).log_likelihood(X, y)
    logger.info("OLS fit on %d observations: sigma=%.4f, log-likelihood=%.3f", len(y), fit.sigma, log_likelihood)
    return OlsModel(
        fit=fit,
        covariate_set=covariate_set,
        metadata={"n": len(y), "log_likelihood": log_likelihood},
    )


def ols_sample_dv(model: OlsModel, x: np.ndarray, rng: np.random.Generator) -> float:
    """One standardized ΔV from ``N(alpha + x beta, sigma)``."""
    return float(model.fit.mean(x) + model.fit.sigma * rng.standard_normal())
