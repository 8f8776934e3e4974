"""Fit any of the models on a prepared dataset and wrap it as a model bundle."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from dataclasses import replace
from typing import TYPE_CHECKING
from typing import Any

from django.conf import settings

from tcintensity.core.exceptions import ValidationError
from tcintensity.intensity.bundle import ModelBundle
from tcintensity.intensity.hmm import mehim_fit
from tcintensity.intensity.landdecay import land_fit
from tcintensity.intensity.landdecay import segment_residuals
from tcintensity.intensity.linear import ols_model_fit
from tcintensity.intensity.mixture import fmr_fit
from tcintensity.intensity.mixture import fmr_with_classifier
from tcintensity.intensity.reports import fit_report
from tcintensity.intensity.scenarios import scenario_report

if TYPE_CHECKING:
    from tcintensity.storms.ingest import Dataset

logger = logging.getLogger(__name__)

FIT_KINDS = ("ols", "fmr", "mehim", "land")


@dataclass(frozen=True)
class FitOptions:
    k: int = 3
    restarts: int = 10
    tol: float = 1e-8
    mnl_tol: float = 1e-8
    ridge: float = 0.0
    sigma_floor: float = 1e-4
    seed: int = 42
    workers: int = 1
    init_from_fmr: bool = True

    @classmethod
    def from_settings(cls, **overrides: Any) -> FitOptions:
        values = {
            "restarts": settings.TC_FIT_RESTARTS,
            "tol": settings.TC_FIT_TOL,
            "mnl_tol": settings.TC_MNL_TOL,
            "sigma_floor": settings.TC_SIGMA_FLOOR,
            "seed": settings.TC_SEED,
            "workers": settings.TC_WORKERS,
        }
        values.update({key: value for key, value in overrides.items() if value is not None})
        return cls(**values)


@dataclass(frozen=True, eq=False)
class FitResult:
    bundle: ModelBundle
    report: str


def fit_dataset(dataset: Dataset, kind: str, options: FitOptions) -> FitResult:
    if kind not in FIT_KINDS:
        msg = f"unknown model type {kind!r} (expected one of {', '.join(FIT_KINDS)})"
        raise ValidationError(msg)
    conventions = dataset.config.conventions()

    if kind == "land":
        land = land_fit(dataset.land_segments)
        bundle = ModelBundle(land=land, conventions=conventions)
        report = fit_report(bundle, land_check=segment_residuals(land, dataset.land_segments))
        return FitResult(bundle=bundle, report=report)

    X, y = dataset.pooled()  # noqa: N806
    covariate_set = dataset.config.covariate_set
    common = {
        "restarts": options.restarts,
        "tol": options.tol,
        "seed": options.seed,
        "sigma_floor": options.sigma_floor,
        "workers": options.workers,
        "covariate_set": covariate_set,
    }
    if kind == "ols":
        model: Any = ols_model_fit(X, y, covariate_set)
    elif kind == "fmr":
        model = fmr_fit(X, y, options.k, **common)
        model = fmr_with_classifier(model, X, y, tol=options.mnl_tol, ridge=options.ridge)
    else:
        init_model = None
        if options.init_from_fmr and options.k > 1:
            logger.info("Seeding MeHiM restarts from an FMR fit")
            init_model = fmr_fit(X, y, options.k, **common)
        model = mehim_fit(
            dataset.sequences,
            options.k,
            mnl_tol=options.mnl_tol,
            ridge=options.ridge,
            init_model=init_model,
            **common,
        )

    model = replace(model, scaler=dataset.scaler)
    bundle = ModelBundle(model=model, conventions=conventions)
    scenarios = scenario_report(model, X, y, dataset.scaler) if kind != "ols" and model.k > 1 else None
    return FitResult(bundle=bundle, report=fit_report(bundle, scenarios=scenarios))
