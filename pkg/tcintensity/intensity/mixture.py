"""Finite mixture regression of ΔV fitted by EM, plus the group classifier.

Components are canonically ordered by sigma ascending, so group 1 is the
static regime and group k the extreme one. The classifier is a multinomial
logit on the covariates, fitted on the hard optimal assignments, and is what
drives group membership in simulation.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from dataclasses import field
from dataclasses import replace
from typing import TYPE_CHECKING
from typing import Any
from typing import ClassVar

import numpy as np
from scipy import special
from scipy import stats as sps

from tcintensity.core.exceptions import StateCollapseError
from tcintensity.core.exceptions import ValidationError
from tcintensity.intensity.linear import NO_STATE
from tcintensity.intensity.stats import COLLAPSE_RETRIES
from tcintensity.intensity.stats import LinearFit
from tcintensity.intensity.stats import MnlFit
from tcintensity.intensity.stats import mnl_fit
from tcintensity.intensity.stats import mnl_probs
from tcintensity.intensity.stats import ols_fit
from tcintensity.intensity.stats import permute_categories
from tcintensity.intensity.stats import restart_streams
from tcintensity.intensity.stats import sample_categorical
from tcintensity.storms.domain import covariate_names_for

if TYPE_CHECKING:
    from tcintensity.storms.domain import Scaler

logger = logging.getLogger(__name__)

FMR_MAX_ITER = 1000
MIN_OBS_PER_COMPONENT = 50
JITTER = 0.2


@dataclass(frozen=True, eq=False)
class FmrModel:
    weights: np.ndarray
    components: tuple[LinearFit, ...]
    classifier: MnlFit | None = None
    scaler: Scaler | None = None
    covariate_set: str = "full"
    metadata: dict[str, Any] = field(default_factory=dict)
    trace: tuple[float, ...] = ()

    model_type: ClassVar[str] = "fmr"

    @property
    def k(self) -> int:
        return len(self.components)

    @property
    def sigmas(self) -> np.ndarray:
        return np.array([c.sigma for c in self.components])

    @property
    def covariate_names(self) -> tuple[str, ...]:
        return covariate_names_for(self.covariate_set)

    def means(self, X: np.ndarray) -> np.ndarray:  # noqa: N803
        """Component means, one column per component."""
        return np.stack([c.mean(X) for c in self.components], axis=-1)

    def log_joint(self, X: np.ndarray, y: np.ndarray) -> np.ndarray:  # noqa: N803
        """``log w_r + log N(y; mean_r, sigma_r)`` per observation and component."""
        with np.errstate(divide="ignore"):
            return np.log(self.weights) + sps.norm.logpdf(np.asarray(y)[..., None], self.means(X), self.sigmas)

    def log_likelihood(self, X: np.ndarray, y: np.ndarray) -> float:  # noqa: N803
        return float(np.sum(special.logsumexp(self.log_joint(X, y), axis=-1)))

    def draw_initial_state(self, x_init: np.ndarray, rng: np.random.Generator) -> int:
        return NO_STATE

    def draw_transition(self, state: int, x: np.ndarray, rng: np.random.Generator) -> int:
        return NO_STATE

    def draw_change(self, state: int, x: np.ndarray, rng: np.random.Generator) -> float:
        dv, _ = fmr_sample_dv(self, x, rng)
        return dv


def _quantile_split(y: np.ndarray, k: int) -> np.ndarray:
    """One-hot responsibilities from k equal-count bins of |y| (small to large)."""
    ranks = np.argsort(np.argsort(np.abs(y), kind="stable"), kind="stable")
    labels = np.minimum(ranks * k // len(y), k - 1)
    return np.eye(k)[labels]


def initial_responsibilities(
    y: np.ndarray,
    k: int,
    rng: np.random.Generator,
    seed_responsibilities: np.ndarray | None = None,
) -> np.ndarray:
    """Quantile split of |y| (or the given responsibilities) plus Dirichlet jitter."""
    base = _quantile_split(y, k) if seed_responsibilities is None else seed_responsibilities
    return (1.0 - JITTER) * base + JITTER * rng.dirichlet(np.ones(k), size=len(y))


def _m_step(
    X: np.ndarray,  # noqa: N803
    y: np.ndarray,
    responsibilities: np.ndarray,
    sigma_floor: float,
) -> tuple[np.ndarray, tuple[LinearFit, ...]]:
    components = []
    for r in range(responsibilities.shape[1]):
        mass = responsibilities[:, r].sum()
        if mass < X.shape[1] + 1:
            msg = f"component {r + 1} lost its observations (weight {mass:.3g})"
            raise StateCollapseError(msg)
        fit = ols_fit(X, y, weights=responsibilities[:, r])
        if fit.sigma < sigma_floor:
            msg = f"component {r + 1} collapsed: sigma {fit.sigma:.3g} below floor {sigma_floor}"
            raise StateCollapseError(msg)
        components.append(fit)
    return responsibilities.mean(axis=0), tuple(components)


def _em_run(  # noqa: PLR0913
    X: np.ndarray,  # noqa: N803
    y: np.ndarray,
    k: int,
    rng: np.random.Generator,
    *,
    tol: float,
    max_iter: int,
    sigma_floor: float,
    seed_responsibilities: np.ndarray | None,
) -> FmrModel:
    weights, components = _m_step(X, y, initial_responsibilities(y, k, rng, seed_responsibilities), sigma_floor)
    model = FmrModel(weights=weights, components=components)
    log_joint = model.log_joint(X, y)
    previous = float(np.sum(special.logsumexp(log_joint, axis=1)))
    trace = [previous]
    converged = False
    for _ in range(max_iter):
        responsibilities = special.softmax(log_joint, axis=1)
        weights, components = _m_step(X, y, responsibilities, sigma_floor)
        model = FmrModel(weights=weights, components=components)
        log_joint = model.log_joint(X, y)
        current = float(np.sum(special.logsumexp(log_joint, axis=1)))
        trace.append(current)
        if current - previous < tol * abs(previous):
            converged = True
            break
        previous = current
    return replace(model, trace=tuple(trace), metadata={"iterations": len(trace) - 1, "converged": converged})


def canonicalize_components(model: FmrModel) -> FmrModel:
    """Reorder components by sigma ascending (stable)."""
    order = np.argsort(model.sigmas, kind="stable")
    classifier = None if model.classifier is None else permute_categories(model.classifier, order)
    return replace(
        model,
        weights=model.weights[order],
        components=tuple(model.components[r] for r in order),
        classifier=classifier,
    )


def fmr_fit(  # noqa: PLR0913
    X: np.ndarray,  # noqa: N803
    y: np.ndarray,
    k: int = 3,
    *,
    restarts: int = 10,
    tol: float = 1e-8,
    seed: int = 0,
    max_iter: int = FMR_MAX_ITER,
    sigma_floor: float = 1e-4,
    workers: int = 1,
    covariate_set: str = "full",
) -> FmrModel:
    """Best of ``restarts`` EM runs by final log-likelihood.

    Each restart draws its jitter from its own stream spawned from ``seed``,
    so results do not depend on ``workers``. A restart that collapses is
    re-run from up to ``COLLAPSE_RETRIES`` fresh child streams. ``k == 1``
    is the OLS fit.
    """
    X, y = np.asarray(X, dtype=float), np.asarray(y, dtype=float)  # noqa: N806
    if k == 1:
        fit = ols_fit(X, y, names=covariate_names_for(covariate_set))
        model = FmrModel(weights=np.ones(1), components=(fit,), covariate_set=covariate_set)
        log_likelihood = model.log_likelihood(X, y)
        return replace(
            model,
            trace=(log_likelihood,),
            metadata={"n": len(y), "log_likelihood": log_likelihood, "seed": seed, "iterations": 0},
        )
    if k < 1:
        msg = f"k must be >= 1, got {k}"
        raise ValidationError(msg)
    if len(y) < MIN_OBS_PER_COMPONENT * k:
        msg = f"fmr_fit needs at least {MIN_OBS_PER_COMPONENT * k} observations for k={k}, got {len(y)}"
        raise ValidationError(msg)

    streams = np.random.SeedSequence(seed).spawn(restarts)

    def run(index: int) -> tuple[FmrModel | None, int]:
        for attempt, stream in enumerate(restart_streams(streams[index])):
            try:
                model = _em_run(
                    X,
                    y,
                    k,
                    np.random.default_rng(stream),
                    tol=tol,
                    max_iter=max_iter,
                    sigma_floor=sigma_floor,
                    seed_responsibilities=None,
                )
            except StateCollapseError as e:
                logger.info("FMR restart %d (attempt %d) collapsed: %s", index + 1, attempt + 1, e)
            else:
                return model, attempt
        return None, COLLAPSE_RETRIES + 1

    with ThreadPoolExecutor(max_workers=max(workers, 1)) as pool:
        runs = list(pool.map(run, range(restarts)))
    finished = [(i, m) for i, (m, _) in enumerate(runs) if m is not None]
    collapses = sum(n for _, n in runs)
    if not finished:
        msg = f"all {restarts} FMR restart(s) collapsed after {COLLAPSE_RETRIES} retries each"
        raise StateCollapseError(msg)
    best_index, best = max(finished, key=lambda item: (item[1].trace[-1], -item[0]))
    log_likelihood = best.trace[-1]
    logger.info(
        "FMR k=%d: best restart %d of %d (%d collapsed), log-likelihood=%.3f after %d iteration(s)",
        k,
        best_index + 1,
        restarts,
        restarts - len(finished),
        log_likelihood,
        best.metadata["iterations"],
    )
    return canonicalize_components(
        replace(
            best,
            covariate_set=covariate_set,
            metadata={
                **best.metadata,
                "n": len(y),
                "log_likelihood": log_likelihood,
                "seed": seed,
                "restarts": restarts,
                "best_restart": best_index + 1,
                "collapsed_restarts": restarts - len(finished),
                "collapsed_attempts": collapses,
            },
        ),
    )


def fmr_posteriors(model: FmrModel, x: np.ndarray, y: Any) -> np.ndarray:
    """Responsibilities ``w_r N(y; mean_r(x), sigma_r)``, normalized per observation."""
    return special.softmax(model.log_joint(x, y), axis=-1)


def fmr_optimal_assignment(model: FmrModel, X: np.ndarray, y: np.ndarray) -> np.ndarray:  # noqa: N803
    """0-based component labels; ties go to the lower index."""
    return np.argmax(fmr_posteriors(model, X, y), axis=-1)


def fmr_classifier_fit(
    X: np.ndarray,  # noqa: N803
    labels: np.ndarray,
    k: int,
    *,
    tol: float = 1e-8,
    ridge: float = 0.0,
) -> MnlFit:
    """Multinomial logit on hard labels (one-hot weights), baseline group k."""
    labels = np.asarray(labels, dtype=int)
    if np.any((labels < 0) | (labels >= k)):
        msg = f"labels must lie in 0..{k - 1}"
        raise ValidationError(msg)
    counts = np.bincount(labels, minlength=k)
    if np.any(counts == 0):
        logger.warning("Group(s) %s have no assigned observations", [int(r) + 1 for r in np.flatnonzero(counts == 0)])
    return mnl_fit(X, np.eye(k)[labels], baseline=k - 1, tol=tol, ridge=ridge)


def fmr_with_classifier(
    model: FmrModel,
    X: np.ndarray,  # noqa: N803
    y: np.ndarray,
    *,
    tol: float = 1e-8,
    ridge: float = 0.0,
) -> FmrModel:
    labels = fmr_optimal_assignment(model, X, y)
    if model.k == 1:
        classifier = MnlFit.zeros(1, X.shape[1])
    else:
        classifier = fmr_classifier_fit(X, labels, model.k, tol=tol, ridge=ridge)
    shares = np.bincount(labels, minlength=model.k) / len(labels)
    return replace(
        model,
        classifier=classifier,
        metadata={**model.metadata, "assignment_shares": [float(s) for s in shares]},
    )


def fmr_sample_dv(model: FmrModel, x: np.ndarray, rng: np.random.Generator) -> tuple[float, int]:
    """Draw a group from the classifier, then ΔV from that component (standardized)."""
    if model.classifier is None:
        msg = "FMR model has no classifier; fit it before sampling"
        raise ValidationError(msg)
    group = sample_categorical(mnl_probs(model.classifier, x), rng)
    component = model.components[group]
    return float(component.mean(x) + component.sigma * rng.standard_normal()), group
