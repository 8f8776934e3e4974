"""Estimation primitives with no model-specific policy.

Ordinary (and weighted) least squares, weighted multinomial logistic
regression and nonlinear least squares for the exponential decay curve.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING
from typing import Any

import numpy as np
from scipy import linalg
from scipy import optimize
from scipy import special

from tcintensity.core.exceptions import ConvergenceError
from tcintensity.core.exceptions import FitError
from tcintensity.core.exceptions import ValidationError

if TYPE_CHECKING:
    from collections.abc import Sequence

    from tcintensity.storms.domain import LandSegment

logger = logging.getLogger(__name__)

RANK_TOL = 1e-10
MNL_TOL = 1e-8
MNL_GRAD_TOL = 1e-6
MNL_MAX_ITER = 100
MNL_RIDGE_FALLBACK = 1e-6
MNL_SEPARATION_NORM = 50.0
NLS_MAX_ITER = 500
# Fresh jitter streams an EM restart may draw after a state collapse.
COLLAPSE_RETRIES = 3


# Linear regression
# ------------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LinearFit:
    """``y ~ N(intercept + x . coefficients, sigma)``."""

    intercept: float
    coefficients: np.ndarray
    sigma: float

    @property
    def p(self) -> int:
        return len(self.coefficients)

    def mean(self, x: np.ndarray) -> Any:
        return self.intercept + np.asarray(x) @ self.coefficients

    def to_dict(self) -> dict[str, Any]:
        return {
            "intercept": float(self.intercept),
            "coefficients": [float(c) for c in self.coefficients],
            "sigma": float(self.sigma),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> LinearFit:
        return cls(
            intercept=float(data["intercept"]),
            coefficients=np.asarray(data["coefficients"], dtype=float),
            sigma=float(data["sigma"]),
        )


def ols_fit(
    X: np.ndarray,  # noqa: N803
    y: np.ndarray,
    weights: np.ndarray | None = None,
    names: Sequence[str] | None = None,
) -> LinearFit:
    """Least squares through a QR decomposition of the design with intercept.

    Unweighted: sigma uses the ``n - p - 1`` denominator. Weighted (the EM
    M-steps): sigma is the weighted maximum-likelihood value
    ``sqrt(sum w r^2 / sum w)``.
    """
    X, y = np.asarray(X, dtype=float), np.asarray(y, dtype=float)  # noqa: N806
    n, p = X.shape
    design = np.column_stack([np.ones(n), X])
    if names is None or len(names) != p:
        names = [f"x{j + 1}" for j in range(p)]
    labels = ["intercept", *names]
    if weights is None:
        if n <= p + 1:
            msg = f"ols_fit needs more than {p + 1} observations, got {n}"
            raise FitError(msg)
        scale = np.ones(n)
    else:
        weights = np.asarray(weights, dtype=float)
        if weights.sum() <= 0:
            msg = "ols_fit weights sum to zero"
            raise FitError(msg)
        scale = np.sqrt(weights)

    q, r = np.linalg.qr(design * scale[:, None])
    diag = np.abs(np.diag(r))
    deficient = [labels[j] for j in np.flatnonzero(diag <= RANK_TOL * max(diag.max(), 1.0))]
    if deficient:
        msg = f"design matrix is rank deficient; collinear column(s): {', '.join(deficient)}"
        raise FitError(msg)
    beta = linalg.solve_triangular(r, q.T @ (y * scale))
    residuals = y - design @ beta
    if weights is None:
        sigma = float(np.sqrt(residuals @ residuals / (n - p - 1)))
    else:
        sigma = float(np.sqrt(weights @ residuals**2 / weights.sum()))
    return LinearFit(intercept=float(beta[0]), coefficients=beta[1:], sigma=sigma)


def ols_predict(fit: LinearFit, x: np.ndarray) -> Any:
    return fit.mean(x)


# Multinomial logistic regression
# ------------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MnlFit:
    """Per-category intercepts and coefficients; the baseline row is all zeros."""

    intercepts: np.ndarray
    coefficients: np.ndarray
    ridge: float = 0.0
    log_likelihood: float = float("nan")
    iterations: int = 0
    converged: bool = True

    @property
    def k(self) -> int:
        return len(self.intercepts)

    @property
    def p(self) -> int:
        return self.coefficients.shape[1]

    def logits(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x) @ self.coefficients.T + self.intercepts

    @classmethod
    def zeros(cls, k: int, p: int) -> MnlFit:
        return cls(intercepts=np.zeros(k), coefficients=np.zeros((k, p)))

    def to_dict(self) -> dict[str, Any]:
        return {
            "rows": [
                {"intercept": float(theta), "coefficients": [float(g) for g in gamma]}
                for theta, gamma in zip(self.intercepts, self.coefficients, strict=True)
            ],
            "ridge": float(self.ridge),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> MnlFit:
        rows = data["rows"]
        return cls(
            intercepts=np.array([row["intercept"] for row in rows], dtype=float),
            coefficients=np.array([row["coefficients"] for row in rows], dtype=float).reshape(len(rows), -1),
            ridge=float(data.get("ridge", 0.0)),
        )


def mnl_probs(fit: MnlFit, x: np.ndarray) -> np.ndarray:
    """Softmax of ``theta_r + x . gamma_r`` (max-subtracted); rows are simplices."""
    return special.softmax(fit.logits(x), axis=-1)


def mnl_log_probs(fit: MnlFit, x: np.ndarray) -> np.ndarray:
    return special.log_softmax(fit.logits(x), axis=-1)


def permute_categories(fit: MnlFit, order: Sequence[int]) -> MnlFit:
    """Reorder categories (new r = old ``order[r]``) and re-zero the last one.

    Subtracting the new baseline's parameters from every category leaves all
    probabilities unchanged.
    """
    order = list(order)
    intercepts = fit.intercepts[order] - fit.intercepts[order[-1]]
    coefficients = fit.coefficients[order] - fit.coefficients[order[-1]]
    return MnlFit(
        intercepts=intercepts,
        coefficients=coefficients,
        ridge=fit.ridge,
        log_likelihood=fit.log_likelihood,
        iterations=fit.iterations,
        converged=fit.converged,
    )


def _mnl_objective(params: np.ndarray, design: np.ndarray, weights: np.ndarray, ridge: float) -> float:
    logits = np.column_stack([design @ params.T, np.zeros(len(design))])
    return float(np.sum(weights * special.log_softmax(logits, axis=1)) - 0.5 * ridge * np.sum(params**2))


def mnl_gradient(params: np.ndarray, design: np.ndarray, weights: np.ndarray, ridge: float = 0.0) -> np.ndarray:
    """Gradient of the weighted log-likelihood w.r.t. the non-baseline rows."""
    logits = np.column_stack([design @ params.T, np.zeros(len(design))])
    probs = special.softmax(logits, axis=1)
    totals = weights.sum(axis=1)
    return (weights[:, :-1] - totals[:, None] * probs[:, :-1]).T @ design - ridge * params


def _mnl_hessian(params: np.ndarray, design: np.ndarray, weights: np.ndarray, ridge: float) -> np.ndarray:
    m, q = params.shape
    logits = np.column_stack([design @ params.T, np.zeros(len(design))])
    probs = special.softmax(logits, axis=1)
    totals = weights.sum(axis=1)
    hessian = np.empty((m * q, m * q))
    for a in range(m):
        for b in range(a, m):
            curvature = totals * probs[:, a] * ((a == b) - probs[:, b])
            block = -(design * curvature[:, None]).T @ design
            hessian[a * q : (a + 1) * q, b * q : (b + 1) * q] = block
            hessian[b * q : (b + 1) * q, a * q : (a + 1) * q] = block.T
    return hessian - ridge * np.eye(m * q)


def mnl_fit(  # noqa: C901, PLR0913
    X: np.ndarray,  # noqa: N803
    weights: np.ndarray,
    baseline: int | None = None,
    *,
    init: MnlFit | None = None,
    tol: float = MNL_TOL,
    grad_tol: float = MNL_GRAD_TOL,
    max_iter: int = MNL_MAX_ITER,
    ridge: float = 0.0,
) -> MnlFit:
    """Maximize ``sum_i sum_r w_ir log pi_r(x_i)`` by damped Newton steps.

    ``weights`` may be soft (responsibilities, expected transition counts) or
    one-hot. ``baseline`` defaults to the last category. When the Hessian
    turns singular or the parameters run away (separation) a ridge penalty of
    ``MNL_RIDGE_FALLBACK`` is switched on and recorded on the fit.
    """
    X, weights = np.asarray(X, dtype=float), np.asarray(weights, dtype=float)  # noqa: N806
    n, p = X.shape
    k = weights.shape[1]
    baseline = k - 1 if baseline is None else baseline
    if weights.shape[0] != n:
        msg = f"weights have {weights.shape[0]} rows for {n} observations"
        raise ValidationError(msg)
    if np.any(weights < 0):
        msg = "mnl_fit weights must be non-negative"
        raise ValidationError(msg)
    if n < k * (p + 1):
        msg = f"mnl_fit needs at least {k * (p + 1)} observations for {k} categories, got {n}"
        raise FitError(msg)

    order = [r for r in range(k) if r != baseline] + [baseline]
    weights = weights[:, order]
    design = np.column_stack([np.ones(n), X])
    if init is not None:
        start = permute_categories(init, order)
        params = np.column_stack([start.intercepts[:-1], start.coefficients[:-1]])
    else:
        params = np.zeros((k - 1, p + 1))

    objective = _mnl_objective(params, design, weights, ridge)
    converged, iteration = False, 0
    for iteration in range(1, max_iter + 1):  # noqa: B007
        gradient = mnl_gradient(params, design, weights, ridge)
        if np.linalg.norm(gradient) < grad_tol:
            converged = True
            break
        try:
            factor = linalg.cho_factor(-_mnl_hessian(params, design, weights, ridge))
        except linalg.LinAlgError:
            if ridge >= MNL_RIDGE_FALLBACK:
                msg = "mnl_fit Hessian is singular even with ridge penalty"
                raise FitError(msg) from None
            logger.warning("mnl_fit: singular Hessian (separation); switching on ridge %g", MNL_RIDGE_FALLBACK)
            ridge = MNL_RIDGE_FALLBACK
            objective = _mnl_objective(params, design, weights, ridge)
            continue
        direction = linalg.cho_solve(factor, gradient.ravel()).reshape(params.shape)

        step, candidate_objective = 1.0, -np.inf
        for _ in range(40):
            candidate = params + step * direction
            candidate_objective = _mnl_objective(candidate, design, weights, ridge)
            if candidate_objective >= objective - 1e-12 * abs(objective):
                break
            step /= 2
        else:
            converged = True
            break

        change = candidate_objective - objective
        params, objective = candidate, candidate_objective
        if ridge < MNL_RIDGE_FALLBACK and np.abs(params).max() > MNL_SEPARATION_NORM:
            logger.warning(
                "mnl_fit: coefficients exceed %g (quasi-complete separation); switching on ridge %g",
                MNL_SEPARATION_NORM,
                MNL_RIDGE_FALLBACK,
            )
            ridge = MNL_RIDGE_FALLBACK
            objective = _mnl_objective(params, design, weights, ridge)
            continue
        if abs(change) < tol:
            converged = True
            break

    if not converged:
        logger.warning("mnl_fit did not converge in %d iterations", max_iter)
    full = np.vstack([params, np.zeros(p + 1)])
    rows = np.empty_like(full)
    rows[order] = full
    return MnlFit(
        intercepts=rows[:, 0].copy(),
        coefficients=rows[:, 1:].copy(),
        ridge=ridge,
        log_likelihood=objective,
        iterations=iteration,
        converged=converged,
    )


def sample_categorical(probs: np.ndarray, rng: np.random.Generator) -> int:
    """Inverse-CDF draw of a category index from one simplex."""
    cumulative = np.cumsum(probs)
    index = int(np.searchsorted(cumulative, rng.random() * cumulative[-1], side="right"))
    return min(index, len(probs) - 1)


# Nonlinear least squares for exponential decay
# ------------------------------------------------------------------------------


@dataclass(frozen=True)
class DecayFit:
    alpha: float
    v_b: float
    rmse: float
    n_points: int
    evaluations: int


def _stack_segments(segments: Sequence[LandSegment]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    steps, starts, observed = [], [], []
    for segment in segments:
        if len(segment) < 2:  # noqa: PLR2004
            msg = f"land segment of storm {segment.storm_id} at {segment.start_index} is shorter than 2"
            raise ValidationError(msg)
        steps.append(np.arange(len(segment), dtype=float))
        starts.append(np.full(len(segment), segment.v0))
        observed.append(np.asarray(segment.intensities, dtype=float))
    return np.concatenate(steps), np.concatenate(starts), np.concatenate(observed)


def decay_curve(alpha: float, v_b: float, v0: Any, t: Any) -> Any:
    return v_b + (v0 - v_b) * np.exp(-alpha * np.asarray(t))


def nls_exp_decay_fit(
    segments: Sequence[LandSegment],
    init: tuple[float, float] = (0.05, 20.0),
    max_iter: int = NLS_MAX_ITER,
) -> DecayFit:
    """Fit ``v_b + (v0 - v_b) exp(-alpha t)`` to every land segment at once.

    Trust-region Levenberg-Marquardt style solver with ``alpha > 0`` and
    ``v_b >= 0`` held by bounds.
    """
    if not segments:
        msg = "no land segments to fit"
        raise FitError(msg)
    t, v0, observed = _stack_segments(segments)
    x0 = np.array([max(init[0], 1e-6), max(init[1], 0.0)])

    if np.allclose(observed, v0):
        logger.warning("Land segments show no decay; alpha is unidentifiable, returning the initial guess")
        return DecayFit(alpha=float(x0[0]), v_b=float(x0[1]), rmse=0.0, n_points=len(t), evaluations=0)

    def residuals(params: np.ndarray) -> np.ndarray:
        return decay_curve(params[0], params[1], v0, t) - observed

    def jacobian(params: np.ndarray) -> np.ndarray:
        decay = np.exp(-params[0] * t)
        return np.column_stack([-(v0 - params[1]) * t * decay, 1.0 - decay])

    result = optimize.least_squares(
        residuals,
        x0,
        jac=jacobian,
        bounds=([1e-12, 0.0], [np.inf, np.inf]),
        method="trf",
        x_scale="jac",
        xtol=1e-10,
        ftol=1e-12,
        gtol=1e-12,
        max_nfev=max_iter,
    )
    alpha, v_b = (float(x) for x in result.x)
    if result.status == 0:
        msg = f"land decay fit did not converge in {max_iter} evaluations (best alpha={alpha:.6g}, v_b={v_b:.6g})"
        raise ConvergenceError(msg, best=(alpha, v_b))
    rmse = float(np.sqrt(np.mean(result.fun**2)))
    return DecayFit(alpha=alpha, v_b=v_b, rmse=rmse, n_points=len(t), evaluations=int(result.nfev))


# EM restarts
# ------------------------------------------------------------------------------


def restart_streams(stream: np.random.SeedSequence) -> list[np.random.SeedSequence]:
    """``stream`` followed by the children a collapsed restart is re-run from."""
    return [stream, *stream.spawn(COLLAPSE_RETRIES)]
