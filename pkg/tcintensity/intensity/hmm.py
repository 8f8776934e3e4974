"""Dependent hidden Markov model of standardized ΔV.

Each hidden state has its own Gaussian linear regression of ΔV on the
covariates. Transitions out of every state are a multinomial logit on the
covariates of the destination time, and the first state of a sequence is a
multinomial logit on MPI, SHR and RH at its first step.

Forward-backward runs in log space over all sequences at once: sequences
are padded to a common length and padded steps carry an identity transition
and a zero log-emission, which leaves every likelihood unchanged.
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
from tcintensity.intensity.mixture import fmr_posteriors
from tcintensity.intensity.mixture import initial_responsibilities
from tcintensity.intensity.stats import COLLAPSE_RETRIES
from tcintensity.intensity.stats import LinearFit
from tcintensity.intensity.stats import MnlFit
from tcintensity.intensity.stats import mnl_fit
from tcintensity.intensity.stats import mnl_log_probs
from tcintensity.intensity.stats import mnl_probs
from tcintensity.intensity.stats import ols_fit
from tcintensity.intensity.stats import permute_categories
from tcintensity.intensity.stats import restart_streams
from tcintensity.intensity.stats import sample_categorical
from tcintensity.storms.domain import INITIAL_COVARIATE_NAMES
from tcintensity.storms.domain import covariate_names_for

if TYPE_CHECKING:
    from collections.abc import Sequence

    from tcintensity.intensity.mixture import FmrModel
    from tcintensity.storms.domain import OceanSequence
    from tcintensity.storms.domain import Scaler

logger = logging.getLogger(__name__)

HMM_MAX_ITER = 500
MIN_OBS_PER_STATE = 100
GEM_SLACK = 1e-9
MAX_HALVINGS = 10


def default_initial_columns(covariate_set: str) -> tuple[int, ...]:
    names = covariate_names_for(covariate_set)
    return tuple(names.index(name) for name in INITIAL_COVARIATE_NAMES)


@dataclass(frozen=True, eq=False)
class MehimModel:
    emissions: tuple[LinearFit, ...]
    transitions: tuple[MnlFit, ...]
    initial: MnlFit
    scaler: Scaler | None = None
    covariate_set: str = "full"
    initial_columns: tuple[int, ...] = (2, 3, 4)
    metadata: dict[str, Any] = field(default_factory=dict)
    trace: tuple[float, ...] = ()

    model_type: ClassVar[str] = "mehim"

    def __post_init__(self) -> None:
        k = len(self.emissions)
        if len(self.transitions) != k or any(block.k != k for block in self.transitions) or self.initial.k != k:
            msg = f"MeHiM with {k} emission(s) needs {k} transition blocks and {k} initial states"
            raise ValidationError(msg)

    @property
    def k(self) -> int:
        return len(self.emissions)

    @property
    def sigmas(self) -> np.ndarray:
        return np.array([e.sigma for e in self.emissions])

    @property
    def covariate_names(self) -> tuple[str, ...]:
        return covariate_names_for(self.covariate_set)

    def initial_covariates(self, X: np.ndarray) -> np.ndarray:  # noqa: N803
        return np.asarray(X)[..., list(self.initial_columns)]

    def draw_initial_state(self, x_init: np.ndarray, rng: np.random.Generator) -> int:
        return sample_categorical(initial_probs(self, x_init), rng)

    def draw_transition(self, state: int, x: np.ndarray, rng: np.random.Generator) -> int:
        return sample_categorical(transition_probs(self, state, x), rng)

    def draw_change(self, state: int, x: np.ndarray, rng: np.random.Generator) -> float:
        return emission_sample(self, state, x, rng)


@dataclass(frozen=True, eq=False)
class StatePath:
    """0-based states aligned to a sequence; ``labels`` are the 1-based ones."""

    states: np.ndarray
    log_probability: float
    storm_id: str = ""
    start_index: int = 0

    def __len__(self) -> int:
        return len(self.states)

    @property
    def labels(self) -> np.ndarray:
        return self.states + 1


@dataclass(frozen=True, eq=False)
class Posterior:
    """Smoothed marginals of a batch: ``gamma[n, t, i]`` and ``xi[n, t-1, i, j]``."""

    log_likelihood: np.ndarray
    gamma: np.ndarray
    xi: np.ndarray

    @property
    def total(self) -> float:
        return float(self.log_likelihood.sum())


@dataclass(frozen=True, eq=False)
class _Batch:
    X: np.ndarray
    y: np.ndarray
    mask: np.ndarray
    x_init: np.ndarray

    @classmethod
    def from_sequences(cls, sequences: Sequence[OceanSequence], initial_columns: Sequence[int]) -> _Batch:
        if not sequences:
            msg = "no sequences"
            raise ValidationError(msg)
        for sequence in sequences:
            if not sequence.standardized:
                msg = f"sequence of storm {sequence.storm_id} at {sequence.start_index} is not standardized"
                raise ValidationError(msg)
            if len(sequence) < 1:
                msg = f"sequence of storm {sequence.storm_id} at {sequence.start_index} is empty"
                raise ValidationError(msg)
        n, t_max, p = len(sequences), max(len(s) for s in sequences), sequences[0].covariates.shape[1]
        X, y, mask = np.zeros((n, t_max, p)), np.zeros((n, t_max)), np.zeros((n, t_max), dtype=bool)  # noqa: N806
        for row, sequence in enumerate(sequences):
            length = len(sequence)
            X[row, :length] = sequence.covariates
            y[row, :length] = sequence.responses
            mask[row, :length] = True
        return cls(X=X, y=y, mask=mask, x_init=X[:, 0][:, list(initial_columns)])

    @property
    def observations(self) -> tuple[np.ndarray, np.ndarray]:
        return self.X[self.mask], self.y[self.mask]


# Probabilities
# ------------------------------------------------------------------------------


def transition_probs(model: MehimModel, from_state: int, x: np.ndarray) -> np.ndarray:
    return mnl_probs(model.transitions[from_state], x)


def initial_probs(model: MehimModel, x_init: np.ndarray) -> np.ndarray:
    return mnl_probs(model.initial, x_init)


def emission_loglik(model: MehimModel, state: int, x: np.ndarray, y: Any) -> Any:
    emission = model.emissions[state]
    return sps.norm.logpdf(y, emission.mean(x), emission.sigma)


def emission_sample(model: MehimModel, state: int, x: np.ndarray, rng: np.random.Generator) -> float:
    emission = model.emissions[state]
    return float(emission.mean(x) + emission.sigma * rng.standard_normal())


def _log_terms(model: MehimModel, batch: _Batch) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    k = model.k
    means = np.stack([e.mean(batch.X) for e in model.emissions], axis=-1)
    log_e = np.where(batch.mask[..., None], sps.norm.logpdf(batch.y[..., None], means, model.sigmas), 0.0)
    log_a = np.stack([mnl_log_probs(block, batch.X) for block in model.transitions], axis=2)
    identity = np.where(np.eye(k, dtype=bool), 0.0, -np.inf)
    log_a = np.where(batch.mask[..., None, None], log_a, identity)
    log_init = mnl_log_probs(model.initial, batch.x_init)
    return log_init, log_a, log_e


def _forward(log_init: np.ndarray, log_a: np.ndarray, log_e: np.ndarray) -> np.ndarray:
    log_alpha = np.empty_like(log_e)
    log_alpha[:, 0] = log_init + log_e[:, 0]
    for t in range(1, log_e.shape[1]):
        log_alpha[:, t] = special.logsumexp(log_alpha[:, t - 1, :, None] + log_a[:, t], axis=1) + log_e[:, t]
    return log_alpha


def _backward(log_a: np.ndarray, log_e: np.ndarray) -> np.ndarray:
    log_beta = np.zeros_like(log_e)
    for t in range(log_e.shape[1] - 2, -1, -1):
        ahead = (log_e[:, t + 1] + log_beta[:, t + 1])[:, None, :]
        log_beta[:, t] = special.logsumexp(log_a[:, t + 1] + ahead, axis=2)
    return log_beta


def _e_step(model: MehimModel, batch: _Batch) -> Posterior:
    log_init, log_a, log_e = _log_terms(model, batch)
    log_alpha = _forward(log_init, log_a, log_e)
    log_beta = _backward(log_a, log_e)
    log_likelihood = special.logsumexp(log_alpha[:, -1], axis=1)
    gamma = np.exp(log_alpha + log_beta - log_likelihood[:, None, None])
    xi = np.exp(
        log_alpha[:, :-1, :, None]
        + log_a[:, 1:]
        + (log_e[:, 1:] + log_beta[:, 1:])[:, :, None, :]
        - log_likelihood[:, None, None, None],
    )
    return Posterior(log_likelihood=log_likelihood, gamma=gamma, xi=xi)


def forward(model: MehimModel, sequence: OceanSequence) -> np.ndarray:
    """Log forward variables ``log alpha[t, i]`` of one sequence."""
    batch = _Batch.from_sequences([sequence], model.initial_columns)
    return _forward(*_log_terms(model, batch))[0]


def backward(model: MehimModel, sequence: OceanSequence) -> np.ndarray:
    batch = _Batch.from_sequences([sequence], model.initial_columns)
    _, log_a, log_e = _log_terms(model, batch)
    return _backward(log_a, log_e)[0]


def posterior_marginals(model: MehimModel, sequence: OceanSequence) -> tuple[np.ndarray, np.ndarray]:
    """``gamma[t, i]`` and ``xi[t - 1, i, j]`` for one sequence."""
    posterior = _e_step(model, _Batch.from_sequences([sequence], model.initial_columns))
    return posterior.gamma[0], posterior.xi[0]


def sequence_loglik(model: MehimModel, sequence: OceanSequence) -> float:
    return float(special.logsumexp(forward(model, sequence)[-1]))


def total_loglik(model: MehimModel, sequences: Sequence[OceanSequence]) -> float:
    return _e_step(model, _Batch.from_sequences(sequences, model.initial_columns)).total


def joint_log_probability(model: MehimModel, sequence: OceanSequence, states: Sequence[int]) -> float:
    """``log P(states, responses)`` for one explicit state path."""
    batch = _Batch.from_sequences([sequence], model.initial_columns)
    log_init, log_a, log_e = _log_terms(model, batch)
    states = list(states)
    total = log_init[0, states[0]] + log_e[0, 0, states[0]]
    for t in range(1, len(states)):
        total += log_a[0, t, states[t - 1], states[t]] + log_e[0, t, states[t]]
    return float(total)


def viterbi(model: MehimModel, sequence: OceanSequence) -> StatePath:
    """Most probable state path; ties go to the lower state index."""
    batch = _Batch.from_sequences([sequence], model.initial_columns)
    log_init, log_a, log_e = _log_terms(model, batch)
    length, k = len(sequence), model.k
    delta = log_init[0] + log_e[0, 0]
    pointers = np.zeros((length, k), dtype=int)
    for t in range(1, length):
        scores = delta[:, None] + log_a[0, t]
        pointers[t] = np.argmax(scores, axis=0)
        delta = scores[pointers[t], np.arange(k)] + log_e[0, t]
    states = np.empty(length, dtype=int)
    states[-1] = int(np.argmax(delta))
    for t in range(length - 1, 0, -1):
        states[t - 1] = pointers[t, states[t]]
    return StatePath(
        states=states,
        log_probability=float(delta[states[-1]]),
        storm_id=sequence.storm_id,
        start_index=sequence.start_index,
    )


# Fitting
# ------------------------------------------------------------------------------


def _fit_block(
    X: np.ndarray,  # noqa: N803
    weights: np.ndarray,
    init: MnlFit | None,
    *,
    tol: float,
    ridge: float,
) -> MnlFit:
    """Weighted logit, or the intercept-only closed form when rows are too few."""
    k = weights.shape[1]
    if len(X) >= k * (X.shape[1] + 1):
        return mnl_fit(X, weights, init=init, tol=tol, ridge=ridge)
    logger.debug("Only %d row(s) for a %d-category block; fitting intercepts only", len(X), k)
    shares = weights.sum(axis=0) + 1e-6
    log_shares = np.log(shares / shares.sum())
    return MnlFit(intercepts=log_shares - log_shares[-1], coefficients=np.zeros((k, X.shape[1])))


def _m_step(  # noqa: PLR0913
    batch: _Batch,
    posterior: Posterior,
    previous: MehimModel | None,
    template: MehimModel,
    *,
    sigma_floor: float,
    mnl_tol: float,
    ridge: float,
) -> MehimModel:
    k = posterior.gamma.shape[-1]
    X, y = batch.observations  # noqa: N806
    gamma = posterior.gamma[batch.mask]
    emissions = []
    for i in range(k):
        mass = gamma[:, i].sum()
        if mass < X.shape[1] + 1:
            msg = f"state {i + 1} lost its observations (weight {mass:.3g})"
            raise StateCollapseError(msg)
        emission = ols_fit(X, y, weights=gamma[:, i])
        if emission.sigma < sigma_floor:
            msg = f"state {i + 1} collapsed: sigma {emission.sigma:.3g} below floor {sigma_floor}"
            raise StateCollapseError(msg)
        emissions.append(emission)

    moves = batch.mask[:, 1:]
    destinations = batch.X[:, 1:][moves]
    xi = posterior.xi[moves]
    transitions = tuple(
        _fit_block(
            destinations,
            xi[:, i, :],
            None if previous is None else previous.transitions[i],
            tol=mnl_tol,
            ridge=ridge,
        )
        for i in range(k)
    )
    initial = _fit_block(
        batch.x_init,
        posterior.gamma[:, 0],
        None if previous is None else previous.initial,
        tol=mnl_tol,
        ridge=ridge,
    )
    return replace(template, emissions=tuple(emissions), transitions=transitions, initial=initial)


def _blend(old: MnlFit, new: MnlFit, step: float) -> MnlFit:
    return MnlFit(
        intercepts=old.intercepts + step * (new.intercepts - old.intercepts),
        coefficients=old.coefficients + step * (new.coefficients - old.coefficients),
        ridge=new.ridge,
    )


def _seeded_posterior(batch: _Batch, responsibilities: np.ndarray) -> Posterior:
    """Per-observation responsibilities as marginals; pairwise ones as outer products."""
    gamma = np.zeros((*batch.y.shape, responsibilities.shape[1]))
    gamma[batch.mask] = responsibilities
    xi = gamma[:, :-1, :, None] * gamma[:, 1:, None, :]
    return Posterior(log_likelihood=np.zeros(len(batch.y)), gamma=gamma, xi=xi)


def _em_run(  # noqa: PLR0913
    batch: _Batch,
    template: MehimModel,
    rng: np.random.Generator,
    *,
    tol: float,
    max_iter: int,
    sigma_floor: float,
    mnl_tol: float,
    ridge: float,
    seed_responsibilities: np.ndarray | None,
) -> MehimModel:
    _, y = batch.observations
    responsibilities = initial_responsibilities(y, template.k, rng, seed_responsibilities)
    options = {"sigma_floor": sigma_floor, "mnl_tol": mnl_tol, "ridge": ridge}
    model = _m_step(batch, _seeded_posterior(batch, responsibilities), None, template, **options)
    posterior = _e_step(model, batch)
    trace, halvings, converged = [posterior.total], 0, False
    for _ in range(max_iter):
        proposal = _m_step(batch, posterior, model, template, **options)
        candidate, candidate_posterior = proposal, _e_step(proposal, batch)
        step = 1.0
        while candidate_posterior.total < trace[-1] - GEM_SLACK * max(1.0, abs(trace[-1])):
            if step < 2.0**-MAX_HALVINGS:
                step = 0.0
            else:
                step /= 2
            halvings += 1
            candidate = replace(
                proposal,
                transitions=tuple(
                    _blend(old, new, step) for old, new in zip(model.transitions, proposal.transitions, strict=True)
                ),
                initial=_blend(model.initial, proposal.initial, step),
            )
            candidate_posterior = _e_step(candidate, batch)
            if step == 0.0:
                break
        gain = candidate_posterior.total - trace[-1]
        model, posterior = candidate, candidate_posterior
        trace.append(posterior.total)
        if gain < tol * abs(trace[-2]):
            converged = True
            break
    return replace(
        model,
        trace=tuple(trace),
        metadata={"iterations": len(trace) - 1, "converged": converged, "step_halvings": halvings},
    )


def canonicalize_states(model: MehimModel) -> MehimModel:
    """Relabel states by emission sigma ascending, consistently in every block."""
    order = [int(i) for i in np.argsort(model.sigmas, kind="stable")]
    return replace(
        model,
        emissions=tuple(model.emissions[i] for i in order),
        transitions=tuple(permute_categories(model.transitions[i], order) for i in order),
        initial=permute_categories(model.initial, order),
    )


def mehim_fit(  # noqa: PLR0913
    sequences: Sequence[OceanSequence],
    k: int = 3,
    *,
    restarts: int = 10,
    tol: float = 1e-8,
    seed: int = 0,
    max_iter: int = HMM_MAX_ITER,
    sigma_floor: float = 1e-4,
    mnl_tol: float = 1e-8,
    ridge: float = 0.0,
    workers: int = 1,
    covariate_set: str = "full",
    initial_columns: Sequence[int] | None = None,
    init_model: FmrModel | None = None,
) -> MehimModel:
    """Generalized EM (Baum-Welch) over standardized ocean sequences.

    Restarts are seeded from the quantile split of |ΔV|, or from the
    posteriors of ``init_model`` when given, each with its own jitter stream
    spawned from ``seed``. A restart that collapses is re-run from up to
    ``COLLAPSE_RETRIES`` fresh child streams. The best restart by total
    log-likelihood wins and its states are canonicalized.
    """
    columns = default_initial_columns(covariate_set) if initial_columns is None else tuple(initial_columns)
    batch = _Batch.from_sequences(sequences, columns)
    X, y = batch.observations  # noqa: N806
    p, q = X.shape[1], len(columns)
    metadata = {"n_sequences": len(sequences), "n_obs": len(y), "seed": seed}

    if k == 1:
        emission = ols_fit(X, y)
        model = MehimModel(
            emissions=(emission,),
            transitions=(MnlFit.zeros(1, p),),
            initial=MnlFit.zeros(1, q),
            covariate_set=covariate_set,
            initial_columns=columns,
        )
        log_likelihood = _e_step(model, batch).total
        return replace(
            model,
            trace=(log_likelihood,),
            metadata={**metadata, "log_likelihood": log_likelihood, "iterations": 0},
        )
    if k < 1:
        msg = f"k must be >= 1, got {k}"
        raise ValidationError(msg)
    if len(y) < MIN_OBS_PER_STATE * k:
        msg = f"mehim_fit needs at least {MIN_OBS_PER_STATE * k} observations for k={k}, got {len(y)}"
        raise ValidationError(msg)
    if init_model is not None and init_model.k != k:
        msg = f"initializing FMR model has k={init_model.k}, expected {k}"
        raise ValidationError(msg)

    template = MehimModel(
        emissions=tuple(LinearFit(0.0, np.zeros(p), 1.0) for _ in range(k)),
        transitions=tuple(MnlFit.zeros(k, p) for _ in range(k)),
        initial=MnlFit.zeros(k, q),
        covariate_set=covariate_set,
        initial_columns=columns,
    )
    seed_responsibilities = None if init_model is None else fmr_posteriors(init_model, X, y)
    streams = np.random.SeedSequence(seed).spawn(restarts)

    def run(index: int) -> tuple[MehimModel | None, int]:
        for attempt, stream in enumerate(restart_streams(streams[index])):
            try:
                model = _em_run(
                    batch,
                    template,
                    np.random.default_rng(stream),
                    tol=tol,
                    max_iter=max_iter,
                    sigma_floor=sigma_floor,
                    mnl_tol=mnl_tol,
                    ridge=ridge,
                    seed_responsibilities=seed_responsibilities,
                )
            except StateCollapseError as e:
                logger.info("MeHiM restart %d (attempt %d) collapsed: %s", index + 1, attempt + 1, e)
            else:
                return model, attempt
        return None, COLLAPSE_RETRIES + 1

    with ThreadPoolExecutor(max_workers=max(workers, 1)) as pool:
        runs = list(pool.map(run, range(restarts)))
    finished = [(i, m) for i, (m, _) in enumerate(runs) if m is not None]
    collapses = sum(n for _, n in runs)
    if not finished:
        msg = f"all {restarts} MeHiM restart(s) collapsed after {COLLAPSE_RETRIES} retries each"
        raise StateCollapseError(msg)
    best_index, best = max(finished, key=lambda item: (item[1].trace[-1], -item[0]))
    log_likelihood = best.trace[-1]
    logger.info(
        "MeHiM k=%d: best restart %d of %d (%d collapsed), log-likelihood=%.3f after %d iteration(s)",
        k,
        best_index + 1,
        restarts,
        restarts - len(finished),
        log_likelihood,
        best.metadata["iterations"],
    )
    return canonicalize_states(
        replace(
            best,
            metadata={
                **best.metadata,
                **metadata,
                "log_likelihood": log_likelihood,
                "restarts": restarts,
                "best_restart": best_index + 1,
                "collapsed_restarts": restarts - len(finished),
                "collapsed_attempts": collapses,
                "initialized_from": "fmr" if init_model is not None else "quantile_split",
            },
        ),
    )


# Decoding summaries
# ------------------------------------------------------------------------------


def state_summary(
    paths: Sequence[StatePath],
    sequences: Sequence[OceanSequence],
    k: int,
    scaler: Scaler | None = None,
) -> list[dict[str, Any]]:
    """Mean and sd of ΔV per decoded state (kt when a scaler is given) and its share."""
    states = np.concatenate([path.states for path in paths])
    responses = np.concatenate([sequence.responses for sequence in sequences])
    if scaler is not None and sequences[0].standardized:
        responses = scaler.unstandardize_response(responses)
    rows = []
    for i in range(k):
        selected = responses[states == i]
        rows.append(
            {
                "state": i + 1,
                "n": len(selected),
                "share": len(selected) / len(states) if len(states) else 0.0,
                "dv_mean": float(selected.mean()) if len(selected) else float("nan"),
                "dv_sd": float(selected.std(ddof=1)) if len(selected) > 1 else float("nan"),
            },
        )
    return rows
