from dataclasses import replace

import numpy as np
import pytest

from tcintensity.core.exceptions import StateCollapseError
from tcintensity.core.exceptions import ValidationError
from tcintensity.intensity import mixture
from tcintensity.intensity.mixture import canonicalize_components
from tcintensity.intensity.mixture import fmr_fit
from tcintensity.intensity.mixture import fmr_optimal_assignment
from tcintensity.intensity.mixture import fmr_posteriors
from tcintensity.intensity.mixture import fmr_sample_dv
from tcintensity.intensity.mixture import fmr_with_classifier
from tcintensity.intensity.mixture import initial_responsibilities
from tcintensity.intensity.stats import COLLAPSE_RETRIES
from tcintensity.intensity.stats import ols_fit
from tcintensity.intensity.tests.factories import FmrModelFactory
from tcintensity.intensity.tests.factories import linear_fit


@pytest.fixture
def two_regimes(rng):
    """600 draws: 70% quiet (sigma 0.5), 30% volatile (sigma 3)."""
    X = rng.normal(size=(600, 2))  # noqa: N806
    volatile = rng.random(600) < 0.3  # noqa: PLR2004
    quiet = 0.2 + X @ np.array([0.8, -0.3]) + rng.normal(0, 0.5, 600)
    wild = 1.0 + X @ np.array([-0.5, 1.0]) + rng.normal(0, 3.0, 600)
    return X, np.where(volatile, wild, quiet)


class TestFmrFit:
    def test_single_group_is_ols(self, rng):
        """k = 1 gives exactly the OLS fit."""
        X = rng.normal(size=(80, 6))  # noqa: N806
        y = rng.normal(size=80)
        model = fmr_fit(X, y, k=1)
        expected = ols_fit(X, y)
        np.testing.assert_allclose(model.components[0].coefficients, expected.coefficients)
        assert model.components[0].sigma == pytest.approx(expected.sigma)
        np.testing.assert_array_equal(model.weights, [1.0])

    def test_too_few_observations(self, rng):
        """Each group needs 50 observations."""
        with pytest.raises(ValidationError, match="150"):
            fmr_fit(rng.normal(size=(120, 2)), rng.normal(size=120), k=3)

    def test_recovers_two_regimes(self, two_regimes):
        """Sigmas, weights and the quiet regression are recovered in sigma order."""
        X, y = two_regimes  # noqa: N806
        model = fmr_fit(X, y, k=2, restarts=3, seed=1)
        assert model.sigmas[0] < model.sigmas[1]
        assert model.sigmas[0] == pytest.approx(0.5, abs=0.1)
        assert model.sigmas[1] == pytest.approx(3.0, abs=0.5)
        assert model.weights[0] == pytest.approx(0.7, abs=0.07)
        np.testing.assert_allclose(model.components[0].coefficients, [0.8, -0.3], atol=0.1)

    def test_trace_is_monotone(self, two_regimes):
        """EM never lowers the log-likelihood."""
        X, y = two_regimes  # noqa: N806
        trace = np.array(fmr_fit(X, y, k=2, restarts=1, seed=3).trace)
        assert np.all(np.diff(trace) >= -1e-8 * np.abs(trace[:-1]))

    def test_workers_do_not_change_result(self, two_regimes):
        """Restart streams make the fit independent of the thread count."""
        X, y = two_regimes  # noqa: N806
        serial = fmr_fit(X, y, k=2, restarts=4, seed=9, workers=1)
        threaded = fmr_fit(X, y, k=2, restarts=4, seed=9, workers=3)
        assert serial.metadata["log_likelihood"] == threaded.metadata["log_likelihood"]
        assert serial.metadata["best_restart"] == threaded.metadata["best_restart"]

    def test_restart_metadata(self, two_regimes):
        """The fit records its seed and restart bookkeeping."""
        X, y = two_regimes  # noqa: N806
        metadata = fmr_fit(X, y, k=2, restarts=2, seed=4).metadata
        assert metadata["seed"] == 4  # noqa: PLR2004
        assert metadata["restarts"] == 2  # noqa: PLR2004
        assert 1 <= metadata["best_restart"] <= 2  # noqa: PLR2004

    def test_collapsed_restart_is_rerun(self, two_regimes, monkeypatch):
        """A restart that collapses draws a fresh stream instead of being dropped."""
        X, y = two_regimes  # noqa: N806
        calls = []
        em_run = mixture._em_run  # noqa: SLF001

        def collapse_once(*args, **kwargs):
            calls.append(kwargs)
            if len(calls) == 1:
                msg = "component 2 collapsed"
                raise StateCollapseError(msg)
            return em_run(*args, **kwargs)

        monkeypatch.setattr(mixture, "_em_run", collapse_once)
        model = fmr_fit(X, y, k=2, restarts=1, seed=1)
        assert len(calls) == 2  # noqa: PLR2004
        assert model.metadata["collapsed_restarts"] == 0
        assert model.metadata["collapsed_attempts"] == 1

    def test_gives_up_after_bounded_retries(self, two_regimes, monkeypatch):
        """Each restart tries at most COLLAPSE_RETRIES fresh streams."""
        X, y = two_regimes  # noqa: N806
        calls = []

        def always_collapse(*args, **kwargs):
            calls.append(kwargs)
            msg = "component 1 collapsed"
            raise StateCollapseError(msg)

        monkeypatch.setattr(mixture, "_em_run", always_collapse)
        with pytest.raises(StateCollapseError, match="all 2 FMR restart"):
            fmr_fit(X, y, k=2, restarts=2, seed=1)
        assert len(calls) == 2 * (COLLAPSE_RETRIES + 1)

    @pytest.mark.slow
    def test_recovers_three_separated_groups(self):
        """Weights and sigmas of three well-separated groups come back in sigma order."""
        rng = np.random.default_rng(2017)
        truth = (
            linear_fit(0.098, -0.080, [0.008, 0.003, 0.008, -0.004, -0.008, 0.012]),
            linear_fit(0.715, 0.100, [0.667, -0.134, 0.116, -0.063, 0.063, 0.055]),
            linear_fit(2.029, 0.228, [0.215, -0.861, -0.133, -0.646, 0.153, 0.234]),
        )
        weights = np.array([0.296, 0.635, 0.069])
        n = 50_000
        X = rng.normal(size=(n, 6))  # noqa: N806
        groups = rng.choice(3, size=n, p=weights)
        means = np.column_stack([fit.mean(X) for fit in truth])[np.arange(n), groups]
        y = means + rng.normal(size=n) * np.array([fit.sigma for fit in truth])[groups]
        model = fmr_fit(X, y, k=3, restarts=10, seed=0)
        np.testing.assert_allclose(model.weights, weights, atol=0.03)
        np.testing.assert_allclose(model.sigmas, [0.098, 0.715, 2.029], rtol=0.05)


class TestFmrPosteriors:
    def test_posteriors_are_simplices(self, rng):
        """Responsibilities sum to one per observation."""
        model = FmrModelFactory()
        X = rng.normal(size=(50, 6))  # noqa: N806
        posteriors = fmr_posteriors(model, X, rng.normal(size=50))
        np.testing.assert_allclose(posteriors.sum(axis=1), 1.0)

    def test_large_change_goes_to_volatile_group(self):
        """A 10-sigma change belongs to the wide component."""
        model = FmrModelFactory()
        labels = fmr_optimal_assignment(model, np.zeros((2, 6)), np.array([0.0, 10.0]))
        np.testing.assert_array_equal(labels, [0, 1])

    def test_canonical_order_keeps_likelihood(self, rng):
        """Reordering components leaves the likelihood unchanged."""
        model = FmrModelFactory()
        swapped = replace(model, weights=model.weights[::-1], components=model.components[::-1], classifier=None)
        X = rng.normal(size=(40, 6))  # noqa: N806
        y = rng.normal(size=40)
        canonical = canonicalize_components(swapped)
        assert canonical.log_likelihood(X, y) == pytest.approx(model.log_likelihood(X, y))
        assert list(canonical.sigmas) == sorted(canonical.sigmas)


class TestClassifier:
    def test_with_classifier(self, two_regimes):
        """The classifier has one row per group and a zero baseline."""
        X, y = two_regimes  # noqa: N806
        model = fmr_with_classifier(fmr_fit(X, y, k=2, restarts=2, seed=1), X, y)
        assert model.classifier.k == 2  # noqa: PLR2004
        assert model.classifier.intercepts[-1] == 0.0
        assert sum(model.metadata["assignment_shares"]) == pytest.approx(1.0)

    def test_sampling_needs_classifier(self, rng):
        """A model without a classifier cannot be sampled."""
        with pytest.raises(ValidationError):
            fmr_sample_dv(FmrModelFactory(classifier=None), np.zeros(6), rng)

    def test_sample_returns_group(self, rng):
        """Sampling reports the drawn group."""
        _, group = fmr_sample_dv(FmrModelFactory(), np.zeros(6), rng)
        assert group in (0, 1)


class TestInitialResponsibilities:
    def test_rows_are_simplices(self, rng):
        """Jittered quantile splits are still distributions."""
        responsibilities = initial_responsibilities(rng.normal(size=90), 3, rng)
        np.testing.assert_allclose(responsibilities.sum(axis=1), 1.0)

    def test_quantile_split_orders_by_magnitude(self, rng):
        """Small |y| goes to group 1 and large |y| to group k."""
        y = np.array([0.1, -5.0, 0.2, 4.0, -0.05, 3.0])
        responsibilities = initial_responsibilities(y, 2, rng)
        labels = np.argmax(responsibilities, axis=1)
        np.testing.assert_array_equal(labels, [0, 1, 0, 1, 0, 1])
