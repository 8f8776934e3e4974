import numpy as np
import pytest

from tcintensity.core.exceptions import FitError
from tcintensity.core.exceptions import ValidationError
from tcintensity.intensity.stats import MnlFit
from tcintensity.intensity.stats import decay_curve
from tcintensity.intensity.stats import mnl_fit
from tcintensity.intensity.stats import mnl_gradient
from tcintensity.intensity.stats import mnl_probs
from tcintensity.intensity.stats import nls_exp_decay_fit
from tcintensity.intensity.stats import ols_fit
from tcintensity.intensity.stats import ols_predict
from tcintensity.intensity.stats import permute_categories
from tcintensity.intensity.stats import sample_categorical
from tcintensity.intensity.tests.factories import linear_fit
from tcintensity.intensity.tests.factories import mnl
from tcintensity.storms.tests.factories import LandSegmentFactory


class TestOlsFit:
    def test_matches_lstsq(self, rng):
        """Coefficients agree with a plain least-squares solve."""
        X = rng.normal(size=(200, 3))  # noqa: N806
        y = 1.0 + X @ np.array([0.5, -2.0, 0.0]) + rng.normal(0, 0.3, 200)
        fit = ols_fit(X, y)
        design = np.column_stack([np.ones(200), X])
        beta, *_ = np.linalg.lstsq(design, y, rcond=None)
        assert fit.intercept == pytest.approx(beta[0])
        np.testing.assert_allclose(fit.coefficients, beta[1:], atol=1e-10)

    def test_sigma_uses_residual_degrees_of_freedom(self, rng):
        """sigma divides the residual sum of squares by n - p - 1."""
        X = rng.normal(size=(50, 2))  # noqa: N806
        y = X[:, 0] + rng.normal(size=50)
        fit = ols_fit(X, y)
        residuals = y - fit.mean(X)
        assert fit.sigma == pytest.approx(np.sqrt(residuals @ residuals / 47))

    def test_predict(self):
        """Predictions are the intercept plus the linear term, row by row."""
        X = np.array([[0.0, 0.0], [1.0, 2.0], [-1.0, 0.5]])  # noqa: N806
        fit = linear_fit(intercept=2.0, coefficients=[1.5, -0.5], p=2)
        np.testing.assert_allclose(ols_predict(fit, X), [2.0, 2.5, 0.25])

    def test_rank_deficient(self, rng):
        """A duplicated column names the collinear covariate."""
        x = rng.normal(size=40)
        X = np.column_stack([x, x])  # noqa: N806
        with pytest.raises(FitError, match="shr"):
            ols_fit(X, rng.normal(size=40), names=["mpi", "shr"])

    def test_too_few_observations(self, rng):
        """n must exceed p + 1."""
        with pytest.raises(FitError):
            ols_fit(rng.normal(size=(3, 2)), rng.normal(size=3))

    def test_zero_one_weights_select_rows(self, rng):
        """Binary weights give the fit on the selected rows."""
        X = rng.normal(size=(100, 2))  # noqa: N806
        y = 0.5 * X[:, 1] + rng.normal(size=100)
        weights = (np.arange(100) % 2).astype(float)
        weighted = ols_fit(X, y, weights=weights)
        subset = ols_fit(X[weights == 1], y[weights == 1])
        np.testing.assert_allclose(weighted.coefficients, subset.coefficients, atol=1e-10)
        assert weighted.intercept == pytest.approx(subset.intercept)

    def test_zero_weights_rejected(self, rng):
        """All-zero weights are a fit failure."""
        with pytest.raises(FitError):
            ols_fit(rng.normal(size=(10, 2)), rng.normal(size=10), weights=np.zeros(10))


class TestMnl:
    def test_probabilities_are_simplices(self, rng):
        """Every row of probabilities sums to one."""
        fit = mnl([0.5, -1.0, 0.0], rng.normal(size=(3, 4)), p=4)
        probs = mnl_probs(fit, rng.normal(size=(20, 4)))
        np.testing.assert_allclose(probs.sum(axis=1), 1.0)
        assert np.all(probs > 0)

    def test_permute_keeps_probabilities(self, rng):
        """Reordering categories reorders the probabilities and re-zeroes the baseline."""
        fit = mnl([0.5, -1.0, 0.0], rng.normal(size=(3, 4)), p=4)
        x = rng.normal(size=(10, 4))
        order = [2, 0, 1]
        permuted = permute_categories(fit, order)
        np.testing.assert_allclose(mnl_probs(permuted, x), mnl_probs(fit, x)[:, order], atol=1e-12)
        assert permuted.intercepts[-1] == 0.0
        assert not permuted.coefficients[-1].any()

    def test_fit_recovers_parameters(self, rng):
        """A large one-hot sample recovers the generating logit."""
        truth = mnl([0.5, -0.5, 0.0], [[1.0, -0.5], [-0.8, 0.7], [0.0, 0.0]], p=2)
        X = rng.normal(size=(6000, 2))  # noqa: N806
        labels = np.array([sample_categorical(p, rng) for p in mnl_probs(truth, X)])
        fit = mnl_fit(X, np.eye(3)[labels])
        assert fit.converged
        np.testing.assert_allclose(fit.intercepts, truth.intercepts, atol=0.15)
        np.testing.assert_allclose(fit.coefficients, truth.coefficients, atol=0.15)
        assert fit.intercepts[-1] == 0.0

    def test_gradient_vanishes_at_optimum(self, rng):
        """The score is zero at the fitted parameters."""
        X = rng.normal(size=(500, 2))  # noqa: N806
        weights = rng.dirichlet(np.ones(3), size=500)
        fit = mnl_fit(X, weights)
        design = np.column_stack([np.ones(500), X])
        params = np.column_stack([fit.intercepts[:-1], fit.coefficients[:-1]])
        np.testing.assert_allclose(mnl_gradient(params, design, weights), 0.0, atol=1e-5)

    def test_other_baseline(self, rng):
        """A chosen baseline row is the zero row."""
        X = rng.normal(size=(300, 1))  # noqa: N806
        weights = rng.dirichlet(np.ones(3), size=300)
        fit = mnl_fit(X, weights, baseline=0)
        assert fit.intercepts[0] == 0.0
        assert not fit.coefficients[0].any()

    def test_soft_weights_match_expanded_rows(self, rng):
        """Fractional weights equal replicated one-hot rows."""
        X = rng.normal(size=(200, 1))  # noqa: N806
        labels = rng.integers(0, 2, 200)
        onehot = np.eye(2)[labels]
        doubled = mnl_fit(np.vstack([X, X]), np.vstack([onehot, onehot]))
        halved = mnl_fit(X, 2 * onehot)
        np.testing.assert_allclose(doubled.coefficients, halved.coefficients, atol=1e-5)

    def test_too_few_observations(self, rng):
        """At least k (p + 1) rows are required."""
        with pytest.raises(FitError):
            mnl_fit(rng.normal(size=(5, 2)), np.eye(3)[[0, 1, 2, 0, 1]])

    def test_negative_weights_rejected(self, rng):
        """Weights must be non-negative."""
        weights = np.full((30, 2), 0.5)
        weights[0, 0] = -1.0
        with pytest.raises(ValidationError):
            mnl_fit(rng.normal(size=(30, 1)), weights)

    def test_zeros(self):
        """The zero fit is uniform."""
        fit = MnlFit.zeros(4, 2)
        np.testing.assert_allclose(mnl_probs(fit, np.ones(2)), 0.25)

    def test_extreme_logits_stay_on_simplex(self):
        """Logits of +-700 neither overflow nor leave the simplex."""
        fit = mnl([0.0, 0.0, 0.0], [[700.0], [-700.0], [0.0]], p=1)
        probs = mnl_probs(fit, np.array([[1.0], [-1.0], [0.0]]))
        assert np.all(np.isfinite(probs))
        assert np.all(probs >= 0)
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-12)
        np.testing.assert_allclose(probs[0], [1.0, 0.0, 0.0], atol=1e-12)
        np.testing.assert_allclose(probs[1], [0.0, 1.0, 0.0], atol=1e-12)


class TestSampleCategorical:
    def test_frequencies(self, rng):
        """Draws follow the given probabilities."""
        probs = np.array([0.2, 0.5, 0.3])
        draws = np.array([sample_categorical(probs, rng) for _ in range(20000)])
        np.testing.assert_allclose(np.bincount(draws, minlength=3) / 20000, probs, atol=0.015)

    def test_degenerate(self, rng):
        """A one-hot simplex always returns its category."""
        assert all(sample_categorical(np.array([0.0, 1.0, 0.0]), rng) == 1 for _ in range(100))


class TestNlsDecay:
    def segments(self, alpha=0.05, v_b=20.0):
        rows = []
        for index, (v0, length) in enumerate([(90.0, 8), (70.0, 6), (110.0, 10), (50.0, 5)]):
            t = np.arange(length)
            rows.append(
                LandSegmentFactory(
                    storm_id=f"L{index}",
                    v0=v0,
                    intensities=decay_curve(alpha, v_b, v0, t),
                ),
            )
        return rows

    def test_recovers_exact_curve(self):
        """Noise-free segments give back the generating parameters."""
        fit = nls_exp_decay_fit(self.segments(alpha=0.08, v_b=25.0))
        assert fit.alpha == pytest.approx(0.08, rel=1e-4)
        assert fit.v_b == pytest.approx(25.0, rel=1e-4)
        assert fit.rmse < 1e-6  # noqa: PLR2004
        assert fit.n_points == 29  # noqa: PLR2004

    def test_no_decay_returns_initial_guess(self, caplog):
        """Flat segments leave alpha unidentified and say so."""
        flat = [LandSegmentFactory(v0=60.0, intensities=np.full(4, 60.0))]
        fit = nls_exp_decay_fit(flat, init=(0.05, 20.0))
        assert (fit.alpha, fit.v_b) == (0.05, 20.0)
        assert "no decay" in caplog.text

    def test_short_segment_rejected(self):
        """Segments need at least two points."""
        with pytest.raises(ValidationError):
            nls_exp_decay_fit([LandSegmentFactory()])

    def test_no_segments(self):
        """An empty segment list cannot be fitted."""
        with pytest.raises(FitError):
            nls_exp_decay_fit([])
