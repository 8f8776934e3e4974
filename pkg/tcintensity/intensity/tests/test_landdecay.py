import numpy as np
import pytest

from tcintensity.core.exceptions import FitError
from tcintensity.core.exceptions import ValidationError
from tcintensity.intensity.landdecay import LandModel
from tcintensity.intensity.landdecay import land_apply
from tcintensity.intensity.landdecay import land_fit
from tcintensity.intensity.landdecay import segment_residuals
from tcintensity.intensity.tests.factories import LandModelFactory
from tcintensity.storms.tests.factories import LandSegmentFactory


class TestLandApply:
    def test_starts_at_entry_intensity(self):
        """At t = 0 the storm still has its entry intensity."""
        assert land_apply(LandModelFactory(), 80.0, 0) == pytest.approx(80.0)

    def test_decays_toward_background(self):
        """Intensity falls monotonically toward v_b."""
        model = LandModelFactory()
        values = land_apply(model, 100.0, np.arange(200))
        assert np.all(np.diff(values) < 0)
        assert values[-1] == pytest.approx(model.v_b, abs=1e-2)

    def test_known_value(self):
        """One step of decay from 100 kt."""
        expected = 18.82 + (100.0 - 18.82) * np.exp(-0.049)
        assert land_apply(LandModelFactory(), 100.0, 1) == pytest.approx(expected)

    def test_known_value_after_a_day(self):
        """Four steps from 100 kt land at about 85.55 kt."""
        value = land_apply(LandModelFactory(), 100.0, 4)
        assert value == pytest.approx(18.82 + 81.18 * np.exp(-0.196), abs=1e-9)
        assert value == pytest.approx(85.55, abs=5e-3)

    def test_decay_composes(self):
        """Decaying for a then b steps equals decaying for a + b steps."""
        model = LandModelFactory()
        for v0, a, b in ((100.0, 3, 5), (60.0, 1, 1), (140.0, 0, 7)):
            assert land_apply(model, land_apply(model, v0, a), b) == pytest.approx(land_apply(model, v0, a + b))

    def test_weak_entry_kept(self):
        """Storms entering at or below the background keep their intensity."""
        np.testing.assert_allclose(land_apply(LandModelFactory(), 15.0, np.arange(5)), 15.0)

    def test_reduction_scales_entry(self):
        """The reduction factor scales v0 before decay."""
        model = LandModelFactory(reduction=0.9)
        assert land_apply(model, 100.0, 0) == pytest.approx(90.0)

    def test_negative_time_rejected(self):
        """t must be non-negative."""
        with pytest.raises(ValidationError):
            land_apply(LandModelFactory(), 80.0, -1)


class TestLandModel:
    def test_invalid_parameters(self):
        """alpha must be positive and v_b non-negative."""
        with pytest.raises(ValidationError):
            LandModel(alpha=0.0, v_b=10.0)
        with pytest.raises(ValidationError):
            LandModel(alpha=0.1, v_b=-1.0)

    def test_dict_round_trip_without_rmse(self):
        """A missing rmse is written as null and read back as NaN."""
        data = LandModel(alpha=0.1, v_b=10.0).to_dict()
        assert data["rmse"] is None
        assert np.isnan(LandModel.from_dict(data).rmse)


class TestLandFit:
    def test_recovers_parameters(self):
        """Segments generated by a model give that model back."""
        truth = LandModelFactory()
        segments = [
            LandSegmentFactory(v0=v0, intensities=land_apply(truth, v0, np.arange(length)))
            for v0, length in [(95.0, 9), (60.0, 5), (120.0, 12)]
        ]
        model = land_fit(segments)
        assert model.alpha == pytest.approx(truth.alpha, rel=1e-4)
        assert model.v_b == pytest.approx(truth.v_b, rel=1e-4)
        assert model.n_segments == 3  # noqa: PLR2004
        assert all(row["rmse"] < 1e-6 for row in segment_residuals(model, segments))  # noqa: PLR2004

    def test_no_segments(self):
        """Fitting needs at least one segment."""
        with pytest.raises(FitError):
            land_fit([])
