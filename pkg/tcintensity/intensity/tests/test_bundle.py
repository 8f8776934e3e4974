import json

import numpy as np
import pytest

from tcintensity.core.exceptions import SchemaError
from tcintensity.core.exceptions import ValidationError
from tcintensity.intensity.bundle import ModelBundle
from tcintensity.intensity.bundle import bundle_from_document
from tcintensity.intensity.bundle import load_bundle
from tcintensity.intensity.bundle import save_bundle
from tcintensity.intensity.hmm import MehimModel
from tcintensity.intensity.hmm import sequence_loglik
from tcintensity.intensity.linear import OlsModel
from tcintensity.intensity.mixture import FmrModel
from tcintensity.intensity.tests.factories import FmrModelFactory
from tcintensity.intensity.tests.factories import LandModelFactory
from tcintensity.intensity.tests.factories import MehimModelFactory
from tcintensity.intensity.tests.factories import OlsModelFactory
from tcintensity.intensity.tests.factories import linear_fit
from tcintensity.intensity.tests.factories import scaler_for
from tcintensity.intensity.tests.factories import standardized_sequence
from tcintensity.storms.ingest import IngestConfig


def saved(tmp_path, bundle, name="model.json"):
    path = tmp_path / name
    save_bundle(path, bundle)
    return path


class TestSaveLoad:
    def test_ols(self, tmp_path):
        """An OLS model file reads back with the same parameters."""
        model = OlsModelFactory()
        loaded = load_bundle(saved(tmp_path, ModelBundle(model=model)))
        assert isinstance(loaded.model, OlsModel)
        np.testing.assert_allclose(loaded.model.fit.coefficients, model.fit.coefficients)
        assert loaded.model.fit.sigma == model.fit.sigma

    def test_fmr(self, tmp_path):
        """FMR weights, components and classifier survive a save."""
        model = FmrModelFactory()
        loaded = load_bundle(saved(tmp_path, ModelBundle(model=model))).model
        assert isinstance(loaded, FmrModel)
        np.testing.assert_allclose(loaded.weights, model.weights)
        np.testing.assert_allclose(loaded.classifier.coefficients, model.classifier.coefficients)

    def test_mehim_likelihood_unchanged(self, tmp_path, rng):
        """A reloaded MeHiM model scores a sequence identically."""
        model = MehimModelFactory()
        loaded = load_bundle(saved(tmp_path, ModelBundle(model=model))).model
        assert isinstance(loaded, MehimModel)
        sequence = standardized_sequence(rng, 10)
        assert sequence_loglik(loaded, sequence) == sequence_loglik(model, sequence)
        assert loaded.initial_columns == (2, 3, 4)

    def test_land_only(self, tmp_path):
        """A land model stands alone as model_type land."""
        loaded = load_bundle(saved(tmp_path, ModelBundle(land=LandModelFactory())))
        assert loaded.model_type == "land"
        assert loaded.model is None
        assert loaded.land.alpha == pytest.approx(0.049)

    def test_embedded_land(self, tmp_path):
        """An intensity model may carry its land model."""
        loaded = load_bundle(saved(tmp_path, ModelBundle(model=OlsModelFactory(), land=LandModelFactory())))
        assert loaded.model_type == "ols"
        assert loaded.land.v_b == pytest.approx(18.82)

    def test_hash_is_stable(self, tmp_path):
        """Saving twice gives the same bytes and the same hash."""
        bundle = ModelBundle(model=MehimModelFactory())
        first, second = saved(tmp_path, bundle, "a.json"), saved(tmp_path, bundle, "b.json")
        assert first.read_bytes() == second.read_bytes()
        assert load_bundle(first).hash == bundle.hash
        assert bundle.model_id.startswith("mehim-")

    def test_ingest_config_from_conventions(self, tmp_path):
        """The ingest settings a model was fitted under travel with it."""
        conventions = IngestConfig(bg_fraction=0.4, min_ocean_len=8, covariate_set="no_ocn").conventions()
        model = OlsModelFactory(covariate_set="no_ocn", fit=linear_fit(p=5), scaler=scaler_for("no_ocn"))
        bundle = ModelBundle(model=model, conventions=conventions)
        config = load_bundle(saved(tmp_path, bundle)).ingest_config()
        assert config.bg_fraction == 0.4  # noqa: PLR2004
        assert config.min_ocean_len == 8  # noqa: PLR2004
        assert config.covariate_set == "no_ocn"

    def test_model_without_scaler_rejected(self, tmp_path):
        """Intensity models are only written with their scaler."""
        with pytest.raises(ValidationError, match="scaler"):
            save_bundle(tmp_path / "model.json", ModelBundle(model=OlsModelFactory(scaler=None)))


class TestSchemaErrors:
    @pytest.fixture
    def document(self):
        return ModelBundle(model=MehimModelFactory()).to_document()

    def test_missing_file(self, tmp_path):
        """A missing model file is a validation error."""
        with pytest.raises(ValidationError, match="not found"):
            load_bundle(tmp_path / "absent.json")

    def test_invalid_json(self, tmp_path):
        """Unparseable JSON is a schema error."""
        path = tmp_path / "model.json"
        path.write_text("{ not json")
        with pytest.raises(SchemaError, match="invalid JSON"):
            load_bundle(path)

    def test_schema_version(self, document):
        """Unknown schema versions are refused."""
        document["schema_version"] = 99
        with pytest.raises(SchemaError, match="schema_version"):
            bundle_from_document(document)

    def test_model_type(self, document):
        """Unknown model types are refused."""
        document["model_type"] = "neural"
        with pytest.raises(SchemaError, match="neural"):
            bundle_from_document(document)

    def test_missing_key(self, document):
        """A missing parameter block is named."""
        del document["parameters"]["initial_block"]
        with pytest.raises(SchemaError, match="initial_block"):
            bundle_from_document(document)

    def test_tampered_scaler(self, document):
        """A scaler that does not match its hash is refused."""
        document["scaler"]["response_sd"] = 2.0
        with pytest.raises(SchemaError, match="scaler_hash"):
            bundle_from_document(document)

    def test_nonzero_baseline(self, document):
        """The last row of every logit block is the zero baseline."""
        document["parameters"]["transition_blocks"][0]["rows"][-1]["intercept"] = 0.5
        with pytest.raises(SchemaError, match="baseline"):
            bundle_from_document(document)

    def test_wrong_coefficient_count(self, document):
        """Emission coefficients must match the covariate set."""
        document["parameters"]["emissions"][0]["coefficients"].append(0.0)
        with pytest.raises(SchemaError, match="coefficient"):
            bundle_from_document(document)

    def test_not_an_object(self, tmp_path):
        """The file must hold a JSON object."""
        path = tmp_path / "model.json"
        path.write_text(json.dumps([1, 2, 3]))
        with pytest.raises(SchemaError):
            load_bundle(path)
