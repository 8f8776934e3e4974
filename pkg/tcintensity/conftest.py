import numpy as np
import pytest

from tcintensity.intensity.tests.factories import scaler_for
from tcintensity.storms.ingest import IngestConfig
from tcintensity.storms.ingest import build_dataset
from tcintensity.storms.synthetic import SyntheticSpec
from tcintensity.storms.synthetic import generate_storms
from tcintensity.storms.synthetic import write_tracks


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240601)


@pytest.fixture
def ingest_config() -> IngestConfig:
    return IngestConfig()


@pytest.fixture
def synthetic_storms(ingest_config):
    """Twenty seeded storms from the default synthetic process."""
    return generate_storms(SyntheticSpec(n_storms=20), ingest_config, seed=11)


@pytest.fixture
def synthetic_dataset(synthetic_storms, ingest_config):
    return build_dataset(synthetic_storms, ingest_config)


@pytest.fixture
def tracks_file(tmp_path, synthetic_storms):
    """The synthetic storms written as a tracks CSV."""
    path = tmp_path / "tracks.csv"
    write_tracks(synthetic_storms, path)
    return path


@pytest.fixture
def unit_scaler():
    return scaler_for("full")
