import datetime
import json
from pathlib import Path

import pytest

from tcintensity.core.exceptions import SchemaError
from tcintensity.core.exceptions import ValidationError
from tcintensity.core.runconfig import RunConfig
from tcintensity.core.runconfig import parse_ri_correct


class TestBuild:
    def test_settings_defaults(self, settings):
        settings.TC_N_REALIZATIONS = 12
        config = RunConfig.build()
        assert config.n == 12  # noqa: PLR2004
        assert config.out == Path("output")

    def test_precedence(self, settings, tmp_path):
        """Flags override the config file, which overrides settings."""
        settings.TC_SEED = 7
        settings.TC_N_REALIZATIONS = 5
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"seed": 11, "n": 3, "k": 2}))
        config = RunConfig.build(path, seed=13, k=None)
        assert config.seed == 13  # noqa: PLR2004
        assert config.n == 3  # noqa: PLR2004
        assert config.k == 2  # noqa: PLR2004

    def test_paths_and_percentiles(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"tracks": "data/tracks.csv", "percentiles": [50, 95]}))
        config = RunConfig.build(path)
        assert config.tracks == Path("data/tracks.csv")
        assert config.percentiles == (50.0, 95.0)

    def test_unknown_key(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"temperature": 300}))
        with pytest.raises(ValidationError, match="temperature"):
            RunConfig.build(path)

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text("{seed: 1")
        with pytest.raises(SchemaError, match="invalid JSON"):
            RunConfig.build(path)

    def test_not_an_object(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text("[1, 2]")
        with pytest.raises(SchemaError, match="JSON object"):
            RunConfig.build(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ValidationError, match="not found"):
            RunConfig.build(tmp_path / "run.json")

    def test_invalid_values(self):
        with pytest.raises(ValidationError, match="n must be"):
            RunConfig(n=0)
        with pytest.raises(ValidationError, match="k must be"):
            RunConfig(k=0)
        with pytest.raises(ValidationError, match="grid"):
            RunConfig(grid=0.0)


class TestRequire:
    def test_missing_flag(self):
        with pytest.raises(ValidationError, match="--tracks is required"):
            RunConfig().require("tracks")

    def test_missing_path(self, tmp_path):
        with pytest.raises(ValidationError, match="model not found"):
            RunConfig(model=tmp_path / "model.json").require("model")

    def test_present(self, tmp_path):
        path = tmp_path / "tracks.csv"
        path.write_text("")
        RunConfig(tracks=path).require("tracks")


class TestEcho:
    def test_json_ready(self, tmp_path):
        """The echo goes straight into manifests."""
        document = RunConfig(tracks=tmp_path / "tracks.csv").echo()
        assert document["tracks"] == str(tmp_path / "tracks.csv")
        assert document["model"] is None
        assert document["percentiles"] == [75.0, 90.0]
        json.dumps(document)


class TestParseRiCorrect:
    def test_modes(self):
        assert parse_ri_correct("off") == "off"
        assert parse_ri_correct("observed") == "observed"

    def test_times(self):
        """Naive times are read as UTC."""
        times = parse_ri_correct("2004-09-03T00:00, 2004-09-05T12:00:00+00:00")
        assert times == (
            datetime.datetime(2004, 9, 3, tzinfo=datetime.timezone.utc),
            datetime.datetime(2004, 9, 5, 12, tzinfo=datetime.timezone.utc),
        )

    def test_invalid(self):
        with pytest.raises(ValidationError, match="--ri-correct"):
            parse_ri_correct("sometimes")

    def test_checked_on_build(self):
        with pytest.raises(ValidationError, match="--ri-correct"):
            RunConfig(ri_correct="2004-13-01")
