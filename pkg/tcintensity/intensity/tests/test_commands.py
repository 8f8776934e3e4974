import json
from io import StringIO

import pandas as pd
import pytest
from django.core.management import call_command
from django.core.management.base import CommandError

from tcintensity.intensity.bundle import ModelBundle
from tcintensity.intensity.bundle import load_bundle
from tcintensity.intensity.bundle import save_bundle
from tcintensity.intensity.fitting import FitOptions
from tcintensity.intensity.fitting import fit_dataset
from tcintensity.intensity.hmm import MehimModel
from tcintensity.intensity.tests.factories import MehimModelFactory
from tcintensity.intensity.tests.factories import OlsModelFactory


def run(*args, **options):
    out, err = StringIO(), StringIO()
    call_command(*args, stdout=out, stderr=err, **options)
    return out.getvalue(), err.getvalue()


@pytest.fixture
def mehim_file(tmp_path, synthetic_dataset, ingest_config):
    """A hand-built two-state model over the synthetic scaler."""
    model = MehimModelFactory(scaler=synthetic_dataset.scaler)
    path = tmp_path / "model_mehim.json"
    save_bundle(path, ModelBundle(model=model, conventions=ingest_config.conventions()))
    return path


class TestFitDataset:
    def test_ols(self, synthetic_dataset):
        """OLS carries the dataset scaler and conventions."""
        result = fit_dataset(synthetic_dataset, "ols", FitOptions())
        assert result.bundle.model.scaler is synthetic_dataset.scaler
        assert result.bundle.conventions["dv_convention"] == "forward"
        assert "Coefficients of OLS model" in result.report

    def test_fmr_has_classifier_and_scenarios(self, synthetic_dataset):
        """FMR fits come with the classifier and the scenario table."""
        result = fit_dataset(synthetic_dataset, "fmr", FitOptions(k=2, restarts=2))
        assert result.bundle.model.classifier.k == 2  # noqa: PLR2004
        assert "Scenarios" in result.report

    def test_land(self, synthetic_dataset):
        """The land fit lists every segment it used."""
        result = fit_dataset(synthetic_dataset, "land", FitOptions())
        assert result.bundle.model_type == "land"
        assert result.bundle.land.n_segments == len(synthetic_dataset.land_segments)
        assert "Segment" in result.report


class TestFitCommand:
    def test_ols_outputs(self, tmp_path, tracks_file):
        """fit ols writes the model, the report and a manifest."""
        out_dir = tmp_path / "out"
        stdout, _ = run("fit", "ols", tracks=str(tracks_file), out=str(out_dir))
        bundle = load_bundle(out_dir / "model_ols.json")
        manifest = json.loads((out_dir / "manifest.json").read_text())
        assert manifest["command"] == "fit ols"
        assert manifest["model_id"] == bundle.model_id
        assert manifest["model_hashes"]["model"] == bundle.hash
        assert manifest["files"] == ["model_ols.json", "report_ols.txt"]
        assert (out_dir / "report_ols.txt").read_text().startswith("Model: ols")
        assert bundle.model_id in stdout

    def test_fmr_is_reproducible(self, tmp_path, tracks_file):
        """Two runs with one seed write identical model files."""
        for name in ("a", "b"):
            run("fit", "fmr", tracks=str(tracks_file), out=str(tmp_path / name), k=2, restarts=2, seed=3)
        assert (tmp_path / "a" / "model_fmr.json").read_bytes() == (tmp_path / "b" / "model_fmr.json").read_bytes()

    def test_land(self, tmp_path, tracks_file):
        """fit land writes a land model file."""
        run("fit", "land", tracks=str(tracks_file), out=str(tmp_path))
        assert load_bundle(tmp_path / "model_land.json").land.alpha > 0

    def test_quiet(self, tmp_path, tracks_file):
        """--quiet suppresses progress output."""
        stdout, _ = run("fit", "ols", tracks=str(tracks_file), out=str(tmp_path), quiet=True)
        assert stdout == ""

    def test_missing_tracks(self, tmp_path):
        """A missing tracks file exits with the validation code."""
        with pytest.raises(CommandError) as excinfo:
            run("fit", "ols", tracks=str(tmp_path / "absent.csv"), out=str(tmp_path))
        assert excinfo.value.returncode == 2  # noqa: PLR2004

    def test_unknown_config_key(self, tmp_path, tracks_file):
        """Unknown keys in --config are rejected."""
        config = tmp_path / "run.json"
        config.write_text(json.dumps({"tracks": str(tracks_file), "temperature": 30}))
        with pytest.raises(CommandError, match="temperature") as excinfo:
            run("fit", "ols", config=str(config), out=str(tmp_path))
        assert excinfo.value.returncode == 2  # noqa: PLR2004

    def test_too_few_observations_for_k(self, tmp_path, tracks_file):
        """Asking for more groups than the data supports is a validation error."""
        with pytest.raises(CommandError) as excinfo:
            run("fit", "fmr", tracks=str(tracks_file), out=str(tmp_path), k=100, restarts=1)
        assert excinfo.value.returncode == 2  # noqa: PLR2004

    @pytest.mark.slow
    def test_mehim(self, tmp_path, tracks_file):
        """fit mehim writes a MeHiM model seeded from FMR."""
        run("fit", "mehim", tracks=str(tracks_file), out=str(tmp_path), k=2, restarts=2)
        model = load_bundle(tmp_path / "model_mehim.json").model
        assert isinstance(model, MehimModel)
        assert model.metadata["initialized_from"] == "fmr"


class TestDecodeCommand:
    def test_writes_states(self, tmp_path, tracks_file, mehim_file, synthetic_dataset):
        """Every kept ocean observation gets a 1-based state."""
        out_dir = tmp_path / "decoded"
        run("decode", model=str(mehim_file), tracks=str(tracks_file), out=str(out_dir))
        frames = [pd.read_csv(path) for path in sorted(out_dir.glob("states_*.csv"))]
        states = pd.concat(frames, ignore_index=True)
        assert len(states) == synthetic_dataset.counts["n_observations"]
        assert set(states["state"]) <= {1, 2}
        assert list(states.columns) == ["storm_id", "sequence_start", "step_index", "time", "dv_kt", "state"]
        summary = pd.read_csv(out_dir / "state_summary.csv")
        assert summary["n"].sum() == len(states)

    def test_decoded_changes_are_in_knots(self, tmp_path, tracks_file, mehim_file, synthetic_dataset):
        """dv_kt is the unstandardized forward change."""
        out_dir = tmp_path / "decoded"
        run("decode", model=str(mehim_file), tracks=str(tracks_file), out=str(out_dir))
        first = synthetic_dataset.sequences[0]
        frame = pd.read_csv(out_dir / f"states_{first.storm_id.lower()}.csv")
        raw = synthetic_dataset.scaler.unstandardize_response(first.responses)
        assert frame["dv_kt"].iloc[0] == pytest.approx(raw[0], abs=1e-6)

    def test_rejects_other_models(self, tmp_path, tracks_file, synthetic_dataset):
        """Decoding needs a MeHiM model."""
        path = tmp_path / "model_ols.json"
        save_bundle(path, ModelBundle(model=OlsModelFactory(scaler=synthetic_dataset.scaler)))
        with pytest.raises(CommandError, match="MeHiM") as excinfo:
            run("decode", model=str(path), tracks=str(tracks_file), out=str(tmp_path))
        assert excinfo.value.returncode == 2  # noqa: PLR2004

    def test_no_sequences(self, tmp_path, tracks_file, mehim_file):
        """A minimum length no sequence reaches is a validation error."""
        with pytest.raises(CommandError, match="no ocean sequence"):
            run("decode", model=str(mehim_file), tracks=str(tracks_file), out=str(tmp_path), min_seq_len=500)
