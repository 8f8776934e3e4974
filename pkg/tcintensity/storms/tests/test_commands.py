import json
from io import StringIO

import pytest
from django.core.management import call_command
from django.core.management.base import CommandError

from tcintensity.storms.ingest import parse_tracks


def run(*args, **options):
    out, err = StringIO(), StringIO()
    call_command(*args, stdout=out, stderr=err, **options)
    return out.getvalue(), err.getvalue()


class TestGenerateTracksCommand:
    def test_writes_tracks_and_manifest(self, tmp_path):
        """The tracks file parses and the manifest records the seed."""
        stdout, _ = run("generate_tracks", out=str(tmp_path), n_storms=4, seed=12)
        storms = parse_tracks(tmp_path / "tracks.csv")
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert len(storms) == 4  # noqa: PLR2004
        assert manifest["seeds"] == {"master_seed": 12}
        assert manifest["config"]["n_storms"] == 4  # noqa: PLR2004
        assert "Wrote 4 storms" in stdout

    def test_reproducible(self, tmp_path):
        """The same seed writes byte-identical files."""
        run("generate_tracks", out=str(tmp_path / "a"), n_storms=3, seed=1)
        run("generate_tracks", out=str(tmp_path / "b"), n_storms=3, seed=1)
        assert (tmp_path / "a" / "tracks.csv").read_bytes() == (tmp_path / "b" / "tracks.csv").read_bytes()


class TestInspectTracksCommand:
    def test_prints_summary(self, tracks_file):
        """The summary is JSON with counts and the scaler."""
        stdout, _ = run("inspect_tracks", tracks=str(tracks_file))
        summary = json.loads(stdout)
        assert summary["n_storms"] == 20  # noqa: PLR2004
        assert summary["scaler"]["covariate_names"][-1] == "ocn"

    def test_no_ocn(self, tracks_file):
        """--covariate-set no_ocn drops OCN from the scaler."""
        stdout, _ = run("inspect_tracks", tracks=str(tracks_file), covariate_set="no_ocn")
        assert json.loads(stdout)["scaler"]["covariate_names"][-1] == "rh"

    def test_tracks_required(self):
        """Without --tracks the command exits with code 2."""
        with pytest.raises(CommandError, match="--tracks is required") as excinfo:
            run("inspect_tracks")
        assert excinfo.value.returncode == 2  # noqa: PLR2004

    def test_parse_error_reports_line(self, tmp_path):
        """A malformed row is reported with its line number."""
        path = tmp_path / "bad.csv"
        path.write_text(
            "storm_id,time,lat,lon,wind_kt,over_land,mpi_kt,shr_ms,rh_pct,hm_m,gamma_k_per_100m\n"
            "A1,2004-09-01T00:00:00,15,-60,40,0,140,6,70,50,0.1\n"
            "A1,2004-09-01T06:00:00,15.5,-60,40,2,140,6,70,50,0.1\n",
        )
        err = StringIO()
        with pytest.raises(CommandError) as excinfo:
            call_command("inspect_tracks", tracks=str(path), stdout=StringIO(), stderr=err)
        assert excinfo.value.returncode == 2  # noqa: PLR2004
        assert "line 3" in err.getvalue()
