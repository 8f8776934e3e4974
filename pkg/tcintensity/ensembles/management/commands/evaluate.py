from __future__ import annotations

from typing import TYPE_CHECKING
from typing import Any

from tcintensity.core.commands import IntensityCommand
from tcintensity.core.exceptions import ValidationError
from tcintensity.core.outputs import atomic_write_json
from tcintensity.core.outputs import atomic_write_text
from tcintensity.core.outputs import metric_filename
from tcintensity.core.outputs import write_manifest
from tcintensity.ensembles.evaluate import EvaluationSpec
from tcintensity.ensembles.evaluate import HistogramSpec
from tcintensity.ensembles.evaluate import MetricTable
from tcintensity.ensembles.evaluate import ensemble_series
from tcintensity.ensembles.evaluate import evaluate_series
from tcintensity.ensembles.evaluate import load_regions
from tcintensity.ensembles.evaluate import observed_series
from tcintensity.ensembles.evaluate import storm_envelope
from tcintensity.ensembles.figures import envelope_figure
from tcintensity.ensembles.figures import metric_figure
from tcintensity.ensembles.figures import write_figure
from tcintensity.ensembles.io import FLOAT_FORMAT
from tcintensity.ensembles.io import read_ensembles
from tcintensity.storms.ingest import IngestConfig
from tcintensity.storms.ingest import ParseOptions
from tcintensity.storms.ingest import derive_storm
from tcintensity.storms.ingest import parse_tracks

if TYPE_CHECKING:
    from argparse import ArgumentParser
    from pathlib import Path

    import plotly.graph_objects as go

    from tcintensity.core.runconfig import RunConfig

OBSERVED_SOURCE = "observed"
OBSERVED_MODEL = "best-track"
ENSEMBLE_SOURCE = "ensemble"
INDEX_FILE = "index.json"
FIGURE_SUFFIX = ".plotly.json"


class Command(IntensityCommand):
    help = "Compute intensity metrics for observed tracks and simulated ensembles"

    def add_command_arguments(self, parser: ArgumentParser) -> None:
        parser.add_argument("--tracks", type=str, default=None, help="Observed tracks CSV")
        parser.add_argument("--ensembles", type=str, default=None, help="Directory written by simulate")
        parser.add_argument("--regions", type=str, default=None, help="Landfall regions JSON")
        parser.add_argument("--grid", type=float, default=None, help="Grid size in degrees (default: 2)")
        parser.add_argument("--bg-fraction", type=float, default=None, help="Background wind fraction")

    def run(self, config: RunConfig, /, **options: Any) -> None:
        if config.tracks is None and config.ensembles is None:
            msg = "evaluate needs --tracks, --ensembles or both"
            raise ValidationError(msg)
        config.require(*(name for name in ("tracks", "ensembles", "regions") if getattr(config, name) is not None))
        spec = EvaluationSpec(
            six_hour=HistogramSpec("6h", config.bin_6h),
            twenty_four_hour=HistogramSpec("24h", config.bin_24h),
            grid=config.grid,
            percentiles=config.percentiles,
            regions=tuple(load_regions(config.regions)) if config.regions is not None else (),
        )
        config.out.mkdir(parents=True, exist_ok=True)
        self.index: list[dict[str, Any]] = []

        observed = {}
        if config.tracks is not None:
            ingest_config = IngestConfig.from_settings(bg_fraction=config.bg_fraction)
            storms = [
                derive_storm(storm, ingest_config)
                for storm in parse_tracks(config.tracks, ParseOptions(require_ocean=False))
            ]
            observed = {storm.storm_id: storm for storm in storms}
            for table in evaluate_series(observed_series(storms), spec):
                self._write(config.out, table, OBSERVED_SOURCE, OBSERVED_MODEL)
            self.progress(f"Evaluated {len(storms)} observed storm(s)")

        model_hashes = {}
        if config.ensembles is not None:
            results = read_ensembles(config.ensembles)
            if not results:
                msg = f"{config.ensembles} lists no ensembles"
                raise ValidationError(msg)
            model_id = results[0].model_id
            model_hashes["model"] = results[0].model_hash
            series = [s for result in results for s in ensemble_series(result)]
            for table in evaluate_series(series, spec):
                self._write(config.out, table, ENSEMBLE_SOURCE, model_id)
            for result in results:
                frame = storm_envelope(result)
                table = MetricTable(f"envelope-{result.storm_id}", frame, {"n_realizations": len(result)})
                storm = observed.get(result.storm_id)
                figure = envelope_figure(
                    frame,
                    f"Intensity envelope of {result.storm_id}",
                    observed=None if storm is None else storm.v,
                )
                self._write(config.out, table, ENSEMBLE_SOURCE, model_id, figure=figure)
            self.progress(f"Evaluated {len(results)} ensemble(s) of {model_id}")

        atomic_write_json(config.out / INDEX_FILE, self.index)
        files = [INDEX_FILE] + [entry["file"] for entry in self.index]
        files += [entry["figure"] for entry in self.index if entry["figure"]]
        write_manifest(
            config.out,
            command="evaluate",
            config=config.echo(),
            files=files,
            model_hashes=model_hashes,
        )
        self.success(f"Wrote {len(self.index)} metric table(s) to {config.out}")

    def _write(  # noqa: PLR0913
        self,
        out: Path,
        table: MetricTable,
        source: str,
        model: str,
        figure: go.Figure | None = None,
    ) -> None:
        name = metric_filename(table.metric, source, model)
        atomic_write_text(out / name, table.frame.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n"))
        figure = figure if figure is not None else metric_figure(table, f"{table.metric} ({source}, {model})")
        figure_name = None
        if figure is not None:
            figure_name = metric_filename(table.metric, source, model, suffix=FIGURE_SUFFIX)
            write_figure(figure, out / figure_name)
        self.index.append(
            {
                "metric": table.metric,
                "source": source,
                "model": model,
                "file": name,
                "figure": figure_name,
                "meta": table.meta,
            },
        )
