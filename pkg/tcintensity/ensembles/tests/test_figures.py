import json

import numpy as np

from tcintensity.ensembles.evaluate import EvaluationSpec
from tcintensity.ensembles.evaluate import evaluate_series
from tcintensity.ensembles.evaluate import storm_envelope
from tcintensity.ensembles.figures import envelope_figure
from tcintensity.ensembles.figures import metric_figure
from tcintensity.ensembles.figures import write_figure
from tcintensity.ensembles.tests.factories import IntensitySeriesFactory
from tcintensity.ensembles.tests.factories import ensemble_result


def metric_tables():
    rng = np.random.default_rng(5)
    series = [IntensitySeriesFactory(v=30.0 + np.cumsum(rng.uniform(-5, 15, size=8))) for _ in range(6)]
    return {table.metric: table for table in evaluate_series(series, EvaluationSpec())}


class TestMetricFigure:
    def test_plotted_metrics(self):
        tables = metric_tables()
        for metric in ("dv-6h", "dv-24h", "lmi-density", "landfall", "spatial-p90"):
            assert metric_figure(tables[metric], metric) is not None, metric

    def test_tables_without_figure(self):
        tables = metric_tables()
        assert metric_figure(tables["lmi"], "lmi") is None
        assert metric_figure(tables["landfall-events"], "events") is None

    def test_histogram_bars(self):
        fig = metric_figure(metric_tables()["dv-6h"], "6-h changes")
        assert fig.data[0].type == "bar"
        assert fig.layout.title.text == "6-h changes"


class TestWriteFigure:
    def test_json(self, tmp_path):
        """Figures are written as plotly JSON."""
        path = tmp_path / "dv-6h.plotly.json"
        write_figure(metric_figure(metric_tables()["dv-6h"], "6-h changes"), path)
        document = json.loads(path.read_text())
        assert document["data"][0]["type"] == "bar"
        assert "layout" in document

    def test_envelope(self, tmp_path):
        frame = storm_envelope(ensemble_result([[30, 40, 50, 60]] * 10))
        fig = envelope_figure(frame, "E001", observed=frame["mean"])
        assert [trace.name for trace in fig.data][-1] == "Observed"
        write_figure(fig, tmp_path / "envelope.plotly.json")
        assert (tmp_path / "envelope.plotly.json").exists()
