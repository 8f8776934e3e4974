"""Plot-ready plotly figures for the evaluation tables, written as figure JSON."""

from __future__ import annotations

from typing import TYPE_CHECKING

import plotly.graph_objects as go
import plotly.io as pio

from tcintensity.core.outputs import atomic_write_text

if TYPE_CHECKING:
    from pathlib import Path

    import pandas as pd

    from tcintensity.ensembles.evaluate import MetricTable


def _layout(fig: go.Figure, title: str, xaxis: str, yaxis: str) -> go.Figure:
    fig.update_layout(
        title=title,
        xaxis_title=xaxis,
        yaxis_title=yaxis,
        hovermode="x unified",
        template="plotly_white",
        margin={"l": 50, "r": 20, "t": 50, "b": 50},
    )
    return fig


def histogram_figure(frame: pd.DataFrame, title: str) -> go.Figure:
    fig = go.Figure()
    fig.add_trace(
        go.Bar(
            x=(frame["bin_left"] + frame["bin_right"]) / 2,
            y=frame["density"],
            width=frame["bin_right"] - frame["bin_left"],
            name="density",
        ),
    )
    return _layout(fig, title, "Intensity change (kt)", "Density")


def lmi_figure(frame: pd.DataFrame, title: str) -> go.Figure:
    fig = go.Figure()
    for column, name in (("all", "All storms"), ("ri", "RI storms"), ("non_ri", "Non-RI storms")):
        if column in frame:
            fig.add_trace(go.Scatter(x=frame["v"], y=frame[column], mode="lines", name=name))
    return _layout(fig, title, "Lifetime maximum intensity (kt)", "Density")


def landfall_figure(frame: pd.DataFrame, title: str) -> go.Figure:
    fig = go.Figure()
    for region, rows in frame.groupby("region", sort=True):
        centers = (rows["bin_left"] + rows["bin_right"]) / 2
        fig.add_trace(
            go.Scatter(
                x=centers,
                y=rows["p50"],
                mode="lines+markers",
                name=str(region),
                error_y={
                    "type": "data",
                    "symmetric": False,
                    "array": rows["p85"] - rows["p50"],
                    "arrayminus": rows["p50"] - rows["p15"],
                },
            ),
        )
    return _layout(fig, title, "Landfall intensity (kt)", "Density")


def spatial_figure(frame: pd.DataFrame, title: str) -> go.Figure:
    pivot = frame.assign(
        lat=(frame["lat_min"] + frame["lat_max"]) / 2,
        lon=(frame["lon_min"] + frame["lon_max"]) / 2,
    ).pivot_table(index="lat", columns="lon", values="value", dropna=False)
    fig = go.Figure(
        go.Heatmap(z=pivot.to_numpy(), x=list(pivot.columns), y=list(pivot.index), colorbar={"title": "kt"}),
    )
    return _layout(fig, title, "Longitude", "Latitude")


def envelope_figure(frame: pd.DataFrame, title: str, observed: pd.Series | None = None) -> go.Figure:
    fig = go.Figure()
    fig.add_trace(go.Scatter(x=frame["time"], y=frame["p90"], mode="lines", line={"width": 0}, showlegend=False))
    fig.add_trace(
        go.Scatter(
            x=frame["time"],
            y=frame["p10"],
            mode="lines",
            line={"width": 0},
            fill="tonexty",
            name="10th-90th percentile",
        ),
    )
    fig.add_trace(go.Scatter(x=frame["time"], y=frame["p50"], mode="lines", name="Median"))
    fig.add_trace(go.Scatter(x=frame["time"], y=frame["mean"], mode="lines", line={"dash": "dot"}, name="Mean"))
    if observed is not None:
        fig.add_trace(go.Scatter(x=frame["time"][: len(observed)], y=observed, mode="lines", name="Observed"))
    return _layout(fig, title, "Time", "Intensity (kt)")


def metric_figure(table: MetricTable, title: str) -> go.Figure | None:
    """The figure for one metric table, or None for tables without a plot."""
    if table.metric.startswith("dv-"):
        return histogram_figure(table.frame, title)
    if table.metric == "lmi-density":
        return lmi_figure(table.frame, title)
    if table.metric == "landfall":
        return landfall_figure(table.frame, title)
    if table.metric.startswith("spatial-"):
        return spatial_figure(table.frame, title)
    return None


def write_figure(fig: go.Figure, path: Path) -> None:
    atomic_write_text(path, pio.to_json(fig, pretty=False, validate=True) + "\n")
