"""Plain-text fit reports with coefficient tables, one row per group or state."""

from __future__ import annotations

from typing import TYPE_CHECKING
from typing import Any

from tcintensity.intensity.hmm import MehimModel
from tcintensity.intensity.linear import OlsModel
from tcintensity.intensity.mixture import FmrModel

if TYPE_CHECKING:
    from collections.abc import Sequence

    from tcintensity.intensity.bundle import ModelBundle
    from tcintensity.intensity.stats import LinearFit
    from tcintensity.intensity.stats import MnlFit

DISPLAY_NAMES = {"dv_p": "DV_p", "v": "V", "mpi": "MPI", "shr": "SHR", "rh": "RH", "ocn": "OCN"}
LABEL_WIDTH = 18
CELL_WIDTH = 10


def _row(label: str, cells: Sequence[str]) -> str:
    return f"{label:<{LABEL_WIDTH}}" + "".join(f"{cell:>{CELL_WIDTH}}" for cell in cells)


def _number(value: float) -> str:
    return f"{value:.3f}"


def table(title: str, columns: Sequence[str], rows: Sequence[tuple[str, Sequence[float]]]) -> str:
    lines = [title, _row("", columns)]
    lines += [_row(label, [_number(v) for v in values]) for label, values in rows]
    return "\n".join(lines)


def response_table(title: str, names: Sequence[str], fits: Sequence[tuple[str, LinearFit]]) -> str:
    columns = ["Intercept", *(DISPLAY_NAMES.get(n, n) for n in names), "sigma"]
    rows = [(label, [fit.intercept, *fit.coefficients, fit.sigma]) for label, fit in fits]
    return table(title, columns, rows)


def logit_table(title: str, names: Sequence[str], label: str, fit: MnlFit) -> str:
    columns = ["Intercept", *(DISPLAY_NAMES.get(n, n) for n in names)]
    rows = [(f"{label} {r + 1}", [fit.intercepts[r], *fit.coefficients[r]]) for r in range(fit.k)]
    return table(title, columns, rows)


def _header(bundle: ModelBundle) -> list[str]:
    lines = [f"Model: {bundle.model_type}"]
    if bundle.model is not None:
        metadata = bundle.model.metadata
        lines.append(f"Covariate set: {bundle.model.covariate_set}")
        for key in ("n", "n_obs", "n_sequences", "log_likelihood", "iterations", "converged", "seed", "best_restart"):
            if key in metadata:
                value = metadata[key]
                lines.append(f"{key}: {value:.4f}" if isinstance(value, float) else f"{key}: {value}")
    return lines


def _scenario_lines(scenarios: Sequence[dict[str, Any]]) -> list[str]:
    lines = ["", "Scenarios (95th percentile favorable / median / unfavorable for larger DV)"]
    for scenario in scenarios:
        lines.append(f"  {scenario['scenario']}:")
        if "group_probabilities" in scenario:
            probs = ", ".join(_number(p) for p in scenario["group_probabilities"])
            lines.append(f"    group probabilities: {probs}")
        for i, row in enumerate(scenario.get("transition_matrix", []), start=1):
            lines.append(f"    from state {i}: " + ", ".join(_number(p) for p in row))
    return lines


def fit_report(
    bundle: ModelBundle,
    scenarios: Sequence[dict[str, Any]] | None = None,
    land_check: Sequence[dict[str, Any]] | None = None,
) -> str:
    lines = _header(bundle)
    model = bundle.model
    if isinstance(model, OlsModel):
        lines += ["", response_table("Coefficients of OLS model", model.covariate_names, [("OLS", model.fit)])]
    elif isinstance(model, FmrModel):
        fits = [(f"Group {r + 1}", c) for r, c in enumerate(model.components)]
        lines += ["", response_table("Coefficients of FMR response model", model.covariate_names, fits)]
        lines += ["Weights: " + ", ".join(_number(w) for w in model.weights)]
        if model.classifier is not None:
            lines += [
                "",
                logit_table(
                    "Coefficients of FMR classification model",
                    model.covariate_names,
                    "Group",
                    model.classifier,
                ),
            ]
    elif isinstance(model, MehimModel):
        fits = [(f"State {i + 1}", e) for i, e in enumerate(model.emissions)]
        lines += ["", response_table("Coefficients of MeHiM response model", model.covariate_names, fits)]
        for i, block in enumerate(model.transitions):
            title = f"Coefficients of MeHiM transition model, from State {i + 1}"
            lines += ["", logit_table(title, model.covariate_names, "To State", block)]
        initial_names = [model.covariate_names[c] for c in model.initial_columns]
        lines += ["", logit_table("Coefficients of MeHiM initial-state model", initial_names, "State", model.initial)]
    if scenarios:
        lines += _scenario_lines(scenarios)
    if bundle.land is not None:
        land = bundle.land
        lines += [
            "",
            "Land decay model",
            f"alpha: {land.alpha:.6f} per 6 h",
            f"v_b: {land.v_b:.4f} kt",
            f"reduction: {land.reduction:.3f}",
            f"n_segments: {land.n_segments}",
            f"rmse: {land.rmse:.4f} kt",
        ]
    if land_check:
        lines += ["", _row("Segment", ["start", "v0", "length", "rmse"])]
        lines += [
            _row(
                str(row["storm_id"]),
                [str(row["start_index"]), _number(row["v0"]), str(len(row["observed"])), _number(row["rmse"])],
            )
            for row in land_check
        ]
    return "\n".join(lines) + "\n"
