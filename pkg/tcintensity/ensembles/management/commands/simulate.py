from __future__ import annotations

import logging
from typing import TYPE_CHECKING
from typing import Any

from tcintensity.core.commands import IntensityCommand
from tcintensity.core.exceptions import ValidationError
from tcintensity.core.outputs import write_manifest
from tcintensity.core.runconfig import parse_ri_correct
from tcintensity.ensembles.io import write_ensemble
from tcintensity.ensembles.simulate import RI_CORRECTION_STEPS
from tcintensity.ensembles.simulate import SimConfig
from tcintensity.ensembles.simulate import ri_correct_schedule
from tcintensity.ensembles.simulate import simulate_ensemble
from tcintensity.intensity.bundle import load_bundle
from tcintensity.storms.ingest import ParseOptions
from tcintensity.storms.ingest import parse_tracks

if TYPE_CHECKING:
    import datetime
    from argparse import ArgumentParser

    from tcintensity.core.runconfig import RunConfig
    from tcintensity.storms.domain import StormRecord
    from tcintensity.storms.ingest import IngestConfig

logger = logging.getLogger(__name__)

MIN_TRACK_POINTS = 3


def correction_windows(
    mode: str | tuple[datetime.datetime, ...],
    storm: StormRecord,
    ingest_config: IngestConfig,
) -> tuple[tuple[datetime.datetime, int], ...]:
    if mode == "off":
        return ()
    if mode == "observed":
        return tuple(ri_correct_schedule(storm, ingest_config))
    return tuple((time, RI_CORRECTION_STEPS) for time in mode)


class Command(IntensityCommand):
    help = "Simulate intensity ensembles along observed tracks"

    def add_command_arguments(self, parser: ArgumentParser) -> None:
        parser.add_argument("--model", type=str, default=None, help="OLS, FMR or MeHiM model JSON")
        parser.add_argument("--land", type=str, default=None, help="Land decay model JSON")
        parser.add_argument("--tracks", type=str, default=None, help="Tracks CSV")
        parser.add_argument("--n", type=int, default=None, help="Realizations per storm")
        parser.add_argument("--workers", type=int, default=None, help="Threads for realizations")
        parser.add_argument(
            "--ri-correct",
            type=str,
            default=None,
            help="'off', 'observed', or comma-separated ISO times of RI onsets",
        )

    def run(self, config: RunConfig, /, **options: Any) -> None:
        config.require("model", "tracks")
        bundle = load_bundle(config.model)
        if bundle.model is None:
            msg = f"{config.model} holds a land decay model; simulate needs an intensity model"
            raise ValidationError(msg)
        land_model = bundle.land
        model_hashes = {"model": bundle.hash}
        if config.land is not None:
            config.require("land")
            land_bundle = load_bundle(config.land)
            land_model = land_bundle.land
            model_hashes["land"] = land_bundle.hash

        ingest_config = bundle.ingest_config()
        mode = parse_ri_correct(config.ri_correct)
        storms = parse_tracks(config.tracks, ParseOptions(require_ocean=ingest_config.uses_ocn))
        config.out.mkdir(parents=True, exist_ok=True)

        entries = []
        for storm in storms:
            if len(storm) < MIN_TRACK_POINTS:
                logger.warning("Skipping storm %s: %d point(s) on its track", storm.storm_id, len(storm))
                continue
            sim_config = SimConfig.from_settings(
                n_realizations=config.n,
                master_seed=config.seed,
                stop_threshold=config.stop_threshold,
                workers=config.workers,
                ri_corrections=correction_windows(mode, storm, ingest_config),
            )
            result = simulate_ensemble(
                bundle.model,
                storm,
                land_model,
                sim_config,
                ingest_config,
                model_id=bundle.model_id,
                model_hash=bundle.hash,
            )
            path = write_ensemble(result, config.out)
            entries.append(
                {
                    "storm_id": storm.storm_id,
                    "file": path.name,
                    "ri_corrections": sim_config.echo()["ri_corrections"],
                },
            )
            self.progress(f"{storm.storm_id}: {len(result)} realization(s) -> {path.name}")

        write_manifest(
            config.out,
            command="simulate",
            config=config.echo(),
            files=[entry["file"] for entry in entries],
            model_hashes=model_hashes,
            seeds={"master_seed": config.seed, "realization_seed": "sha256(master_seed:storm_id:index)[:8]"},
            extra={"model_id": bundle.model_id, "storms": entries},
        )
        self.success(f"Simulated {len(entries)} storm(s) with {bundle.model_id} into {config.out}")
