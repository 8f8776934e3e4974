from __future__ import annotations

from typing import TYPE_CHECKING
from typing import Any

from tcintensity.core.commands import IntensityCommand
from tcintensity.core.outputs import write_manifest
from tcintensity.storms.ingest import IngestConfig
from tcintensity.storms.synthetic import SyntheticSpec
from tcintensity.storms.synthetic import generate_storms
from tcintensity.storms.synthetic import write_tracks

if TYPE_CHECKING:
    from argparse import ArgumentParser

    from tcintensity.core.runconfig import RunConfig

TRACKS_FILE = "tracks.csv"


class Command(IntensityCommand):
    help = "Generate a synthetic tracks CSV from a known intensity process"

    def add_command_arguments(self, parser: ArgumentParser) -> None:
        parser.add_argument("--n-storms", type=int, default=20, help="Number of storms (default: 20)")
        parser.add_argument(
            "--land-probability",
            type=float,
            default=0.5,
            help="Probability that a storm crosses land (default: 0.5)",
        )
        parser.add_argument("--bg-fraction", type=float, default=None, help="Background wind fraction")

    def run(self, config: RunConfig, /, **options: Any) -> None:
        spec = SyntheticSpec(n_storms=options["n_storms"], land_probability=options["land_probability"])
        ingest_config = IngestConfig.from_settings(bg_fraction=config.bg_fraction)
        storms = generate_storms(spec, ingest_config, config.seed)

        config.out.mkdir(parents=True, exist_ok=True)
        write_tracks(storms, config.out / TRACKS_FILE)
        write_manifest(
            config.out,
            command="generate_tracks",
            config={**config.echo(), "n_storms": spec.n_storms, "land_probability": spec.land_probability},
            files=[TRACKS_FILE],
            seeds={"master_seed": config.seed},
        )
        points = sum(len(storm) for storm in storms)
        self.success(f"Wrote {len(storms)} storms ({points} points) to {config.out / TRACKS_FILE}")
