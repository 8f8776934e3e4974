from __future__ import annotations

import json
from typing import TYPE_CHECKING
from typing import Any

from tcintensity.core.commands import IntensityCommand
from tcintensity.storms.ingest import IngestConfig
from tcintensity.storms.ingest import load_dataset

if TYPE_CHECKING:
    from argparse import ArgumentParser

    from tcintensity.core.runconfig import RunConfig


class Command(IntensityCommand):
    help = "Validate a tracks CSV and print the dataset summary as JSON"

    def add_command_arguments(self, parser: ArgumentParser) -> None:
        parser.add_argument("--tracks", type=str, default=None, help="Tracks CSV")
        parser.add_argument("--covariate-set", choices=["full", "no_ocn"], default=None)
        parser.add_argument("--bg-fraction", type=float, default=None, help="Background wind fraction")
        parser.add_argument("--min-seq-len", type=int, default=None, help="Minimum responses per ocean sequence")

    def run(self, config: RunConfig, /, **options: Any) -> None:
        config.require("tracks")
        ingest_config = IngestConfig.from_settings(
            bg_fraction=config.bg_fraction,
            min_ocean_len=config.min_seq_len,
            covariate_set=config.covariate_set,
        )
        dataset = load_dataset(config.tracks, ingest_config)
        self.stdout.write(json.dumps(dataset.summary(), indent=2, sort_keys=True))
