from __future__ import annotations

from dataclasses import replace
from typing import TYPE_CHECKING
from typing import Any

import numpy as np
import pandas as pd
from slugify import slugify

from tcintensity.core.commands import IntensityCommand
from tcintensity.core.exceptions import ValidationError
from tcintensity.core.outputs import atomic_write_text
from tcintensity.core.outputs import write_manifest
from tcintensity.intensity.bundle import load_bundle
from tcintensity.intensity.hmm import MehimModel
from tcintensity.intensity.hmm import state_summary
from tcintensity.intensity.hmm import viterbi
from tcintensity.storms.ingest import ParseOptions
from tcintensity.storms.ingest import parse_tracks
from tcintensity.storms.ingest import segment_storm

if TYPE_CHECKING:
    from argparse import ArgumentParser

    from tcintensity.core.runconfig import RunConfig

SUMMARY_FILE = "state_summary.csv"


def states_filename(storm_id: str) -> str:
    return f"states_{slugify(storm_id, separator='-')}.csv"


class Command(IntensityCommand):
    help = "Write the most probable MeHiM state of every ocean observation"

    def add_command_arguments(self, parser: ArgumentParser) -> None:
        parser.add_argument("--model", type=str, default=None, help="MeHiM model JSON")
        parser.add_argument("--tracks", type=str, default=None, help="Tracks CSV")
        parser.add_argument("--min-seq-len", type=int, default=None, help="Minimum responses per ocean sequence")

    def run(self, config: RunConfig, /, **options: Any) -> None:
        config.require("model", "tracks")
        bundle = load_bundle(config.model)
        model = bundle.model
        if not isinstance(model, MehimModel):
            msg = f"decode needs a MeHiM model, {config.model} holds a {bundle.model_type} model"
            raise ValidationError(msg)
        if model.scaler is None:
            msg = f"{config.model} has no scaler"
            raise ValidationError(msg)

        ingest_config = bundle.ingest_config()
        if options["min_seq_len"] is not None:
            ingest_config = replace(ingest_config, min_ocean_len=options["min_seq_len"])
        storms = parse_tracks(config.tracks, ParseOptions(require_ocean=ingest_config.uses_ocn))
        config.out.mkdir(parents=True, exist_ok=True)

        files, paths, all_sequences = [], [], []
        for storm in storms:
            sequences = [model.scaler.standardize_sequence(s) for s in segment_storm(storm, ingest_config)[0]]
            if not sequences:
                continue
            frames = []
            for sequence in sequences:
                path = viterbi(model, sequence)
                paths.append(path)
                all_sequences.append(sequence)
                frames.append(
                    pd.DataFrame(
                        {
                            "storm_id": storm.storm_id,
                            "sequence_start": sequence.start_index,
                            "step_index": sequence.start_index + np.arange(len(sequence)),
                            "time": [storm.times[sequence.start_index + t].isoformat() for t in range(len(sequence))],
                            "dv_kt": model.scaler.unstandardize_response(sequence.responses),
                            "state": path.labels,
                        },
                    ),
                )
            name = states_filename(storm.storm_id)
            text = pd.concat(frames, ignore_index=True).to_csv(index=False, float_format="%.6f", lineterminator="\n")
            atomic_write_text(config.out / name, text)
            files.append(name)

        if not paths:
            msg = f"no ocean sequence in {config.tracks} has at least {ingest_config.min_ocean_len} responses"
            raise ValidationError(msg)
        summary = pd.DataFrame(state_summary(paths, all_sequences, model.k, model.scaler))
        atomic_write_text(
            config.out / SUMMARY_FILE,
            summary.to_csv(index=False, float_format="%.6f", lineterminator="\n"),
        )
        files.append(SUMMARY_FILE)
        write_manifest(
            config.out,
            command="decode",
            config=config.echo(),
            files=files,
            model_hashes={"model": bundle.hash},
            extra={"model_id": bundle.model_id},
        )
        for row in summary.itertuples():
            self.progress(
                f"State {row.state}: share {row.share:.3f}, mean dv {row.dv_mean:.2f} kt, sd {row.dv_sd:.2f} kt",
            )
        self.success(f"Decoded {len(paths)} sequence(s) from {len(files) - 1} storm(s) into {config.out}")
